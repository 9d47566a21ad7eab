"""Closed-form matrix elements of the Feynman-Kac integrands between
exponential vectors, plus the creation-series operator form used for
cross-validation.

With S the complex action, K the field-displacement atom sum, and p_0, p_t
its adjoint embeddings (pullbacks) at the endpoint times, the two integrand
directions evaluate on exponential vectors to

    star form:    <eps(u), W*(S,K) eps(g)>
                  = exp(-conj(S) - |K|^2/2 - i<p_t, g> - i<u, p_0>
                        + <u, e^{-t omega} g>)
    kernel form:  <eps(u), W(S,K) eps(g)>
                  = exp(-S - |K|^2/2 + i<p_0, g> + i<u, p_t>
                        + <u, e^{-t omega} g>)

Both follow from the Weyl prescription and from the adjoint second
quantization of an isometry acting on exponential vectors by the adjoint on
the parameter, which the number-basis operator form validates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fock import NumberBasisSpace, _creation_sum, embed_expvec, f_series_operator
from .oneboson import (
    NelsonVector,
    OneBosonSpace,
    OneBosonVector,
    heat_apply,
    inner,
    nelson_norm_sq,
    pullback,
)

__all__ = [
    "IntegrandInputs",
    "w_star_matrix_element",
    "w_kernel_matrix_element",
    "gmm_operator",
    "gmm_matrix_element",
    "contraction_check",
]

CONTRACTION_SLACK = 1e-10


@dataclass(frozen=True)
class IntegrandInputs:
    """Assembled (t, S, K) triple feeding one integrand evaluation."""

    t: float
    S: complex
    K: NelsonVector
    space: OneBosonSpace

    def __post_init__(self):
        if self.t < 0:
            raise ValueError("the integrand needs t >= 0")
        if self.K.atom_count:
            tol = 1e-12 * max(1.0, self.t)
            if self.K.times.min() < -tol or self.K.times.max() > self.t + tol:
                raise ValueError("atom times must lie within [0, t]")

    def pullbacks(self):
        return pullback(0.0, self.K), pullback(self.t, self.K)

    def norm_sq_K(self) -> float:
        return nelson_norm_sq(self.K)


def w_star_matrix_element(
    inp: IntegrandInputs, u: OneBosonVector, g: OneBosonVector
) -> complex:
    """Element of the adjoint integrand (state-map direction)."""
    p0, pt = inp.pullbacks()
    expo = (
        -np.conj(inp.S)
        - 0.5 * inp.norm_sq_K()
        - 1j * inner(pt, g)
        - 1j * inner(u, p0)
        + inner(u, heat_apply(inp.t, g))
    )
    return complex(np.exp(expo))


def w_kernel_matrix_element(
    inp: IntegrandInputs, u: OneBosonVector, g: OneBosonVector
) -> complex:
    """Element of the kernel-direction integrand."""
    p0, pt = inp.pullbacks()
    expo = (
        -inp.S
        - 0.5 * inp.norm_sq_K()
        + 1j * inner(p0, g)
        + 1j * inner(u, pt)
        + inner(u, heat_apply(inp.t, g))
    )
    return complex(np.exp(expo))


def gmm_operator(inp: IntegrandInputs, nspace: NumberBasisSpace) -> np.ndarray:
    """Number-basis matrix of the kernel-direction integrand.

    Built as e^{-S - |K|^2/2} F_{t/2}(i p_t) F_{t/2}(-i p_0)^dagger from the
    truncated creation series; the independent oracle for the closed forms.
    """
    p0, pt = inp.pullbacks()
    scalar = np.exp(-inp.S - 0.5 * inp.norm_sq_K())
    left = f_series_operator(nspace, inp.t, OneBosonVector(inp.space, 1j * pt.amplitudes))
    right = f_series_operator(nspace, inp.t, OneBosonVector(inp.space, -1j * p0.amplitudes))
    return scalar * (left @ right.conj().T)


def gmm_matrix_element(
    inp: IntegrandInputs,
    nspace: NumberBasisSpace,
    u: OneBosonVector,
    g: OneBosonVector,
):
    """<embed(u), gmm_operator(inp) embed(g)> without building the matrix.

    Applies the adjoint creation series to the embedded vectors, so it
    evaluates the same truncated operator product as :func:`gmm_operator`
    at matrix-vector cost.  Returns (element, tail_bound) where the bound
    covers the dropped coherent tails of both embeddings.
    """
    p0, pt = inp.pullbacks()
    scalar = np.exp(-inp.S - 0.5 * inp.norm_sq_K())
    vu, tail_u = embed_expvec(nspace, u)
    vg, tail_g = embed_expvec(nspace, g)

    def series_adjoint(vec, param_amp):
        # F(param)^dagger v = e^{-t dGamma/2} sum_n a(param)^n / n! v
        ann = _creation_sum(nspace, OneBosonVector(inp.space, param_amp)).conj().T
        acc = vec.copy()
        term = vec.copy()
        for n in range(1, sum(nspace.cutoffs) + 1):
            term = ann @ term / n
            acc += term
        occ = nspace.occupations()
        return np.exp(-0.5 * inp.t * (occ @ inp.space.omega)) * acc

    left = series_adjoint(vu, 1j * pt.amplitudes)
    right = series_adjoint(vg, -1j * p0.amplitudes)
    # operator norm of the product is bounded by e^{-Re S} (contraction)
    op_norm = float(np.exp(-inp.S.real))
    norm_u = float(np.exp(0.5 * u.norm_sq()))
    norm_g = float(np.exp(0.5 * g.norm_sq()))
    bound = op_norm * (tail_u * norm_g + norm_u * tail_g + tail_u * tail_g)
    return complex(scalar * np.vdot(left, right)), bound


def contraction_check(
    inp: IntegrandInputs,
    u: OneBosonVector,
    g: OneBosonVector,
    kind: str = "kernel",
):
    """Verify |element| <= e^{-Re S} e^{(|u|^2+|g|^2)/2} (1 + tol).

    Returns (ok, slack) with slack = bound - |element|; the exponential-vector
    specialization of the pointwise norm bound on the integrand.
    """
    if kind == "kernel":
        elem = w_kernel_matrix_element(inp, u, g)
    elif kind == "star":
        elem = w_star_matrix_element(inp, u, g)
    else:
        raise ValueError("kind must be 'kernel' or 'star'")
    bound = np.exp(-inp.S.real + 0.5 * (u.norm_sq() + g.norm_sq()))
    slack = bound * (1.0 + CONTRACTION_SLACK) - abs(elem)
    return slack >= 0.0, float(slack)
