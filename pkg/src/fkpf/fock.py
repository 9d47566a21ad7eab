"""Bosonic Fock-space calculus in two interchangeable representations.

Exact exponential-vector algebra carries the Monte Carlo integrand: the
working basis is the set of coherent-type vectors eps(f) with

    <eps(f), eps(g)> = e^{<f,g>},

on which displacement/second-quantization operators act in closed form.
The truncated number basis (per-mode occupation cutoff) provides the
independent matrix representation used by the oracle; every number-basis
result carries an explicit coherent-tail bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .oneboson import OneBosonSpace, OneBosonVector, inner

__all__ = [
    "ExpVecCombo",
    "NumberBasisSpace",
    "ev_inner",
    "weyl_apply",
    "weyl_matrix_element",
    "field_matrix_element",
    "embed_expvec",
    "build_annihilation",
    "build_field",
    "build_dGamma",
    "f_series_operator",
]


@dataclass(frozen=True)
class ExpVecCombo:
    """Finite linear combination sum_i c_i eps(f_i) of exponential vectors."""

    space: OneBosonSpace
    coefficients: np.ndarray
    parameters: np.ndarray  # (terms, modes)

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coefficients, dtype=complex))
        p = np.asarray(self.parameters, dtype=complex)
        if p.ndim == 1:
            p = p.reshape(c.size, -1) if c.size else p.reshape(0, self.space.mode_count)
        if c.shape[0] != p.shape[0] or p.shape[1:] != (self.space.mode_count,):
            raise ValueError("coefficient/parameter shapes are inconsistent")
        for name, arr in (("coefficients", c), ("parameters", p)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def single(cls, f: OneBosonVector, coefficient: complex = 1.0) -> "ExpVecCombo":
        return cls(f.space, np.array([coefficient]), f.amplitudes.reshape(1, -1))

    @classmethod
    def vacuum(cls, space: OneBosonSpace) -> "ExpVecCombo":
        return cls(space, np.array([1.0]), np.zeros((1, space.mode_count)))

    @property
    def term_count(self) -> int:
        return self.coefficients.size

    def norm_sq(self) -> float:
        val = ev_inner(self, self)
        if val.imag > 1e-10 * max(1.0, abs(val)):
            raise ArithmeticError("Gram norm of exponential-vector combo not real")
        return float(val.real)


def ev_inner(a: ExpVecCombo, b: ExpVecCombo) -> complex:
    """<a, b> = sum_ij conj(c_i) d_j e^{<f_i, g_j>}."""
    if a.space is not b.space and not np.array_equal(a.space.omega, b.space.omega):
        raise ValueError("combos live over different one-boson spaces")
    gram = np.exp(a.parameters.conj() @ b.parameters.T)
    return complex(a.coefficients.conj() @ gram @ b.coefficients)


def weyl_apply(
    f: OneBosonVector, contraction, v: ExpVecCombo, tol: float = 1e-12
) -> ExpVecCombo:
    """Apply the Weyl operator W(f, C) with per-mode multipliers C.

    Acts term-by-term by the prescription
        W(f, C) eps(g) = e^{-|f|^2/2 - <f, Cg>} eps(f + Cg).
    C = ones gives the pure displacement W(f); f = 0 gives the second
    quantization Gamma(C) of the diagonal contraction.
    """
    space = v.space
    c = np.asarray(contraction, dtype=complex)
    if c.shape != (space.mode_count,):
        raise ValueError("contraction must supply one multiplier per mode")
    if np.any(np.abs(c) > 1.0 + tol):
        raise ValueError("per-mode multipliers must satisfy |c_m| <= 1")
    shifted = v.parameters * c[None, :]
    phases = np.exp(-0.5 * f.norm_sq() - shifted @ f.amplitudes.conj())
    return ExpVecCombo(
        space, v.coefficients * phases, shifted + f.amplitudes[None, :]
    )


def weyl_matrix_element(
    u: OneBosonVector, f: OneBosonVector, g: OneBosonVector
) -> complex:
    """Closed scalar <eps(u), W(f) eps(g)> = e^{-|f|^2/2 - <f,g> + <u, f+g>}."""
    return complex(
        np.exp(-0.5 * f.norm_sq() - inner(f, g) + inner(u, f) + inner(u, g))
    )


def field_matrix_element(
    u: OneBosonVector, f: OneBosonVector, g: OneBosonVector
) -> complex:
    """<eps(u), phi(f) eps(g)> = (<f,g> + <u,f>) e^{<u,g>}.

    phi(f) is the self-adjoint generator of t -> W(-itf); the closed form
    follows by differentiating the Weyl prescription at t = 0.
    """
    return complex((inner(f, g) + inner(u, f)) * np.exp(inner(u, g)))


# -- truncated number basis --------------------------------------------------


@dataclass(frozen=True)
class NumberBasisSpace:
    """Per-mode occupation truncation of the Fock space over ``base``.

    Basis states are occupation tuples (n_1, ..., n_M) with n_m <= cutoff_m,
    enumerated in row-major (C) order; dimension = prod_m (cutoff_m + 1).
    """

    base: OneBosonSpace
    cutoffs: tuple

    def __post_init__(self):
        cut = tuple(int(c) for c in np.atleast_1d(self.cutoffs))
        if len(cut) == 1 and self.base.mode_count > 1:
            cut = cut * self.base.mode_count
        if len(cut) != self.base.mode_count or any(c < 0 for c in cut):
            raise ValueError("need one nonnegative occupation cutoff per mode")
        object.__setattr__(self, "cutoffs", cut)

    @property
    def dim(self) -> int:
        return int(np.prod([c + 1 for c in self.cutoffs]))

    def occupations(self) -> np.ndarray:
        """(dim, M) array of occupation numbers in basis order."""
        grids = np.meshgrid(
            *[np.arange(c + 1) for c in self.cutoffs], indexing="ij"
        )
        return np.stack([g.reshape(-1) for g in grids], axis=1)

    def vacuum_index(self) -> int:
        return 0


def embed_expvec(nspace: NumberBasisSpace, g: OneBosonVector):
    """Truncated expansion of eps(g) in the number basis.

    Returns (vector, tail_bound) where tail_bound >= ||eps(g) - embedded||,
    computed from the total-degree tail of the coherent series at the
    smallest per-mode cutoff.
    """
    cols = []
    for m, cut in enumerate(nspace.cutoffs):
        n = np.arange(cut + 1)
        fact = np.array([math.sqrt(math.factorial(k)) for k in n])
        cols.append(g.amplitudes[m] ** n / fact)
    vec = cols[0]
    for col in cols[1:]:
        vec = np.kron(vec, col)
    nsq = g.norm_sq()
    nmin = min(nspace.cutoffs)
    # forward-summed tail sum_{k > nmin} |g|^{2k}/k! avoids the cancellation
    # in exp(|g|^2) - partial_sum
    term = nsq ** (nmin + 1) / math.factorial(nmin + 1)
    tail_sq = 0.0
    k = nmin + 1
    while term > tail_sq * 1e-18 and k < nmin + 400:
        tail_sq += term
        k += 1
        term *= nsq / k
    return vec.astype(complex), math.sqrt(tail_sq)


def build_annihilation(nspace: NumberBasisSpace, m: int) -> np.ndarray:
    """Matrix of the annihilation operator for mode m: a|n> = sqrt(n)|n-1>."""
    mats = []
    for j, cut in enumerate(nspace.cutoffs):
        if j == m:
            mats.append(np.diag(np.sqrt(np.arange(1.0, cut + 1)), 1))
        else:
            mats.append(np.eye(cut + 1))
    out = mats[0]
    for mat in mats[1:]:
        out = np.kron(out, mat)
    return out.astype(complex)


def build_field(nspace: NumberBasisSpace, g: OneBosonVector) -> np.ndarray:
    """Hermitian field matrix phi(g) = a(g) + a(g)^dagger for real g."""
    if not g.is_real(1e-12):
        raise ValueError("field operator requires a real mode vector")
    dim = nspace.dim
    out = np.zeros((dim, dim), dtype=complex)
    for m in range(nspace.base.mode_count):
        amp = g.amplitudes[m].real
        if amp == 0.0:
            continue
        a = build_annihilation(nspace, m)
        out += amp * (a + a.conj().T)
    return out


def build_dGamma(nspace: NumberBasisSpace) -> np.ndarray:
    """Diagonal field energy sum_m omega_m n_m."""
    occ = nspace.occupations()
    return np.diag(occ @ nspace.base.omega).astype(complex)


def _creation_sum(nspace: NumberBasisSpace, g: OneBosonVector) -> np.ndarray:
    """a^dagger(g) = sum_m g_m a_m^dagger (linear in g, complex allowed)."""
    dim = nspace.dim
    out = np.zeros((dim, dim), dtype=complex)
    for m in range(nspace.base.mode_count):
        if g.amplitudes[m] == 0.0:
            continue
        out += g.amplitudes[m] * build_annihilation(nspace, m).conj().T
    return out


def f_series_operator(nspace: NumberBasisSpace, t: float, g: OneBosonVector):
    """Creation series sum_n a^dagger(g)^n / n!  times  e^{-t dGamma(omega)/2}.

    The series terminates in the truncated space (each creation raises the
    total occupation).  The 1/n! normalization makes the vacuum column the
    coherent pattern g^n / sqrt(n!) and is forced by consistency with the
    Weyl-form matrix elements; see the integrand module cross-checks.
    """
    if t <= 0.0:
        raise ValueError("the creation series semigroup factor needs t > 0")
    occ = nspace.occupations()
    decay = np.diag(np.exp(-0.5 * t * (occ @ nspace.base.omega)))
    ad = _creation_sum(nspace, g)
    out = decay.astype(complex).copy()
    term = decay.astype(complex)
    max_total = sum(nspace.cutoffs)
    for n in range(1, max_total + 1):
        term = ad @ term / n
        out += term
    return out
