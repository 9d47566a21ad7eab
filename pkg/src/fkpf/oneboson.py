"""Finite-mode one-boson space, its heat semigroup, and the Euclidean
time-embedding kernel.

The one-boson space is C^M with counting measure over M modes, each mode
carrying a strictly positive dispersion value omega_m.  Vectors indexed by
Euclidean time are represented as finite atom sums

    K = sum_l  c_l * (time s_l, mode vector g_l),

and all inner products between such atoms reduce to the closed kernel

    <atom(s, u), atom(r, v)> = <u, e^{-|s-r| omega} v>,

which ``js_quadrature_inner`` validates by direct numerical integration of
the explicit time-embedding isometry density over its frequency variable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "OneBosonSpace",
    "OneBosonVector",
    "NelsonVector",
    "QuadratureError",
    "inner",
    "heat_apply",
    "nelson_kernel_inner",
    "js_quadrature_inner",
    "pullback",
    "nelson_inner",
    "nelson_norm_sq",
]

IMAG_TOL = 1e-12


class QuadratureError(ValueError):
    """Raised when a supplied kappa grid cannot reach the requested tolerance."""


@dataclass(frozen=True)
class OneBosonSpace:
    """M boson modes with per-mode dispersion omega_m > 0."""

    omega: np.ndarray

    def __post_init__(self):
        om = np.asarray(self.omega, dtype=float)
        if om.ndim != 1 or om.size < 1:
            raise ValueError("dispersion must be a nonempty 1-d array")
        if not np.all(om > 0.0):
            raise ValueError("every dispersion value must be strictly positive")
        object.__setattr__(self, "omega", om)
        self.omega.setflags(write=False)

    @property
    def mode_count(self) -> int:
        return self.omega.size

    def heat_factors(self, tau: float) -> np.ndarray:
        """Component multipliers e^{-tau omega_m}."""
        if tau < 0.0:
            raise ValueError("heat semigroup requires tau >= 0")
        return np.exp(-tau * self.omega)

    def vector(self, amplitudes) -> "OneBosonVector":
        return OneBosonVector(self, np.asarray(amplitudes, dtype=complex))

    def zero_vector(self) -> "OneBosonVector":
        return OneBosonVector(self, np.zeros(self.mode_count, dtype=complex))

    def basis_vector(self, m: int) -> "OneBosonVector":
        amp = np.zeros(self.mode_count, dtype=complex)
        amp[m] = 1.0
        return OneBosonVector(self, amp)


@dataclass(frozen=True)
class OneBosonVector:
    """Element of the one-boson space: one complex amplitude per mode."""

    space: OneBosonSpace
    amplitudes: np.ndarray

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex)
        if amp.shape != (self.space.mode_count,):
            raise ValueError(
                f"amplitude length {amp.shape} does not match mode count "
                f"{self.space.mode_count}"
            )
        object.__setattr__(self, "amplitudes", amp)
        self.amplitudes.setflags(write=False)

    def is_real(self, tol: float = 1e-14) -> bool:
        """Membership test for the completely real subspace."""
        return float(np.abs(self.amplitudes.imag).max(initial=0.0)) <= tol

    def norm_sq(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def norm(self) -> float:
        return float(np.sqrt(self.norm_sq()))


def _check_same_space(a, b):
    if a.space is not b.space and not np.array_equal(a.space.omega, b.space.omega):
        raise ValueError("vectors live in different one-boson spaces")


def inner(u: OneBosonVector, v: OneBosonVector) -> complex:
    """Inner product sum_m conj(u_m) v_m, antilinear in the first slot."""
    _check_same_space(u, v)
    return complex(np.vdot(u.amplitudes, v.amplitudes))


def heat_apply(tau: float, v: OneBosonVector) -> OneBosonVector:
    """Apply the one-boson heat semigroup: component-wise e^{-tau omega} v."""
    return OneBosonVector(v.space, v.space.heat_factors(tau) * v.amplitudes)


def nelson_kernel_inner(
    s: float, u: OneBosonVector, r: float, v: OneBosonVector
) -> complex:
    """Closed-form inner product of two time-embedded vectors.

    Equals <u, e^{-|s-r| omega} v>; validated against ``js_quadrature_inner``.
    """
    _check_same_space(u, v)
    factors = u.space.heat_factors(abs(s - r))
    return complex(np.vdot(u.amplitudes, factors * v.amplitudes))


# -- direct quadrature of the time-embedding kernel -------------------------
#
# The embedding density in the frequency variable kappa is
#     d_omega(kappa) = (1/pi) * omega / (kappa^2 + omega^2),
# and the kernel to evaluate is  I(a) = int d_omega(kappa) e^{i a kappa} dkappa
# with a = s - r.  The odd (sine) part vanishes by symmetry, so
#     I(a) = 2 * int_0^K d_omega cos(a kappa) dkappa  +  2 * T(a, K),
# where the tail T is handled by two integrations by parts with a rigorous
# remainder bound ~ omega / (a^2 K^3); at a = 0 the tail is elementary.


def _tail_correction(a: float, big_k: float, om: float):
    """Tail of int_K^inf d_omega(kappa) cos(a kappa) dkappa and its error bound."""
    if a == 0.0:
        exact = (1.0 / np.pi) * (np.pi / 2.0 - np.arctan(big_k / om))
        return exact, 0.0
    dk = (om / np.pi) / (big_k**2 + om**2)
    dpk = -(om / np.pi) * 2.0 * big_k / (big_k**2 + om**2) ** 2
    corr = -dk * np.sin(a * big_k) / a - dpk * np.cos(a * big_k) / a**2
    bound = 10.0 * om / (3.0 * np.pi * a**2 * big_k**3)
    return corr, bound


def _simpson_kernel_integral(a: float, om: float, big_k: float, step: float):
    """Simpson rule for 2 * int_0^K d_omega(kappa) cos(a kappa) dkappa."""
    n_panels = max(2, int(np.ceil(big_k / step / 2)) * 2)
    kappa = np.linspace(0.0, big_k, n_panels + 1)
    dens = (om / np.pi) / (kappa**2 + om**2)
    f = dens * np.cos(a * kappa)
    h = big_k / n_panels
    w = np.ones(n_panels + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return 2.0 * (h / 3.0) * float(w @ f)


def _mode_kernel_quadrature(a: float, om: float, kappa_max=None, step=None, tol=1e-7):
    if abs(a) < 1e-9:
        a = 0.0
    if kappa_max is None:
        big_k = 8.0 * max(om, 1.0)
        if a != 0.0:
            # choose K so the integration-by-parts remainder is below tol/2
            big_k = max(big_k, (40.0 * om / (3.0 * np.pi * a**2 * tol)) ** (1.0 / 3.0))
    else:
        big_k = float(kappa_max)
    if step is None:
        step = min(0.25 / (1.0 + abs(a)), om / 8.0, 1.0)
    corr, bound = _tail_correction(a, big_k, om)
    if 2.0 * bound > tol:
        raise QuadratureError(
            f"kappa grid too coarse: truncation bound {2.0 * bound:.3e} exceeds "
            f"tolerance {tol:.3e} (K={big_k:.3g}, |s-r|={abs(a):.3g}, omega={om:.3g})"
        )
    value = _simpson_kernel_integral(a, om, big_k, step) + 2.0 * corr
    return value, 2.0 * bound


def js_quadrature_inner(
    s: float,
    u: OneBosonVector,
    r: float,
    v: OneBosonVector,
    kappa_grid: np.ndarray | None = None,
    tol: float = 1e-7,
    return_bound: bool = False,
):
    """Quadrature estimate of the time-embedded inner product.

    Integrates the explicit embedding density over a symmetric kappa grid
    (Simpson rule) plus an analytic tail correction whose rigorous remainder
    is reported.  Raises :class:`QuadratureError` when the requested grid
    cannot meet ``tol``.
    """
    _check_same_space(u, v)
    a = s - r
    kappa_max = step = None
    if kappa_grid is not None:
        grid = np.asarray(kappa_grid, dtype=float)
        if grid.size < 5 or not np.allclose(grid, -grid[::-1], atol=1e-12):
            raise ValueError("kappa_grid must be symmetric about 0 with >= 5 points")
        kappa_max = float(grid.max())
        step = float(np.diff(grid).max())
    total = 0.0 + 0.0j
    worst_bound = 0.0
    for m in range(u.space.mode_count):
        coeff = np.conj(u.amplitudes[m]) * v.amplitudes[m]
        if coeff == 0.0:
            continue
        val, bnd = _mode_kernel_quadrature(
            a, float(u.space.omega[m]), kappa_max, step, tol
        )
        total += coeff * val
        worst_bound = max(worst_bound, bnd)
    if return_bound:
        return complex(total), worst_bound
    return complex(total)


# -- finite atom sums over Euclidean times ----------------------------------


@dataclass(frozen=True)
class NelsonVector:
    """Finite atom sum sum_l c_l * (time s_l, vector g_l) over one space.

    Stored columnar: ``times`` (L,), ``weights`` (L,) complex and
    ``vectors`` (L, M) complex.  Atom lists are kept unmerged; the Gram
    evaluation is quadratic in the number of atoms.
    """

    space: OneBosonSpace
    times: np.ndarray = field(default=None)
    weights: np.ndarray = field(default=None)
    vectors: np.ndarray = field(default=None)

    def __post_init__(self):
        t = np.atleast_1d(np.asarray(self.times if self.times is not None else [],
                                     dtype=float))
        w = np.atleast_1d(np.asarray(self.weights if self.weights is not None else [],
                                     dtype=complex))
        g = np.asarray(self.vectors if self.vectors is not None else
                       np.zeros((0, self.space.mode_count)), dtype=complex)
        if g.ndim == 1:
            g = g.reshape(t.size, -1) if t.size else g.reshape(0, self.space.mode_count)
        if not (t.shape[0] == w.shape[0] == g.shape[0]):
            raise ValueError("atom arrays must share their leading length")
        if g.shape[1:] != (self.space.mode_count,):
            raise ValueError("atom vectors do not match the mode count")
        for name, arr in (("times", t), ("weights", w), ("vectors", g)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_atoms(cls, space: OneBosonSpace, atoms) -> "NelsonVector":
        """Build from an iterable of (time, weight, OneBosonVector) triples."""
        atoms = list(atoms)
        if not atoms:
            return cls.empty(space)
        times = np.array([a[0] for a in atoms], dtype=float)
        weights = np.array([a[1] for a in atoms], dtype=complex)
        vectors = np.array(
            [a[2].amplitudes if isinstance(a[2], OneBosonVector) else a[2]
             for a in atoms],
            dtype=complex,
        )
        return cls(space, times, weights, vectors)

    @classmethod
    def empty(cls, space: OneBosonSpace) -> "NelsonVector":
        return cls(
            space,
            np.zeros(0),
            np.zeros(0, dtype=complex),
            np.zeros((0, space.mode_count), dtype=complex),
        )

    @property
    def atom_count(self) -> int:
        return self.times.size

    def is_real(self, tol: float = 1e-14) -> bool:
        if self.atom_count == 0:
            return True
        return (
            float(np.abs(self.weights.imag).max(initial=0.0)) <= tol
            and float(np.abs(self.vectors.imag).max(initial=0.0)) <= tol
        )

    def scaled(self, factor: complex) -> "NelsonVector":
        return NelsonVector(self.space, self.times, factor * self.weights, self.vectors)

    def shifted(self, dt: float) -> "NelsonVector":
        return NelsonVector(self.space, self.times + dt, self.weights, self.vectors)

    def concat(self, other: "NelsonVector") -> "NelsonVector":
        _check_same_space_nelson(self, other)
        return NelsonVector(
            self.space,
            np.concatenate([self.times, other.times]),
            np.concatenate([self.weights, other.weights]),
            np.concatenate([self.vectors, other.vectors]),
        )


def _check_same_space_nelson(a, b):
    if a.space is not b.space and not np.array_equal(a.space.omega, b.space.omega):
        raise ValueError("atom sums live in different one-boson spaces")


def pullback(t: float, big_k: NelsonVector) -> OneBosonVector:
    """Adjoint embedding at time t: sum_l c_l e^{-|t-s_l| omega} g_l."""
    if big_k.atom_count == 0:
        return big_k.space.zero_vector()
    decay = np.exp(-np.abs(t - big_k.times)[:, None] * big_k.space.omega[None, :])
    amp = (big_k.weights[:, None] * decay * big_k.vectors).sum(axis=0)
    return OneBosonVector(big_k.space, amp)


_GRAM_BLOCK = 1024


def nelson_inner(big_k: NelsonVector, big_k2: NelsonVector) -> complex:
    """Double atom sum over the closed kernel, antilinear in the first slot."""
    _check_same_space_nelson(big_k, big_k2)
    if big_k.atom_count == 0 or big_k2.atom_count == 0:
        return 0.0 + 0.0j
    omega = big_k.space.omega
    cw = np.conj(big_k.weights)
    cv = np.conj(big_k.vectors)
    total = 0.0 + 0.0j
    for lo in range(0, big_k.atom_count, _GRAM_BLOCK):
        hi = min(lo + _GRAM_BLOCK, big_k.atom_count)
        gaps = np.abs(big_k.times[lo:hi, None] - big_k2.times[None, :])
        for m in range(omega.size):
            kern = np.exp(-gaps * omega[m])
            left = cw[lo:hi] * cv[lo:hi, m]
            right = big_k2.weights * big_k2.vectors[:, m]
            total += complex(left @ kern @ right)
    return total


def nelson_norm_sq(big_k: NelsonVector) -> float:
    """Gram norm squared; asserts the imaginary part is negligible."""
    val = nelson_inner(big_k, big_k)
    scale = max(1.0, abs(val))
    if abs(val.imag) > IMAG_TOL * scale:
        raise ArithmeticError(
            f"atom Gram norm has imaginary part {val.imag:.3e} beyond tolerance"
        )
    return float(val.real)
