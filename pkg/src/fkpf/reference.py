"""Closed-form reference solutions for the zero-coupling sanity cases.

Conventions: the free generator is half the Laplacian, so the heat kernel is
p_t(x, y) = (2 pi t)^(-nu/2) exp(-|x-y|^2 / 2t) and the absorbing interval
(a, b) has eigenvalues n^2 pi^2 / (2 L^2) with L = b - a.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "heat_kernel",
    "gaussian_free_semigroup",
    "interval_eigen_kernel",
    "interval_image_kernel",
    "interval_semigroup_apply",
]


def heat_kernel(t: float, x, y) -> float:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    nu = x.size
    return float(
        (2 * np.pi * t) ** (-nu / 2.0) * np.exp(-np.sum((x - y) ** 2) / (2 * t))
    )


def gaussian_free_semigroup(t: float, x: float) -> float:
    """Free half-Laplacian semigroup applied to exp(-x^2/2), in 1d."""
    return float(np.exp(-x**2 / (2 * (1 + t))) / np.sqrt(1 + t))


def interval_eigen_kernel(t, x, y, a=0.0, b=1.0, terms=80) -> float:
    """Absorbing kernel on (a, b) via the sine eigenfunction expansion."""
    length = b - a
    n = np.arange(1, terms + 1)
    lam = n**2 * np.pi**2 / (2 * length**2)
    phi_x = np.sqrt(2 / length) * np.sin(n * np.pi * (x - a) / length)
    phi_y = np.sqrt(2 / length) * np.sin(n * np.pi * (y - a) / length)
    return float(np.sum(phi_x * phi_y * np.exp(-lam * t)))


def interval_image_kernel(t, x, y, a=0.0, b=1.0, terms=60) -> float:
    """Absorbing kernel on (a, b) via the reflection (image charge) series."""
    length = b - a
    xs, ys = x - a, y - a
    total = 0.0
    for k in range(-terms, terms + 1):
        total += np.exp(-((ys - xs + 2 * k * length) ** 2) / (2 * t))
        total -= np.exp(-((ys + xs + 2 * k * length) ** 2) / (2 * t))
    return float(total / np.sqrt(2 * np.pi * t))


def interval_semigroup_apply(t, x, profile, a=0.0, b=1.0, terms=80, quad_points=2001):
    """Absorbing semigroup applied to a scalar profile, evaluated at x.

    The profile callable must be vectorized over a 1d array of points.
    """
    length = b - a
    ygrid = np.linspace(a, b, quad_points)
    fvals = np.asarray(profile(ygrid), dtype=complex)
    n = np.arange(1, terms + 1)
    lam = n**2 * np.pi**2 / (2 * length**2)
    phi = np.sqrt(2 / length) * np.sin(np.outer(n, ygrid - a) * np.pi / length)
    coeff = np.trapezoid(phi * fvals[None, :], ygrid, axis=1)
    phi_x = np.sqrt(2 / length) * np.sin(n * np.pi * (x - a) / length)
    return complex(np.sum(coeff * np.exp(-lam * t) * phi_x))
