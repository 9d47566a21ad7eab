import math

import numpy as np
import pytest

from fkpf.fock import (
    ExpVecCombo,
    NumberBasisSpace,
    build_annihilation,
    build_dGamma,
    build_field,
    embed_expvec,
    ev_inner,
    f_series_operator,
    field_matrix_element,
    weyl_apply,
    weyl_matrix_element,
)
from fkpf.oneboson import OneBosonSpace, inner


@pytest.fixture
def sp():
    return OneBosonSpace(np.array([1.0, 2.0]))


def rand_vec(sp, rng, scale=1.0):
    m = sp.mode_count
    return sp.vector(scale * (rng.normal(size=m) + 1j * rng.normal(size=m)))


def test_vacuum_normalization(sp):
    vac = ExpVecCombo.vacuum(sp)
    assert ev_inner(vac, vac) == pytest.approx(1.0)


def test_ev_inner_unit_parameter_gives_e():
    sp = OneBosonSpace(np.array([1.0]))
    f = ExpVecCombo.single(sp.vector([1.0]))
    assert ev_inner(f, f) == pytest.approx(np.e, abs=1e-12)


def test_ev_inner_orthogonal_parameters(sp):
    a = ExpVecCombo.single(sp.basis_vector(0))
    b = ExpVecCombo.single(sp.basis_vector(1))
    assert ev_inner(a, b) == pytest.approx(1.0)


def test_weyl_prescription_on_vacuum(sp):
    rng = np.random.default_rng(0)
    f = rand_vec(sp, rng)
    out = weyl_apply(f, np.ones(2), ExpVecCombo.vacuum(sp))
    assert out.coefficients[0] == pytest.approx(np.exp(-0.5 * f.norm_sq()))
    assert np.allclose(out.parameters[0], f.amplitudes)


def test_gamma_of_contraction(sp):
    g = sp.vector([0.5, -0.3j])
    fac = sp.heat_factors(0.7)
    out = weyl_apply(sp.zero_vector(), fac, ExpVecCombo.single(g))
    assert out.coefficients[0] == pytest.approx(1.0)
    assert np.allclose(out.parameters[0], fac * g.amplitudes)


def test_weyl_rejects_expanding_multiplier(sp):
    with pytest.raises(ValueError):
        weyl_apply(sp.zero_vector(), np.array([1.0, 1.5]),
                   ExpVecCombo.vacuum(sp))


def test_weyl_relations(sp):
    rng = np.random.default_rng(1)
    ones = np.ones(2)
    for _ in range(5):
        f1, f2, g, u = (rand_vec(sp, rng) for _ in range(4))
        v = ExpVecCombo.single(g)
        probe = ExpVecCombo.single(u)
        lhs = ev_inner(probe, weyl_apply(f1, ones, weyl_apply(f2, ones, v)))
        f12 = sp.vector(f1.amplitudes + f2.amplitudes)
        rhs = ev_inner(probe, weyl_apply(f12, ones, v))
        phase = np.exp(-1j * np.imag(inner(f1, f2)))
        assert abs(lhs - phase * rhs) < 1e-12 * max(1.0, abs(lhs))


def test_weyl_relations_with_unitary_multipliers(sp):
    # W(f1, C1) W(f2, C2) = e^{-i Im<f1, C1 f2>} W(f1 + C1 f2, C1 C2)
    rng = np.random.default_rng(13)
    for _ in range(5):
        c1 = np.exp(1j * rng.uniform(0, 2 * np.pi, 2))
        c2 = np.exp(1j * rng.uniform(0, 2 * np.pi, 2))
        f1, f2, g, u = (rand_vec(sp, rng) for _ in range(4))
        v = ExpVecCombo.single(g)
        probe = ExpVecCombo.single(u)
        lhs = ev_inner(probe, weyl_apply(f1, c1, weyl_apply(f2, c2, v)))
        f12 = sp.vector(f1.amplitudes + c1 * f2.amplitudes)
        rhs = ev_inner(probe, weyl_apply(f12, c1 * c2, v))
        phase = np.exp(-1j * np.imag(np.vdot(f1.amplitudes, c1 * f2.amplitudes)))
        assert abs(lhs - phase * rhs) < 1e-12 * max(1.0, abs(lhs))


def test_weyl_inverse_up_to_phase(sp):
    rng = np.random.default_rng(2)
    f, g, u = (rand_vec(sp, rng, 0.7) for _ in range(3))
    ones = np.ones(2)
    v = ExpVecCombo.single(g)
    round_trip = weyl_apply(f, ones, weyl_apply(sp.vector(-f.amplitudes), ones, v))
    probe = ExpVecCombo.single(u)
    assert abs(ev_inner(probe, round_trip) - ev_inner(probe, v)) < 1e-12


def test_weyl_closed_scalar_matches_apply(sp):
    rng = np.random.default_rng(3)
    u, f, g = (rand_vec(sp, rng, 0.8) for _ in range(3))
    via_apply = ev_inner(
        ExpVecCombo.single(u), weyl_apply(f, np.ones(2), ExpVecCombo.single(g))
    )
    assert abs(via_apply - weyl_matrix_element(u, f, g)) < 1e-12 * abs(via_apply)


def test_combo_gram_positivity(sp):
    rng = np.random.default_rng(12)
    for _ in range(10):
        terms = int(rng.integers(1, 6))
        combo = ExpVecCombo(
            sp,
            rng.normal(size=terms) + 1j * rng.normal(size=terms),
            rng.normal(size=(terms, 2)) + 1j * rng.normal(size=(terms, 2)),
        )
        assert combo.norm_sq() >= -1e-10


def test_field_vacuum_expectation_vanishes(sp):
    zero = sp.zero_vector()
    f = sp.vector([0.4, 0.1])
    assert field_matrix_element(zero, f, zero) == 0


def test_field_finite_difference_oracle():
    # Richardson-extrapolated generator of the Weyl group at t = 0
    sp = OneBosonSpace(np.array([1.0]))
    f = sp.vector([1.0])
    cases = [(sp.zero_vector(), f, 1.0), (f, sp.zero_vector(), 1.0)]
    for u, g, expect in cases:
        probe = ExpVecCombo.single(u)
        target = ExpVecCombo.single(g)

        def elem(tt):
            w = weyl_apply(sp.vector(-1j * tt * f.amplitudes), np.ones(1), target)
            return ev_inner(probe, w)

        h = 1e-4
        d1 = 1j * (elem(h) - elem(-h)) / (2 * h)
        d2 = 1j * (elem(h / 2) - elem(-h / 2)) / h
        richardson = (4 * d2 - d1) / 3
        assert abs(richardson - expect) < 1e-9
        assert abs(field_matrix_element(u, f, g) - expect) < 1e-14


def test_embed_vacuum():
    sp = OneBosonSpace(np.array([1.0]))
    ns = NumberBasisSpace(sp, (6,))
    vec, tail = embed_expvec(ns, sp.zero_vector())
    assert vec[0] == 1.0 and np.all(vec[1:] == 0)
    assert tail == 0.0


def test_embed_coherent_column():
    sp = OneBosonSpace(np.array([1.0]))
    ns = NumberBasisSpace(sp, (8,))
    vec, _ = embed_expvec(ns, sp.vector([1.0]))
    expect = np.array([1.0 / math.sqrt(math.factorial(n)) for n in range(9)])
    assert np.abs(vec - expect).max() < 1e-15


def test_embed_norm_monotone_to_exponential():
    sp = OneBosonSpace(np.array([1.0]))
    g = sp.vector([0.9])
    norms = []
    for cutoff in (2, 4, 8, 16):
        vec, tail = embed_expvec(NumberBasisSpace(sp, (cutoff,)), g)
        nsq = float(np.vdot(vec, vec).real)
        norms.append(nsq)
        assert nsq <= np.exp(g.norm_sq()) + 1e-12
        assert abs(np.exp(g.norm_sq()) - nsq) <= tail**2 + 1e-12
    assert all(b >= a for a, b in zip(norms, norms[1:]))


def test_annihilation_and_number_matrices(sp):
    ns = NumberBasisSpace(sp, (3, 3))
    a0 = build_annihilation(ns, 0)
    num = a0.conj().T @ a0
    occ = ns.occupations()
    assert np.abs(np.diag(num).real - occ[:, 0]).max() < 1e-12


def test_field_matrix_vacuum_and_embed_agreement():
    sp = OneBosonSpace(np.array([1.0]))
    ns = NumberBasisSpace(sp, (8,))
    f = sp.vector([1.0])
    phi = build_field(ns, f)
    vac, _ = embed_expvec(ns, sp.zero_vector())
    assert abs(np.vdot(vac, phi @ vac)) < 1e-14
    emb_f, tail = embed_expvec(ns, f)
    elem = np.vdot(vac, phi @ emb_f)
    assert abs(elem - field_matrix_element(sp.zero_vector(), f, f)) <= tail + 1e-12


def test_field_rejects_complex_vector(sp):
    ns = NumberBasisSpace(sp, (3, 3))
    with pytest.raises(ValueError):
        build_field(ns, sp.vector([1.0, 0.5j]))


def test_dgamma_vacuum(sp):
    ns = NumberBasisSpace(sp, (3, 3))
    dg = build_dGamma(ns)
    assert dg[0, 0] == 0
    assert np.abs(dg - dg.conj().T).max() == 0


def test_number_vs_expvec_representations(sp):
    rng = np.random.default_rng(7)
    ns = NumberBasisSpace(sp, (14, 14))
    u, g = rand_vec(sp, rng, 0.4), rand_vec(sp, rng, 0.4)
    f = sp.vector([0.3, -0.2])
    vu, tu = embed_expvec(ns, u)
    vg, tg = embed_expvec(ns, g)
    tol = 1e-10 + 10 * (tu + tg)
    # displacement
    w_mat_elem = np.vdot(vu, _weyl_matrix(ns, sp, f) @ vg)
    assert abs(w_mat_elem - weyl_matrix_element(u, f, g)) < tol
    # contraction second quantization
    occ = ns.occupations()
    gam = np.diag(np.exp(-0.6 * (occ @ sp.omega)))
    combo = weyl_apply(sp.zero_vector(), sp.heat_factors(0.6), ExpVecCombo.single(g))
    assert abs(np.vdot(vu, gam @ vg) - ev_inner(ExpVecCombo.single(u), combo)) < tol
    # field operator
    phi = build_field(ns, f)
    assert abs(np.vdot(vu, phi @ vg) - field_matrix_element(u, f, g)) < tol


def _weyl_matrix(ns, sp, f):
    """exp(a^dagger(f) - a(f)) in the truncated basis."""
    from scipy.linalg import expm

    ad = sum(
        f.amplitudes[m] * build_annihilation(ns, m).conj().T
        for m in range(sp.mode_count)
    )
    return expm(ad - ad.conj().T)


def test_relative_bound_field_operator():
    # |phi(f) psi| <= sqrt(2) |f|_{fdom(omega^-1)} |psi|_{fdom(dGamma(omega))}
    rng = np.random.default_rng(21)
    sp = OneBosonSpace(np.array([0.4, 1.0, 3.0]))
    ns = NumberBasisSpace(sp, (5, 5, 5))
    dg = build_dGamma(ns).real
    occ = ns.occupations()
    top = (occ >= 5).any(axis=1)
    for _ in range(25):
        f = sp.vector(rng.normal(size=3))
        phi = build_field(ns, f)
        psi = rng.normal(size=ns.dim) + 1j * rng.normal(size=ns.dim)
        psi[top] = 0.0  # keep phi(psi) exact in the truncated space
        lhs = np.linalg.norm(phi @ psi)
        f_norm = np.sqrt(f.norm_sq() + float(np.sum(np.abs(f.amplitudes) ** 2 / sp.omega)))
        psi_norm = np.sqrt(
            float(np.vdot(psi, psi).real) + float(np.vdot(psi, dg @ psi).real)
        )
        assert lhs <= np.sqrt(2.0) * f_norm * psi_norm + 1e-12


def test_f_series_zero_vector_is_heat_diagonal():
    sp = OneBosonSpace(np.array([1.0]))
    ns = NumberBasisSpace(sp, (6,))
    out = f_series_operator(ns, 0.8, sp.zero_vector())
    occ = ns.occupations()
    expect = np.diag(np.exp(-0.4 * (occ @ sp.omega)))
    assert np.abs(out - expect).max() < 1e-15


def test_f_series_large_time_kills_excited_states():
    sp = OneBosonSpace(np.array([1.0]))
    ns = NumberBasisSpace(sp, (6,))
    out = f_series_operator(ns, 200.0, sp.vector([0.5]))
    # only the vacuum column survives
    assert np.abs(out[:, 1:]).max() < 1e-40
    assert abs(out[0, 0] - 1.0) < 1e-15


def test_f_series_vacuum_column_coherent_pattern():
    sp = OneBosonSpace(np.array([1.0]))
    ns = NumberBasisSpace(sp, (8,))
    g = sp.vector([0.6])
    out = f_series_operator(ns, 0.8, g)
    vac = np.zeros(9)
    vac[0] = 1.0
    col = out @ vac
    expect = np.array(
        [0.6**n / math.sqrt(math.factorial(n)) for n in range(9)]
    )
    assert np.abs(col - expect).max() < 1e-14


def test_f_series_rejects_nonpositive_time():
    sp = OneBosonSpace(np.array([1.0]))
    ns = NumberBasisSpace(sp, (4,))
    with pytest.raises(ValueError):
        f_series_operator(ns, 0.0, sp.zero_vector())
