import math
import warnings

import numpy as np
import pytest

from compass_metrology import circuits as C
from compass_metrology import fockspace as fs
from compass_metrology import metrology as M

P = M.PerturbationParams
PI3 = math.pi / 3


def test_b_coefficients_never_both_vanish():
    for phi in np.linspace(0, 2 * math.pi, 721):
        p = P(0.1, phi, 3.0)
        assert max(abs(p.b_plus), abs(p.b_minus)) >= 1 - 1e-12
        assert p.b_plus**2 + p.b_minus**2 == pytest.approx(2)
    with pytest.raises(ValueError):
        P(0.1, 0.0, 0.0)


def test_fidelity_identity_and_trivial_values():
    for s in np.linspace(0, 0.5, 11):
        for phi in (0.0, 0.4, PI3, 2.0):
            p = P(s, phi, 3.0)
            assert abs(M.fidelity_exact(p) - M.fidelity_approx(p) * math.exp(-s * s)) < 1e-15
    assert M.fidelity_exact(P(0, 0.3, 3)) == 1
    p = P(0.13, math.pi / 4, 3.0)
    assert M.fidelity_exact(p) == pytest.approx(math.exp(-0.13**2) * math.cos(math.sqrt(2) * 3 * 0.13) ** 2)


def test_fidelity_matches_fock_overlap():
    pol = fs.TruncationPolicy(4)
    cat = fs.make_cat(3, 4, policy=pol)
    d = fs.displace(cat, 0.2 * np.exp(1j * PI3))
    assert abs(fs.inner(cat, d)) ** 2 == pytest.approx(M.fidelity_exact(P(0.2, PI3, 3)), abs=5e-3)


def test_fidelity_deviation_shrinks_with_alpha():
    worst = {}
    for a in (3, 5):
        pol = fs.TruncationPolicy(a + 1)
        cat = fs.make_cat(a, 4, policy=pol)
        mx = 0.0
        for phi in np.linspace(0, 2 * math.pi, 64, endpoint=False):
            so = M.quasi_orthogonal_displacement(phi, a)
            for s in np.linspace(0, so, 5):
                f = abs(fs.inner(cat, fs.displace(cat, s * np.exp(1j * phi)))) ** 2
                mx = max(mx, abs(f - M.fidelity_exact(P(s, phi, a))))
        worst[a] = mx
    assert worst[3] < 1e-4
    assert worst[5] < worst[3] * math.exp(-(25 - 9)) * 100


def test_quasi_orthogonal_displacement():
    assert M.quasi_orthogonal_displacement(0, 3) == pytest.approx(0.5236, abs=1e-4)
    assert M.quasi_orthogonal_displacement(PI3, 3) == pytest.approx(math.pi / (3 * (1 + math.sqrt(3))), abs=1e-12)
    assert M.quasi_orthogonal_displacement(PI3, 3) == pytest.approx(0.3832, abs=2e-4)
    for phi in np.linspace(0, 2 * math.pi, 37):
        so = M.quasi_orthogonal_displacement(phi, 3)
        assert M.quasi_orthogonal_displacement(phi + math.pi / 2, 3) == pytest.approx(so)
        assert M.quasi_orthogonal_displacement(math.pi / 2 - phi, 3) == pytest.approx(so)
        assert M.fidelity_approx(P(so, phi, 3)) < 1e-25
    with pytest.raises(ValueError):
        M.quasi_orthogonal_displacement(0.0, -1.0)


def test_approximation_gap_bounded():
    a = 3.0
    so = M.quasi_orthogonal_displacement(PI3, a)
    for s in np.linspace(0, so, 50):
        p = P(s, PI3, a)
        assert abs(M.fidelity_approx(p) - M.fidelity_exact(p)) <= 1 - math.exp(-s * s) + 1e-15


def test_approach1_closed_form():
    assert M.pg_closed_approach1(P(0, PI3, 3)) == 1
    so = M.quasi_orthogonal_displacement(PI3, 3)
    at = P(so, PI3, 3)
    _, a2 = M.approach1_amplitudes(at)
    assert M.pg_closed_approach1(at) == pytest.approx(2 * abs(a2) ** 2, abs=1e-15)
    assert M.pg_closed_approach1(at) > 0.1


def test_approach2_closed_forms_agree():
    for phi in (0.0, 0.5, PI3):
        for phi1 in (0.0, 0.3, -44.9):
            for s in (0.0, 0.07, 0.2, 0.31):
                p = P(s, phi, 3)
                assert M.pg_closed_approach2(p, phi1) == pytest.approx(M.pg_from_B(p, phi1), abs=1e-14)
    assert M.pg_closed_approach2(P(0, 0.4, 3), 0.2) == pytest.approx(1)
    # the literal printed bracket does not reduce to 1 at s = 0
    assert abs(M.pg_closed_approach2(P(0, 0.4, 3), 0.2, as_printed=True) - 1) > 0.1


@pytest.mark.parametrize("approach,phi1", [("1", 0.0), ("2", 0.0), ("2", 0.3)])
def test_derivative_matches_finite_difference(approach, phi1):
    h = 1e-6
    for s in (0.05, 0.15, 0.3):
        p = P(s, PI3, 3)
        up = M.pg_closed(P(s + h / 3, PI3, 3), approach, phi1)
        dn = M.pg_closed(P(s - h / 3, PI3, 3), approach, phi1)
        assert M.dpg_dy(p, approach, phi1) == pytest.approx((up - dn) / (2 * h), abs=1e-6)


@pytest.mark.parametrize("approach", ["1", "2"])
def test_closed_forms_agree_with_simulator_to_second_order(approach):
    # the closed forms keep only the leading small-s structure of the final state
    a = 3.0
    spec = C.build(approach, a)
    so = M.quasi_orthogonal_displacement(PI3, a)
    s = np.linspace(0, so / 2, 9)
    sim = C.pg_scan(spec, s, PI3)
    closed = np.array([M.pg_closed(P(x, PI3, a), approach) for x in s])
    assert sim[0] == pytest.approx(1, abs=1e-10)
    assert np.all(np.abs(sim - closed) <= 0.5 * s**2 + 1e-10)


def test_sample_counts():
    p = P(0.15, PI3, 3)
    assert M.sample_counts(0.0, p, "1", 500, seed=3) == 500
    assert M.sample_counts(0.15, p, "1", 1000, seed=11) == M.sample_counts(0.15, p, "1", 1000, seed=11)
    R = 100_000
    pg = M.response_model("1", 3.0, PI3).simulated(0.15)
    r = M.sample_counts(0.15, p, "1", R, seed=5)
    assert abs(r / R - pg) <= 3 * math.sqrt(pg * (1 - pg) / R)
    with pytest.raises(ValueError):
        M.sample_counts(0.15, p, "1", 0, seed=1)


def test_estimate_round_trip():
    p = P(0.0, PI3, 3)
    model = M.response_model("1", 3.0, PI3)
    R = 10_000
    assert M.estimate_s(R, R, p, "1") == 0.0
    so = model.s_o
    for s in np.linspace(0.1 * so, 0.9 * so, 7):
        pg = model.interpolated(s)
        r = round(R * pg)
        slope = abs(model.closed_slope(s)) * 3
        assert abs(M.estimate_s(r, R, p, "1") - s) <= 1 / (R * slope) + 1e-10
    with pytest.raises(ValueError):
        M.estimate_s(11, 10, p, "1")


def test_monotone_region_approach1():
    model = M.response_model("1", 3.0, PI3)
    s = np.linspace(0, 0.95 * model.s_o, 400)[1:]
    h = 1e-6
    fd = [(model.simulated(x + h) - model.simulated(x - h)) / (2 * h) for x in s[::20]]
    assert max(fd) < 0
    with warnings.catch_warnings():
        warnings.simplefilter("error", M.NonMonotoneWarning)
        assert model.effective_bound() == pytest.approx(model.s_o)


def test_non_monotone_curve_warns_and_clamps():
    model = M.ResponseModel("1", 3.0, 0.0)
    with pytest.warns(M.NonMonotoneWarning):
        bound = model.effective_bound()
    assert 0 < bound < model.s_o
    lowest = model.interpolated(bound)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", M.NonMonotoneWarning)
        assert model.invert(lowest - 0.01) == bound
    assert model.invert(1.5) == 0.0


def test_analytic_uncertainty():
    p = P(0.15, PI3, 3)
    with pytest.raises(M.DivergentUncertaintyError):
        M.analytic_uncertainty(0.0, p, "1", 1000)
    d1 = M.analytic_uncertainty(0.15, p, "1", 1000)
    d4 = M.analytic_uncertainty(0.15, p, "1", 4000)
    assert d1 / d4 == pytest.approx(2, rel=1e-12)


def test_run_estimation_replicas_are_deterministic():
    p = P(0.15, PI3, 3)
    a = M.run_estimation(0.15, p, "1", 1000, 200, seed=9)
    b = M.run_estimation(0.15, p, "1", 1000, 200, seed=9)
    assert np.array_equal(a.counts, b.counts) and a.summary() == b.summary()
    assert np.all((a.counts >= 0) & (a.counts <= 1000))
    assert np.all((a.estimates >= 0) & (a.estimates <= a.effective_bound))
    assert "counts" not in a.summary()
    c = M.run_estimation(0.15, p, "1", 1000, 200, seed=10)
    assert not np.array_equal(a.counts, c.counts)
