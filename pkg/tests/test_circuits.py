import math

import numpy as np
import pytest

from compass_metrology import circuits as C
from compass_metrology import fockspace as fs
from compass_metrology import hybrid as hy

ALPHA = 3.0


@pytest.fixture(scope="module")
def gate_spec():
    return C.build_approach1(ALPHA)


@pytest.fixture(scope="module")
def kerr_spec():
    return C.build_approach2(ALPHA)


def test_gateop_inverse_involution_and_roundtrip():
    ops = [
        C.carrier(math.pi / 2, 0.3),
        C.cond_displacement(1 + 2j, "e"),
        C.cond_rotation(0.4, 0.1),
        C.kerr(0.1, 0.2, 0.3),
        C.perturbation(0.1, 0.5, 3.0),
    ]
    for op in ops:
        assert op.inverse().inverse() == op
        assert C.GateOp.from_dict(op.to_dict()) == op


def test_every_gate_is_inverted_by_its_inverse():
    rng = np.random.default_rng(0)
    dim = 60
    g = np.zeros(dim, complex)
    e = np.zeros(dim, complex)
    g[:8] = rng.normal(size=8) + 1j * rng.normal(size=8)
    e[:8] = rng.normal(size=8) + 1j * rng.normal(size=8)
    n = math.sqrt(np.vdot(g, g).real + np.vdot(e, e).real)
    s = hy.HybridState(fs.OscState(g / n), fs.OscState(e / n))
    for op in [C.carrier(1.1, 0.3), C.cond_displacement(1 - 0.5j, "g"), C.cond_rotation(0.4, 0.1),
               C.kerr(0.1, -0.7, math.pi / 4), C.perturbation(0.3, 1.0, 2.0)]:
        out = op.inverse().apply(op.apply(s))
        assert np.max(np.abs(out.vector() - s.vector())) < 1e-10
        assert abs(op.apply(s).norm() - 1) < 1e-10


def test_approach1_branches_are_printed_compass_states(gate_spec):
    st = gate_spec.generate()
    cat, bar = C.approach1_targets(ALPHA, 0.0, st.dim)
    cat, bar = cat.scaled(1 / cat.norm()), bar.scaled(1 / bar.norm())
    assert abs(fs.inner(cat, st.branch_e)) ** 2 == pytest.approx(0.5, abs=1e-8)
    assert abs(fs.inner(bar, st.branch_g)) ** 2 == pytest.approx(0.5, abs=1e-8)
    assert abs(fs.inner(cat, bar)) < 1e-6
    pg, pe = hy.measure_populations(st)
    assert pg == pytest.approx(0.5, abs=1e-8) and pe == pytest.approx(0.5, abs=1e-8)
    assert C.verify(gate_spec) > 1 - 1e-8


def test_approach1_with_nu():
    spec = C.build_approach1(ALPHA, nu=0.7)
    assert C.target_fidelity(spec) > 1 - 1e-8


def test_approach2_branches(kerr_spec):
    st = kerr_spec.generate()
    up, down = st.x_branches()
    assert C.target_fidelity(kerr_spec) > 1 - 1e-8
    # phi1 = 0: both branches are the same compass orientation
    cat, bar = C.approach2_targets(ALPHA, 0.0, 0.0, st.dim)
    assert abs(fs.inner(cat, bar)) ** 2 / (cat.norm() * bar.norm()) ** 2 == pytest.approx(0.5, abs=1e-6)
    # <up|down> follows from <alpha| exp(i pi n^2 / 2) |alpha> = (1 + i)/2, so the pair is not orthogonal
    ov = abs(fs.inner(up, down)) / (up.norm() * down.norm())
    assert ov == pytest.approx(1 / math.sqrt(2), abs=1e-6)
    pg, pe = hy.measure_populations(st)
    assert pe == pytest.approx(0.25, abs=1e-6)


def test_approach2_rotated_pair():
    phi1 = 0.3
    spec = C.build_approach2(ALPHA, phi0=0.2, phi1=phi1)
    st = spec.generate()
    up, down = st.x_branches()
    # rotating the down branch by -2 phi1 aligns it with the up branch
    aligned = fs.rotate(down, -2 * phi1)
    ov = abs(fs.inner(up, aligned)) / (up.norm() * aligned.norm())
    assert ov == pytest.approx(1 / math.sqrt(2), abs=1e-6)
    assert C.target_fidelity(C.build_approach2(ALPHA, phi1=phi1, align=True)) > 1 - 1e-8


@pytest.mark.parametrize("builder", [
    lambda: C.build_approach1(ALPHA),
    lambda: C.build_approach1(ALPHA, nu=1.1),
    lambda: C.build_approach2(ALPHA),
    lambda: C.build_approach2(ALPHA, phi0=0.4, phi1=-0.9, align=True),
])
def test_generate_then_reverse_is_identity(builder):
    spec = builder()
    st = spec.generate()
    back = spec.run(st, spec.reversal())
    assert hy.hybrid_fidelity(back, hy.ground_state(st.dim)) > 1 - 1e-10


def test_reversal_skips_perturbation():
    spec = C.CircuitSpec((C.carrier(1.0, 0.0), C.perturbation(0.1, 0.0, 3.0)), 3.0, C.Approach.GATE_BASED, {"nu": 0.0})
    rev = spec.reversal()
    assert len(rev) == 1 and rev[0].inverted and rev[0].kind is C.GateKind.CARRIER_ROTATION


def test_circuit_json_roundtrip(gate_spec):
    back = C.CircuitSpec.from_json(gate_spec.to_json())
    assert back.ops == gate_spec.ops and back.approach is gate_spec.approach
    assert np.allclose(back.generate().vector(), gate_spec.generate().vector())


def test_perturbation_basics(gate_spec):
    st = gate_spec.generate(gate_spec.policy(s_max=1.0).dim)
    assert np.array_equal(C.apply_perturbation(st, 0.0, 0.3, ALPHA).vector(), st.vector())
    two = C.apply_perturbation(C.apply_perturbation(st, 0.1, 0.3, ALPHA), 0.15, 0.3, ALPHA)
    one = C.apply_perturbation(st, 0.25, 0.3, ALPHA)
    assert hy.hybrid_fidelity(one, two) > 1 - 1e-12
    assert C.perturbation_amplitude(0.2, math.pi / 2, 3j) == pytest.approx(-0.2)


def test_perturbed_branch_overlap_matches_fidelity_formula(gate_spec):
    from compass_metrology.metrology import PerturbationParams, fidelity_exact

    st = gate_spec.generate(gate_spec.policy(s_max=1.0).dim)
    for s in (0.1, 0.2, 0.3):
        pert = C.apply_perturbation(st, s, math.pi / 3, ALPHA)
        e0, e1 = st.branch_e, pert.branch_e
        ov = abs(fs.inner(e0, e1)) ** 2 / (e0.norm() * e1.norm()) ** 2
        assert ov == pytest.approx(fidelity_exact(PerturbationParams(s, math.pi / 3, ALPHA)), abs=5e-3)


def test_run_protocol_at_zero(gate_spec, kerr_spec):
    for spec in (gate_spec, kerr_spec):
        pg, _ = C.run_protocol(spec, 0.0, 0.7)
        assert pg == pytest.approx(1, abs=1e-10)
    with pytest.raises(ValueError):
        C.run_protocol(gate_spec, -0.1, 0.0)


def test_scan_matches_pointwise(gate_spec):
    s = [0.0, 0.1, 0.25]
    scan = C.pg_scan(gate_spec, s, 0.5)
    assert np.allclose(scan, [C.run_protocol(gate_spec, x, 0.5)[0] for x in s], atol=1e-12)


def test_residual_state_structure_is_first_order(gate_spec):
    """The |g> residual lies in span{|0>, |+-2 alpha e^{i pi/4}>} up to O(s)."""
    ab = 2 * ALPHA * np.exp(1j * math.pi / 4)
    fractions = []
    for s in (0.01, 0.02, 0.04):
        _, fin = C.run_protocol(gate_spec, s, math.pi / 3)
        v = fin.branch_g.amplitudes
        basis = np.column_stack([fs.coherent_amplitudes(z, fin.dim) for z in (0, ab, -ab)])
        coef, *_ = np.linalg.lstsq(basis, v, rcond=None)
        fractions.append(np.linalg.norm(v - basis @ coef) / np.linalg.norm(v))
    assert fractions[0] < 0.01
    assert fractions[2] / fractions[0] == pytest.approx(4, rel=0.1)


def test_pg_independent_of_cat_phases():
    # nu and phi0 only change the gamma_k phases of the generated compass states
    s = np.array([0.05, 0.15, 0.3])
    ref1 = C.pg_scan(C.build_approach1(ALPHA), s, math.pi / 3)
    ref2 = C.pg_scan(C.build_approach2(ALPHA), s, math.pi / 3)
    for nu in (0.3, 1.7):
        assert np.allclose(C.pg_scan(C.build_approach1(ALPHA, nu=nu), s, math.pi / 3), ref1, atol=1e-12)
    for phi0 in (0.5, -2.0):
        assert np.allclose(C.pg_scan(C.build_approach2(ALPHA, phi0=phi0), s, math.pi / 3), ref2, atol=1e-12)


def test_align_flag_changes_pg():
    s = np.array([0.1, 0.2])
    phi1 = -0.8
    plain = C.pg_scan(C.build_approach2(ALPHA, phi1=phi1), s, math.pi / 3)
    aligned = C.pg_scan(C.build_approach2(ALPHA, phi1=phi1, align=True), s, math.pi / 3)
    zero = C.pg_scan(C.build_approach2(ALPHA), s, math.pi / 3)
    assert np.allclose(aligned, zero, atol=1e-10)
    assert np.max(np.abs(plain - aligned)) > 1e-3


def test_approach_parse():
    assert C.Approach.parse("1") is C.Approach.GATE_BASED
    assert C.Approach.parse("kerr") is C.Approach.KERR_BASED
    assert C.Approach.parse(2) is C.Approach.KERR_BASED
    with pytest.raises(ValueError):
        C.Approach.parse("3")
