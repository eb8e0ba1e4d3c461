import json
import math

import numpy as np
import pytest

from compass_metrology import fockspace as fs
from compass_metrology import metrology as M
from compass_metrology import wigner as wg


@pytest.fixture(scope="module")
def cat4():
    return fs.make_cat(3, 4, policy=fs.TruncationPolicy(4))


@pytest.fixture(scope="module")
def cat4_grid(cat4):
    return wg.wigner(cat4, alpha_mag=3)


def test_vacuum_gaussian():
    w = wg.wigner(fs.vacuum(10), (-4, 4), (-4, 4), 81)
    X, Y = np.meshgrid(w.xs, w.ys)
    assert np.max(np.abs(w.values - wg.W_MAX * np.exp(-2 * (X**2 + Y**2)))) < 1e-12
    assert w.values[40, 40] == pytest.approx(2 / math.pi)
    assert wg.overlap_from_wigner(w, w) == pytest.approx(1, abs=1e-10)


def test_coherent_gaussian_is_shifted():
    a0 = 1.2 - 0.8j
    w = wg.wigner(fs.coherent(a0, fs.TruncationPolicy(2)), (-5, 5), (-5, 5), 101)
    X, Y = np.meshgrid(w.xs, w.ys)
    ref = wg.W_MAX * np.exp(-2 * ((X - a0.real) ** 2 + (Y - a0.imag) ** 2))
    assert np.max(np.abs(w.values - ref)) < 1e-9


def test_cat4_normalized_bounded_and_negative(cat4_grid):
    assert cat4_grid.resolution == 256
    assert cat4_grid.x_range == (-7.0, 7.0)
    assert cat4_grid.integral() == pytest.approx(1, abs=1e-4)
    assert np.max(np.abs(cat4_grid.values)) <= wg.W_MAX * (1 + 1e-10)
    assert cat4_grid.values.min() < -0.1 * wg.W_MAX


def test_matches_parity_oracle_on_random_states():
    rng = np.random.default_rng(7)
    for dim in (6, 18, 30):
        v = rng.normal(size=dim) + 1j * rng.normal(size=dim)
        st = fs.OscState(v / np.linalg.norm(v))
        xs = np.linspace(-3, 3, 7)
        ys = np.linspace(-2.5, 2.5, 6)
        X, Y = np.meshgrid(xs, ys)
        direct = wg.wigner_values(st, xs, ys)
        oracle = wg.wigner_parity(st, X + 1j * Y)
        assert np.max(np.abs(direct - oracle)) < 1e-8


def test_displacement_covariance():
    # shift by a whole number of cells so the grids line up
    base = fs.make_cat(1.5, 2, policy=fs.TruncationPolicy(3))
    beta = 0.5 + 0.3j
    ext = (-6.0, 6.0)
    w0 = wg.wigner(base, ext, ext, 121)
    w1 = wg.wigner(fs.displace(base, beta), ext, ext, 121)
    kx, ky = 5, 3
    a = w1.values[ky:, kx:]
    b = w0.values[: 121 - ky, : 121 - kx]
    assert np.max(np.abs(a - b)) < 1e-6


def test_rotation_covariance():
    st = fs.make_cat(2 + 0.5j, 2, policy=fs.TruncationPolicy(3))
    ext = (-6.0, 6.0)
    w0 = wg.wigner(st, ext, ext, 101)
    w1 = wg.wigner(fs.rotate(st, math.pi / 2), ext, ext, 101)
    assert np.max(np.abs(w1.values - np.rot90(w0.values, -1))) < 1e-10


def test_overlaps_reproduce_fock_values(cat4, cat4_grid):
    phi = math.pi / 3
    so = M.quasi_orthogonal_displacement(phi, 3)
    for s in (so, so / 2):
        shifted = fs.displace(cat4, s * np.exp(1j * phi))
        w2 = wg.wigner(shifted, cat4_grid.x_range, cat4_grid.y_range, cat4_grid.resolution)
        fock = abs(fs.inner(cat4, shifted)) ** 2
        assert wg.overlap_from_wigner(cat4_grid, w2) == pytest.approx(fock, abs=1e-3)
        assert fock == pytest.approx(M.fidelity_exact(M.PerturbationParams(s, phi, 3)), abs=1e-3)
    assert fock > 0.4
    assert abs(fs.inner(cat4, fs.displace(cat4, so * np.exp(1j * phi)))) ** 2 < 1e-3


def test_grid_mismatch(cat4_grid):
    other = wg.wigner(fs.vacuum(5), (-3, 3), (-3, 3), 32)
    with pytest.raises(wg.GridMismatchError):
        wg.overlap_from_wigner(cat4_grid, other)


def test_extent_warning():
    with pytest.warns(wg.ExtentWarning):
        wg.wigner(fs.coherent(3, fs.TruncationPolicy(3)), (-1, 1), (-1, 1), 16)


def test_cat2_fringe_wavelength_scales_inverse_alpha():
    lam = {}
    for a in (3, 6):
        st = fs.make_cat(a, 2, policy=fs.TruncationPolicy(a))
        with pytest.warns(wg.ExtentWarning):
            w = wg.wigner(st, (-2, 2), (-2, 2), 201)  # central fringes only
        lam[a] = wg.interference_wavelength(w, math.pi / 2, half_length=1.5)
    assert lam[3] / lam[6] == pytest.approx(2.0, abs=0.3)
    assert lam[3] == pytest.approx(math.pi / (2 * 3), rel=0.05)


def test_cat4_wavelength_matches_fidelity_period(cat4_grid):
    phi = math.pi / 4
    lam = wg.interference_wavelength(cat4_grid, phi, half_length=2.0)
    period = math.pi / (math.sqrt(2) * 3)
    assert lam == pytest.approx(period, rel=0.2)


def test_coherent_has_no_fringes():
    w = wg.wigner(fs.coherent(1.0, fs.TruncationPolicy(1)), (-5, 5), (-5, 5), 101)
    with pytest.raises(wg.TooFewCrossingsError):
        wg.interference_wavelength(w, 0.3)


def test_csv_json_roundtrip(tmp_path):
    w = wg.wigner(fs.make_cat(1.5, 4, policy=fs.TruncationPolicy(2)), (-5, 5), (-5, 5), 64)
    csv_path, json_path = wg.save_grid(w, tmp_path / "cat", {"kind": "cat", "M": 4})
    assert csv_path.exists() and json_path.exists()
    back = wg.load_grid(tmp_path / "cat")
    assert back.same_grid(w)
    assert np.max(np.abs(back.values - w.values)) < 1e-12
    header = json.loads(json_path.read_text())
    assert header["schema"] == wg.SCHEMA and header["state"]["M"] == 4
