"""Wigner functions on the alpha plane.

Convention: W(alpha) = (2/pi) sum_n (-1)^n |<n|D(-alpha)|psi>|^2, so that
the integral of W over d^2 alpha is 1 and pi * int W1 W2 = |<psi1|psi2>|^2.
Grid arrays are indexed ``values[iy, ix]`` with Re(alpha) along x.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.interpolate import RectBivariateSpline

from . import fockspace as fs
from .fockspace import OscState

SCHEMA = "compass-metrology/wigner/1"
DEFAULT_RESOLUTION = 256
DEFAULT_MARGIN = 4.0
W_MAX = 2 / math.pi


class ExtentWarning(UserWarning):
    """The Wigner function has not decayed at the edge of the grid."""


class GridMismatchError(ValueError):
    pass


class TooFewCrossingsError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class WignerGrid:
    values: np.ndarray
    x_range: tuple[float, float]
    y_range: tuple[float, float]
    resolution: int

    @property
    def xs(self) -> np.ndarray:
        return np.linspace(*self.x_range, self.resolution)

    @property
    def ys(self) -> np.ndarray:
        return np.linspace(*self.y_range, self.resolution)

    @property
    def cell_area(self) -> float:
        dx = (self.x_range[1] - self.x_range[0]) / (self.resolution - 1)
        dy = (self.y_range[1] - self.y_range[0]) / (self.resolution - 1)
        return dx * dy

    def integral(self) -> float:
        return float(self.values.sum() * self.cell_area)

    def same_grid(self, other: "WignerGrid") -> bool:
        return (
            self.resolution == other.resolution
            and np.allclose(self.x_range, other.x_range, rtol=0, atol=1e-12)
            and np.allclose(self.y_range, other.y_range, rtol=0, atol=1e-12)
        )


def default_extent(alpha_mag: float, margin: float = DEFAULT_MARGIN) -> tuple[float, float]:
    L = abs(alpha_mag) + margin
    return (-L, L)


def wavefunction(amplitudes: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Position-space psi(q) = sum_n c_n h_n(q) with a = (q + i p)/sqrt(2).

    Uses the upward recurrence for normalized Hermite functions, which is
    stable (each h_n stays bounded by pi^(-1/4)).
    """
    q = np.asarray(q, dtype=float)
    h_prev = np.zeros_like(q)
    h = math.pi**-0.25 * np.exp(-q * q / 2)
    out = amplitudes[0] * h.astype(complex)
    for n in range(1, amplitudes.shape[0]):
        h, h_prev = math.sqrt(2 / n) * q * h - math.sqrt((n - 1) / n) * h_prev, h
        out += amplitudes[n] * h
    return out


def _effective_dim(state: OscState) -> int:
    nz = np.nonzero(np.abs(state.amplitudes) > 1e-300)[0]
    return int(nz[-1]) + 1 if nz.size else 1


def wigner_values(state: OscState, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """W on the tensor grid Re(alpha) = xs, Im(alpha) = ys, indexed [iy, ix].

    Evaluates (2/pi) int psi*(q+y) psi(q-y) e^{2ipy} dy with q = sqrt(2) Re(alpha)
    and p = sqrt(2) Im(alpha) by the trapezoid rule, which converges
    spectrally for the smooth, rapidly decaying integrand.
    """
    M = _effective_dim(state)
    c = state.amplitudes[:M]
    q = math.sqrt(2) * np.asarray(xs, dtype=float)
    p = math.sqrt(2) * np.asarray(ys, dtype=float)
    # support radius of the Hermite functions up to level M-1 and the band needed in y
    S = math.sqrt(2 * M + 1) + 8.0
    kmax = 2 * S + 2 * float(np.max(np.abs(p), initial=0.0))
    ny = int(math.ceil(2 * S / (math.pi / (1.5 * kmax)))) | 1
    y, dy = np.linspace(-S, S, ny, retstep=True)
    plus = wavefunction(c, q[:, None] + y[None, :])
    minus = wavefunction(c, q[:, None] - y[None, :])
    integrand = np.conj(plus) * minus  # [iq, iy]
    phase = np.exp(2j * y[:, None] * p[None, :])  # [iy, ip]
    W = (integrand @ phase).real * dy * (2 / math.pi)
    return np.ascontiguousarray(W.T)


def wigner(
    state: OscState,
    x_range: tuple[float, float] | None = None,
    y_range: tuple[float, float] | None = None,
    resolution: int = DEFAULT_RESOLUTION,
    alpha_mag: float | None = None,
) -> WignerGrid:
    """Wigner function of a pure state on a square grid.

    Without explicit ranges the grid spans |Re|, |Im| <= alpha_mag + 4,
    where alpha_mag defaults to sqrt(<n>).
    """
    if x_range is None or y_range is None:
        a = math.sqrt(state.mean_n()) if alpha_mag is None else alpha_mag
        ext = default_extent(a)
        x_range = x_range or ext
        y_range = y_range or ext
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    x_range = (float(x_range[0]), float(x_range[1]))
    y_range = (float(y_range[0]), float(y_range[1]))
    values = wigner_values(state, np.linspace(*x_range, resolution), np.linspace(*y_range, resolution))
    edge = np.concatenate([values[0], values[-1], values[:, 0], values[:, -1]])
    if np.max(np.abs(edge)) > 1e-6 * W_MAX:
        warnings.warn("Wigner function is not negligible at the grid edge; enlarge the extent", ExtentWarning, stacklevel=2)
    return WignerGrid(values, x_range, y_range, resolution)


def wigner_parity(state: OscState, alpha: np.ndarray, pad: int | None = None) -> np.ndarray:
    """Direct displaced-parity sum; slow, used as an oracle at small dim.

    ``pad`` extra levels hold D(-alpha)|psi>; by default they cover the
    displaced support sqrt(dim) + max|alpha| with a Poisson-style margin.
    """
    alpha = np.asarray(alpha, dtype=complex)
    if pad is None:
        reach = math.sqrt(state.dim) + float(np.max(np.abs(alpha), initial=0.0))
        pad = max(60, math.ceil(reach * reach + 8 * reach + 10) - state.dim)
    dim = state.dim + pad
    psi = np.zeros(dim, dtype=complex)
    psi[: state.dim] = state.amplitudes
    parity = (-1.0) ** np.arange(dim)
    out = np.empty(alpha.shape)
    for idx, a in np.ndenumerate(alpha):
        v = fs.displacement_matrix(complex(-a), dim) @ psi
        out[idx] = W_MAX * float(np.dot(parity, np.abs(v) ** 2))
    fs.displacement_matrix.cache_clear()
    return out


def overlap_from_wigner(w1: WignerGrid, w2: WignerGrid) -> float:
    """pi * sum W1 W2 dA, which approximates |<psi1|psi2>|^2."""
    if not w1.same_grid(w2):
        raise GridMismatchError("Wigner grids differ in extent or resolution")
    return float(math.pi * np.sum(w1.values * w2.values) * w1.cell_area)


def line_cut(
    w: WignerGrid,
    angle: float,
    center: complex = 0j,
    half_length: float | None = None,
    points: int = 2001,
) -> tuple[np.ndarray, np.ndarray]:
    """W sampled along center + t e^{i angle}, t in [-half_length, half_length]."""
    if half_length is None:
        half_length = 0.9 * min(w.x_range[1] - abs(center.real), w.y_range[1] - abs(center.imag))
    t = np.linspace(-half_length, half_length, points)
    z = center + t * np.exp(1j * angle)
    spline = RectBivariateSpline(w.ys, w.xs, w.values, kx=3, ky=3)
    return t, spline.ev(z.imag, z.real)


def zero_crossings(t: np.ndarray, v: np.ndarray, rel_tol: float = 1e-6, max_gap: int = 4) -> np.ndarray:
    """Zero positions by linear interpolation, ignoring numerically negligible values."""
    sig = np.nonzero(np.abs(v) > rel_tol * np.max(np.abs(v)))[0]
    out = []
    for i, j in zip(sig[:-1], sig[1:]):
        if j - i <= max_gap and np.sign(v[i]) != np.sign(v[j]):
            out.append(t[i] - v[i] * (t[j] - t[i]) / (v[j] - v[i]))
    return np.array(out)


def interference_wavelength(
    w: WignerGrid,
    angle: float,
    center: complex = 0j,
    half_length: float | None = None,
    points: int = 2001,
) -> float:
    """Twice the mean spacing of zero crossings along a straight cut."""
    t, v = line_cut(w, angle, center, half_length, points)
    z = zero_crossings(t, v)
    if z.size < 2:
        raise TooFewCrossingsError(f"found {z.size} zero crossing(s) along the cut")
    return float(2 * np.mean(np.diff(z)))


def save_grid(w: WignerGrid, stem: str | Path, state: dict | None = None) -> tuple[Path, Path]:
    """Write ``stem.csv`` (dense matrix, rows are Im alpha) and ``stem.json`` (header)."""
    stem = Path(stem)
    csv_path, json_path = stem.with_suffix(".csv"), stem.with_suffix(".json")
    np.savetxt(csv_path, w.values, delimiter=",", fmt="%.12e")
    header = {
        "schema": SCHEMA,
        "x_range": list(w.x_range),
        "y_range": list(w.y_range),
        "resolution": w.resolution,
        "layout": "rows=Im(alpha) ascending, columns=Re(alpha) ascending",
        "integral": w.integral(),
        "state": state or {},
    }
    json_path.write_text(json.dumps(header, indent=2, sort_keys=True) + "\n")
    return csv_path, json_path


def load_grid(stem: str | Path) -> WignerGrid:
    stem = Path(stem)
    header = json.loads(stem.with_suffix(".json").read_text())
    values = np.loadtxt(stem.with_suffix(".csv"), delimiter=",", ndmin=2)
    res = int(header["resolution"])
    if values.shape != (res, res):
        raise ValueError(f"CSV shape {values.shape} does not match resolution {res}")
    return WignerGrid(values, tuple(header["x_range"]), tuple(header["y_range"]), res)
