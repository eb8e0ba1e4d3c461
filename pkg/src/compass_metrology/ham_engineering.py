"""Raman-laser interaction engineering for a single trapped ion.

Several laser pairs driving the same sideband add up to one engineered
operator function f_k^(e)(n) = sum_p A_p n^p.  This module evaluates the
single-pair function f_k(n, eta), the Stirling-number series behind the
Taylor coefficients, the linear solve that fixes chosen A_p through the
relative Rabi frequencies, and the pulse durations that follow.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

DEFAULT_MMAX = 60
SERIES_RTOL = 1e-15
SINGULAR_COND = 1e12


class SingularSystemError(ValueError):
    """The chosen Lamb-Dicke parameters cannot fix the requested coefficients."""


@dataclass(frozen=True)
class RamanDrive:
    eta: float
    omega_rel: float = 1.0
    k: int = 0

    def __post_init__(self):
        if not 0 < self.eta < 1:
            raise ValueError(f"eta must lie in (0, 1), got {self.eta}")
        if self.k < 0:
            raise ValueError("sideband index k must be non-negative")


@dataclass(frozen=True)
class EngineeredCoeffs:
    A: np.ndarray
    k: int
    pmax: int
    omega_L: float = 1.0
    truncation_bound: float = 0.0

    def __getitem__(self, p: int) -> complex:
        return self.A[p]

    def evaluate(self, n) -> np.ndarray:
        """Truncated series sum_{p<=pmax} A_p n^p."""
        n = np.asarray(n, dtype=float)
        return np.polynomial.polynomial.polyval(n, self.A)


@dataclass(frozen=True)
class SeriesValue:
    value: float
    last_term: float
    converged: bool


# ---------------------------------------------------------------- f_k(n, eta)

def falling_factorial(n: int, l: int) -> int:
    """n (n-1) ... (n-l+1); zero once l exceeds n."""
    out = 1
    for j in range(l):
        out *= n - j
    return out


def f_k(n: int, eta: float, k: int = 0) -> complex:
    """Eigenvalue of f_k(n_hat, eta) on Fock level n."""
    if n < 0:
        raise ValueError("Fock level must be non-negative")
    total = 0j
    for l in range(n + 1):
        term = (1j * eta) ** (2 * l + k) / (math.factorial(l) * math.factorial(l + k))
        term *= falling_factorial(n, l)
        total += term
        if abs(term) < 1e-16 * max(abs(total), 1e-300) and l > 0:
            break
    return math.exp(-eta * eta / 2) * total


# ---------------------------------------------------------------- Stirling

_stirling_lock = threading.Lock()
_stirling_rows: list[list[int]] = [[1]]


def _ensure_stirling(m: int) -> None:
    with _stirling_lock:
        rows = _stirling_rows
        while len(rows) <= m:
            i = len(rows) - 1
            prev = rows[i]
            row = [0] * (i + 2)
            for p in range(1, i + 2):
                left = prev[p - 1]
                right = prev[p] if p <= i else 0
                row[p] = left + i * right
            rows.append(row)


def stirling_first_unsigned(m: int, p: int) -> int:
    """Number of permutations of m elements with exactly p cycles."""
    if m < 0 or p < 0 or p > m:
        raise ValueError(f"need 0 <= p <= m, got m={m}, p={p}")
    if len(_stirling_rows) <= m:
        _ensure_stirling(m)
    return _stirling_rows[m][p]


# ---------------------------------------------------------------- A_p series

def alpha_coeff(
    p: int,
    eta_j: float,
    k: int = 0,
    mmax: int = DEFAULT_MMAX,
    as_printed: bool = False,
) -> SeriesValue:
    """Series sum_{m>=p} S_m^(p) eta^(2m) / (m! (m+k)!) for the n^p coefficient.

    Expanding the falling factorial of f_k in powers of n gives signed
    Stirling numbers whose sign cancels the (i eta)^(2m) sign, so the series
    is positive-term.  ``as_printed=True`` inserts an extra (-1)^(m-p),
    kept only to document that variant; it does not reproduce f_k.
    """
    if p < 0 or mmax < p:
        raise ValueError("need 0 <= p <= mmax")
    total = 0.0
    term = 0.0
    eta2 = eta_j * eta_j
    for m in range(p, mmax + 1):
        num = stirling_first_unsigned(m, p)
        term = num / (math.factorial(m) * math.factorial(m + k)) * eta2**m
        if as_printed and (m - p) % 2:
            term = -term
        total += term
        if m > p and abs(term) < SERIES_RTOL * abs(total):
            return SeriesValue(total, abs(term), True)
    return SeriesValue(total, abs(term), abs(term) < SERIES_RTOL * abs(total))


def _drive_column(eta: float, k: int, ps: Iterable[int], mmax: int, as_printed: bool) -> np.ndarray:
    """Contribution of a unit-strength drive to each requested A_p."""
    pref = math.exp(-eta * eta / 2) * (1j * eta) ** k
    col = []
    for p in ps:
        if p == 0:
            col.append(pref / math.factorial(k))
        else:
            series = alpha_coeff(p, eta, k, mmax, as_printed)
            if not series.converged:
                raise ArithmeticError(f"alpha_{p} series did not converge within mmax={mmax}")
            col.append((-1) ** p * pref * series.value)
    return np.array(col, dtype=complex)


def engineered_A(
    drives: Sequence[RamanDrive],
    pmax: int,
    omega_L: float = 1.0,
    mmax: int = DEFAULT_MMAX,
    as_printed: bool = False,
) -> EngineeredCoeffs:
    if not drives:
        raise ValueError("at least one drive is required")
    ks = {d.k for d in drives}
    if len(ks) != 1:
        raise ValueError("all drives must excite the same sideband")
    k = ks.pop()
    ps = range(pmax + 1)
    A = np.zeros(pmax + 1, dtype=complex)
    for d in drives:
        A += d.omega_rel * _drive_column(d.eta, k, ps, mmax, as_printed)
    # first neglected order, used as the truncation bound of the polynomial
    nxt = sum(abs(d.omega_rel * _drive_column(d.eta, k, [pmax + 1], mmax, as_printed)[0]) for d in drives)
    return EngineeredCoeffs(A, k, pmax, omega_L, float(nxt))


@dataclass(frozen=True)
class RabiSolution:
    omega_rel: np.ndarray
    cond: float
    residual: float
    matrix: np.ndarray = field(repr=False)


def solve_rabi(
    etas: Sequence[float],
    k: int,
    targets: Mapping[int, complex] | Sequence[tuple[int, complex]],
    mmax: int = DEFAULT_MMAX,
    as_printed: bool = False,
) -> RabiSolution:
    """Relative Rabi frequencies that pin the requested A_p values."""
    items = sorted(dict(targets).items())
    if len(items) != len(etas):
        raise ValueError(f"{len(etas)} drives cannot fix {len(items)} coefficients")
    if not etas:
        raise ValueError("at least one drive is required")
    ps = [int(p) for p, _ in items]
    rhs = np.array([v for _, v in items], dtype=complex)
    M = np.column_stack([_drive_column(eta, k, ps, mmax, as_printed) for eta in etas])
    cond = float(np.linalg.cond(M))
    if not np.isfinite(cond) or cond > SINGULAR_COND:
        raise SingularSystemError(f"coefficient matrix is singular (cond={cond:.3e})")
    sol = np.linalg.solve(M, rhs)
    residual = float(np.max(np.abs(M @ sol - rhs)))
    return RabiSolution(np.real_if_close(sol, tol=1e6), cond, residual, M)


# ---------------------------------------------------------------- timing

@dataclass(frozen=True)
class PulseTiming:
    t_star: float  # seconds, Omega_L read as an angular frequency
    t_star_cyclic: float  # seconds, Omega_L read as a cyclic frequency (Hz)
    phi0: float
    phi1: float
    phi2: float


def pulse_timing(coeffs: EngineeredCoeffs, target_phi2: float) -> PulseTiming:
    """Duration t* with |Omega_L| A_2 t*/2 = target_phi2, plus the dependent phases."""
    A0, A1, A2 = (complex(coeffs.A[p]).real for p in range(3))
    if A2 == 0:
        raise ZeroDivisionError("A_2 vanishes; the n^2 phase cannot be accumulated")
    if coeffs.omega_L <= 0:
        raise ValueError("omega_L must be positive")
    t = 2 * target_phi2 / (coeffs.omega_L * A2)
    half = coeffs.omega_L * t / 2
    return PulseTiming(
        t_star=t,
        t_star_cyclic=t / (2 * math.pi),
        phi0=half * A0,
        phi1=half * A1,
        phi2=half * A2,
    )


def _both_conventions(rate_times_t: float, omega: float) -> dict[str, float]:
    return {
        "rad_per_s": rate_times_t / omega,
        "cycles_per_s": rate_times_t / (2 * math.pi * omega),
    }


def carrier_pulse_duration(theta: float, omega0: float) -> dict[str, float]:
    """Duration of a carrier pulse of area theta = |Omega_0| t."""
    return _both_conventions(theta, omega0)


def conditional_displacement_duration(amplitude: float, eta: float, omega0: float) -> dict[str, float]:
    """Duration for |alpha_bar| = eta |Omega_0| tau / 2."""
    return _both_conventions(2 * amplitude / eta, omega0)


def conditional_rotation_duration(theta_bar: float, eta: float, omega0: float) -> dict[str, float]:
    """Duration for theta_bar = |Omega_0| eta^2 t / 2."""
    return _both_conventions(2 * theta_bar / eta**2, omega0)


def gate_sequence_budget(
    alpha_mag: float = 3.0,
    eta: float = 0.15,
    omega_carrier: float = 250e3,
    omega_sideband: float = 300e3,
) -> dict[str, dict[str, float]]:
    """Durations of the gate-based generation steps under both frequency readings.

    ``omega_*`` are the numbers quoted as Omega_0 / 2 pi, in Hz.  Under the
    'rad_per_s' label they are multiplied by 2 pi; under 'cycles_per_s'
    they are used as they stand in theta = |Omega_0| t.
    """
    out: dict[str, dict[str, float]] = {}
    for label, scale in (("rad_per_s", 2 * math.pi), ("cycles_per_s", 1.0)):
        wc, ws = omega_carrier * scale, omega_sideband * scale
        steps = {
            "pi_half_pulse": (math.pi / 2) / wc,
            "pi_pulse": math.pi / wc,
            "max_displacement": 2 * (2 * alpha_mag) / (eta * ws),
            "conditional_rotation": 2 * (math.pi / 4) / (eta**2 * ws),
        }
        steps["total"] = (
            steps["pi_half_pulse"] + steps["pi_pulse"] + 2 * steps["max_displacement"] + steps["conditional_rotation"]
        )
        out[label] = steps
    return out
