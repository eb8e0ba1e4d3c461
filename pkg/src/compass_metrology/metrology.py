"""Fidelity and detection-probability formulas, estimation, and uncertainty.

Closed forms are functions of y = |alpha| s and the perturbation direction
varphi.  The exact response of the simulated protocol is wrapped by
:class:`ResponseModel`, which tabulates P_g(s) once and inverts it for the
estimator.  Monte Carlo replicas draw their generators from
``numpy.random.SeedSequence(seed).spawn(replicas)``, so replica ``i`` is
reproducible independently of how many others are run.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from typing import Literal

import numpy as np
from scipy import optimize, stats
from scipy.interpolate import CubicSpline

from . import circuits
from .circuits import Approach

Model = Literal["simulated", "closed"]


class NonMonotoneWarning(UserWarning):
    """P_g is not monotone on the whole prior interval [0, s_o]."""


class DivergentUncertaintyError(ArithmeticError):
    """The slope of P_g vanishes, so the error-propagation formula diverges."""


@dataclass(frozen=True)
class PerturbationParams:
    s: float
    varphi: float
    alpha_mag: float

    def __post_init__(self):
        if self.alpha_mag <= 0:
            raise ValueError("alpha_mag must be positive")

    @property
    def b_plus(self) -> float:
        return math.cos(self.varphi) + math.sin(self.varphi)

    @property
    def b_minus(self) -> float:
        return math.cos(self.varphi) - math.sin(self.varphi)

    @property
    def b(self) -> float:
        return max(abs(self.b_plus), abs(self.b_minus))

    @property
    def y(self) -> float:
        return self.alpha_mag * self.s

    def at(self, s: float) -> "PerturbationParams":
        return replace(self, s=s)


# ---------------------------------------------------------------- fidelity

def fidelity_approx(p: PerturbationParams) -> float:
    return (math.cos(p.b_plus * p.y) * math.cos(p.b_minus * p.y)) ** 2


def fidelity_exact(p: PerturbationParams) -> float:
    return math.exp(-p.s * p.s) * fidelity_approx(p)


def quasi_orthogonal_displacement(varphi: float, alpha_mag: float) -> float:
    if alpha_mag <= 0:
        raise ValueError("alpha_mag must be positive")
    b = max(abs(math.cos(varphi) + math.sin(varphi)), abs(math.cos(varphi) - math.sin(varphi)))
    return math.pi / (2 * b * alpha_mag)


# ---------------------------------------------------------------- gate-based P_g

def approach1_amplitudes(p: PerturbationParams) -> tuple[float, complex]:
    """Residual amplitudes (A1, A2) on |0> and |-alpha_bar> after reversal."""
    y = p.y
    a1 = math.cos(p.b_plus * y) * math.cos(p.b_minus * y)
    a2 = (np.exp(-2j * math.sin(p.varphi) * y) - np.exp(2j * math.cos(p.varphi) * y)) / 4
    return a1, complex(a2)


def pg_closed_approach1(p: PerturbationParams) -> float:
    # A1^2 (1 + 2|A2|^2/A1^2) written without the removable division
    a1, a2 = approach1_amplitudes(p)
    return a1 * a1 + 2 * abs(a2) ** 2


def dpg_dy_approach1(p: PerturbationParams) -> float:
    # 2|A2|^2 = sin^2(b_+ y)/2
    y, bp, bm = p.y, p.b_plus, p.b_minus
    a1 = math.cos(bp * y) * math.cos(bm * y)
    da1 = -bp * math.sin(bp * y) * math.cos(bm * y) - bm * math.cos(bp * y) * math.sin(bm * y)
    return 2 * a1 * da1 + bp * math.sin(bp * y) * math.cos(bp * y)


# ---------------------------------------------------------------- Kerr-based P_g

def _a_coeffs(varphi: float, phi1: float) -> tuple[float, float, float, float]:
    """(a_s^+, a_s^-, a_c^+, a_c^-)."""
    return (
        2 * math.sin(varphi + phi1),
        2 * math.sin(varphi - phi1),
        2 * math.cos(varphi + phi1),
        2 * math.cos(varphi - phi1),
    )


def approach2_B(p: PerturbationParams, phi1: float) -> tuple[float, float, complex, complex]:
    """B1..B4 exactly as printed, including their overall factor 1/2."""
    y, a2 = p.y, p.alpha_mag**2
    asp, asm, acp, acm = (a * y for a in _a_coeffs(p.varphi, phi1))
    c = math.cos
    s = math.sin
    b1 = (c(asp) + c(acp) + c(asm) + c(acm)) / 2
    b2 = (c(asp) - c(acp) + c(asm) - c(acm)) / 2
    q = math.pi / 4
    b3 = 1j * (np.exp(-1j * (q + a2)) * (s(asp) + s(acm)) + np.exp(1j * (q - a2)) * (s(asm) + s(acp))) / 2
    b4 = 1j * (np.exp(-1j * (q - a2)) * (s(asp) - s(acm)) + np.exp(1j * (q + a2)) * (s(asm) - s(acp))) / 2
    return b1, b2, complex(b3), complex(b4)


def pg_from_B(p: PerturbationParams, phi1: float) -> float:
    """Squared norm of the residual |g> branch from the B coefficients.

    The printed B's carry 1/2 where normalization requires 1/4, so the sum
    of squares is divided by 4 here; this is what makes P_g(0) = 1.
    """
    b1, b2, b3, b4 = approach2_B(p, phi1)
    return (b1 * b1 + b2 * b2 + abs(b3) ** 2 + abs(b4) ** 2) / 4


def pg_closed_approach2(p: PerturbationParams, phi1: float = 0.0, as_printed: bool = False) -> float:
    """Kerr-based P_g(s).

    The default pairs the cosines as products, which is the simplification
    of :func:`pg_from_B`.  ``as_printed=True`` evaluates the expression as
    typeset (three sums and one juxtaposed product); it does not satisfy
    P_g(0) = 1 and is kept for reference only.
    """
    asp, asm, acp, acm = (a * p.y for a in _a_coeffs(p.varphi, phi1))
    c = math.cos
    if as_printed:
        return 0.5 * (1 + (c(asp) + c(acm) + c(asm) * c(acp)) / 2)
    return 0.5 * (1 + (c(asp) * c(asm) + c(acp) * c(acm)) / 2)


def dpg_dy_approach2(p: PerturbationParams, phi1: float = 0.0) -> float:
    y = p.y
    asp, asm, acp, acm = _a_coeffs(p.varphi, phi1)
    c, s = math.cos, math.sin

    def dprod(u, v):
        return -u * s(u * y) * c(v * y) - v * c(u * y) * s(v * y)

    return 0.25 * (dprod(asp, asm) + dprod(acp, acm))


def pg_closed(p: PerturbationParams, approach: Approach | str, phi1: float = 0.0) -> float:
    if Approach.parse(approach) is Approach.GATE_BASED:
        return pg_closed_approach1(p)
    return pg_closed_approach2(p, phi1)


def dpg_dy(p: PerturbationParams, approach: Approach | str, phi1: float = 0.0) -> float:
    if Approach.parse(approach) is Approach.GATE_BASED:
        return dpg_dy_approach1(p)
    return dpg_dy_approach2(p, phi1)


# ---------------------------------------------------------------- response model

def _first_local_min(s: np.ndarray, pg: np.ndarray) -> int | None:
    """Index of the first grid point where P_g stops decreasing, if any."""
    d = np.diff(pg)
    rising = np.nonzero(d > 0)[0]
    return int(rising[0]) if rising.size else None


class ResponseModel:
    """P_g(s) of one protocol configuration on the prior interval [0, s_o].

    The simulated curve is tabulated on ``npts`` points and interpolated
    with a cubic spline; root finding for the estimator runs on that spline.
    """

    def __init__(
        self,
        approach: Approach | str,
        alpha_mag: float,
        varphi: float,
        phi1: float = 0.0,
        phi0: float = 0.0,
        nu: float = 0.0,
        npts: int = 401,
    ):
        self.approach = Approach.parse(approach)
        self.alpha_mag = float(alpha_mag)
        self.varphi = float(varphi)
        self.phi1 = float(phi1)
        self.params = PerturbationParams(0.0, self.varphi, self.alpha_mag)
        self.s_o = quasi_orthogonal_displacement(self.varphi, self.alpha_mag)
        self.spec = circuits.build(self.approach, self.alpha_mag, nu=nu, phi0=phi0, phi1=phi1)
        self._npts = npts
        self._sim: tuple[np.ndarray, np.ndarray, CubicSpline] | None = None

    # closed forms
    def closed(self, s: float) -> float:
        return pg_closed(self.params.at(s), self.approach, self.phi1)

    def closed_slope(self, s: float) -> float:
        """dP_g/dy of the closed form at s."""
        return dpg_dy(self.params.at(s), self.approach, self.phi1)

    # simulator
    def simulated(self, s: float) -> float:
        return circuits.run_protocol(self.spec, s, self.varphi)[0]

    def _table(self) -> tuple[np.ndarray, np.ndarray, CubicSpline]:
        if self._sim is None:
            s = np.linspace(0.0, self.s_o, self._npts)
            pg = circuits.pg_scan(self.spec, s, self.varphi)
            self._sim = (s, pg, CubicSpline(s, pg))
        return self._sim

    def interpolated(self, s: float) -> float:
        return float(self._table()[2](s))

    def curve(self, model: Model):
        if model == "simulated":
            return self.interpolated
        if model == "closed":
            return self.closed
        raise ValueError(f"unknown model {model!r}")

    @lru_cache(maxsize=4)
    def effective_bound(self, model: Model = "simulated") -> float:
        """Upper end of the monotone-decreasing stretch of P_g starting at s = 0."""
        f = self.curve(model)
        s = np.linspace(0.0, self.s_o, 2001)
        pg = np.array([f(x) for x in s])
        i = _first_local_min(s, pg)
        if i is None:
            return self.s_o
        lo, hi = s[max(i - 1, 0)], s[min(i + 1, s.size - 1)]
        res = optimize.minimize_scalar(f, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
        warnings.warn(
            f"P_g is not monotone on [0, s_o={self.s_o:.4f}]; inverting on [0, {res.x:.4f}]",
            NonMonotoneWarning,
            stacklevel=2,
        )
        return float(res.x)

    def invert(self, xi: float, model: Model = "simulated") -> float:
        f = self.curve(model)
        bound = self.effective_bound(model)
        if xi >= f(0.0):
            return 0.0
        if xi <= f(bound):
            return bound
        return float(optimize.brentq(lambda s: f(s) - xi, 0.0, bound, xtol=1e-13, rtol=1e-15))


@lru_cache(maxsize=32)
def response_model(
    approach: Approach | str, alpha_mag: float, varphi: float, phi1: float = 0.0
) -> ResponseModel:
    return ResponseModel(approach, alpha_mag, varphi, phi1)


# ---------------------------------------------------------------- estimation

def sample_counts(
    s_true: float,
    p: PerturbationParams,
    approach: Approach | str,
    R: int,
    seed: int,
    phi1: float = 0.0,
) -> int:
    """Number of |g> outcomes in R repetitions at the exact simulated P_g."""
    if R < 1:
        raise ValueError("R must be at least 1")
    model = response_model(approach, p.alpha_mag, p.varphi, phi1)
    pg = min(max(model.simulated(s_true), 0.0), 1.0)
    return int(np.random.default_rng(seed).binomial(R, pg))


def estimate_s(
    r: int,
    R: int,
    p: PerturbationParams,
    approach: Approach | str,
    phi1: float = 0.0,
    model: Model = "simulated",
) -> float:
    """s_hat = P_g^{-1}(r/R) restricted to the prior interval."""
    if not 0 <= r <= R or R < 1:
        raise ValueError(f"need 0 <= r <= R and R >= 1, got r={r}, R={R}")
    return response_model(approach, p.alpha_mag, p.varphi, phi1).invert(r / R, model)


def analytic_uncertainty(
    s: float,
    p: PerturbationParams,
    approach: Approach | str,
    R: int,
    phi1: float = 0.0,
) -> float:
    """sqrt((1 - P_g) P_g) / (sqrt(R) |alpha| |dP_g/dy|) from the closed form."""
    q = p.at(s)
    pg = pg_closed(q, approach, phi1)
    slope = dpg_dy(q, approach, phi1)
    if slope == 0 or abs(slope) < 1e-14:
        raise DivergentUncertaintyError(f"dP_g/dy vanishes at s={s}")
    return math.sqrt(max((1 - pg) * pg, 0.0)) / (math.sqrt(R) * p.alpha_mag * abs(slope))


@dataclass
class EstimationReport:
    s_true: float
    R: int
    r: int
    s_hat: float
    delta_analytic: float
    delta_empirical: float
    seed: int
    replicas: int = 1
    s_hat_mean: float = float("nan")
    ks_distance: float = float("nan")
    effective_bound: float = float("nan")
    approach: str = Approach.GATE_BASED.value
    alpha_mag: float = float("nan")
    varphi: float = float("nan")
    counts: np.ndarray = field(default=None, repr=False)
    estimates: np.ndarray = field(default=None, repr=False)

    def summary(self) -> dict:
        d = asdict(self)
        d.pop("counts")
        d.pop("estimates")
        return d


def replica_rngs(seed: int, replicas: int) -> list[np.random.Generator]:
    return [np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(replicas)]


def run_estimation(
    s_true: float,
    p: PerturbationParams,
    approach: Approach | str,
    R: int,
    replicas: int,
    seed: int,
    phi1: float = 0.0,
    model: Model = "simulated",
) -> EstimationReport:
    if R < 1 or replicas < 1:
        raise ValueError("R and replicas must be positive")
    approach = Approach.parse(approach)
    resp = response_model(approach, p.alpha_mag, p.varphi, phi1)
    pg = min(max(resp.simulated(s_true), 0.0), 1.0)
    counts = np.array([rng.binomial(R, pg) for rng in replica_rngs(seed, replicas)])
    cache: dict[int, float] = {}
    for r in np.unique(counts):
        cache[int(r)] = resp.invert(int(r) / R, model)
    estimates = np.array([cache[int(r)] for r in counts])
    delta = analytic_uncertainty(s_true, p, approach, R, phi1)
    ks = stats.kstest(estimates, stats.norm(loc=s_true, scale=delta).cdf).statistic if replicas > 1 else float("nan")
    return EstimationReport(
        s_true=s_true,
        R=R,
        r=int(counts[0]),
        s_hat=float(estimates[0]),
        delta_analytic=delta,
        delta_empirical=float(estimates.std(ddof=1)) if replicas > 1 else float("nan"),
        seed=seed,
        replicas=replicas,
        s_hat_mean=float(estimates.mean()),
        ks_distance=float(ks),
        effective_bound=resp.effective_bound(model),
        approach=approach.value,
        alpha_mag=p.alpha_mag,
        varphi=p.varphi,
        counts=counts,
        estimates=estimates,
    )


@dataclass(frozen=True)
class ScalingStudy:
    alphas: np.ndarray
    delta_analytic: np.ndarray
    delta_empirical: np.ndarray
    slope_analytic: float
    slope_empirical: float


def heisenberg_scaling(
    alphas,
    y: float,
    R: int,
    approach: Approach | str = Approach.GATE_BASED,
    varphi: float = math.pi / 3,
    replicas: int = 2000,
    seed: int = 0,
    phi1: float = 0.0,
) -> ScalingStudy:
    """Uncertainty of s_hat versus |alpha| at fixed y = |alpha| s."""
    alphas = np.asarray(alphas, dtype=float)
    da, de = [], []
    seeds = np.random.SeedSequence(seed).generate_state(alphas.size)
    for a, sd in zip(alphas, seeds):
        p = PerturbationParams(y / a, varphi, a)
        rep = run_estimation(y / a, p, approach, R, replicas, int(sd), phi1)
        da.append(rep.delta_analytic)
        de.append(rep.delta_empirical)
    da, de = np.array(da), np.array(de)
    la = np.log(alphas)
    return ScalingStudy(
        alphas,
        da,
        de,
        float(np.polyfit(la, np.log(da), 1)[0]),
        float(np.polyfit(la, np.log(de), 1)[0]),
    )
