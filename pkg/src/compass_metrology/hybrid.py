"""Two-level ion coupled to one motional mode.

The state is stored in the sigma_z basis as |psi> = branch_g |g> + branch_e |e>.
Pauli matrices use the standard form in the ordered basis (|e>, |g>), so
sigma_+ = |e><g|.  The sigma_x eigenstates are |up_x> = (|e> + |g>)/sqrt(2)
and |down_x> = (|e> - |g>)/sqrt(2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Literal

import numpy as np

from . import fockspace as fs
from .fockspace import OscState

Level = Literal["g", "e"]
SQRT_HALF = 1 / math.sqrt(2)


@dataclass(frozen=True, eq=False)
class HybridState:
    branch_g: OscState
    branch_e: OscState

    def __post_init__(self):
        if self.branch_g.dim != self.branch_e.dim:
            raise ValueError("branches must share a Fock dimension")

    @property
    def dim(self) -> int:
        return self.branch_g.dim

    @property
    def tail_tol(self) -> float:
        return self.branch_g.tail_tol

    @classmethod
    def product(cls, osc: OscState, level: Level) -> "HybridState":
        zero = OscState(np.zeros_like(osc.amplitudes), osc.tail_tol)
        return cls(osc, zero) if level == "g" else cls(zero, osc)

    @classmethod
    def from_x_branches(cls, up: OscState, down: OscState) -> "HybridState":
        """Build up |up_x> + down |down_x>."""
        e = (up.amplitudes + down.amplitudes) * SQRT_HALF
        g = (up.amplitudes - down.amplitudes) * SQRT_HALF
        return cls(OscState(g, up.tail_tol), OscState(e, up.tail_tol))

    def x_branches(self) -> tuple[OscState, OscState]:
        e, g = self.branch_e.amplitudes, self.branch_g.amplitudes
        return (
            OscState((e + g) * SQRT_HALF, self.tail_tol),
            OscState((e - g) * SQRT_HALF, self.tail_tol),
        )

    def vector(self) -> np.ndarray:
        """Flattened (e, g) amplitude vector, handy for overlaps."""
        return np.concatenate([self.branch_e.amplitudes, self.branch_g.amplitudes])

    def norm(self) -> float:
        return float(np.linalg.norm(self.vector()))

    def scaled(self, factor: complex) -> "HybridState":
        return HybridState(self.branch_g.scaled(factor), self.branch_e.scaled(factor))


def ground_state(dim: int, tail_tol: float = fs.DEFAULT_TAIL_TOL) -> HybridState:
    """|0> (x) |g>."""
    return HybridState.product(fs.vacuum(dim, tail_tol), "g")


def hybrid_inner(a: HybridState, b: HybridState) -> complex:
    return complex(np.vdot(a.vector(), b.vector()))


def hybrid_fidelity(a: HybridState, b: HybridState) -> float:
    """|<a|b>|^2 / (<a|a><b|b>), insensitive to global phase and scale."""
    return abs(hybrid_inner(a, b)) ** 2 / (a.norm() ** 2 * b.norm() ** 2)


@dataclass(frozen=True)
class CarrierPulse:
    """Carrier rotation of area ``theta`` with Raman phase ``phi``."""

    theta: float
    phi: float

    def inverse(self) -> "CarrierPulse":
        return CarrierPulse(self.theta, self.phi + math.pi)

    def matrix(self) -> np.ndarray:
        """2x2 unitary in the (e, g) basis."""
        vx, vy = math.cos(self.phi), -math.sin(self.phi)
        sx = np.array([[0, 1], [1, 0]], dtype=complex)
        sy = np.array([[0, -1j], [1j, 0]], dtype=complex)
        c, s = math.cos(self.theta / 2), math.sin(self.theta / 2)
        return c * np.eye(2) - 1j * s * (vx * sx + vy * sy)


def carrier_rotation(s: HybridState, p: CarrierPulse) -> HybridState:
    U = p.matrix()
    e, g = s.branch_e.amplitudes, s.branch_g.amplitudes
    new_e = U[0, 0] * e + U[0, 1] * g
    new_g = U[1, 0] * e + U[1, 1] * g
    return HybridState(OscState(new_g, s.tail_tol), OscState(new_e, s.tail_tol))


def apply_x_diagonal(
    s: HybridState,
    on_up: Callable[[OscState], OscState],
    on_down: Callable[[OscState], OscState],
) -> HybridState:
    """Apply separate motional maps to the sigma_x = +1 and -1 branches."""
    up, down = s.x_branches()
    return HybridState.from_x_branches(on_up(up), on_down(down))


def conditional_rotation(s: HybridState, theta_bar: float, nu: float) -> HybridState:
    """exp(i nu sigma_x) exp(i theta_bar sigma_x n)."""
    return apply_x_diagonal(
        s,
        lambda u: fs.rotate(u, theta_bar).scaled(np.exp(1j * nu)),
        lambda d: fs.rotate(d, -theta_bar).scaled(np.exp(-1j * nu)),
    )


def conditional_displacement(s: HybridState, beta: complex, active_level: Level) -> HybridState:
    if active_level == "e":
        return HybridState(s.branch_g, fs.displace(s.branch_e, beta))
    if active_level == "g":
        return HybridState(fs.displace(s.branch_g, beta), s.branch_e)
    raise ValueError(f"unknown electronic level {active_level!r}")


def displace_both(s: HybridState, beta: complex) -> HybridState:
    """Unconditional displacement of the motion, acting equally on |g> and |e>."""
    return HybridState(fs.displace(s.branch_g, beta), fs.displace(s.branch_e, beta))


def kerr_gate(s: HybridState, phi0: float, phi1: float, phi2: float) -> HybridState:
    """exp(-i phi0 sigma_x) exp(-i phi1 sigma_x n) exp(-i phi2 sigma_x n^2)."""
    return apply_x_diagonal(
        s,
        lambda u: fs.number_phase(u, phi0, phi1, phi2),
        lambda d: fs.number_phase(d, -phi0, -phi1, -phi2),
    )


def measure_populations(s: HybridState) -> tuple[float, float]:
    pg = s.branch_g.norm() ** 2
    pe = s.branch_e.norm() ** 2
    return pg, pe
