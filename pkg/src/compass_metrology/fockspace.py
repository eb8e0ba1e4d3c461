"""Truncated Fock-space states of a single motional mode.

States are dense complex amplitude vectors over |0>..|dim-1>.  All
operations return new states; nothing is mutated in place.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

DEFAULT_TAIL_TOL = 1e-10
GUARD_LEVELS = 5


class TruncationError(RuntimeError):
    """Raised when a state leaks probability into the top of the Fock basis."""


@dataclass(frozen=True)
class TruncationPolicy:
    """Fock cutoff chosen from the largest coherent amplitude a run reaches."""

    max_alpha: float
    tail_tol: float = DEFAULT_TAIL_TOL

    def __post_init__(self):
        if self.max_alpha < 0:
            raise ValueError("max_alpha must be non-negative")
        if not 0 < self.tail_tol < 1:
            raise ValueError("tail_tol must lie in (0, 1)")

    @property
    def dim(self) -> int:
        a = abs(self.max_alpha)
        return int(math.ceil(a * a + 8 * a + 10))


@dataclass(frozen=True, eq=False)
class OscState:
    amplitudes: np.ndarray
    tail_tol: float = DEFAULT_TAIL_TOL

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def tail_mass(self, levels: int = GUARD_LEVELS) -> float:
        tail = self.amplitudes[-levels:]
        return float(np.vdot(tail, tail).real)

    def mean_n(self) -> float:
        p = np.abs(self.amplitudes) ** 2
        return float(np.dot(np.arange(self.dim), p) / p.sum())

    def scaled(self, factor: complex) -> "OscState":
        return OscState(factor * self.amplitudes, self.tail_tol)

    def __add__(self, other: "OscState") -> "OscState":
        _check_dims(self, other)
        return OscState(self.amplitudes + other.amplitudes, self.tail_tol)

    def __sub__(self, other: "OscState") -> "OscState":
        _check_dims(self, other)
        return OscState(self.amplitudes - other.amplitudes, self.tail_tol)

    def to_json(self) -> str:
        pairs = [[float(z.real), float(z.imag)] for z in self.amplitudes]
        return json.dumps({"dim": self.dim, "tail_tol": self.tail_tol, "amplitudes": pairs})

    @classmethod
    def from_json(cls, text: str) -> "OscState":
        data = json.loads(text)
        amps = np.array([complex(re, im) for re, im in data["amplitudes"]])
        if amps.shape[0] != data["dim"]:
            raise ValueError("amplitude count does not match dim")
        return cls(amps, data.get("tail_tol", DEFAULT_TAIL_TOL))


def _check_dims(a: OscState, b: OscState) -> None:
    if a.dim != b.dim:
        raise ValueError(f"dimension mismatch: {a.dim} vs {b.dim}")


def _resolve_dim(policy: TruncationPolicy | int) -> tuple[int, float]:
    if isinstance(policy, TruncationPolicy):
        return policy.dim, policy.tail_tol
    return int(policy), DEFAULT_TAIL_TOL


def guard(
    amplitudes: np.ndarray,
    tail_tol: float,
    renormalize: bool = True,
    target_norm: float = 1.0,
) -> OscState:
    """Check the truncation tail and optionally rescale to ``target_norm``.

    The tail test is relative to the state's own weight, so it applies
    equally to the unnormalized branches of a hybrid state.
    """
    tail = amplitudes[-GUARD_LEVELS:]
    nrm2 = float(np.vdot(amplitudes, amplitudes).real)
    tail_mass = float(np.vdot(tail, tail).real)
    if nrm2 > 0 and tail_mass / nrm2 > tail_tol:
        raise TruncationError(
            f"tail mass {tail_mass / nrm2:.3e} exceeds tail_tol {tail_tol:.1e} "
            f"at dim {amplitudes.shape[0]}"
        )
    if renormalize and nrm2 > 0:
        amplitudes = amplitudes * (target_norm / math.sqrt(nrm2))
    return OscState(amplitudes, tail_tol)


def fock(n: int, dim: int, tail_tol: float = DEFAULT_TAIL_TOL) -> OscState:
    if not 0 <= n < dim:
        raise ValueError(f"level {n} outside basis of size {dim}")
    amps = np.zeros(dim, dtype=complex)
    amps[n] = 1.0
    return OscState(amps, tail_tol)


def vacuum(dim: int, tail_tol: float = DEFAULT_TAIL_TOL) -> OscState:
    return fock(0, dim, tail_tol)


def coherent_amplitudes(alpha: complex, dim: int) -> np.ndarray:
    """Untruncated-normalization coefficients exp(-|a|^2/2) a^n / sqrt(n!)."""
    amps = np.empty(dim, dtype=complex)
    amps[0] = math.exp(-abs(alpha) ** 2 / 2)
    for n in range(1, dim):
        amps[n] = amps[n - 1] * alpha / math.sqrt(n)
    return amps


def coherent(alpha: complex, policy: TruncationPolicy | int) -> OscState:
    if isinstance(policy, TruncationPolicy) and abs(alpha) > policy.max_alpha + 1e-12:
        raise ValueError(f"|alpha|={abs(alpha):.3f} exceeds policy max_alpha={policy.max_alpha}")
    dim, tol = _resolve_dim(policy)
    return guard(coherent_amplitudes(alpha, dim), tol)


def inner(a: OscState, b: OscState) -> complex:
    """<a|b>, conjugate-linear in the first argument."""
    _check_dims(a, b)
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def fidelity(a: OscState, b: OscState) -> float:
    return abs(inner(a, b)) ** 2


def coherent_overlap(alpha: complex, beta: complex) -> complex:
    """Closed-form <alpha|beta> for untruncated coherent states."""
    return complex(np.exp(-(abs(alpha) ** 2 + abs(beta) ** 2) / 2 + np.conj(alpha) * beta))


def _laguerre_table(x: float, dim: int) -> list[np.ndarray]:
    """L_n^{(k)}(x) for k = 0..dim-1 and n = 0..dim-1-k, by upward recurrence in n."""
    table = []
    for k in range(dim):
        nmax = dim - 1 - k
        L = np.empty(nmax + 1)
        L[0] = 1.0
        if nmax >= 1:
            L[1] = 1.0 + k - x
        for n in range(1, nmax):
            L[n + 1] = ((2 * n + 1 + k - x) * L[n] - (n + k) * L[n - 1]) / (n + 1)
        table.append(L)
    return table


@lru_cache(maxsize=64)
def displacement_matrix(beta: complex, dim: int) -> np.ndarray:
    """Fock matrix elements <m|D(beta)|n> from associated Laguerre polynomials.

    For m >= n the element is sqrt(n!/m!) beta^(m-n) exp(-|beta|^2/2)
    L_n^(m-n)(|beta|^2); the m < n half follows from D(beta)^dagger = D(-beta).
    Prefactors are assembled in log space so the factorials never overflow.
    """
    if beta == 0:
        D = np.eye(dim, dtype=complex)
        D.setflags(write=False)
        return D
    x = abs(beta) ** 2
    D = np.zeros((dim, dim), dtype=complex)
    laguerre = _laguerre_table(x, dim)
    lg = np.array([math.lgamma(n + 1) for n in range(dim)])
    log_r = math.log(abs(beta))
    phase = beta / abs(beta)
    mphase = -np.conj(beta) / abs(beta)
    for k in range(dim):
        n = np.arange(dim - k)
        m = n + k
        mag = np.exp(0.5 * (lg[n] - lg[m]) + k * log_r - x / 2) * laguerre[k]
        D[m, n] = mag * phase**k
        if k:
            D[n, m] = mag * mphase**k
    D.setflags(write=False)
    return D


def displace(s: OscState, beta: complex) -> OscState:
    """D(beta) = exp(beta a^dag - beta^* a); the input norm is preserved."""
    D = displacement_matrix(complex(beta), s.dim)
    return guard(D @ s.amplitudes, s.tail_tol, target_norm=s.norm())


def rotate(s: OscState, theta: float) -> OscState:
    """exp(i theta n): maps |alpha> to |alpha e^{i theta}>."""
    n = np.arange(s.dim)
    return OscState(s.amplitudes * np.exp(1j * theta * n), s.tail_tol)


def number_phase(s: OscState, phi0: float, phi1: float, phi2: float) -> OscState:
    """exp(-i (phi0 + phi1 n + phi2 n^2)) applied level by level."""
    n = np.arange(s.dim, dtype=float)
    return OscState(s.amplitudes * np.exp(-1j * (phi0 + phi1 * n + phi2 * n * n)), s.tail_tol)


def kerr_phase(s: OscState, phi2: float) -> OscState:
    return number_phase(s, 0.0, 0.0, phi2)


def superpose(terms: Sequence[tuple[complex, complex]], policy: TruncationPolicy | int) -> OscState:
    """Unnormalized sum of c |alpha> over (c, alpha) pairs."""
    dim, tol = _resolve_dim(policy)
    amps = np.zeros(dim, dtype=complex)
    for c, alpha in terms:
        amps += c * coherent_amplitudes(alpha, dim)
    return OscState(amps, tol)


def make_cat(
    alpha: complex,
    M: int,
    gammas: Sequence[float] | None = None,
    policy: TruncationPolicy | int | None = None,
    normalize: bool = True,
) -> OscState:
    """Circular superposition (1/sqrt(M)) sum_k e^{i gamma_k} |e^{2 pi i k/M} alpha>, k=1..M."""
    if M < 1:
        raise ValueError("M must be at least 1")
    gammas = np.zeros(M) if gammas is None else np.asarray(gammas, dtype=float)
    if gammas.shape != (M,):
        raise ValueError(f"expected {M} phases, got {gammas.shape}")
    if policy is None:
        policy = TruncationPolicy(abs(alpha))
    terms = [
        (np.exp(1j * g) / math.sqrt(M), alpha * np.exp(2j * math.pi * k / M))
        for k, g in zip(range(1, M + 1), gammas)
    ]
    state = superpose(terms, policy)
    return guard(state.amplitudes, state.tail_tol, renormalize=normalize)


# Dense operators, used as independent oracles in tests and small studies.

def annihilation(dim: int) -> np.ndarray:
    return np.diag(np.sqrt(np.arange(1, dim, dtype=float)), 1).astype(complex)


def number_operator(dim: int) -> np.ndarray:
    return np.diag(np.arange(dim, dtype=float)).astype(complex)
