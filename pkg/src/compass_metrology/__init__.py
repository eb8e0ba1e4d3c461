"""Compass-state displacement metrology with a trapped ion.

Truncated Fock-space simulation of circular (cat) states, the two ion-trap
generation circuits, Raman-laser Hamiltonian engineering, displacement
estimation from ground-state populations, and Wigner-function analysis.
"""

from .fockspace import OscState, TruncationError, TruncationPolicy, coherent, displace, make_cat
from .hybrid import CarrierPulse, HybridState
from .circuits import Approach, CircuitSpec, build, run_protocol
from .ham_engineering import EngineeredCoeffs, RamanDrive, engineered_A, pulse_timing, solve_rabi
from .metrology import (
    EstimationReport,
    PerturbationParams,
    analytic_uncertainty,
    estimate_s,
    fidelity_approx,
    fidelity_exact,
    pg_closed_approach1,
    pg_closed_approach2,
    quasi_orthogonal_displacement,
    run_estimation,
    sample_counts,
)
from .wigner import WignerGrid, overlap_from_wigner

__version__ = "0.1.0"
