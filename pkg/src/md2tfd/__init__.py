"""Multi-D2 thermofield dynamics of a qubit coupled to two bosonic baths."""
from ._kernels import BACKEND
from .bath import SpectralDensity, discretize_id, discretize_log
from .tfd import ThermalBathPair, build_effective_hamiltonian, initial_state_spec
from .ansatz import MD2State
from .dynamics import Trajectory, propagate, run_trajectory

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "SpectralDensity",
    "discretize_id",
    "discretize_log",
    "ThermalBathPair",
    "build_effective_hamiltonian",
    "initial_state_spec",
    "MD2State",
    "Trajectory",
    "propagate",
    "run_trajectory",
]
