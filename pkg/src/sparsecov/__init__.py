"""Covariance estimation for sparse linear arrays and DOA benchmarking."""

from .estimators import (
    DegenerateCaseError,
    NonConvergenceError,
    PemSettings,
    aem,
    dam,
    hermitian_eig,
    lag_sequence,
    pem,
    redundancy_average,
    scm,
)
from .geometry import SensorArray, coarray, coprime_interleaved, from_positions, manifold, ula
from .simulate import Scenario, Source, ensemble_covariance, generate_snapshots

__version__ = "0.1.0"
