"""Gaussian belief propagation and the covariance recursions it can run
distributively, from Kalman filtering to interior-point LP steps."""
from .errors import (
    BetaOutOfRange,
    DegenerateStep,
    DimensionMismatch,
    Divergence,
    GabpkfError,
    InfeasibleStart,
    MatrixFormatError,
    NotConverged,
    SingularMatrix,
    ZeroDiagonal,
)
from .gabp import Schedule, invert_via_gabp, solve, spectral_radius_check
from .kalman import KalmanModel, KalmanState, pk_via_gabp, pk_via_two_schur
from .gib import GibProblem, GibState, gib_iterate, gib_via_modified_kalman
from .affine import LpProblem, solve_lp
from .distributed import distributed_kalman_round, run_distributed, spawn_network

__version__ = "0.1.0"
