"""Robustness of coherence and its trade-off with state discrimination,
built on a small dense SDP solver."""

from .conic import SDPSolution, SolverError, SolverOptions
from .discrimination import (
    DiscriminationResult, channel_success, helstrom, optimal_io_discrimination_channel, p_suc_incoherent,
    p_suc_incoherent_with_ancilla, p_suc_optimal,
)
from .duality import (
    DualityReport, SeeSawOptions, duality_bound, necessary_condition, post_discrimination_coherence,
    robustness_average_check, saturating_channel,
)
from .measures import CoherenceReport, c_max, coherence_report, robustness
from .quantum import (
    POVM, DensityMatrix, KrausSet, PureState, QuantumChannel, StateEnsemble, basis_ensemble,
    maximally_coherent, mcs_ensemble,
)

__version__ = "0.1.0"

__all__ = [
    "SDPSolution", "SolverError", "SolverOptions",
    "DiscriminationResult", "channel_success", "helstrom", "optimal_io_discrimination_channel",
    "p_suc_incoherent", "p_suc_incoherent_with_ancilla", "p_suc_optimal",
    "DualityReport", "SeeSawOptions", "duality_bound", "necessary_condition", "post_discrimination_coherence",
    "robustness_average_check", "saturating_channel",
    "CoherenceReport", "c_max", "coherence_report", "robustness",
    "POVM", "DensityMatrix", "KrausSet", "PureState", "QuantumChannel", "StateEnsemble", "basis_ensemble",
    "maximally_coherent", "mcs_ensemble",
]
