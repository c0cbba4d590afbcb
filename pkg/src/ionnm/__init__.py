"""Non-Markovian dephasing of a probe ion in a ring crystal near the
linear/zig-zag transition."""
from .errors import (
    InvalidInputError,
    InvalidParameterError,
    IonNMError,
    ResourceLimitError,
    SoftModeDivergenceError,
    SoftModeInstabilityError,
    UnstableEquilibriumError,
    WrongPhaseError,
)
from .lattice import ChainParams, ModeTable, critical_frequency, mode_table, transverse_dispersion
from .dephasing import CouplingSet, DephasingCurve, couplings, curve, optimal_trace_distance
from .blp import NMResult, blp_measure, pair_scan, revival_time, sweep

__version__ = "0.1.0"

__all__ = [
    "ChainParams", "ModeTable", "critical_frequency", "mode_table", "transverse_dispersion",
    "CouplingSet", "DephasingCurve", "couplings", "curve", "optimal_trace_distance",
    "NMResult", "blp_measure", "pair_scan", "revival_time", "sweep",
    "IonNMError", "InvalidParameterError", "InvalidInputError", "SoftModeInstabilityError",
    "WrongPhaseError", "UnstableEquilibriumError", "SoftModeDivergenceError", "ResourceLimitError",
]
