"""Joint estimation of packet channels and antenna impedance."""

from ._chanimp import (
    ChannelPrior,
    Error,
    HcrbReport,
    HybridEstimate,
    Impedance,
    SufficientStats,
    __version__,
    asymptotic_ml_limit,
    draw_stats,
    effective_channel,
    estimate,
    f_from_impedance,
    hcrb,
    impedance_from_f,
    reference_f,
    run_sweep,
    zadoff_chu,
)

__all__ = [
    "ChannelPrior",
    "Error",
    "HcrbReport",
    "HybridEstimate",
    "Impedance",
    "SufficientStats",
    "__version__",
    "asymptotic_ml_limit",
    "draw_stats",
    "effective_channel",
    "estimate",
    "f_from_impedance",
    "hcrb",
    "impedance_from_f",
    "reference_f",
    "run_sweep",
    "zadoff_chu",
]
