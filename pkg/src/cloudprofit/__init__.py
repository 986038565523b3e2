"""Profit-maximizing autoscaling policies and a discrete-event cloud
simulator for elastic loss systems billed by the server-hour."""

__version__ = "0.1.0"

from .billing import BillingModel
from .forecast import (
    EtsModel,
    InsufficientDataError,
    advance,
    fit_ets,
    forecast_next,
    relative_error,
)
from .policies import (
    DegenerateEconomicsError,
    PolicyDecision,
    ReactiveConfig,
    alpha_star,
    always_on_decide,
    grassmann_decide,
    optimal_decide,
    qed_decide,
    reactive_step,
    round_g,
    z_from_alpha,
)
from .queueing import (
    Peakedness,
    QuadratureError,
    QueueParams,
    ServiceModel,
    blocking_probability,
    erlang_b,
    erlang_b_real,
    eta,
    peakedness,
    profit_rate,
    throughput_scale_down,
    throughput_scale_up,
    throughput_steady,
)
from .simulator import (
    SimConfig,
    SimulationReport,
    billing_settle,
    emit_report,
    run_simulation,
)
from .workload import (
    EpochStats,
    ServiceTimeModel,
    WorkloadTrace,
    compute_epoch_stats,
    generate_arrivals,
    parse_counts_csv,
    parse_timestamps,
    synthesize_diurnal,
)

__all__ = [
    "BillingModel",
    "DegenerateEconomicsError",
    "EpochStats",
    "EtsModel",
    "InsufficientDataError",
    "advance",
    "Peakedness",
    "PolicyDecision",
    "QuadratureError",
    "QueueParams",
    "ReactiveConfig",
    "ServiceModel",
    "ServiceTimeModel",
    "SimConfig",
    "SimulationReport",
    "WorkloadTrace",
    "alpha_star",
    "always_on_decide",
    "billing_settle",
    "blocking_probability",
    "compute_epoch_stats",
    "emit_report",
    "erlang_b",
    "erlang_b_real",
    "eta",
    "fit_ets",
    "forecast_next",
    "generate_arrivals",
    "grassmann_decide",
    "optimal_decide",
    "parse_counts_csv",
    "parse_timestamps",
    "peakedness",
    "profit_rate",
    "qed_decide",
    "reactive_step",
    "relative_error",
    "round_g",
    "run_simulation",
    "synthesize_diurnal",
    "throughput_scale_down",
    "throughput_scale_up",
    "throughput_steady",
    "z_from_alpha",
]
