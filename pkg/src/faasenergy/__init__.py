"""Serverless worker-pool simulation and excess-energy accounting."""
from faasenergy.energy import (
    EnergySeries,
    IsolationProfile,
    PowerSample,
    break_even_idle,
    builtin_profiles,
    excess_energy,
    integrate_power,
    load_profiles,
)
from faasenergy.report import ComparisonSummary, Extrapolation, compare, extrapolate_power
from faasenergy.simcore import (
    FixedTimeout,
    HalvingInterval,
    NoKeepAlive,
    SimConfig,
    SimResult,
    min_capacity,
    simulate,
)
from faasenergy.synth import SyntheticSpec, generate_synthetic
from faasenergy.trace import ArrivalRecord, Trace, parse_trace, trace_stats, validate_trace

__version__ = "0.1.0"
