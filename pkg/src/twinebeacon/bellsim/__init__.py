"""Desk-scale simulation of the Bell test source and its timing audit."""
from .export import write_running_entropy_csv
from .source import (
    CHUNK,
    PULSE_PAIR_PROB,
    PULSES_PER_TRIAL,
    SourceParams,
    aggregated_pair_probability,
    ch_value,
    joint_distribution,
    sample_trials,
    settings_probabilities,
)
from .timing import (
    C_M_PER_NS,
    TimingCertificate,
    TimingGeometry,
    TimingScenario,
    audit_taus,
    distance_mc,
    light_time,
    require_spacelike,
    tau_bounds,
    tau_samples,
    worst_case_scenario,
)
