"""Discrete-event harness: nodes, channels, scenario execution, metrics."""

from .channels import Delivered, Lost, QuantumChannel, transmit_quantum
from .config import (
    ChannelConfig,
    Hmp4Config,
    NoiseConfig,
    QrPufConfig,
    ScenarioConfig,
    UuPufConfig,
    load_scenario_config,
)
from .events import Event, EventContext, ScenarioAbort, run_event_loop
from .metrics import Metrics, TrialRecord, metrics_json, trials_csv, write_outputs
from .scenarios import audit_quantum_conservation, run_scenario, run_trial_trace

__all__ = [
    "Event",
    "EventContext",
    "ScenarioAbort",
    "run_event_loop",
    "QuantumChannel",
    "Delivered",
    "Lost",
    "transmit_quantum",
    "NoiseConfig",
    "ChannelConfig",
    "QrPufConfig",
    "UuPufConfig",
    "Hmp4Config",
    "ScenarioConfig",
    "load_scenario_config",
    "Metrics",
    "TrialRecord",
    "metrics_json",
    "trials_csv",
    "write_outputs",
    "run_scenario",
    "run_trial_trace",
    "audit_quantum_conservation",
]
