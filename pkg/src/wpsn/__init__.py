"""Multi-antenna wireless power beacon toolkit: channel model, beamforming,
node energy model, energy-neutral control and frame simulation."""

from .beamforming import PowerBudget, bs_weights, sdr_oracle, ts_weights
from .config import RunConfig, emit_config, load_config, parse_config
from .controller import ControllerConfig, NeutralController, static_optimum
from .energy import EnergyParams
from .geometry import NodePlacement, build_layout, channel_matrix
from .sim import Event, Scenario, run

__version__ = "0.1.0"

__all__ = [
    "PowerBudget", "bs_weights", "sdr_oracle", "ts_weights",
    "RunConfig", "emit_config", "load_config", "parse_config",
    "ControllerConfig", "NeutralController", "static_optimum",
    "EnergyParams", "NodePlacement", "build_layout", "channel_matrix",
    "Event", "Scenario", "run",
]
