from .metrics import (
    episode_success, feet_travel, motion_smoothness, energy_used,
    MetricsReport, TerrainMetrics,
)
from .protocol import run_protocol
from .robustness import DisturbanceSpec, robustness_sweep, success_monotone_ok

__all__ = [
    "episode_success", "feet_travel", "motion_smoothness", "energy_used",
    "MetricsReport", "TerrainMetrics", "run_protocol",
    "DisturbanceSpec", "robustness_sweep", "success_monotone_ok",
]
