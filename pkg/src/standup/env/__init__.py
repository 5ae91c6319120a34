from .rewards import tolerance, stage_of, RewardEngine, GROUP_NAMES
from .curriculum import CurriculumState, curriculum_update
from .randomization import RandomizationSample, sample_randomization, apply_randomization
from .observation import ObservationLayout
from .standup_env import StandupVecEnv, EvalOverrides

__all__ = [
    "tolerance", "stage_of", "RewardEngine", "GROUP_NAMES",
    "CurriculumState", "curriculum_update",
    "RandomizationSample", "sample_randomization", "apply_randomization",
    "ObservationLayout", "StandupVecEnv", "EvalOverrides",
]
