"""Assist curricula: vertical pull force and action-bound rescaler.

Both ease off together whenever the robot's head reaches the target height
at the end of an episode: the pull force drops by a fixed decrement (floor
0 N) and the action bound shrinks (floor 0.25).  They never increase, so
both sequences are non-increasing over a training run.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..config import EnvConfig


@dataclass(frozen=True)
class CurriculumState:
    pull_force: float   # N, applied upward at the base while gated open
    beta: float         # action rescaler in (0, 1]

    def validate(self) -> None:
        if not 0.0 <= self.pull_force <= 200.0:
            raise ValueError("pull_force must lie in [0, 200] N")
        if not 0.0 < self.beta <= 1.0:
            raise ValueError("beta must lie in (0, 1]")


def initial_curriculum(cfg: EnvConfig) -> CurriculumState:
    force = cfg.force_init if cfg.force_curriculum else 0.0
    beta = cfg.fixed_beta if cfg.fixed_beta is not None else cfg.beta_init
    return CurriculumState(pull_force=force, beta=beta)


def curriculum_update(state: CurriculumState, h_head_end: float,
                      cfg: EnvConfig) -> CurriculumState:
    """One curriculum step from an end-of-episode head height.

    Multiple synchronized episodes are aggregated by the caller into a
    single representative height (the mean over the finishing batch).
    """
    if h_head_end < cfg.h_head_target:
        return state
    force = min(state.pull_force,
                max(cfg.force_floor, state.pull_force - cfg.force_step))
    if cfg.fixed_beta is not None:
        beta = state.beta
    else:
        # min() keeps the sequence non-increasing even if the configured
        # floor sits above the current value
        beta = min(state.beta, max(cfg.beta_floor, state.beta - cfg.beta_step))
    return CurriculumState(pull_force=force, beta=beta)
