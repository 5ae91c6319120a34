"""Planar humanoid stand-up control stack.

Subpackages:
    physics  -- sagittal-plane rigid-body simulation with penalty contacts
    env      -- the stand-up MDP: observations, staged rewards, curricula
    learn    -- multi-critic PPO with a self-contained MLP and Adam
    evaluate -- metrics, evaluation protocol, robustness sweeps
"""

__version__ = "0.1.0"
