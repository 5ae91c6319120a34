"""Staged reward engine: tolerance kernel, stage logic, and the four groups.

Rewards are split into task / style / regularization / post-task groups.
Stage gates use the base height above the local surface: terms carrying a
stage indicator are exactly zero outside their stage.  Terms that only make
sense with two distinct legs (waist yaw, hip roll/yaw, shoulder roll, foot
distance, feet parallel) have no sagittal-plane analog; the README lists
the mapping.  The two that survive in analog form are ankle-parallel (foot
keypoint height variance against the local surface) and feet-parallel
(heel/toe flatness bonus).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..config import EnvConfig
from ..physics.kinematics import KeypointSummary
from ..physics.model import ModelParams

GROUP_NAMES = ("task", "style", "regularization", "post_task")

STAGE_RIGHTING, STAGE_RISING, STAGE_STANDING = 1, 2, 3


def tolerance(value, bounds, margin, value_at_margin):
    """Reward kernel: 1 inside ``bounds``, Gaussian falloff outside.

    Outside the bounds the value decays as value_at_margin ** (d/margin)^2,
    a Gaussian profile in the normalized distance d that hits
    ``value_at_margin`` exactly at distance ``margin`` from the nearest
    bound.
    """
    lo, hi = bounds
    if margin <= 0:
        raise ValueError("margin must be positive")
    if not 0.0 < value_at_margin < 1.0:
        raise ValueError("value_at_margin must lie in (0, 1)")
    if lo > hi:
        raise ValueError("bounds must satisfy lo <= hi")
    value = np.asarray(value, dtype=float)
    dist = np.where(value < lo, lo - value, np.maximum(0.0, value - hi)) / margin
    out = np.where(dist == 0.0, 1.0, value_at_margin ** (dist * dist))
    return out if out.ndim else float(out)


def stage_of(h_base, h_stage1: float, h_stage2: float):
    """Stage id from base height: 1 righting, 2 rising, 3 standing.

    Boundaries are lower-closed: h == h_stage1 is already stage 2.
    """
    h = np.asarray(h_base, dtype=float)
    out = np.where(h >= h_stage2, STAGE_STANDING,
                   np.where(h >= h_stage1, STAGE_RISING, STAGE_RIGHTING))
    return out if out.ndim else int(out)


@dataclass
class StepBuffers:
    """Quantities carried between control steps for reward evaluation."""

    action: np.ndarray          # (N, J) current action
    prev_action: np.ndarray     # (N, J)
    prev2_action: np.ndarray    # (N, J)
    joint_vel_prev: np.ndarray  # (N, J) joint velocity at previous step
    pd_target: np.ndarray       # (N, J) target commanded this step
    torques: np.ndarray         # (N, J) mean applied torque over the substeps
    foot_stumble: np.ndarray    # (N,) bool: any foot contact with |Fx| > 3 Fz


class RewardEngine:
    """Evaluates the four reward groups for a batch of environments."""

    def __init__(self, cfg: EnvConfig, params: ModelParams):
        self.cfg = cfg
        self.params = params
        model = params.model
        self.upper_joints = np.array([model.joint_index(j)
                                      for j in ("waist", "shoulder", "elbow")])
        self.knee = model.joint_index("knee")
        self.upper_target = params.default_angles[self.upper_joints]
        self.group_weights = np.asarray(cfg.group_weights, dtype=float)

    def compute(self, kin: KeypointSummary, state, buffers: StepBuffers,
                terrain_kind: np.ndarray) -> tuple[np.ndarray, dict]:
        """Returns (groups (N, 4), per-term dict); scalar reward is
        groups @ group_weights."""
        cfg = self.cfg
        N = state.q.shape[0]
        h_base = kin.h_base
        gate1 = h_base >= cfg.h_stage1    # active in stages 2 and 3
        gate2 = h_base >= cfg.h_stage2    # active in stage 3
        on_ground = terrain_kind == 0
        omega = state.qd[:, 2]
        vx = state.qd[:, 0]
        joint_pos = state.joint_pos
        joint_vel = state.joint_vel

        terms: dict[str, np.ndarray] = {}

        # ---------------------------------------------------------- task
        terms["head_height"] = tolerance(kin.h_head, (1.0, np.inf), 1.0, 0.1)
        terms["base_orientation"] = tolerance(
            kin.upright_alignment, (0.99, np.inf), 1.0, 0.05)
        task = terms["head_height"] + terms["base_orientation"]

        # --------------------------------------------------------- style
        knee = joint_pos[:, self.knee]
        knee_bad = (knee > 2.85) | (knee < -0.06)
        knee_w = np.where(on_ground, -0.25, -10.0)
        terms["knee_deviation"] = knee_bad * knee_w

        d2 = (state.q[:, 0] - kin.midfoot[:, 0]) ** 2
        terms["foot_displacement"] = (
            2.5 * np.exp(-2.0 * np.maximum(d2, 0.3)) * gate2)

        # foot keypoint heights above the local surface, in decimeters so
        # the 0.05 variance threshold corresponds to ~4.5 cm of spread
        heel_h = 10.0 * kin.heel_h
        toe_h = 10.0 * kin.toe_h
        var = 0.25 * (heel_h - toe_h) ** 2   # population variance of 2 points
        terms["ankle_parallel"] = 20.0 * (var < 0.05)

        stumble_w = np.where(on_ground, 0.0, -25.0)
        terms["feet_stumble"] = buffers.foot_stumble * stumble_w

        terms["shank_orientation"] = (
            10.0 * tolerance(kin.shank_up_z, (0.8, np.inf), 1.0, 0.1) * gate1)
        terms["style_angular_velocity"] = np.exp(-2.0 * omega**2) * gate1

        style = (terms["knee_deviation"] + terms["foot_displacement"]
                 + terms["ankle_parallel"] + terms["feet_stumble"]
                 + terms["shank_orientation"] + terms["style_angular_velocity"])
        if not cfg.style_rewards:
            style = np.zeros(N)

        # ------------------------------------------------- regularization
        accel = (joint_vel - buffers.joint_vel_prev) / cfg.control_dt
        terms["joint_acceleration"] = -2.5e-7 * np.sum(accel**2, axis=1)
        terms["action_rate"] = -1e-2 * np.sum(
            (buffers.action - buffers.prev_action) ** 2, axis=1)
        terms["action_smoothness"] = -1e-2 * np.sum(
            (buffers.action - 2.0 * buffers.prev_action
             + buffers.prev2_action) ** 2, axis=1)
        terms["torques"] = -2.5e-6 * np.sum(buffers.torques**2, axis=1)
        terms["joint_power"] = -2.5e-5 * np.sum(
            np.abs(buffers.torques) * np.abs(joint_vel), axis=1)
        terms["joint_velocity"] = -1e-4 * np.sum(joint_vel**2, axis=1)
        terms["joint_tracking_error"] = -0.25 * np.sum(
            (joint_pos - buffers.pd_target) ** 2, axis=1)
        viol = (np.clip(self.params.joint_lo - joint_pos, 0.0, None)
                + np.clip(joint_pos - self.params.joint_hi, 0.0, None))
        terms["joint_position_limits"] = -1e2 * np.sum(viol, axis=1)
        vel_excess = np.clip(np.abs(joint_vel) - self.params.vel_limit, 0.0, None)
        terms["joint_velocity_limits"] = -1.0 * np.sum(vel_excess, axis=1)

        regu = (terms["joint_acceleration"] + terms["action_rate"]
                + terms["action_smoothness"] + terms["torques"]
                + terms["joint_power"] + terms["joint_velocity"]
                + terms["joint_tracking_error"] + terms["joint_position_limits"]
                + terms["joint_velocity_limits"])

        # ------------------------------------------------------ post-task
        terms["post_angular_velocity"] = 10.0 * np.exp(-2.0 * omega**2) * gate2
        terms["post_linear_velocity"] = 10.0 * np.exp(-5.0 * vx**2) * gate2
        g_x = kin.projected_gravity[:, 0]
        terms["post_orientation"] = 10.0 * np.exp(-5.0 * g_x**2) * gate2
        terms["post_base_height"] = 10.0 * np.exp(
            -20.0 * (h_base - cfg.h_base_target) ** 2) * gate2
        upper_err = joint_pos[:, self.upper_joints] - self.upper_target
        terms["post_upper_posture"] = 10.0 * np.exp(
            -0.1 * np.sum(upper_err**2, axis=1)) * gate2
        flat = np.clip(np.abs(kin.heel_h - kin.toe_h), 0.02, None)
        terms["foot_flat"] = 2.5 * np.exp(-20.0 * flat) * gate2

        post = (terms["post_angular_velocity"] + terms["post_linear_velocity"]
                + terms["post_orientation"] + terms["post_base_height"]
                + terms["post_upper_posture"] + terms["foot_flat"])

        groups = np.stack([task, style, regu, post], axis=1)
        return groups, terms

    def scalar(self, groups: np.ndarray) -> np.ndarray:
        return groups @ self.group_weights
