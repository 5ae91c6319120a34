"""Forward kinematics, point Jacobians, and named keypoint queries.

All functions are batched over environments: states carry a leading (N,)
axis and outputs broadcast accordingly.  The planar angle composition is

    phi_b = rest_angle_b + ang_rows_b . q

where ang_rows is the constant signed 0/1 matrix mapping generalized
coordinates (pitch plus ancestor joint angles) to body world angles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelParams, RobotState
from .terrain import TerrainBatch


def unit(angle: np.ndarray) -> np.ndarray:
    """Unit vector (cos, sin) with a trailing axis of 2."""
    return np.stack([np.cos(angle), np.sin(angle)], axis=-1)


def perp(v: np.ndarray) -> np.ndarray:
    """Rotate vectors 90 degrees counterclockwise: (x, z) -> (-z, x)."""
    return np.stack([-v[..., 1], v[..., 0]], axis=-1)


@dataclass
class Frames:
    """Per-body world quantities produced by forward kinematics."""

    body_angle: np.ndarray    # (N, B)
    body_origin: np.ndarray   # (N, B, 2) joint pivot of each body
    com: np.ndarray           # (N, B, 2)
    keypoints: np.ndarray     # (N, K, 2)
    pivots: np.ndarray        # (N, A, 2) rotation pivot per angular dof
    # A = 1 + n_joints: pitch (about the base origin) then each joint


def forward_kinematics(params: ModelParams, state: RobotState) -> Frames:
    q = state.q
    N = q.shape[0]
    B = params.n_bodies
    angles = params.rest_angle[None, :] + q @ params.ang_rows.T  # (N, B)
    axes = unit(angles)                                          # (N, B, 2)

    origin = np.zeros((N, B, 2))
    origin[:, 0] = q[:, :2]
    for b in range(1, B):
        p = params.parent_idx[b]
        d = params.attach[b]
        origin[:, b] = origin[:, p] + d[0] * axes[:, p] + d[1] * perp(axes[:, p])

    com = (origin
           + params.com[..., 0:1] * axes
           + params.com[..., 1:2] * perp(axes))

    kp_axes = axes[:, params.kp_body]
    keypoints = (origin[:, params.kp_body]
                 + params.kp_offset[None, :, 0:1] * kp_axes
                 + params.kp_offset[None, :, 1:2] * perp(kp_axes))

    pivots = np.concatenate(
        [origin[:, 0:1], origin[:, params.joint_body]], axis=1)
    return Frames(body_angle=angles, body_origin=origin, com=com,
                  keypoints=keypoints, pivots=pivots)


def point_jacobians(params: ModelParams, frames: Frames,
                    points: np.ndarray, body_idx: np.ndarray) -> np.ndarray:
    """Jacobian d(point)/dq for world points attached to given bodies.

    points: (N, P, 2); body_idx: (P,) body each point rides on.
    Returns (N, P, 2, nq).
    """
    N, P, _ = points.shape
    nq = params.nq
    J = np.zeros((N, P, 2, nq))
    J[:, :, 0, 0] = 1.0
    J[:, :, 1, 1] = 1.0
    # columns for angular dofs: sign * perp(point - pivot) masked by ancestry
    diff = points[:, :, None, :] - frames.pivots[:, None, :, :]   # (N,P,A,2)
    mask = params.ang_rows[body_idx][:, 2:]                       # (P, A)
    np.multiply(diff[..., 1], mask[None], out=J[:, :, 0, 2:])
    J[:, :, 0, 2:] *= -1.0
    np.multiply(diff[..., 0], mask[None], out=J[:, :, 1, 2:])
    return J


def com_jacobians(params: ModelParams, frames: Frames) -> np.ndarray:
    body_idx = np.arange(params.n_bodies)
    return point_jacobians(params, frames, frames.com, body_idx)


def keypoint_jacobians(params: ModelParams, frames: Frames) -> np.ndarray:
    return point_jacobians(params, frames, frames.keypoints, params.kp_body)


def point_velocities(J: np.ndarray, qd: np.ndarray) -> np.ndarray:
    """World velocity of each point: (N, P, 2, nq) x (N, nq) -> (N, P, 2)."""
    N, P, _, nq = J.shape
    return np.matmul(J.reshape(N, 2 * P, nq), qd[..., None]).reshape(N, P, 2)


def total_com(params: ModelParams, frames: Frames) -> np.ndarray:
    """Whole-robot center of mass, (N, 2)."""
    m = params.masses
    return np.einsum("nb,nbi->ni", m, frames.com) / m.sum(axis=1, keepdims=True)


@dataclass
class KeypointSummary:
    """Named kinematic quantities consumed by rewards and metrics.

    Heights are measured above the terrain profile directly below the base
    (plain world z when no terrain is given), so stage thresholds remain
    meaningful on raised platforms and slopes.

    ``projected_gravity`` is the world gravity direction expressed in the
    base frame (x = chest axis, z = headward axis).  Standing upright gives
    (0, -1); supine -- chest up, head toward -x -- gives (-1, 0), i.e. the
    chest-axis component saturates at -1.  ``upright_alignment`` is
    -projected_gravity_z = cos(pitch), the scalar used by the base
    orientation reward and the pull-force gate.
    """

    h_base: np.ndarray            # (N,)
    h_head: np.ndarray            # (N,)
    base_z_world: np.ndarray      # (N,)
    heel: np.ndarray              # (N, 2)
    toe: np.ndarray               # (N, 2)
    heel_h: np.ndarray            # (N,) heel height above the local surface
    toe_h: np.ndarray             # (N,)
    midfoot: np.ndarray           # (N, 2)
    knee: np.ndarray              # (N, 2)
    shank_pitch: np.ndarray       # (N,) shank deviation from vertical, rad
    shank_up_z: np.ndarray        # (N,) z component of the shank's up axis
    foot_pitch: np.ndarray        # (N,) foot axis angle minus local slope
    projected_gravity: np.ndarray  # (N, 2)
    upright_alignment: np.ndarray  # (N,)


def keypoint_summary(params: ModelParams, state: RobotState,
                     terrain: TerrainBatch | None = None,
                     frames: Frames | None = None) -> KeypointSummary:
    if frames is None:
        frames = forward_kinematics(params, state)
    model = params.model
    heel = frames.keypoints[:, model.keypoint_index("heel")]
    toe = frames.keypoints[:, model.keypoint_index("toe")]
    head_top = frames.keypoints[:, model.keypoint_index("head_top")]
    base_z = state.q[:, 1]

    if terrain is not None:
        ground = terrain.surface_height(state.q[:, 0])
        slope_angle = np.arctan2(
            terrain.surface_height(state.q[:, 0] + 0.05) - ground, 0.05)
        heel_h = heel[:, 1] - terrain.surface_height(heel[:, 0])
        toe_h = toe[:, 1] - terrain.surface_height(toe[:, 0])
    else:
        ground = np.zeros_like(base_z)
        slope_angle = np.zeros_like(base_z)
        heel_h = heel[:, 1]
        toe_h = toe[:, 1]

    shank_angle = frames.body_angle[:, model.body_index("shank")]
    # the shank's up axis points from ankle to knee: minus the local axis
    shank_up = -unit(shank_angle)
    foot_angle = frames.body_angle[:, model.body_index("foot")]

    pitch = state.q[:, 2]
    projected_gravity = np.stack([-np.sin(pitch), -np.cos(pitch)], axis=-1)

    return KeypointSummary(
        h_base=base_z - ground,
        h_head=head_top[:, 1] - ground,
        base_z_world=base_z,
        heel=heel,
        toe=toe,
        heel_h=heel_h,
        toe_h=toe_h,
        midfoot=0.5 * (heel + toe),
        knee=frames.keypoints[:, model.keypoint_index("knee_pad")],
        shank_pitch=np.arctan2(shank_up[:, 0], shank_up[:, 1]),
        shank_up_z=shank_up[:, 1],
        foot_pitch=np.mod(foot_angle - slope_angle + np.pi, 2 * np.pi) - np.pi,
        projected_gravity=projected_gravity,
        upright_alignment=np.cos(pitch),
    )
