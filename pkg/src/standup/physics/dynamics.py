"""Generalized dynamics: PD torque law, mass matrix, bias forces, stepping.

The mass matrix is assembled from point Jacobians (composite rigid body
form), the velocity bias from the recursive centripetal acceleration of the
chain, and gravity from the CoM Jacobians.  Integration is velocity-implicit
Euler with an average-velocity position update

    v' = v + a dt,    x' = x + (v + v') dt / 2

which integrates ballistic trajectories exactly while keeping the contact
stability of the semi-implicit scheme.  Joint position limits are enforced
by clamping with velocity zeroing at the limit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ModelParams, RobotState, SimulationFault
from .terrain import TerrainBatch
from .kinematics import (
    Frames, forward_kinematics, com_jacobians, keypoint_jacobians,
    point_velocities, perp,
)
from .contact import contact_force_arrays

# regularization velocity for dry joint friction; creep below this speed
_FRICTION_V_EPS = 1e-3


def pd_torque(joint_pos: np.ndarray, joint_vel: np.ndarray, target: np.ndarray,
              kp: np.ndarray, kd: np.ndarray,
              torque_limit: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Proportional-derivative torque, clamped to the actuator limits.

        tau_j = kp_j * (target_j - pos_j) - kd_j * vel_j

    Returns (torques, clamped) where ``clamped`` marks joints whose raw
    torque exceeded the limit (counted by callers for diagnostics).
    """
    joint_pos = np.asarray(joint_pos, dtype=float)
    joint_vel = np.asarray(joint_vel, dtype=float)
    target = np.asarray(target, dtype=float)
    if target.shape != joint_pos.shape or joint_vel.shape != joint_pos.shape:
        raise ValueError(
            f"pd_torque: mismatched shapes {joint_pos.shape}, {joint_vel.shape}, {target.shape}")
    raw = kp * (target - joint_pos) - kd * joint_vel
    tau = np.clip(raw, -torque_limit, torque_limit)
    return tau, np.abs(raw) > torque_limit


def mass_matrix(params: ModelParams, frames: Frames, J_com: np.ndarray) -> np.ndarray:
    """Generalized mass matrix, (N, nq, nq)."""
    N, B, _, nq = J_com.shape
    Jm = (J_com * params.masses[:, :, None, None]).reshape(N, 2 * B, nq)
    M = np.matmul(Jm.transpose(0, 2, 1), J_com.reshape(N, 2 * B, nq))
    M += np.einsum("nb,bq,br->nqr", params.inertias, params.ang_rows,
                   params.ang_rows)
    idx = np.arange(3, nq)
    M[:, idx, idx] += params.armature
    return M


def bias_forces(params: ModelParams, frames: Frames, J_com: np.ndarray,
                qd: np.ndarray) -> np.ndarray:
    """Generalized centripetal/Coriolis force (the h(q, qd) term), (N, nq)."""
    omega = qd @ params.ang_rows.T                     # (N, B)
    B = params.n_bodies
    acc = np.zeros_like(frames.com)                    # CoM accel with qdd = 0
    origin_acc = np.zeros((qd.shape[0], B, 2))
    for b in range(1, B):
        p = params.parent_idx[b]
        r = frames.body_origin[:, b] - frames.body_origin[:, p]
        origin_acc[:, b] = origin_acc[:, p] - omega[:, p:p + 1] ** 2 * r
    acc = origin_acc - omega[..., None] ** 2 * (frames.com - frames.body_origin)
    acc *= params.masses[..., None]
    N, B2, _, nq = J_com.shape
    return np.matmul(J_com.reshape(N, 2 * B2, nq).transpose(0, 2, 1),
                     acc.reshape(N, 2 * B2, 1))[..., 0]


def gravity_forces(params: ModelParams, J_com: np.ndarray) -> np.ndarray:
    """Generalized gravity force, (N, nq)."""
    w = params.masses[:, :, None] * -params.gravity
    return np.matmul(J_com[:, :, 1, :].transpose(0, 2, 1), w)[..., 0]


@dataclass
class StepDiagnostics:
    """Per-step extras surfaced to the environment."""

    contact_forces: np.ndarray | None = None   # (N, K, 2)
    contact_normal: np.ndarray | None = None   # (N, K)
    fault: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))


def step_dynamics(
    params: ModelParams,
    state: RobotState,
    torques: np.ndarray,
    dt: float,
    terrain: TerrainBatch | None = None,
    external_force: np.ndarray | None = None,
    raise_on_fault: bool = True,
) -> tuple[RobotState, StepDiagnostics]:
    """Advance the state by one physics substep of length dt.

    ``torques`` is the actuated joint torque vector (N, J); the optional
    ``external_force`` (N, 2) acts at the base origin.  A non-finite result
    raises SimulationFault unless ``raise_on_fault`` is False, in which case
    the per-env fault mask is reported in the diagnostics and faulted rows
    are left untouched for the caller to reset.
    """
    N = state.q.shape[0]
    diag = StepDiagnostics(fault=np.zeros(N, dtype=bool))
    if dt == 0.0:
        return state.copy(), diag

    frames = forward_kinematics(params, state)
    J_com = com_jacobians(params, frames)

    M = mass_matrix(params, frames, J_com)
    rhs = gravity_forces(params, J_com) - bias_forces(params, frames, J_com, state.qd)
    # passive joint drag: viscous damping plus dry friction expressed as a
    # saturated viscous coefficient friction/max(|qd|, eps).  Both enter the
    # solve implicitly (b*dt on the mass diagonal), which is unconditionally
    # stable and strictly dissipative, so stiction cannot pump oscillations.
    qd_j = state.qd[:, 3:]
    b = params.viscous_damping + params.friction_torque / np.maximum(
        np.abs(qd_j), _FRICTION_V_EPS)
    rhs[:, 3:] += torques - b * qd_j
    jidx = np.arange(3, params.nq)
    M[:, jidx, jidx] += b * dt

    anchor_new = None
    if terrain is not None:
        J_kp = keypoint_jacobians(params, frames)
        kp_vel = point_velocities(J_kp, state.qd)
        forces, f_n, _, anchor_new = contact_force_arrays(
            params, terrain, frames.keypoints, kp_vel, anchor=state.contact_anchor)
        N, K, _, nq = J_kp.shape
        rhs += np.matmul(J_kp.reshape(N, 2 * K, nq).transpose(0, 2, 1),
                         forces.reshape(N, 2 * K, 1))[..., 0]
        diag.contact_forces = forces
        diag.contact_normal = f_n

    if external_force is not None:
        rhs[:, 0] += external_force[..., 0]
        rhs[:, 1] += external_force[..., 1]

    qacc = np.linalg.solve(M, rhs[..., None])[..., 0]

    qd_new = state.qd + qacc * dt
    q_new = state.q + 0.5 * (state.qd + qd_new) * dt

    # hard joint limits: clamp position, zero the velocity of clamped joints
    clamped_pos = np.clip(q_new[:, 3:], params.joint_lo, params.joint_hi)
    hit = clamped_pos != q_new[:, 3:]
    q_new[:, 3:] = clamped_pos
    qd_new[:, 3:] = np.where(hit, 0.0, qd_new[:, 3:])

    new = RobotState(q=q_new, qd=qd_new, time=state.time + dt,
                     contact_anchor=anchor_new)
    fault = ~new.is_finite()
    if fault.any():
        if raise_on_fault:
            raise SimulationFault(f"non-finite state in {int(fault.sum())} env(s)")
        new.q[fault] = state.q[fault]
        new.qd[fault] = state.qd[fault]
        diag.fault = fault
    return new, diag
