"""Penalty contacts between robot keypoints and the terrain.

Normal force is a Kelvin-Voigt spring-damper, k_n * depth - c_n * v_n, with
the damper bounded by the spring term and the total clamped non-negative
(no adhesion, no light-touch flutter).  Tangential force uses a friction
anchor: a spring to the stick position established at touchdown, clipped to
the Coulomb cone; when the cone saturates the anchor trails the keypoint so
the spring force stays on the cone edge (kinetic slip).  This yields true
static friction, which a purely viscous regularization cannot provide.

A keypoint touching both the profile and the wall segment takes the feature
with the smaller penetration.  Restitution maps onto the normal damper:
c_eff = c_n * (1 - restitution), so restitution 0 is dead and 1 elastic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ModelParams, RobotState
from .terrain import TerrainBatch
from .kinematics import forward_kinematics, keypoint_jacobians, point_velocities


@dataclass(frozen=True)
class ContactPoint:
    """Diagnostic record for a single active contact."""

    keypoint: str
    position: tuple[float, float]
    penetration: float
    normal_force: float
    tangential_force: float


def contact_force_arrays(
    params: ModelParams,
    terrain: TerrainBatch,
    kp_pos: np.ndarray,
    kp_vel: np.ndarray,
    anchor: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Batched contact forces at every keypoint.

    ``anchor`` is the per-keypoint friction stick position carried between
    substeps; pass None to treat every touchdown as fresh (viscous-only
    tangential behaviour for one-shot queries).

    Returns (forces (N, K, 2) world frame, normal (N, K), tangential (N, K),
    updated anchors (N, K, 2)); inactive keypoints carry zeros.
    """
    cp = params.contact
    x = kp_pos[..., 0]
    z = kp_pos[..., 1]
    if anchor is None:
        anchor = kp_pos.copy()

    surf_z, normal, tangent = terrain.surface(x)
    pen_prof = (surf_z - z) * normal[..., 1]

    pen_wall = np.where(
        terrain.wall_on[:, None]
        & (z >= terrain.wall_lo[:, None]) & (z <= terrain.wall_hi[:, None]),
        terrain.wall_x[:, None] - x,
        -1.0,
    )

    use_wall = (pen_wall > 0.0) & ((pen_wall < pen_prof) | (pen_prof <= 0.0))
    pen = np.where(use_wall, pen_wall, pen_prof)
    active = (pen > 0.0) & params.kp_contact[None, :]
    pen = np.clip(pen, 0.0, cp.max_penetration)

    n_hat = np.where(use_wall[..., None], np.array([1.0, 0.0]), normal)
    t_hat = np.where(use_wall[..., None], np.array([0.0, 1.0]), tangent)

    v_n = np.einsum("nki,nki->nk", kp_vel, n_hat)
    v_t = np.einsum("nki,nki->nk", kp_vel, t_hat)

    c_eff = cp.c_normal * (1.0 - params.restitution)[:, None]
    spring = cp.k_normal * pen
    damper = np.clip(c_eff * v_n, -spring, spring)  # bounded by the spring force
    f_n = (spring - damper) * active

    stretch = np.einsum("nki,nki->nk", kp_pos - anchor, t_hat)
    f_t_raw = -(cp.k_anchor * stretch + cp.c_tangent * v_t)
    mu_fn = params.friction[:, None] * f_n
    f_t = np.clip(f_t_raw, -mu_fn, mu_fn) * active

    # slipping or inactive keypoints: anchor trails so the spring sits on the
    # cone edge (or at the keypoint itself when airborne)
    slip_anchor = kp_pos + (f_t / cp.k_anchor)[..., None] * t_hat
    keep = active & (np.abs(f_t_raw) <= mu_fn)
    anchor_new = np.where(keep[..., None], anchor, slip_anchor)

    forces = f_n[..., None] * n_hat + f_t[..., None] * t_hat
    return forces, f_n, f_t, anchor_new


def compute_contact_forces(
    params: ModelParams,
    state: RobotState,
    terrain: TerrainBatch,
    env: int = 0,
) -> list[ContactPoint]:
    """Structured contact list for one environment (empty when airborne)."""
    frames = forward_kinematics(params, state)
    J = keypoint_jacobians(params, frames)
    vel = point_velocities(J, state.qd)
    forces, f_n, f_t, _ = contact_force_arrays(
        params, terrain, frames.keypoints, vel, anchor=state.contact_anchor)

    surf_z, normal, _ = terrain.surface(frames.keypoints[..., 0])
    pen_prof = (surf_z - frames.keypoints[..., 1]) * normal[..., 1]
    pen_wall = terrain.wall_x[:, None] - frames.keypoints[..., 0]
    pen = np.maximum(pen_prof, np.where(terrain.wall_on[:, None], pen_wall, -1.0))

    out: list[ContactPoint] = []
    names = [k.name for k in params.model.keypoints]
    for k in range(len(names)):
        if f_n[env, k] > 0.0:
            out.append(ContactPoint(
                keypoint=names[k],
                position=(float(frames.keypoints[env, k, 0]),
                          float(frames.keypoints[env, k, 1])),
                penetration=float(max(pen[env, k], 0.0)),
                normal_force=float(f_n[env, k]),
                tangential_force=float(f_t[env, k]),
            ))
    return out
