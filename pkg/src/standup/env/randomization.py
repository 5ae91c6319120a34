"""Per-episode domain randomization.

Every field is drawn uniformly from its fixed interval and applied to one
environment's parameter row at reset: trunk mass delta, base CoM offset,
per-link mass scale (also scales inertia), ground friction, restitution,
PD gain scales, torque injection scale, motor strength, control delay, and
initial joint angle offset/scale.  The torque injection scale is sampled
per episode; the injection itself is drawn fresh every physics substep as
U(-|s|, |s|) times the torque limit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..physics.model import ModelParams

TRUNK_MASS_DELTA = (-2.0, 5.0)        # kg, added to the torso
BASE_COM_X = (-0.12, 0.12)            # m, robot-forward offset of the base CoM
BASE_COM_Z = (-0.08, 0.08)            # m, robot-up offset of the base CoM
LINK_MASS_SCALE = (0.8, 1.2)          # multiplier on every link mass
FRICTION = (0.1, 1.0)
RESTITUTION = (0.0, 1.0)
P_GAIN_SCALE = (0.85, 1.15)
D_GAIN_SCALE = (0.85, 1.15)
TORQUE_RFI_SCALE = (-0.05, 0.05)      # times torque limit, injected per substep
MOTOR_STRENGTH = (0.9, 1.1)
CONTROL_DELAY_MS = (0.0, 100.0)
INIT_ANGLE_OFFSET = (-0.1, 0.1)       # rad, per joint
INIT_ANGLE_SCALE = (0.9, 1.1)         # times the sampled posture angle


@dataclass
class RandomizationSample:
    trunk_mass_delta: float = 0.0
    base_com_x: float = 0.0
    base_com_z: float = 0.0
    link_mass_scale: np.ndarray = field(default_factory=lambda: np.ones(0))
    friction: float = 0.8
    restitution: float = 0.0
    p_gain_scale: np.ndarray = field(default_factory=lambda: np.ones(0))
    d_gain_scale: np.ndarray = field(default_factory=lambda: np.ones(0))
    torque_rfi_scale: float = 0.0
    motor_strength: np.ndarray = field(default_factory=lambda: np.ones(0))
    control_delay_ms: float = 0.0
    init_angle_offset: np.ndarray = field(default_factory=lambda: np.zeros(0))
    init_angle_scale: np.ndarray = field(default_factory=lambda: np.ones(0))


def nominal_sample(n_bodies: int, n_joints: int,
                   friction: float, restitution: float) -> RandomizationSample:
    return RandomizationSample(
        link_mass_scale=np.ones(n_bodies),
        friction=friction,
        restitution=restitution,
        p_gain_scale=np.ones(n_joints),
        d_gain_scale=np.ones(n_joints),
        motor_strength=np.ones(n_joints),
        init_angle_offset=np.zeros(n_joints),
        init_angle_scale=np.ones(n_joints),
    )


def sample_randomization(rng: np.random.Generator, n_bodies: int,
                         n_joints: int) -> RandomizationSample:
    return RandomizationSample(
        trunk_mass_delta=rng.uniform(*TRUNK_MASS_DELTA),
        base_com_x=rng.uniform(*BASE_COM_X),
        base_com_z=rng.uniform(*BASE_COM_Z),
        link_mass_scale=rng.uniform(*LINK_MASS_SCALE, size=n_bodies),
        friction=rng.uniform(*FRICTION),
        restitution=rng.uniform(*RESTITUTION),
        p_gain_scale=rng.uniform(*P_GAIN_SCALE, size=n_joints),
        d_gain_scale=rng.uniform(*D_GAIN_SCALE, size=n_joints),
        torque_rfi_scale=rng.uniform(*TORQUE_RFI_SCALE),
        motor_strength=rng.uniform(*MOTOR_STRENGTH, size=n_joints),
        control_delay_ms=rng.uniform(*CONTROL_DELAY_MS),
        init_angle_offset=rng.uniform(*INIT_ANGLE_OFFSET, size=n_joints),
        init_angle_scale=rng.uniform(*INIT_ANGLE_SCALE, size=n_joints),
    )


def apply_randomization(params: ModelParams, env: int,
                        sample: RandomizationSample) -> None:
    """Write one sample into environment row ``env`` of the parameter table.

    The base CoM offset is given in the robot frame (x forward, z up); the
    pelvis local frame has its axis along robot-up and its perpendicular
    along robot-backward, hence the (z, -x) mapping.
    """
    model = params.model
    nominal = ModelParams.from_model(model, 1)
    torso = model.body_index("torso")
    pelvis = model.body_index("pelvis")

    masses = nominal.masses[0] * sample.link_mass_scale
    masses[torso] += sample.trunk_mass_delta
    params.masses[env] = masses
    params.inertias[env] = nominal.inertias[0] * sample.link_mass_scale
    com = nominal.com[0].copy()
    com[pelvis, 0] += sample.base_com_z
    com[pelvis, 1] += -sample.base_com_x
    params.com[env] = com
    params.friction[env] = sample.friction
    params.restitution[env] = sample.restitution
    params.kp_gain[env] = nominal.kp_gain[0] * sample.p_gain_scale
    params.kd_gain[env] = nominal.kd_gain[0] * sample.d_gain_scale
    params.motor_strength[env] = sample.motor_strength


def delay_substeps(sample: RandomizationSample, physics_hz: float) -> int:
    return int(sample.control_delay_ms / 1000.0 * physics_hz)
