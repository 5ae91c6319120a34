"""Robot description and numeric parameter tables for the planar simulator.

The robot is a sagittal-plane kinematic tree rooted at a floating base (the
pelvis).  Left/right limb pairs are lumped into single links, so the default
model has 8 bodies driven by 6 actuated joints plus one fixed attachment
(head on torso).  Generalized coordinates are

    q = [base_x, base_z, base_pitch, q_hip, q_knee, q_ankle, q_waist,
         q_shoulder, q_elbow]

Angle conventions: world x is forward, z is up.  Every body carries a
``rest_angle``, the world angle of its local axis in the canonical standing
pose (pitch = 0, all joint angles = 0).  A supine robot (lying on its back,
feet toward +x) has pitch = +pi/2.  Joint signs are chosen so the
human-convention flexion direction is positive (knee flexion positive even
though it is a clockwise rotation in the sagittal view).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from importlib import resources

import numpy as np


class SimulationFault(RuntimeError):
    """Raised when integration produces a non-finite state."""


@dataclass(frozen=True)
class JointSpec:
    name: str
    sign: float
    limits: tuple[float, float]
    vel_limit: float
    torque_limit: float
    kp: float
    kd: float
    default_angle: float = 0.0
    armature: float = 0.0         # reflected rotor inertia on the joint axis
    friction_torque: float = 0.0  # dry (Coulomb) friction at the joint
    viscous_damping: float = 0.0  # passive viscous drag at the joint


@dataclass(frozen=True)
class BodySpec:
    name: str
    parent: str | None
    joint: str | None          # actuated joint name, or None for base / fixed
    attach: tuple[float, float]  # joint origin in the parent's local frame
    rest_angle: float          # world angle of the local axis when standing
    length: float
    mass: float
    inertia: float             # rotational inertia about the body CoM
    com: tuple[float, float]   # CoM offset in the body's local frame


@dataclass(frozen=True)
class KeypointSpec:
    name: str
    body: str
    offset: tuple[float, float]
    contact: bool = True


@dataclass(frozen=True)
class ContactParams:
    """Penalty-contact constants shared by all keypoints."""

    k_normal: float = 60000.0
    c_normal: float = 500.0
    k_anchor: float = 10000.0
    c_tangent: float = 200.0
    friction: float = 0.8
    restitution: float = 0.0
    max_penetration: float = 0.06

    def validate(self) -> None:
        if self.k_normal <= 0 or self.k_anchor <= 0:
            raise ValueError("contact stiffness must be positive")
        if self.c_normal < 0 or self.c_tangent < 0:
            raise ValueError("contact damping must be non-negative")
        if not 0.0 <= self.restitution <= 1.0:
            raise ValueError("restitution must lie in [0, 1]")
        if self.friction < 0:
            raise ValueError("friction must be non-negative")


@dataclass(frozen=True)
class RobotModel:
    """Structured robot description, loadable from a JSON config file."""

    bodies: tuple[BodySpec, ...]
    joints: tuple[JointSpec, ...]
    keypoints: tuple[KeypointSpec, ...]
    contact: ContactParams
    gravity: float = 9.81
    name: str = "robot"

    # ---------------------------------------------------------------- loading

    @staticmethod
    def from_dict(data: dict) -> "RobotModel":
        joints = tuple(
            JointSpec(
                name=j["name"], sign=float(j["sign"]),
                limits=(float(j["limits"][0]), float(j["limits"][1])),
                vel_limit=float(j["vel_limit"]),
                torque_limit=float(j["torque_limit"]),
                kp=float(j["kp"]), kd=float(j["kd"]),
                default_angle=float(j.get("default_angle", 0.0)),
                armature=float(j.get("armature", 0.0)),
                friction_torque=float(j.get("friction_torque", 0.0)),
                viscous_damping=float(j.get("viscous_damping", 0.0)),
            )
            for j in data["joints"]
        )
        bodies = tuple(
            BodySpec(
                name=b["name"], parent=b.get("parent"), joint=b.get("joint"),
                attach=(float(b["attach"][0]), float(b["attach"][1])),
                rest_angle=float(b["rest_angle"]), length=float(b["length"]),
                mass=float(b["mass"]), inertia=float(b["inertia"]),
                com=(float(b["com"][0]), float(b["com"][1])),
            )
            for b in data["bodies"]
        )
        keypoints = tuple(
            KeypointSpec(
                name=k["name"], body=k["body"],
                offset=(float(k["offset"][0]), float(k["offset"][1])),
                contact=bool(k.get("contact", True)),
            )
            for k in data["keypoints"]
        )
        model = RobotModel(
            bodies=bodies, joints=joints, keypoints=keypoints,
            contact=ContactParams(**data.get("contact", {})),
            gravity=float(data.get("gravity", 9.81)),
            name=data.get("name", "robot"),
        )
        model.validate()
        return model

    @staticmethod
    def from_json(path: str) -> "RobotModel":
        with open(path) as fh:
            return RobotModel.from_dict(json.load(fh))

    @staticmethod
    def default() -> "RobotModel":
        text = resources.files("standup.data").joinpath("default_model.json").read_text()
        return RobotModel.from_dict(json.loads(text))

    def to_dict(self) -> dict:
        return {
            "version": 1,
            "name": self.name,
            "gravity": self.gravity,
            "bodies": [{
                "name": b.name, "parent": b.parent, "joint": b.joint,
                "attach": list(b.attach), "rest_angle": b.rest_angle,
                "length": b.length, "mass": b.mass, "inertia": b.inertia,
                "com": list(b.com),
            } for b in self.bodies],
            "joints": [{
                "name": j.name, "sign": j.sign, "limits": list(j.limits),
                "vel_limit": j.vel_limit, "torque_limit": j.torque_limit,
                "kp": j.kp, "kd": j.kd, "default_angle": j.default_angle,
                "armature": j.armature, "friction_torque": j.friction_torque,
                "viscous_damping": j.viscous_damping,
            } for j in self.joints],
            "keypoints": [{
                "name": k.name, "body": k.body, "offset": list(k.offset),
                "contact": k.contact,
            } for k in self.keypoints],
            "contact": {
                "k_normal": self.contact.k_normal,
                "c_normal": self.contact.c_normal,
                "k_anchor": self.contact.k_anchor,
                "c_tangent": self.contact.c_tangent,
                "friction": self.contact.friction,
                "restitution": self.contact.restitution,
                "max_penetration": self.contact.max_penetration,
            },
        }

    def to_json(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    # ------------------------------------------------------------- structure

    def validate(self) -> None:
        names = [b.name for b in self.bodies]
        if len(set(names)) != len(names):
            raise ValueError("duplicate body names")
        if self.bodies[0].parent is not None:
            raise ValueError("first body must be the floating base")
        seen = {self.bodies[0].name}
        for b in self.bodies[1:]:
            if b.parent not in seen:
                raise ValueError(f"body {b.name!r}: parent {b.parent!r} must precede it (tree order)")
            seen.add(b.name)
        for b in self.bodies:
            if b.mass <= 0 or b.inertia <= 0:
                raise ValueError(f"body {b.name!r}: mass and inertia must be positive")
        joint_names = {j.name for j in self.joints}
        used = [b.joint for b in self.bodies if b.joint]
        if sorted(used) != sorted(joint_names):
            raise ValueError("each joint must drive exactly one body")
        for j in self.joints:
            if j.limits[0] >= j.limits[1]:
                raise ValueError(f"joint {j.name!r}: lower limit must be below upper")
            if j.torque_limit <= 0 or j.vel_limit <= 0:
                raise ValueError(f"joint {j.name!r}: limits must be positive")
        body_names = set(names)
        for k in self.keypoints:
            if k.body not in body_names:
                raise ValueError(f"keypoint {k.name!r}: unknown body {k.body!r}")
        self.contact.validate()

    @property
    def n_joints(self) -> int:
        return len(self.joints)

    @property
    def nq(self) -> int:
        return 3 + len(self.joints)

    @property
    def total_mass(self) -> float:
        return sum(b.mass for b in self.bodies)

    def joint_index(self, name: str) -> int:
        for i, j in enumerate(self.joints):
            if j.name == name:
                return i
        raise KeyError(name)

    def body_index(self, name: str) -> int:
        for i, b in enumerate(self.bodies):
            if b.name == name:
                return i
        raise KeyError(name)

    def keypoint_index(self, name: str) -> int:
        for i, k in enumerate(self.keypoints):
            if k.name == name:
                return i
        raise KeyError(name)

    def params(self, n_envs: int = 1) -> "ModelParams":
        return ModelParams.from_model(self, n_envs)


@dataclass
class ModelParams:
    """Numeric parameter table with a leading environment axis.

    Constant structure (topology, attachment geometry, limits) is shared;
    fields that domain randomization perturbs (masses, CoM offsets, gains,
    friction, ...) carry a leading ``(n_envs, ...)`` axis so each environment
    instance can hold its own physical parameters.
    """

    model: RobotModel
    n_envs: int
    # constant structure
    parent_idx: np.ndarray        # (B,) int, -1 for base
    attach: np.ndarray            # (B, 2)
    rest_angle: np.ndarray        # (B,)
    ang_rows: np.ndarray          # (B, nq) signed 0/1 angle composition rows
    joint_body: np.ndarray        # (J,) body index driven by each joint
    joint_lo: np.ndarray          # (J,)
    joint_hi: np.ndarray          # (J,)
    vel_limit: np.ndarray         # (J,)
    torque_limit: np.ndarray      # (J,)
    default_angles: np.ndarray    # (J,)
    armature: np.ndarray          # (J,)
    friction_torque: np.ndarray   # (J,)
    viscous_damping: np.ndarray   # (J,)
    kp_body: np.ndarray           # (K,) keypoint body index
    kp_offset: np.ndarray         # (K, 2)
    kp_contact: np.ndarray        # (K,) bool
    gravity: float
    # randomizable, leading env axis
    masses: np.ndarray            # (N, B)
    inertias: np.ndarray          # (N, B)
    com: np.ndarray               # (N, B, 2)
    kp_gain: np.ndarray           # (N, J)
    kd_gain: np.ndarray           # (N, J)
    motor_strength: np.ndarray    # (N, J)
    friction: np.ndarray          # (N,)
    restitution: np.ndarray       # (N,)
    contact: ContactParams = field(default_factory=ContactParams)

    @staticmethod
    def from_model(model: RobotModel, n_envs: int = 1) -> "ModelParams":
        B = len(model.bodies)
        J = len(model.joints)
        nq = model.nq
        name_to_idx = {b.name: i for i, b in enumerate(model.bodies)}
        joint_to_col = {j.name: 3 + i for i, j in enumerate(model.joints)}
        joint_sign = {j.name: j.sign for j in model.joints}

        parent_idx = np.full(B, -1, dtype=np.int64)
        ang_rows = np.zeros((B, nq))
        ang_rows[:, 2] = 1.0  # base pitch rotates every body
        joint_body = np.zeros(J, dtype=np.int64)
        for i, b in enumerate(model.bodies):
            if b.parent is None:
                continue
            p = name_to_idx[b.parent]
            parent_idx[i] = p
            ang_rows[i] = ang_rows[p].copy()
            ang_rows[i, 2] = 1.0
            if b.joint is not None:
                ang_rows[i, joint_to_col[b.joint]] = joint_sign[b.joint]
                joint_body[joint_to_col[b.joint] - 3] = i

        attach = np.array([b.attach for b in model.bodies])
        rest_angle = np.array([b.rest_angle for b in model.bodies])
        masses = np.tile(np.array([b.mass for b in model.bodies]), (n_envs, 1))
        inertias = np.tile(np.array([b.inertia for b in model.bodies]), (n_envs, 1))
        com = np.tile(np.array([b.com for b in model.bodies]), (n_envs, 1, 1))

        return ModelParams(
            model=model,
            n_envs=n_envs,
            parent_idx=parent_idx,
            attach=attach,
            rest_angle=rest_angle,
            ang_rows=ang_rows,
            joint_body=joint_body,
            joint_lo=np.array([j.limits[0] for j in model.joints]),
            joint_hi=np.array([j.limits[1] for j in model.joints]),
            vel_limit=np.array([j.vel_limit for j in model.joints]),
            torque_limit=np.array([j.torque_limit for j in model.joints]),
            default_angles=np.array([j.default_angle for j in model.joints]),
            armature=np.array([j.armature for j in model.joints]),
            friction_torque=np.array([j.friction_torque for j in model.joints]),
            viscous_damping=np.array([j.viscous_damping for j in model.joints]),
            kp_body=np.array([name_to_idx[k.body] for k in model.keypoints], dtype=np.int64),
            kp_offset=np.array([k.offset for k in model.keypoints]),
            kp_contact=np.array([k.contact for k in model.keypoints]),
            gravity=model.gravity,
            masses=masses,
            inertias=inertias,
            com=com,
            kp_gain=np.tile(np.array([j.kp for j in model.joints]), (n_envs, 1)),
            kd_gain=np.tile(np.array([j.kd for j in model.joints]), (n_envs, 1)),
            motor_strength=np.ones((n_envs, J)),
            friction=np.full(n_envs, model.contact.friction),
            restitution=np.full(n_envs, model.contact.restitution),
            contact=model.contact,
        )

    @property
    def n_bodies(self) -> int:
        return len(self.model.bodies)

    @property
    def n_joints(self) -> int:
        return len(self.model.joints)

    @property
    def nq(self) -> int:
        return self.model.nq

    def reset_env_rows(self, idx: np.ndarray) -> None:
        """Restore nominal (un-randomized) parameters for the given env rows."""
        nominal = ModelParams.from_model(self.model, 1)
        for name in ("masses", "inertias", "com", "kp_gain", "kd_gain",
                     "motor_strength", "friction", "restitution"):
            getattr(self, name)[idx] = getattr(nominal, name)[0]


@dataclass
class RobotState:
    """Generalized coordinates/velocities with a leading environment axis.

    ``contact_anchor`` is the friction stick-position memory per contact
    keypoint; it travels with the state so stepping stays a pure function.
    """

    q: np.ndarray       # (N, nq)
    qd: np.ndarray      # (N, nq)
    time: np.ndarray    # (N,)
    contact_anchor: np.ndarray | None = None   # (N, K, 2)

    @staticmethod
    def zeros(nq: int, n_envs: int = 1) -> "RobotState":
        return RobotState(q=np.zeros((n_envs, nq)), qd=np.zeros((n_envs, nq)),
                          time=np.zeros(n_envs))

    def copy(self) -> "RobotState":
        anchor = None if self.contact_anchor is None else self.contact_anchor.copy()
        return RobotState(q=self.q.copy(), qd=self.qd.copy(), time=self.time.copy(),
                          contact_anchor=anchor)

    # named views ---------------------------------------------------------

    @property
    def base_x(self) -> np.ndarray:
        return self.q[:, 0]

    @property
    def base_z(self) -> np.ndarray:
        return self.q[:, 1]

    @property
    def pitch(self) -> np.ndarray:
        return self.q[:, 2]

    @property
    def base_vx(self) -> np.ndarray:
        return self.qd[:, 0]

    @property
    def base_vz(self) -> np.ndarray:
        return self.qd[:, 1]

    @property
    def omega(self) -> np.ndarray:
        return self.qd[:, 2]

    @property
    def joint_pos(self) -> np.ndarray:
        return self.q[:, 3:]

    @property
    def joint_vel(self) -> np.ndarray:
        return self.qd[:, 3:]

    def is_finite(self) -> np.ndarray:
        return np.isfinite(self.q).all(axis=1) & np.isfinite(self.qd).all(axis=1)


def make_state(params: ModelParams, *, base_x: float = 0.0, base_z: float = 0.0,
               pitch: float = 0.0, joint_pos: np.ndarray | None = None,
               n_envs: int | None = None) -> RobotState:
    """Convenience constructor for a state at rest."""
    n = params.n_envs if n_envs is None else n_envs
    st = RobotState.zeros(params.nq, n)
    st.q[:, 0] = base_x
    st.q[:, 1] = base_z
    st.q[:, 2] = pitch
    if joint_pos is not None:
        st.q[:, 3:] = np.asarray(joint_pos)
    return st
