"""Episode traces: the step-level record shared by live metrics and CSV export.

Columns are written with repr-level precision so a CSV round trip is exact:
metrics recomputed from an exported file match the live values bit for bit.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, fields

import numpy as np

JOINTS = ("hip", "knee", "ankle", "waist", "shoulder", "elbow")


@dataclass
class Trace:
    """One episode's per-control-step arrays."""

    time: np.ndarray        # (T,)
    base_pose: np.ndarray   # (T, 3) x, z, pitch
    base_vel: np.ndarray    # (T, 3) vx, vz, omega
    joint_pos: np.ndarray   # (T, J)
    joint_vel: np.ndarray   # (T, J)
    torque: np.ndarray      # (T, J) mean applied torque over the substeps
    action: np.ndarray      # (T, J)
    h_base: np.ndarray      # (T,)
    h_head: np.ndarray      # (T,)
    stage: np.ndarray       # (T,)
    groups: np.ndarray      # (T, 4) task, style, regularization, post-task
    reward: np.ndarray      # (T,)
    heel: np.ndarray        # (T, 2)
    toe: np.ndarray         # (T, 2)
    contacts: np.ndarray    # (T,) active contact count
    pull_force: np.ndarray  # (T,) assist force applied this step

    @property
    def length(self) -> int:
        return len(self.time)

    def columns(self) -> dict[str, np.ndarray]:
        cols: dict[str, np.ndarray] = {"time": self.time}
        for i, n in enumerate(("x", "z", "pitch")):
            cols[f"base_{n}"] = self.base_pose[:, i]
        for i, n in enumerate(("vx", "vz", "omega")):
            cols[f"base_{n}"] = self.base_vel[:, i]
        for i, n in enumerate(JOINTS):
            cols[f"q_{n}"] = self.joint_pos[:, i]
        for i, n in enumerate(JOINTS):
            cols[f"qd_{n}"] = self.joint_vel[:, i]
        for i, n in enumerate(JOINTS):
            cols[f"tau_{n}"] = self.torque[:, i]
        for i, n in enumerate(JOINTS):
            cols[f"a_{n}"] = self.action[:, i]
        cols["h_base"] = self.h_base
        cols["h_head"] = self.h_head
        cols["stage"] = self.stage
        for i, n in enumerate(("task", "style", "regularization", "post_task")):
            cols[f"r_{n}"] = self.groups[:, i]
        cols["reward"] = self.reward
        cols["heel_x"] = self.heel[:, 0]
        cols["heel_z"] = self.heel[:, 1]
        cols["toe_x"] = self.toe[:, 0]
        cols["toe_z"] = self.toe[:, 1]
        cols["contacts"] = self.contacts
        cols["pull_force"] = self.pull_force
        return cols

    def to_csv(self, path: str) -> None:
        cols = self.columns()
        names = list(cols)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(names)
            for t in range(self.length):
                w.writerow([repr(float(cols[n][t])) for n in names])

    @staticmethod
    def from_csv(path: str) -> "Trace":
        with open(path, newline="") as fh:
            r = csv.reader(fh)
            names = next(r)
            rows = [[float(v) for v in row] for row in r]
        data = np.asarray(rows)
        cols = {n: data[:, i] for i, n in enumerate(names)}
        J = len(JOINTS)

        def stack(prefix, parts):
            return np.stack([cols[f"{prefix}_{p}"] for p in parts], axis=1)

        return Trace(
            time=cols["time"],
            base_pose=stack("base", ("x", "z", "pitch")),
            base_vel=stack("base", ("vx", "vz", "omega")),
            joint_pos=stack("q", JOINTS),
            joint_vel=stack("qd", JOINTS),
            torque=stack("tau", JOINTS),
            action=stack("a", JOINTS),
            h_base=cols["h_base"],
            h_head=cols["h_head"],
            stage=cols["stage"],
            groups=stack("r", ("task", "style", "regularization", "post_task")),
            reward=cols["reward"],
            heel=np.stack([cols["heel_x"], cols["heel_z"]], axis=1),
            toe=np.stack([cols["toe_x"], cols["toe_z"]], axis=1),
            contacts=cols["contacts"],
            pull_force=cols["pull_force"],
        )


class TraceRecorder:
    """Preallocated per-environment recording buffers for a vector env."""

    def __init__(self, n_envs: int, n_joints: int, max_steps: int):
        self.n_envs = n_envs
        self.max_steps = max_steps
        T, N, J = max_steps, n_envs, n_joints
        self.time = np.zeros((T, N))
        self.base_pose = np.zeros((T, N, 3))
        self.base_vel = np.zeros((T, N, 3))
        self.joint_pos = np.zeros((T, N, J))
        self.joint_vel = np.zeros((T, N, J))
        self.torque = np.zeros((T, N, J))
        self.action = np.zeros((T, N, J))
        self.h_base = np.zeros((T, N))
        self.h_head = np.zeros((T, N))
        self.stage = np.zeros((T, N))
        self.groups = np.zeros((T, N, 4))
        self.reward = np.zeros((T, N))
        self.heel = np.zeros((T, N, 2))
        self.toe = np.zeros((T, N, 2))
        self.contacts = np.zeros((T, N))
        self.pull_force = np.zeros((T, N))

    _FIELDS = ("time", "base_pose", "base_vel", "joint_pos", "joint_vel",
               "torque", "action", "h_base", "h_head", "stage", "groups",
               "reward", "heel", "toe", "contacts", "pull_force")

    def write(self, t: np.ndarray, **values) -> None:
        """Write one row per environment at its own step index t, (N,)."""
        rows = np.arange(self.n_envs)
        for name, value in values.items():
            getattr(self, name)[t, rows] = value

    def extract(self, env: int, length: int) -> Trace:
        kw = {name: getattr(self, name)[:length, env].copy()
              for name in self._FIELDS}
        return Trace(**kw)
