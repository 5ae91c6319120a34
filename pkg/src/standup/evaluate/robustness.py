"""Robustness sweeps: success/energy curves under graded disturbances.

Four disturbance kinds, applied per their definitions:
  com_offset_x      -- sagittal shift of the base CoM (model-level)
  sagittal_force    -- constant horizontal force on the base, every step
  init_joint_offset -- uniform per-joint offset added to the reset posture
  torque_dropout    -- per 200 Hz substep, each joint's torque is zeroed
                       with the given probability
"""

from __future__ import annotations

import csv
import dataclasses
from dataclasses import dataclass

import numpy as np

from ..config import EnvConfig
from ..env import EvalOverrides
from ..physics.model import RobotModel
from .protocol import run_repetition

DISTURBANCE_KINDS = ("com_offset_x", "sagittal_force", "init_joint_offset",
                     "torque_dropout")


@dataclass(frozen=True)
class DisturbanceSpec:
    kind: str
    magnitudes: tuple[float, ...]

    def __post_init__(self):
        if self.kind not in DISTURBANCE_KINDS:
            raise ValueError(f"unknown disturbance kind {self.kind!r}")
        mags = tuple(float(m) for m in self.magnitudes)
        if sorted(mags) != list(mags):
            raise ValueError("magnitudes must be sorted ascending")
        if self.kind == "torque_dropout" and not all(0 <= m <= 1 for m in mags):
            raise ValueError("dropout ratios must lie in [0, 1]")
        object.__setattr__(self, "magnitudes", mags)


def _overrides_for(kind: str, magnitude: float) -> EvalOverrides:
    ov = EvalOverrides()
    setattr(ov, kind, magnitude)
    return ov


def robustness_sweep(policy_fn, model: RobotModel, env_cfg: EnvConfig,
                     spec: DisturbanceSpec, seed: int, terrain: str = "ground",
                     episodes: int = 100, beta: float = 1.0) -> list[dict]:
    """One protocol run per magnitude; returns curve rows.

    Each row: magnitude, success rate, mean energy over successful episodes
    (None when every episode failed), and the episode count.
    """
    rows = []
    for k, mag in enumerate(spec.magnitudes):
        rep = run_repetition(
            policy_fn, model, env_cfg, terrain,
            seed=seed * 7919 + 13 * k, episodes=episodes, beta=beta,
            overrides=_overrides_for(spec.kind, mag))
        rows.append({
            "magnitude": mag,
            "success_rate": rep["success"],
            "energy_j": rep["energy"],
            "episodes": episodes,
        })
    return rows


def save_curve(path: str, kind: str, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["kind", "magnitude", "success_rate", "energy_j", "episodes"])
        for r in rows:
            w.writerow([kind, repr(r["magnitude"]), repr(r["success_rate"]),
                        "" if r["energy_j"] is None else repr(r["energy_j"]),
                        r["episodes"]])


def success_monotone_ok(rows: list[dict], alpha_z: float = 1.645) -> bool:
    """Non-increasing success at 95% confidence.

    For each adjacent magnitude pair, a one-sided two-proportion z-test
    must not show a significant increase; sampling noise that keeps z below
    the critical value is accepted.
    """
    for lo, hi in zip(rows[:-1], rows[1:]):
        n1, n2 = lo["episodes"], hi["episodes"]
        p1, p2 = lo["success_rate"], hi["success_rate"]
        pooled = (p1 * n1 + p2 * n2) / (n1 + n2)
        se = np.sqrt(pooled * (1 - pooled) * (1 / n1 + 1 / n2))
        if se == 0.0:
            if p2 > p1:
                return False
            continue
        z = (p2 - p1) / se
        if z > alpha_z:
            return False
    return True
