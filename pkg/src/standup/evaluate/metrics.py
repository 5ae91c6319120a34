"""Episode metrics, pure functions of traces.

success  -- 1 iff the base height crosses the target and never drops below
            it again before the episode ends (first-crossing convention)
feet     -- summed horizontal path length of both foot keypoints after the
            first crossing (defined only for successful episodes)
smoothness - sum of squared second differences of the joint positions
energy   -- sum of |torque| . |joint velocity| * dt over the control steps
            strictly before the base first rises past the upper stage
            threshold (defined only for successful episodes)
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from ..trace import Trace

CONTROL_DT = 0.02


def _first_crossing(h: np.ndarray, level: float) -> int | None:
    above = h > level
    if not above.any():
        return None
    return int(np.argmax(above))


def episode_success(h_base: np.ndarray, h_targ: float) -> bool:
    """True iff h_base exceeds h_targ at some step and stays above it."""
    c = _first_crossing(np.asarray(h_base), h_targ)
    if c is None:
        return False
    return bool(np.all(np.asarray(h_base)[c:] > h_targ))


def feet_travel(heel: np.ndarray, toe: np.ndarray, h_base: np.ndarray,
                h_targ: float) -> float:
    """Horizontal path length of both foot keypoints after first crossing."""
    c = _first_crossing(np.asarray(h_base), h_targ)
    if c is None:
        raise ValueError("feet travel is undefined without a crossing")
    hx = np.asarray(heel)[c:, 0]
    tx = np.asarray(toe)[c:, 0]
    return float(np.sum(np.abs(np.diff(hx))) + np.sum(np.abs(np.diff(tx))))


def motion_smoothness(joint_pos: np.ndarray, window: int | None = None) -> float:
    """Sum of squared joint-position second differences.

    ``window`` limits the evaluation to the first that many control steps
    (the two-second startup window uses 100 at 50 Hz); default is the full
    episode.
    """
    p = np.asarray(joint_pos, dtype=float)
    if window is not None:
        p = p[:window]
    if p.shape[0] < 3:
        raise ValueError("smoothness needs at least 3 samples")
    dd = p[2:] - 2.0 * p[1:-1] + p[:-2]
    return float(np.sum(dd * dd))


def energy_used(torque: np.ndarray, joint_vel: np.ndarray, h_base: np.ndarray,
                h_stage2: float, dt: float = CONTROL_DT) -> float:
    """Actuation energy before the base first exceeds the upper threshold."""
    tau = np.asarray(torque, dtype=float)
    vel = np.asarray(joint_vel, dtype=float)
    h = np.asarray(h_base, dtype=float)
    c = _first_crossing(h, h_stage2)
    end = len(h) if c is None else c
    power = np.sum(np.abs(tau[:end]) * np.abs(vel[:end]), axis=1)
    return float(np.sum(power) * dt)


def trace_metrics(trace: Trace, h_targ: float, h_stage2: float,
                  smoothness_window: int | None = None) -> dict:
    """All metrics for one episode; undefined entries are None."""
    succ = episode_success(trace.h_base, h_targ)
    out = {
        "success": succ,
        "smoothness": motion_smoothness(trace.joint_pos, smoothness_window),
        "feet": None,
        "energy": None,
    }
    if succ:
        out["feet"] = feet_travel(trace.heel, trace.toe, trace.h_base, h_targ)
        out["energy"] = energy_used(trace.torque, trace.joint_vel,
                                    trace.h_base, h_stage2)
    return out


@dataclass
class TerrainMetrics:
    """Mean and standard deviation across repetitions for one terrain."""

    terrain: str
    repetitions: int
    episodes_per_rep: int
    success_mean: float
    success_std: float
    feet_mean: float | None
    feet_std: float | None
    smoothness_mean: float
    smoothness_std: float
    energy_mean: float | None
    energy_std: float | None

    @staticmethod
    def from_repetitions(terrain: str, reps: list[dict]) -> "TerrainMetrics":
        def agg(key):
            vals = [r[key] for r in reps if r[key] is not None]
            if not vals:
                return None, None
            return float(np.mean(vals)), float(np.std(vals))

        sm, ss = agg("success")
        fm, fs = agg("feet")
        mm, ms = agg("smoothness")
        em, es = agg("energy")
        return TerrainMetrics(
            terrain=terrain, repetitions=len(reps),
            episodes_per_rep=reps[0]["episodes"],
            success_mean=sm, success_std=ss, feet_mean=fm, feet_std=fs,
            smoothness_mean=mm, smoothness_std=ms,
            energy_mean=em, energy_std=es)


@dataclass
class MetricsReport:
    terrains: dict[str, TerrainMetrics]
    seed: int
    meta: dict = field(default_factory=dict)

    def to_json(self) -> str:
        payload = {"seed": self.seed, "meta": self.meta, "terrains": {}}
        for name, t in self.terrains.items():
            payload["terrains"][name] = {
                "repetitions": t.repetitions,
                "episodes_per_rep": t.episodes_per_rep,
                "success_rate": [t.success_mean, t.success_std],
                "feet_travel_m": (None if t.feet_mean is None
                                  else [t.feet_mean, t.feet_std]),
                "smoothness": [t.smoothness_mean, t.smoothness_std],
                "energy_j": (None if t.energy_mean is None
                             else [t.energy_mean, t.energy_std]),
            }
        return json.dumps(payload, indent=2)

    def to_table(self) -> str:
        def cell(mean, std, digits=3):
            if mean is None or (isinstance(mean, float) and math.isnan(mean)):
                return "/"
            return f"{mean:.{digits}f}±{std:.{digits}f}"

        header = (f"{'terrain':<10} {'success':>14} {'feet[m]':>14} "
                  f"{'smoothness':>16} {'energy[J]':>14}")
        lines = [header, "-" * len(header)]
        for name, t in self.terrains.items():
            lines.append(
                f"{name:<10} {cell(t.success_mean, t.success_std):>14} "
                f"{cell(t.feet_mean, t.feet_std):>14} "
                f"{cell(t.smoothness_mean, t.smoothness_std, 2):>16} "
                f"{cell(t.energy_mean, t.energy_std, 1):>14}")
        return "\n".join(lines)
