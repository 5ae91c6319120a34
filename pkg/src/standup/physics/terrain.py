"""Terrain description and batched surface queries.

A terrain is a piecewise-linear height profile z(x) (a function: one z per x)
plus at most one vertical wall segment.  The four supported kinds:

    ground   -- flat at z = 0
    platform -- raised top for x <= 0 dropping to the ground; the vertical
                face is represented by the wall segment
    slope    -- uniform incline rising toward -x (the robot lies head-uphill)
    wall     -- flat ground plus a free-standing vertical wall the robot
                leans back against; the sampled inclination is the initial
                trunk recline angle, not a tilt of the wall itself

Walls always face +x (they block motion toward -x), which covers both the
platform face and the lean-back wall.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

KINDS = ("ground", "platform", "wall", "slope")

PLATFORM_HEIGHT_RANGE = (0.20, 0.92)
SLOPE_ANGLE_RANGE = (np.deg2rad(1.0), np.deg2rad(14.0))
WALL_INCLINE_RANGE = (np.deg2rad(14.0), np.deg2rad(84.0))

_EXTENT = 100.0       # profile x span; episodes stay well inside
_FACE_RUN = 0.01      # horizontal run used to keep step profiles single-valued

MAX_PROFILE_POINTS = 4


@dataclass(frozen=True)
class Terrain:
    """Single-terrain description (see TerrainBatch for the vectorized form)."""

    kind: str
    profile_x: tuple[float, ...]
    profile_z: tuple[float, ...]
    wall_x: float | None = None
    wall_z: tuple[float, float] | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown terrain kind {self.kind!r}")
        xs = np.asarray(self.profile_x)
        if np.any(np.diff(xs) <= 0):
            raise ValueError("profile x coordinates must be strictly increasing")

    @staticmethod
    def ground() -> "Terrain":
        return Terrain("ground", (-_EXTENT, _EXTENT), (0.0, 0.0))

    @staticmethod
    def platform(height: float) -> "Terrain":
        lo, hi = PLATFORM_HEIGHT_RANGE
        if not lo <= height <= hi:
            raise ValueError(f"platform height {height} outside [{lo}, {hi}]")
        return Terrain(
            "platform",
            (-_EXTENT, 0.0, _FACE_RUN, _EXTENT),
            (height, height, 0.0, 0.0),
            wall_x=0.0, wall_z=(0.0, height),
            params={"height": height},
        )

    @staticmethod
    def slope(angle: float) -> "Terrain":
        lo, hi = SLOPE_ANGLE_RANGE
        if not lo <= angle <= hi:
            raise ValueError("slope angle outside the configured range")
        drop = _EXTENT * np.tan(angle)
        return Terrain("slope", (-_EXTENT, _EXTENT), (drop, -drop),
                       params={"angle": angle})

    @staticmethod
    def wall(incline: float, wall_x: float) -> "Terrain":
        lo, hi = WALL_INCLINE_RANGE
        if not lo <= incline <= hi:
            raise ValueError("wall incline outside the configured range")
        return Terrain("wall", (-_EXTENT, _EXTENT), (0.0, 0.0),
                       wall_x=wall_x, wall_z=(0.0, 2.0),
                       params={"incline": incline})

    def surface_height(self, x: float) -> float:
        return float(np.interp(x, self.profile_x, self.profile_z))


class TerrainBatch:
    """Per-environment terrain arrays supporting batched contact queries."""

    def __init__(self, n_envs: int):
        self.n_envs = n_envs
        P = MAX_PROFILE_POINTS
        self.prof_x = np.zeros((n_envs, P))
        self.prof_x[:] = np.linspace(-_EXTENT, _EXTENT, P)
        self.prof_z = np.zeros((n_envs, P))
        self.wall_x = np.zeros(n_envs)
        self.wall_lo = np.zeros(n_envs)
        self.wall_hi = np.zeros(n_envs)
        self.wall_on = np.zeros(n_envs, dtype=bool)
        self.kind = np.zeros(n_envs, dtype=np.int64)  # index into KINDS

    def set_env(self, i: int, terrain: Terrain) -> None:
        P = MAX_PROFILE_POINTS
        xs = np.asarray(terrain.profile_x, dtype=float)
        zs = np.asarray(terrain.profile_z, dtype=float)
        # pad by extending the last segment with zero-length increments
        if xs.size < P:
            pad = P - xs.size
            extra = xs[-1] + np.arange(1, pad + 1) * 1e-3 + _EXTENT
            xs = np.concatenate([xs, extra])
            zs = np.concatenate([zs, np.full(pad, zs[-1])])
        self.prof_x[i] = xs[:P]
        self.prof_z[i] = zs[:P]
        if terrain.wall_x is not None:
            self.wall_on[i] = True
            self.wall_x[i] = terrain.wall_x
            self.wall_lo[i], self.wall_hi[i] = terrain.wall_z
        else:
            self.wall_on[i] = False
        self.kind[i] = KINDS.index(terrain.kind)

    # batched queries ------------------------------------------------------

    def _segment_index(self, x: np.ndarray) -> np.ndarray:
        """Segment index for each query point; x may be (N,) or (N, K)."""
        px = self.prof_x
        if x.ndim == 2:
            px = px[:, None, :]
            idx = (x[..., None] >= px[..., 1:-1]).sum(axis=-1)
        else:
            idx = (x[:, None] >= px[:, 1:-1]).sum(axis=-1)
        return idx

    def surface(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Height, unit normal, and unit tangent of the profile under x.

        x: (N,) or (N, K); returns (z, normal, tangent) where normal/tangent
        have a trailing axis of 2 and the normal points away from the ground.
        """
        idx = self._segment_index(x)
        rows = np.arange(self.n_envs)
        if x.ndim == 2:
            rows = rows[:, None]
        gx = self.prof_x[rows, idx]
        gz = self.prof_z[rows, idx]
        gx2 = self.prof_x[rows, idx + 1]
        gz2 = self.prof_z[rows, idx + 1]
        slope = (gz2 - gz) / (gx2 - gx)
        z = gz + slope * (x - gx)
        inv_len = 1.0 / np.sqrt(1.0 + slope**2)
        normal = np.empty(x.shape + (2,))
        normal[..., 0] = -slope * inv_len
        normal[..., 1] = inv_len
        tangent = np.empty_like(normal)
        tangent[..., 0] = inv_len
        tangent[..., 1] = slope * inv_len
        return z, normal, tangent

    def surface_height(self, x: np.ndarray) -> np.ndarray:
        z, _, _ = self.surface(x)
        return z
