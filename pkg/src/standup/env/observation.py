"""Observation frames, history stacking, and uniform sensor noise.

A frame is [base angular velocity, pitch, joint positions, joint
velocities, previous action, action rescaler], all in raw physical units.
The policy observation stacks the most recent H frames oldest-first; at
episode start the history is padded by repeating the first frame.  Noise
is injected into each fresh frame before it enters the history, with the
per-channel uniform scales below (the previous-action channels carry none).
"""

from __future__ import annotations

import numpy as np

NOISE_ANG_VEL = 0.2
NOISE_PITCH = 0.05
NOISE_JOINT_POS = 0.01
NOISE_JOINT_VEL = 1.5
NOISE_RESCALER = 0.025

OBS_CLIP = 100.0


class ObservationLayout:
    def __init__(self, n_joints: int, history: int):
        self.n_joints = n_joints
        self.history = history
        self.frame_size = 3 * n_joints + 3
        self.obs_dim = self.frame_size * history
        J = n_joints
        self.sl_omega = slice(0, 1)
        self.sl_pitch = slice(1, 2)
        self.sl_joint_pos = slice(2, 2 + J)
        self.sl_joint_vel = slice(2 + J, 2 + 2 * J)
        self.sl_action = slice(2 + 2 * J, 2 + 3 * J)
        self.sl_beta = slice(2 + 3 * J, 3 + 3 * J)
        scales = np.zeros(self.frame_size)
        scales[self.sl_omega] = NOISE_ANG_VEL
        scales[self.sl_pitch] = NOISE_PITCH
        scales[self.sl_joint_pos] = NOISE_JOINT_POS
        scales[self.sl_joint_vel] = NOISE_JOINT_VEL
        scales[self.sl_beta] = NOISE_RESCALER
        self.noise_scales = scales

    def build_frame(self, state, last_action: np.ndarray,
                    beta: np.ndarray) -> np.ndarray:
        N = state.q.shape[0]
        frame = np.empty((N, self.frame_size))
        frame[:, self.sl_omega] = state.qd[:, 2:3]
        frame[:, self.sl_pitch] = state.q[:, 2:3]
        frame[:, self.sl_joint_pos] = state.q[:, 3:]
        frame[:, self.sl_joint_vel] = state.qd[:, 3:]
        frame[:, self.sl_action] = last_action
        frame[:, self.sl_beta] = np.asarray(beta).reshape(N, 1)
        # bound extreme transients so downstream networks stay in range
        np.clip(frame, -OBS_CLIP, OBS_CLIP, out=frame)
        return frame

    def inject_noise(self, frame: np.ndarray,
                     rng: np.random.Generator) -> np.ndarray:
        noise = rng.uniform(-1.0, 1.0, size=frame.shape) * self.noise_scales
        return frame + noise

    def policy_input_scales(self) -> np.ndarray:
        """Fixed per-channel input conditioning for the networks.

        Raw joint velocities reach tens of rad/s; a constant diagonal
        rescaling keeps network inputs O(1) without any stateful
        normalization, so checkpoints stay self-contained.
        """
        s = np.ones(self.frame_size)
        s[self.sl_omega] = 0.25
        s[self.sl_joint_vel] = 0.05
        return np.tile(s, self.history)


class HistoryBuffer:
    """Rolling per-environment stack of the last H frames (oldest first)."""

    def __init__(self, n_envs: int, layout: ObservationLayout):
        self.layout = layout
        self.frames = np.zeros((n_envs, layout.history, layout.frame_size))

    def reset(self, idx: np.ndarray, frame: np.ndarray) -> None:
        self.frames[idx] = frame[:, None, :]

    def push(self, frame: np.ndarray) -> None:
        self.frames[:, :-1] = self.frames[:, 1:]
        self.frames[:, -1] = frame

    def observation(self) -> np.ndarray:
        n = self.frames.shape[0]
        return self.frames.reshape(n, self.layout.obs_dim).copy()
