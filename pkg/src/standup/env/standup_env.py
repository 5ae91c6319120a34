"""The vectorized stand-up environment.

Each of the N instances owns its terrain, randomized physical parameters,
and episode-level RNG stream (split from the root seed); a shared stream
drives dense per-step noise (sensor noise, torque injection, dropout).
Control runs at 50 Hz over 4 physics substeps at 200 Hz; the PD target is
``joint_pos + beta * action`` held for the control step, subject to the
per-episode control delay.  Episodes are fixed length; simulation faults
terminate early with a failure flag.  Finished environments auto-reset,
and the curriculum coordinator steps once per finishing batch using the
mean end-of-episode head height.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..config import EnvConfig
from ..physics.model import RobotModel, RobotState, SimulationFault
from ..physics.terrain import (
    Terrain, TerrainBatch, PLATFORM_HEIGHT_RANGE, SLOPE_ANGLE_RANGE,
    WALL_INCLINE_RANGE, KINDS,
)
from ..physics.kinematics import forward_kinematics, keypoint_summary
from ..physics.dynamics import pd_torque, step_dynamics
from ..trace import TraceRecorder, Trace
from .curriculum import CurriculumState, initial_curriculum, curriculum_update
from .observation import ObservationLayout, HistoryBuffer
from .randomization import (
    sample_randomization, nominal_sample, apply_randomization, delay_substeps,
)
from .rewards import RewardEngine, StepBuffers, stage_of

_TARGET_RING = 32  # control steps of PD-target history (covers max delay)


@dataclass
class EvalOverrides:
    """Evaluation-time departures from the training configuration."""

    noise: bool | None = None            # None: follow the env config
    randomization: bool | None = None
    pull_force: bool = True              # False disables the assist force
    freeze_curriculum: bool = False
    com_offset_x: float = 0.0            # sagittal base CoM shift, m
    sagittal_force: float = 0.0          # constant horizontal force, N
    init_joint_offset: float = 0.0       # extra uniform reset offset, rad
    torque_dropout: float = 0.0          # per-substep zeroing probability


class StandupVecEnv:
    def __init__(self, model: RobotModel, cfg: EnvConfig, n_envs: int,
                 seed: int, overrides: EvalOverrides | None = None,
                 record_traces: bool = False):
        cfg.validate()
        self.model = model
        self.cfg = cfg
        self.n_envs = n_envs
        self.overrides = overrides or EvalOverrides()
        self.params = model.params(n_envs)
        self.terrain = TerrainBatch(n_envs)
        self.engine = RewardEngine(cfg, self.params)
        self.n_joints = model.n_joints
        self.layout = ObservationLayout(self.n_joints, cfg.history_length)
        self.history = HistoryBuffer(n_envs, self.layout)

        ss = np.random.SeedSequence(seed)
        children = ss.spawn(n_envs + 1)
        self.env_rngs = [np.random.Generator(np.random.PCG64(c)) for c in children[:-1]]
        self.noise_rng = np.random.Generator(np.random.PCG64(children[-1]))

        self.state = RobotState.zeros(model.nq, n_envs)
        self.curriculum: CurriculumState = initial_curriculum(cfg)

        J = self.n_joints
        self.action = np.zeros((n_envs, J))
        self.prev_action = np.zeros((n_envs, J))
        self.prev2_action = np.zeros((n_envs, J))
        self.joint_vel_prev = np.zeros((n_envs, J))
        self.pd_target = np.zeros((n_envs, J))
        self.target_ring = np.zeros((n_envs, _TARGET_RING, J))
        self.global_substep = np.zeros(n_envs, dtype=np.int64)
        self.delay = np.zeros(n_envs, dtype=np.int64)
        self.rfi_scale = np.zeros(n_envs)
        self.episode_step = np.zeros(n_envs, dtype=np.int64)
        self.terrain_kind = np.zeros(n_envs, dtype=np.int64)
        self.h_targ = np.full(n_envs, 0.7)
        self.crossed = np.zeros(n_envs, dtype=bool)
        self.held = np.ones(n_envs, dtype=bool)
        self.episodes_finished = 0

        self._curriculum_pool: list[float] = []
        self.recorder = (TraceRecorder(n_envs, J, cfg.episode_steps)
                         if record_traces else None)
        self.completed_traces: list[Trace] = []

        self._kp_foot = [model.keypoint_index("heel"), model.keypoint_index("toe")]

    # ------------------------------------------------------------- helpers

    @property
    def obs_dim(self) -> int:
        return self.layout.obs_dim

    @property
    def n_actions(self) -> int:
        return self.n_joints

    def _noise_enabled(self) -> bool:
        if self.overrides.noise is not None:
            return self.overrides.noise
        return self.cfg.observation_noise

    def _randomization_enabled(self) -> bool:
        if self.overrides.randomization is not None:
            return self.overrides.randomization
        return self.cfg.randomization

    def current_beta(self) -> float:
        return self.curriculum.beta

    # -------------------------------------------------------------- resets

    def reset_all(self) -> np.ndarray:
        self._reset_envs(np.arange(self.n_envs))
        return self.history.observation()

    def _sample_posture(self, i: int, rng: np.random.Generator,
                        sample) -> tuple[Terrain, float, float, np.ndarray]:
        kind = self.cfg.terrains[rng.integers(len(self.cfg.terrains))]
        q = self.params.default_angles.copy()
        base_x = 0.0
        if kind == "ground":
            pitch = np.pi / 2 + rng.uniform(-0.05, 0.10)
            terrain = Terrain.ground()
        elif kind == "slope":
            angle = rng.uniform(*SLOPE_ANGLE_RANGE)
            pitch = np.pi / 2 - angle + rng.uniform(-0.05, 0.10)
            terrain = Terrain.slope(angle)
        elif kind == "platform":
            height = rng.uniform(*PLATFORM_HEIGHT_RANGE)
            pitch = rng.uniform(0.0, 0.25)
            q[self.model.joint_index("hip")] = (
                np.pi / 2 - pitch + rng.uniform(-0.15, 0.15))
            q[self.model.joint_index("knee")] = np.clip(
                pitch + q[self.model.joint_index("hip")] + rng.uniform(-0.2, 0.2),
                *self.model.joints[self.model.joint_index("knee")].limits)
            base_x = -0.10 + rng.uniform(-0.05, 0.05)
            terrain = Terrain.platform(height)
        else:  # wall
            incline = rng.uniform(*WALL_INCLINE_RANGE)
            pitch = incline
            q[self.model.joint_index("hip")] = (
                np.pi / 2 - pitch + rng.uniform(-0.1, 0.1))
            q[self.model.joint_index("knee")] = rng.uniform(0.0, 0.3)
            terrain = Terrain.wall(incline, wall_x=0.0)  # x fixed after placement

        q = q * sample.init_angle_scale + sample.init_angle_offset
        if self.overrides.init_joint_offset > 0.0:
            q = q + rng.uniform(-self.overrides.init_joint_offset,
                                self.overrides.init_joint_offset, q.shape)
        q = np.clip(q, self.params.joint_lo, self.params.joint_hi)
        return terrain, pitch, base_x, q

    def _place_env(self, i: int, terrain: Terrain, pitch: float,
                   base_x: float, q_joints: np.ndarray) -> Terrain:
        """Write posture into env row i, resting the lowest contact keypoint
        2 mm above the surface; for wall terrain, attach the wall plane to
        the reclined back."""
        self.state.q[i, 0] = base_x
        self.state.q[i, 1] = 0.0
        self.state.q[i, 2] = pitch
        self.state.q[i, 3:] = q_joints
        self.state.qd[i] = 0.0
        frames = forward_kinematics(self.params, self.state)
        kp = frames.keypoints[i][self.params.kp_contact]
        tb = TerrainBatch(1)
        tb.set_env(0, terrain)
        clearance = kp[:, 1] - tb.surface_height(np.tile(kp[:, 0], (1, 1)))[0]
        self.state.q[i, 1] = -(clearance.min()) + 0.002
        if terrain.kind == "wall":
            frames = forward_kinematics(self.params, self.state)
            back = frames.keypoints[i, self.model.keypoint_index("torso_back")]
            terrain = Terrain.wall(terrain.params["incline"],
                                   wall_x=float(back[0]) - 0.002)
        self.terrain.set_env(i, terrain)
        self.terrain_kind[i] = KINDS.index(terrain.kind)
        self.h_targ[i] = self.cfg.h_targ[terrain.kind]
        return terrain

    def _settle(self, idx: np.ndarray) -> None:
        """Contact-relaxation window: hold the initial pose with PD while
        the sampled posture comes to rest; untouched envs are restored."""
        if self.state.contact_anchor is not None:
            # friction anchors belong to the previous episode's posture
            frames = forward_kinematics(self.params, self.state)
            self.state.contact_anchor[idx] = frames.keypoints[idx]
        saved = self.state.copy()
        target = self.state.joint_pos.copy()
        steps = int(round(self.cfg.settle_time * self.cfg.physics_hz))
        st = self.state
        for _ in range(steps):
            tau, _ = pd_torque(st.joint_pos, st.joint_vel, target,
                               self.params.kp_gain, self.params.kd_gain,
                               self.params.torque_limit)
            st, _ = step_dynamics(self.params, st, tau, self.cfg.physics_dt,
                                  terrain=self.terrain, raise_on_fault=False)
        keep = np.ones(self.n_envs, dtype=bool)
        keep[idx] = False
        st.q[keep] = saved.q[keep]
        st.qd[keep] = saved.qd[keep]
        st.time = saved.time
        if saved.contact_anchor is not None and st.contact_anchor is not None:
            st.contact_anchor[keep] = saved.contact_anchor[keep]
        self.state = st

    def _reset_envs(self, idx: np.ndarray) -> None:
        idx = np.asarray(idx, dtype=np.int64)
        if idx.size == 0:
            return
        pending = list(idx)
        for attempt in range(self.cfg.reset_retries):
            for i in pending:
                rng = self.env_rngs[i]
                if self._randomization_enabled():
                    sample = sample_randomization(
                        rng, len(self.model.bodies), self.n_joints)
                else:
                    sample = nominal_sample(
                        len(self.model.bodies), self.n_joints,
                        self.model.contact.friction, self.model.contact.restitution)
                apply_randomization(self.params, i, sample)
                if self.overrides.com_offset_x != 0.0:
                    pelvis = self.model.body_index("pelvis")
                    self.params.com[i, pelvis, 1] -= self.overrides.com_offset_x
                terrain, pitch, base_x, q = self._sample_posture(i, rng, sample)
                self._place_env(i, terrain, pitch, base_x, q)
                self.delay[i] = delay_substeps(sample, self.cfg.physics_hz)
                self.rfi_scale[i] = (abs(sample.torque_rfi_scale)
                                     if self._randomization_enabled() else 0.0)
            self._settle(np.asarray(pending))
            frames = forward_kinematics(self.params, self.state)
            z = frames.keypoints[..., 1]
            surf = self.terrain.surface_height(frames.keypoints[..., 0])
            pen = np.where(self.params.kp_contact[None, :], surf - z, 0.0)
            bad = [i for i in pending
                   if pen[i].max() > 0.03 or not np.isfinite(self.state.q[i]).all()]
            pending = bad
            if not pending:
                break
        if pending:
            raise SimulationFault(
                f"initial posture still penetrating after retries: envs {pending}")

        self.state.time[idx] = 0.0
        self.episode_step[idx] = 0
        self.action[idx] = 0.0
        self.prev_action[idx] = 0.0
        self.prev2_action[idx] = 0.0
        self.joint_vel_prev[idx] = self.state.joint_vel[idx]
        self.pd_target[idx] = self.state.joint_pos[idx]
        self.target_ring[idx] = self.state.joint_pos[idx][:, None, :]
        self.global_substep[idx] = 0
        self.crossed[idx] = False
        self.held[idx] = True

        frame = self.layout.build_frame(
            _rows(self.state, idx), self.action[idx],
            np.full(idx.size, self.curriculum.beta))
        if self._noise_enabled():
            frame = self._noisy_rows(frame, idx)
        self.history.reset(idx, frame)

    def _noisy_rows(self, frame: np.ndarray, idx: np.ndarray) -> np.ndarray:
        # dense noise comes from the shared stream regardless of env subset
        noise = self.noise_rng.uniform(-1.0, 1.0, size=frame.shape)
        return frame + noise * self.layout.noise_scales

    def place_posture(self, i: int, base_pose, joint_pos, settle: bool = True) -> None:
        """Overwrite environment i with an explicit posture (test/eval hook).

        Performs the same bookkeeping as a reset: anchors, settle window,
        action buffers, target ring, and observation history.
        """
        idx = np.array([i])
        self.state.q[i, :3] = base_pose
        self.state.q[i, 3:] = joint_pos
        self.state.qd[i] = 0.0
        if settle:
            self._settle(idx)
        self.state.time[idx] = 0.0
        self.episode_step[idx] = 0
        self.action[idx] = 0.0
        self.prev_action[idx] = 0.0
        self.prev2_action[idx] = 0.0
        self.joint_vel_prev[idx] = self.state.joint_vel[idx]
        self.pd_target[idx] = self.state.joint_pos[idx]
        self.target_ring[idx] = self.state.joint_pos[idx][:, None, :]
        self.global_substep[idx] = 0
        self.crossed[idx] = False
        self.held[idx] = True
        frame = self.layout.build_frame(
            _rows(self.state, idx), self.action[idx],
            np.full(idx.size, self.curriculum.beta))
        if self._noise_enabled():
            frame = self._noisy_rows(frame, idx)
        self.history.reset(idx, frame)

    # ---------------------------------------------------------------- step

    def step(self, actions: np.ndarray):
        cfg = self.cfg
        N = self.n_envs
        a = np.clip(np.asarray(actions, dtype=float), -1.0, 1.0)
        self.prev2_action = self.prev_action
        self.prev_action = self.action
        self.action = a.copy()
        joint_vel_prev = self.state.joint_vel.copy()

        beta = self.curriculum.beta
        target = self.state.joint_pos + beta * a
        self.pd_target = target
        ctrl_idx = self.global_substep // cfg.substeps
        self.target_ring[np.arange(N), ctrl_idx % _TARGET_RING] = target

        tau_sum = np.zeros((N, self.n_joints))
        stumble = np.zeros(N, dtype=bool)
        clamp_count = np.zeros(N, dtype=np.int64)
        dropout_count = 0
        fault = np.zeros(N, dtype=bool)
        pull_applied = np.zeros(N)
        n_contacts = np.zeros(N)

        ext = np.zeros((N, 2))
        rows = np.arange(N)
        for _ in range(cfg.substeps):
            eff_ctrl = (self.global_substep - self.delay) // cfg.substeps
            eff_target = self.target_ring[rows, eff_ctrl % _TARGET_RING]
            tau, clamped = pd_torque(
                self.state.joint_pos, self.state.joint_vel, eff_target,
                self.params.kp_gain, self.params.kd_gain, self.params.torque_limit)
            clamp_count += clamped.sum(axis=1)
            tau = tau * self.params.motor_strength
            if self._randomization_enabled() and np.any(self.rfi_scale > 0):
                rfi = self.noise_rng.uniform(-1.0, 1.0, tau.shape)
                tau = tau + rfi * self.rfi_scale[:, None] * self.params.torque_limit
            tau = np.clip(tau, -self.params.torque_limit, self.params.torque_limit)
            if self.overrides.torque_dropout > 0.0:
                drop = self.noise_rng.random(tau.shape) < self.overrides.torque_dropout
                tau = np.where(drop, 0.0, tau)
                dropout_count += int(drop.sum())

            ext[:] = 0.0
            ext[:, 0] = self.overrides.sagittal_force
            if self.overrides.pull_force and self.curriculum.pull_force > 0.0:
                gate = np.cos(self.state.q[:, 2]) > cfg.pull_alignment_gate
                ext[:, 1] = np.where(gate, self.curriculum.pull_force, 0.0)
                pull_applied = np.where(gate, self.curriculum.pull_force, pull_applied)

            self.state, diag = step_dynamics(
                self.params, self.state, tau, cfg.physics_dt,
                terrain=self.terrain, external_force=ext, raise_on_fault=False)
            fault |= diag.fault
            tau_sum += tau
            self.global_substep += 1
            if diag.contact_normal is not None:
                foot_f = diag.contact_forces[:, self._kp_foot]
                foot_n = diag.contact_normal[:, self._kp_foot]
                stumble |= np.any(
                    (foot_n > 0.0)
                    & (np.abs(foot_f[..., 0]) > 3.0 * np.abs(foot_f[..., 1])),
                    axis=1)
                n_contacts = (diag.contact_normal > 0.0).sum(axis=1)

        self.episode_step += 1
        tau_mean = tau_sum / cfg.substeps
        kin = keypoint_summary(self.params, self.state, self.terrain)
        buffers = StepBuffers(
            action=self.action, prev_action=self.prev_action,
            prev2_action=self.prev2_action, joint_vel_prev=joint_vel_prev,
            pd_target=target, torques=tau_mean, foot_stumble=stumble)
        groups, terms = self.engine.compute(kin, self.state, buffers,
                                            self.terrain_kind)
        reward = self.engine.scalar(groups)
        stage = stage_of(kin.h_base, cfg.h_stage1, cfg.h_stage2)

        above = kin.h_base > self.h_targ
        self.held = np.where(self.crossed, self.held & above, self.held)
        self.crossed |= above

        # validity envelope: physically insane speeds are simulation faults
        fault |= (np.abs(self.state.qd[:, :2]).max(axis=1) > cfg.max_base_speed)
        fault |= np.abs(self.state.qd[:, 2]) > cfg.max_base_spin
        fault |= np.abs(self.state.joint_vel).max(axis=1) > cfg.max_joint_speed
        timeout = self.episode_step >= cfg.episode_steps
        done = timeout | fault
        success = self.crossed & self.held & above & ~fault

        if self.recorder is not None:
            t = self.episode_step - 1
            self.recorder.write(
                t, time=self.state.time, base_pose=self.state.q[:, :3],
                base_vel=self.state.qd[:, :3], joint_pos=self.state.joint_pos,
                joint_vel=self.state.joint_vel, torque=tau_mean,
                action=self.action, h_base=kin.h_base, h_head=kin.h_head,
                stage=stage, groups=groups, reward=reward,
                heel=kin.heel, toe=kin.toe, contacts=n_contacts,
                pull_force=pull_applied)

        frame = self.layout.build_frame(
            self.state, self.action, np.full(N, self.curriculum.beta))
        if self._noise_enabled():
            frame = self._noisy_rows(frame, rows)
        self.history.push(frame)

        info = {
            "h_base": kin.h_base.copy(),
            "h_head": kin.h_head.copy(),
            "stage": stage,
            "fault": fault,
            "time_out": timeout & ~fault,
            "success": success,
            "terms": terms,
            "pull_force": pull_applied,
            "beta": np.full(N, self.curriculum.beta),
            "torque_clamp_count": clamp_count,
            "torque_dropout_count": dropout_count,
            "contacts": n_contacts,
        }

        done_idx = np.flatnonzero(done)
        if done_idx.size:
            info["episode_success"] = success[done_idx]
            info["episode_h_head"] = kin.h_head[done_idx].copy()
            info["done_env_ids"] = done_idx
            self.episodes_finished += done_idx.size
            if self.recorder is not None:
                for i in done_idx:
                    self.completed_traces.append(
                        self.recorder.extract(int(i), int(self.episode_step[i])))
            finished = np.flatnonzero(done & ~fault)
            if not self.overrides.freeze_curriculum:
                # the coordinator waits for a full fleet's worth of properly
                # finished episodes (faults are failures and excluded), then
                # applies one update on their median: decrement-only schedules
                # must not ratchet down on lucky small desynchronized batches
                self._curriculum_pool.extend(float(h) for h in kin.h_head[finished])
                if len(self._curriculum_pool) >= self.n_envs:
                    self.curriculum = curriculum_update(
                        self.curriculum, float(np.median(self._curriculum_pool)),
                        cfg)
                    self._curriculum_pool.clear()
            self._reset_envs(done_idx)

        return self.history.observation(), groups, reward, done, info

    # ------------------------------------------------------------ snapshot

    def get_state(self) -> dict:
        import json
        snap = {
            "q": self.state.q.copy(), "qd": self.state.qd.copy(),
            "time": self.state.time.copy(),
            "anchor": (self.state.contact_anchor.copy()
                       if self.state.contact_anchor is not None
                       else np.zeros(0)),
            "history": self.history.frames.copy(),
            "action": self.action.copy(), "prev_action": self.prev_action.copy(),
            "prev2_action": self.prev2_action.copy(),
            "joint_vel_prev": self.joint_vel_prev.copy(),
            "pd_target": self.pd_target.copy(),
            "target_ring": self.target_ring.copy(),
            "global_substep": self.global_substep.copy(),
            "delay": self.delay.copy(), "rfi_scale": self.rfi_scale.copy(),
            "episode_step": self.episode_step.copy(),
            "terrain_kind": self.terrain_kind.copy(),
            "h_targ": self.h_targ.copy(),
            "crossed": self.crossed.copy(), "held": self.held.copy(),
            "episodes_finished": np.int64(self.episodes_finished),
            "curriculum": np.array([self.curriculum.pull_force, self.curriculum.beta]),
            "curriculum_pool": np.asarray(self._curriculum_pool, dtype=float),
            "prof_x": self.terrain.prof_x.copy(), "prof_z": self.terrain.prof_z.copy(),
            "wall_x": self.terrain.wall_x.copy(), "wall_lo": self.terrain.wall_lo.copy(),
            "wall_hi": self.terrain.wall_hi.copy(), "wall_on": self.terrain.wall_on.copy(),
            "kind": self.terrain.kind.copy(),
            "masses": self.params.masses.copy(), "inertias": self.params.inertias.copy(),
            "com": self.params.com.copy(), "kp_gain": self.params.kp_gain.copy(),
            "kd_gain": self.params.kd_gain.copy(),
            "motor_strength": self.params.motor_strength.copy(),
            "friction": self.params.friction.copy(),
            "restitution": self.params.restitution.copy(),
            "rng_states": np.frombuffer(json.dumps(
                [g.bit_generator.state for g in self.env_rngs]
                + [self.noise_rng.bit_generator.state]).encode(), dtype=np.uint8),
        }
        return snap

    def set_state(self, snap: dict) -> None:
        import json
        self.state = RobotState(
            q=snap["q"].copy(), qd=snap["qd"].copy(), time=snap["time"].copy(),
            contact_anchor=(snap["anchor"].copy() if snap["anchor"].size else None))
        self.history.frames = snap["history"].copy()
        for name in ("action", "prev_action", "prev2_action", "joint_vel_prev",
                     "pd_target", "target_ring", "global_substep", "delay",
                     "rfi_scale", "episode_step", "terrain_kind", "h_targ",
                     "crossed", "held"):
            setattr(self, name, snap[name].copy())
        self.episodes_finished = int(snap["episodes_finished"])
        self.curriculum = CurriculumState(
            pull_force=float(snap["curriculum"][0]), beta=float(snap["curriculum"][1]))
        self._curriculum_pool = [float(x) for x in snap["curriculum_pool"]]
        for name in ("prof_x", "prof_z", "wall_x", "wall_lo", "wall_hi",
                     "wall_on", "kind"):
            setattr(self.terrain, name, snap[name].copy())
        for name in ("masses", "inertias", "com", "kp_gain", "kd_gain",
                     "motor_strength", "friction", "restitution"):
            setattr(self.params, name, snap[name].copy())
        states = json.loads(bytes(snap["rng_states"]).decode())
        for g, s in zip(self.env_rngs, states[:-1]):
            g.bit_generator.state = s
        self.noise_rng.bit_generator.state = states[-1]


def _rows(state: RobotState, idx: np.ndarray) -> RobotState:
    return RobotState(q=state.q[idx], qd=state.qd[idx], time=state.time[idx])
