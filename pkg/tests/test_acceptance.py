"""Acceptance criteria, one test per criterion, PASS/FAIL line each.

Criteria 6-9 train desk-scale policies from scratch (64 envs, ground
terrain) and therefore dominate the suite's runtime; the trained policies
are shared module-level fixtures.  Run with ``pytest tests/test_acceptance.py -s``
to see the per-criterion lines.
"""

import time

import numpy as np
import pytest

from standup.config import EnvConfig, TrainConfig
from standup.env.rewards import tolerance, RewardEngine, StepBuffers
from standup.evaluate import run_protocol, DisturbanceSpec, robustness_sweep, success_monotone_ok
from standup.evaluate.metrics import motion_smoothness, energy_used
from standup.learn import Trainer
from standup.learn.gae import compute_gae
from standup.learn.losses import ppo_policy_loss, critic_loss, l2c2_loss
from standup.learn.mlp import MLP
from standup.learn.policy import GaussianPolicy
from standup.env.curriculum import CurriculumState, curriculum_update
from standup.physics import RobotModel, Terrain, TerrainBatch, pd_torque, step_dynamics
from standup.physics.model import make_state
from standup.physics.kinematics import forward_kinematics, com_jacobians

from test_gae import brute_force_gae
from test_losses import fd_check

# desk-scale training budget shared by the directional comparisons
TRAIN_ITERATIONS = 600
TRAIN_SEEDS = (0, 1, 2)
EVAL_REPETITIONS = 5
EVAL_EPISODES = 25


def note(line: str) -> None:
    print(f"\n[acceptance] {line}")


def desk_env_cfg() -> EnvConfig:
    return EnvConfig(randomization=False)


def desk_train_cfg() -> TrainConfig:
    return TrainConfig(iterations=TRAIN_ITERATIONS)


def train_and_eval(seed: int, env_cfg: EnvConfig, train_cfg: TrainConfig):
    model = RobotModel.default()
    trainer = Trainer(model, env_cfg, train_cfg, seed=seed)
    t0 = time.perf_counter()
    for _ in range(train_cfg.iterations):
        trainer.train_iteration()
    minutes = (time.perf_counter() - t0) / 60.0
    report = run_protocol(
        trainer.policy_fn(), model, env_cfg, ["ground"], seed=1000 + seed,
        repetitions=EVAL_REPETITIONS, episodes=EVAL_EPISODES,
        beta=trainer.env.curriculum.beta)
    return trainer, report, minutes


@pytest.fixture(scope="module")
def trained_full():
    """Full method, seeds 0/1/2, shared by criteria 6, 7, 8, 9."""
    out = {}
    for seed in TRAIN_SEEDS:
        out[seed] = train_and_eval(seed, desk_env_cfg(), desk_train_cfg())
    return out


@pytest.fixture(scope="module")
def trained_single_critic():
    cfg = desk_train_cfg()
    cfg.single_critic = True
    return train_and_eval(TRAIN_SEEDS[0], desk_env_cfg(), cfg)


@pytest.fixture(scope="module")
def trained_no_force():
    env_cfg = desk_env_cfg()
    env_cfg.force_curriculum = False
    return train_and_eval(TRAIN_SEEDS[0], env_cfg, desk_train_cfg())


def succ(report) -> float:
    return report.terrains["ground"].success_mean


# -------------------------------------------------------------- criterion 1

def test_criterion_1_gae_oracle():
    rng = np.random.default_rng(0)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(1000):
        T = int(rng.integers(1, 21))
        gamma = rng.uniform(0.8, 1.0)
        lam = rng.uniform(0.0, 1.0)
        rewards = rng.normal(size=T)
        values = rng.normal(size=T)
        bootstrap = rng.normal()
        dones = rng.random(T) < 0.2
        adv, _ = compute_gae(rewards[:, None], values[:, None],
                             np.array([bootstrap]), dones[:, None], gamma, lam)
        ref = brute_force_gae(rewards, values, bootstrap, dones, gamma, lam)
        worst = max(worst, float(np.abs(adv[:, 0] - ref).max()))
    runtime = time.perf_counter() - t0
    note(f"criterion 1 GAE oracle: max error {worst:.2e} over 1000 instances "
         f"in {runtime:.1f} s -> {'PASS' if worst < 1e-10 and runtime < 10 else 'FAIL'}")
    assert worst < 1e-10
    assert runtime < 10.0


# -------------------------------------------------------------- criterion 2

def test_criterion_2_gradient_suite():
    t0 = time.perf_counter()
    for seed in (0, 1, 2):
        rng = np.random.default_rng(100 + seed)
        policy = GaussianPolicy(5, 3, [8], rng, log_std_init=-0.2)
        critics = [MLP([5, 7, 1], rng) for _ in range(2)]
        target_critics = [c.copy() for c in critics]
        obs = rng.normal(size=(12, 5))
        obs_next = rng.normal(size=(12, 5))
        actions, logp = policy.sample(obs, rng)
        logp_old = logp + rng.normal(scale=0.05, size=12)
        adv = rng.normal(size=12)
        targets = rng.normal(size=12)
        rewards = rng.normal(size=12)
        dones = rng.random(12) < 0.2
        u = rng.uniform(size=(12, 1))

        class _P:
            def param_arrays(self):
                return policy.param_arrays()

        # policy surrogate + entropy
        def pol_loss():
            return ppo_policy_loss(policy, obs, actions, logp_old, adv,
                                   0.2, 0.01)[0]
        _, pol_grads, _ = ppo_policy_loss(policy, obs, actions, logp_old, adv,
                                          0.2, 0.01)
        fd_check(_P(), pol_loss, pol_grads)

        # per-group critic losses in every mode
        for mode in ("gae", "td0", "literal"):
            kw = dict(mode=mode, target_critic=target_critics[0],
                      rewards=rewards, obs_next=obs_next, dones=dones,
                      gamma=0.98)

            def closs():
                return critic_loss(critics[0], obs, targets, **kw)[0]
            _, cgrads = critic_loss(critics[0], obs, targets, **kw)
            fd_check(critics[0], closs, cgrads)

        # smoothness regularization
        def l2c2():
            return l2c2_loss(policy, critics, obs, obs_next, dones, u,
                             1.0, 0.1)[0]
        _, lp, lc = l2c2_loss(policy, critics, obs, obs_next, dones, u,
                              1.0, 0.1)
        fd_check(_P(), l2c2, lp)
        for c, cg in zip(critics, lc):
            fd_check(c, l2c2, cg)
    runtime = time.perf_counter() - t0
    note(f"criterion 2 gradient suite: all finite-difference checks < 1e-4 "
         f"rel in {runtime:.1f} s -> {'PASS' if runtime < 60 else 'FAIL'}")
    assert runtime < 60.0


# -------------------------------------------------------------- criterion 3

def test_criterion_3_formula_exactness():
    # PD law
    tau, _ = pd_torque(np.array([[0.0]]), np.array([[0.0]]), np.array([[0.1]]),
                       np.array([150.0]), np.array([4.0]), np.array([88.0]))
    assert tau[0, 0] == 15.0
    tau, _ = pd_torque(np.array([[0.0]]), np.array([[2.0]]), np.array([[0.5]]),
                       np.array([200.0]), np.array([6.0]), np.array([278.0]))
    assert tau[0, 0] == 88.0
    # tolerance kernel boundary and margin
    assert tolerance(1.0, (1.0, np.inf), 1.0, 0.1) == 1.0
    assert tolerance(1.05, (1.0, np.inf), 1.0, 0.1) == 1.0
    assert tolerance(0.0, (1.0, np.inf), 1.0, 0.1) == 0.1
    assert tolerance(-1.5, (-1.0, 2.0), 0.5, 0.37) == 0.37
    # smoothness: affine zero, sinusoid analytic
    t = np.arange(80.0)[:, None]
    assert motion_smoothness(0.03 * t + 0.2) < 1e-25
    A, w, dt, T = 0.4, 5.0, 0.02, 300
    tt = np.arange(T)
    p = (A * np.sin(w * tt * dt))[:, None]
    k = 4.0 * np.sin(w * dt / 2.0) ** 2
    expected = k**2 * A**2 * np.sum(np.sin(w * tt[1:-1] * dt) ** 2)
    assert abs(motion_smoothness(p) - expected) < 1e-9
    # energy hand example, exact
    energy = energy_used(np.full((50, 1), 10.0), np.ones((50, 1)),
                         np.zeros(50), 0.65)
    assert energy == 10.0
    # curriculum updates
    cfg = EnvConfig(beta_floor=0.25)  # the reference floor pair {0 N, 0.25}
    assert curriculum_update(CurriculumState(200.0, 1.0), 1.3, cfg) == \
        CurriculumState(180.0, 0.98)
    assert curriculum_update(CurriculumState(10.0, 0.26), 1.3, cfg) == \
        CurriculumState(0.0, 0.25)
    assert curriculum_update(CurriculumState(0.0, 0.25), 1.3, cfg) == \
        CurriculumState(0.0, 0.25)
    assert curriculum_update(CurriculumState(200.0, 1.0), 1.0, cfg) == \
        CurriculumState(200.0, 1.0)
    note("criterion 3 formula exactness: PD, tolerance, smoothness, energy, "
         "curriculum -> PASS")


# -------------------------------------------------------------- criterion 4

def test_criterion_4_stage_gating_and_linearity():
    model = RobotModel.default()
    cfg = EnvConfig()
    N = 10000
    params = model.params(N)
    engine = RewardEngine(cfg, params)
    rng = np.random.default_rng(4)
    st = make_state(params, n_envs=N)
    st.q[:, 0] = rng.uniform(-1, 1, N)
    st.q[:, 1] = rng.uniform(-0.2, 1.4, N)
    st.q[:, 2] = rng.uniform(-np.pi, np.pi, N)
    st.q[:, 3:] = rng.uniform(params.joint_lo, params.joint_hi, (N, 6))
    st.qd[:] = rng.uniform(-6, 6, (N, 9))
    buf = StepBuffers(
        action=rng.uniform(-1, 1, (N, 6)), prev_action=rng.uniform(-1, 1, (N, 6)),
        prev2_action=rng.uniform(-1, 1, (N, 6)),
        joint_vel_prev=rng.uniform(-6, 6, (N, 6)),
        pd_target=rng.uniform(-1, 1, (N, 6)),
        torques=rng.uniform(-150, 150, (N, 6)),
        foot_stumble=rng.random(N) < 0.5)
    from standup.physics.kinematics import keypoint_summary
    kin = keypoint_summary(params, st)
    groups, terms = engine.compute(kin, st, buf, rng.integers(0, 4, N))
    below1 = kin.h_base < cfg.h_stage1
    below2 = kin.h_base < cfg.h_stage2
    gated1 = ("shank_orientation", "style_angular_velocity")
    gated2 = ("foot_displacement", "post_angular_velocity",
              "post_linear_velocity", "post_orientation", "post_base_height",
              "post_upper_posture", "foot_flat")
    for name in gated1:
        assert np.all(terms[name][below1] == 0.0), name
    for name in gated2:
        assert np.all(terms[name][below2] == 0.0), name
    scalar = engine.scalar(groups)
    independent = sum(w * groups[:, i]
                      for i, w in enumerate([2.5, 1.0, 0.1, 1.0]))
    err = np.abs(scalar - independent).max()
    note(f"criterion 4 stage gating on {N} random states, weighted-sum error "
         f"{err:.2e} -> PASS")
    assert err < 1e-12


# -------------------------------------------------------------- criterion 5

def test_criterion_5_physics_sanity():
    model = RobotModel.default()
    p = model.params(1)
    dt = 1.0 / 200.0
    # free fall vs closed form
    st = make_state(p, base_z=2.0, pitch=0.3)
    for _ in range(100):
        st, _ = step_dynamics(p, st, np.zeros((1, 6)), dt)
    fall_err = abs(st.q[0, 1] - (2.0 - 0.5 * 9.81 * 0.25))
    # standing penetration after settling
    terr = TerrainBatch(1)
    terr.set_env(0, Terrain.ground())
    st = make_state(p, base_z=0.778)
    target = np.zeros((1, 6))
    for _ in range(400):
        tau, _ = pd_torque(st.joint_pos, st.joint_vel, target,
                           p.kp_gain, p.kd_gain, p.torque_limit)
        st, _ = step_dynamics(p, st, tau, dt, terrain=terr)
    fr = forward_kinematics(p, st)
    heel_z = fr.keypoints[0, model.keypoint_index("heel"), 1]
    toe_z = fr.keypoints[0, model.keypoint_index("toe"), 1]
    penetration = max(-heel_z, -toe_z, 0.0)
    # ballistic horizontal momentum drift per step
    st = make_state(p, base_z=3.0, pitch=0.25)
    st.qd[:, 0] = 1.3

    def momentum(s):
        fr = forward_kinematics(p, s)
        J = com_jacobians(p, fr)
        v = np.einsum("nbiq,nq->nbi", J, s.qd)
        return float(np.einsum("nb,nb->n", p.masses, v[..., 0])[0])

    ref = momentum(st)
    drift = 0.0
    for _ in range(60):
        before = momentum(st)
        st, _ = step_dynamics(p, st, np.zeros((1, 6)), dt)
        drift = max(drift, abs(momentum(st) - before) / abs(ref))
    ok = fall_err < 1e-3 and penetration < 0.005 and drift < 1e-9
    note(f"criterion 5 physics: fall err {fall_err:.1e} m, standing "
         f"penetration {penetration * 1000:.2f} mm, momentum drift {drift:.1e} "
         f"-> {'PASS' if ok else 'FAIL'}")
    assert fall_err < 1e-3
    assert penetration < 0.005
    assert drift < 1e-9


# -------------------------------------------------------------- criterion 6

@pytest.mark.acceptance
def test_criterion_6_desk_scale_training(trained_full):
    all_ok = True
    for seed, (trainer, report, minutes) in trained_full.items():
        rate = succ(report)
        ok = rate >= 0.8 and trainer.iteration <= 3000 and minutes <= 60.0
        all_ok &= ok
        note(f"criterion 6 seed {seed}: success {rate:.3f} after "
             f"{trainer.iteration} iterations in {minutes:.1f} min "
             f"-> {'PASS' if ok else 'FAIL'}")
    assert all_ok


# -------------------------------------------------------------- criterion 7

@pytest.mark.acceptance
def test_criterion_7_multi_vs_single_critic(trained_full, trained_single_critic):
    multi = succ(trained_full[TRAIN_SEEDS[0]][1])
    single = succ(trained_single_critic[1])
    note(f"criterion 7 critics ablation at equal budget/seed: multi "
         f"{multi:.3f} vs single {single:.3f} -> "
         f"{'PASS' if multi >= single else 'FAIL'}")
    assert multi >= single


# -------------------------------------------------------------- criterion 8

@pytest.mark.acceptance
def test_criterion_8_force_curriculum_ablation(trained_full, trained_no_force):
    full = succ(trained_full[TRAIN_SEEDS[0]][1])
    no_force = succ(trained_no_force[1])
    both_saturate = full >= 0.95 and no_force >= 0.95
    ok = no_force < full or both_saturate
    note(f"criterion 8 assist ablation at equal budget/seed: full "
         f"{full:.3f} vs no-force {no_force:.3f}"
         f"{' (both saturate >= 0.95)' if both_saturate else ''} -> "
         f"{'PASS' if ok else 'FAIL'}")
    assert ok


# -------------------------------------------------------------- criterion 9

@pytest.mark.acceptance
def test_criterion_9_dropout_sweep(trained_full):
    trainer, _, _ = trained_full[TRAIN_SEEDS[0]]
    spec = DisturbanceSpec("torque_dropout", (0.0, 0.05, 0.1, 0.2, 1.0))
    rows = robustness_sweep(
        trainer.policy_fn(), trainer.model, trainer.env_cfg, spec,
        seed=77, episodes=100, beta=trainer.env.curriculum.beta)
    curve = {r["magnitude"]: r["success_rate"] for r in rows}
    monotone = success_monotone_ok(rows)
    ok = curve[1.0] == 0.0 and monotone
    note(f"criterion 9 dropout sweep {curve} monotone={monotone} -> "
         f"{'PASS' if ok else 'FAIL'}")
    assert curve[1.0] == 0.0
    assert monotone


# ------------------------------------------------------------- criterion 10

@pytest.mark.acceptance
def test_criterion_10_reproducibility(tmp_path):
    import json
    import os
    from standup.cli import main

    env_cfg = {"randomization": False, "episode_steps": 60}
    train_cfg = {"num_envs": 8, "steps_per_env": 10, "policy_hidden": [32, 16],
                 "critic_hidden": [32, 16], "iterations": 8,
                 "checkpoint_interval": 0}
    ep = os.path.join(tmp_path, "env.json")
    tp = os.path.join(tmp_path, "train.json")
    json.dump(env_cfg, open(ep, "w"))
    json.dump(train_cfg, open(tp, "w"))
    logs, reports = [], []
    for name in ("a", "b"):
        out = os.path.join(tmp_path, name)
        assert main(["train", "--env-config", ep, "--train-config", tp,
                     "--out", out, "--seed", "5"]) == 0
        ev = os.path.join(tmp_path, name + "_eval")
        assert main(["evaluate", "--checkpoint",
                     os.path.join(out, "checkpoint_final.npz"), "--out", ev,
                     "--repetitions", "2", "--episodes", "2"]) == 0
        logs.append(open(os.path.join(out, "training_log.csv")).read())
        reports.append(open(os.path.join(ev, "metrics.json")).read())
    ok = logs[0] == logs[1] and reports[0] == reports[1]
    note(f"criterion 10 reproducibility: identical logs "
         f"{logs[0] == logs[1]}, identical reports {reports[0] == reports[1]} "
         f"-> {'PASS' if ok else 'FAIL'}")
    assert ok
