"""Forward kinematics and keypoint queries against hand-computed geometry."""

import numpy as np
import pytest

from standup.physics import RobotModel, Terrain, TerrainBatch, keypoint_summary
from standup.physics.model import make_state
from standup.physics.kinematics import forward_kinematics, point_jacobians, com_jacobians

# hand-derived standing geometry for the default model:
# ankle 0.05 + shank 0.35 + thigh 0.38 = base 0.78; head top at 1.33
STAND_BASE = 0.78
STAND_HEAD = 1.33


@pytest.fixture(scope="module")
def model():
    return RobotModel.default()


def test_standing_heights_match_design(model):
    p = model.params(1)
    st = make_state(p, base_z=STAND_BASE)
    ks = keypoint_summary(p, st)
    assert ks.h_base[0] == pytest.approx(STAND_BASE, abs=1e-12)
    assert ks.h_head[0] == pytest.approx(STAND_HEAD, abs=1e-12)
    assert ks.upright_alignment[0] == pytest.approx(1.0)
    assert ks.shank_up_z[0] == pytest.approx(1.0)
    # soles on the floor
    assert ks.heel[0, 1] == pytest.approx(0.0, abs=1e-12)
    assert ks.toe[0, 1] == pytest.approx(0.0, abs=1e-12)


def test_supine_projected_gravity_hits_minus_one(model):
    # supine (chest up, head toward -x): gravity lies along the -x body axis
    p = model.params(1)
    st = make_state(p, base_z=0.09, pitch=np.pi / 2)
    ks = keypoint_summary(p, st)
    assert ks.projected_gravity[0, 0] == pytest.approx(-1.0)
    assert abs(ks.projected_gravity[0, 1]) < 1e-12
    assert abs(ks.upright_alignment[0]) < 1e-12


def test_inverted_pitch_mirrors_head_about_base(model):
    p = model.params(1)
    up = make_state(p, base_z=STAND_BASE)
    down = make_state(p, base_z=STAND_BASE, pitch=np.pi)
    ks_up = keypoint_summary(p, up)
    ks_down = keypoint_summary(p, down)
    rel_up = ks_up.h_head[0] - ks_up.h_base[0]
    rel_down = ks_down.h_head[0] - ks_down.h_base[0]
    assert rel_down == pytest.approx(-rel_up, abs=1e-12)


def test_knee_position_from_hip_flexion(model):
    # hip flexion by pi/2 swings the thigh from straight down to horizontal
    p = model.params(1)
    st = make_state(p, base_z=STAND_BASE)
    st.q[0, 3 + model.joint_index("hip")] = np.pi / 2
    fr = forward_kinematics(p, st)
    knee = fr.body_origin[0, model.body_index("shank")]
    assert knee[0] == pytest.approx(0.38, abs=1e-12)
    assert knee[1] == pytest.approx(STAND_BASE, abs=1e-12)


def test_knee_sign_convention_flexes_heel_backward(model):
    p = model.params(1)
    st = make_state(p, base_z=STAND_BASE)
    st.q[0, 3 + model.joint_index("knee")] = 0.5
    fr = forward_kinematics(p, st)
    ankle = fr.body_origin[0, model.body_index("foot")]
    assert ankle[0] < -0.05  # positive knee flexion moves the ankle behind the hip


def test_heights_measured_above_local_surface(model):
    p = model.params(1)
    terr = TerrainBatch(1)
    terr.set_env(0, Terrain.platform(0.5))
    st = make_state(p, base_x=-0.2, base_z=0.56)
    ks = keypoint_summary(p, st, terr)
    assert ks.h_base[0] == pytest.approx(0.06, abs=1e-9)


def test_point_jacobians_match_finite_differences(model):
    p = model.params(1)
    rng = np.random.default_rng(7)
    st = make_state(p, base_z=1.0, pitch=0.4)
    st.q[0, 3:] = rng.uniform(-0.6, 0.6, 6)
    fr = forward_kinematics(p, st)
    J = com_jacobians(p, fr)
    eps = 1e-7
    for k in range(p.nq):
        plus = st.copy()
        plus.q[0, k] += eps
        minus = st.copy()
        minus.q[0, k] -= eps
        fd = (forward_kinematics(p, plus).com - forward_kinematics(p, minus).com) / (2 * eps)
        assert np.abs(J[0, :, :, k] - fd[0]).max() < 1e-6


def test_foot_pitch_tracks_terrain_slope(model):
    p = model.params(1)
    angle = np.deg2rad(8.0)
    terr = TerrainBatch(1)
    terr.set_env(0, Terrain.slope(angle))
    st = make_state(p, base_z=1.0)
    ks_flat = keypoint_summary(p, st)
    ks_slope = keypoint_summary(p, st, terr)
    # flat foot on a downhill-toward-+x slope shows a relative pitch offset
    assert ks_flat.foot_pitch[0] == pytest.approx(0.0, abs=1e-12)
    assert ks_slope.foot_pitch[0] == pytest.approx(angle, abs=1e-9)
