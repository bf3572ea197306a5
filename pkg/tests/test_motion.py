import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from scene_grammar.errors import ContractError, FitError, SceneFormatError
from scene_grammar.motion import (
    Pose,
    PoseTrack,
    PoseVadiRegressor,
    Skeleton,
    euler_xyz_matrix,
    forward_kinematics,
    interpolate,
    load_pose_track,
    load_skeleton,
    mirror_pose,
    mirror_track,
    resample_track,
    save_pose_track,
    save_skeleton,
    wrap_degrees,
)


def make_pose(rot, root=(0.0, 0.0, 0.0)):
    return Pose(np.asarray(rot, dtype=float).reshape(-1, 3), np.asarray(root, dtype=float))


@pytest.fixture
def toy_skeleton():
    return Skeleton(
        names=("root", "spine", "left_arm", "right_arm"),
        parents=(-1, 0, 1, 1),
        offsets=np.array([[0.0, 0.0, 0.0], [0.0, 0.5, 0.0], [0.2, 0.4, 0.0], [-0.2, 0.4, 0.0]]),
    )


class TestWrap:
    def test_known_values(self):
        assert wrap_degrees(0.0) == 0.0
        assert wrap_degrees(180.0) == 180.0
        assert wrap_degrees(180.5) == pytest.approx(-179.5)
        assert wrap_degrees(350.0) == pytest.approx(-10.0)
        assert wrap_degrees(-190.0) == pytest.approx(170.0)
        assert wrap_degrees(720.0) == 0.0

    @given(st.floats(min_value=-1e6, max_value=1e6))
    def test_range_and_congruence(self, x):
        w = float(wrap_degrees(x))
        assert -180.0 < w <= 180.0
        assert math.isclose(math.cos(math.radians(w)), math.cos(math.radians(x)), abs_tol=1e-6)
        assert math.isclose(math.sin(math.radians(w)), math.sin(math.radians(x)), abs_tol=1e-6)


class TestPose:
    def test_vector_round_trip(self):
        rng = np.random.default_rng(0)
        p = make_pose(rng.uniform(-179, 179, size=(5, 3)), rng.normal(size=3))
        q = Pose.from_vector(p.vector())
        assert np.allclose(q.rotations, p.rotations)
        assert np.allclose(q.root_position, p.root_position)

    def test_rotations_wrapped_on_construction(self):
        p = make_pose([[350.0, 0.0, 0.0]])
        assert p.rotations[0, 0] == pytest.approx(-10.0)

    def test_bad_shapes_rejected(self):
        with pytest.raises(ContractError):
            Pose(np.zeros((3, 2)), np.zeros(3))
        with pytest.raises(ContractError):
            Pose(np.zeros((3, 3)), np.zeros(2))
        with pytest.raises(ContractError):
            Pose(np.array([[np.nan, 0, 0]]), np.zeros(3))
        with pytest.raises(ContractError):
            Pose.from_vector(np.zeros(7))


class TestInterpolation:
    def test_keyframe_times_exact(self):
        rng = np.random.default_rng(1)
        kfs = tuple((float(t), make_pose(rng.uniform(-170, 170, (4, 3)), rng.normal(size=3)))
                    for t in (0.0, 0.4, 1.1, 2.0))
        track = PoseTrack(kfs)
        for t, p in kfs:
            q = interpolate(track, t)
            assert np.allclose(q.rotations, p.rotations, atol=1e-12)
            assert np.allclose(q.root_position, p.root_position, atol=1e-12)

    def test_simple_midpoint(self):
        track = PoseTrack(((0.0, make_pose([[0.0, 0.0, 0.0]])),
                           (1.0, make_pose([[90.0, 0.0, 0.0]]))))
        assert interpolate(track, 0.5).rotations[0, 0] == pytest.approx(45.0)

    def test_shortest_arc_crosses_the_seam(self):
        # 350 and 10 are 20 degrees apart through 0, not 340 the long way
        track = PoseTrack(((0.0, make_pose([[350.0, 0.0, 0.0]])),
                           (1.0, make_pose([[10.0, 0.0, 0.0]]))))
        assert interpolate(track, 0.5).rotations[0, 0] == pytest.approx(0.0, abs=1e-12)
        assert interpolate(track, 0.25).rotations[0, 0] == pytest.approx(-5.0)

    @given(st.floats(min_value=-180, max_value=180), st.floats(min_value=-180, max_value=180),
           st.floats(min_value=0.0, max_value=1.0))
    @settings(max_examples=200)
    def test_arc_against_brute_force_oracle(self, a, b, u):
        track = PoseTrack(((0.0, make_pose([[a, 0.0, 0.0]])), (1.0, make_pose([[b, 0.0, 0.0]]))))
        got = interpolate(track, u).rotations[0, 0]
        # minimal signed difference by direct search over unwrappings;
        # angles exactly 180 apart tie, so keep every minimizer
        wa, wb = float(wrap_degrees(a)), float(wrap_degrees(b))
        deltas = [wb - wa + 360.0 * k for k in (-1, 0, 1)]
        best = min(abs(d) for d in deltas)
        ok = False
        for delta in deltas:
            if abs(delta) - best > 1e-9:
                continue
            expect = wrap_degrees(wa + u * delta)
            ok = ok or (math.isclose(math.cos(math.radians(got)), math.cos(math.radians(expect)), abs_tol=1e-9)
                        and math.isclose(math.sin(math.radians(got)), math.sin(math.radians(expect)), abs_tol=1e-9))
        assert ok

    def test_clamped_outside_range(self):
        track = PoseTrack(((1.0, make_pose([[10.0, 0.0, 0.0]])),
                           (2.0, make_pose([[20.0, 0.0, 0.0]]))))
        assert interpolate(track, 0.0).rotations[0, 0] == pytest.approx(10.0)
        assert interpolate(track, 5.0).rotations[0, 0] == pytest.approx(20.0)

    def test_continuity_across_keyframes(self):
        rng = np.random.default_rng(2)
        kfs = tuple((float(t), make_pose(rng.uniform(-170, 170, (3, 3)), rng.normal(size=3)))
                    for t in (0.0, 0.5, 1.0, 1.7))
        track = PoseTrack(kfs)
        for t in (0.5, 1.0):
            before = interpolate(track, t - 1e-9).vector()
            after = interpolate(track, t + 1e-9).vector()
            assert np.allclose(before, after, atol=1e-5)

    def test_root_position_linear(self):
        track = PoseTrack(((0.0, make_pose([[0.0] * 3], root=(0, 0, 0))),
                           (2.0, make_pose([[0.0] * 3], root=(4, -2, 6)))))
        assert np.allclose(interpolate(track, 0.5).root_position, [1, -0.5, 1.5])

    def test_strictly_increasing_times_required(self):
        p = make_pose([[0.0] * 3])
        with pytest.raises(ContractError):
            PoseTrack(((0.0, p), (0.0, p)))

    def test_resample_two_seconds_at_24fps_gives_49_frames(self):
        track = PoseTrack(((0.0, make_pose([[0.0] * 3])), (2.0, make_pose([[10.0, 0.0, 0.0]]))))
        frames = resample_track(track, 1.0 / 24.0)
        assert len(frames) == 49

    def test_resample_half_second_grid(self):
        track = PoseTrack(((0.0, make_pose([[0.0] * 3])), (1.6, make_pose([[16.0, 0.0, 0.0]]))))
        frames = resample_track(track, 0.5)
        assert len(frames) == 4   # t = 0, 0.5, 1.0, 1.5
        assert frames[1].rotations[0, 0] == pytest.approx(5.0)


class TestForwardKinematics:
    def test_rest_pose_accumulates_offsets(self, toy_skeleton):
        pose = make_pose(np.zeros((4, 3)))
        pos = forward_kinematics(toy_skeleton, pose)
        assert np.allclose(pos[0], [0, 0, 0])
        assert np.allclose(pos[1], [0, 0.5, 0])
        assert np.allclose(pos[2], [0.2, 0.9, 0])
        assert np.allclose(pos[3], [-0.2, 0.9, 0])

    def test_euler_matrix_matches_scipy_intrinsic_xyz(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            ang = rng.uniform(-180, 180, size=3)
            ours = euler_xyz_matrix(ang)
            ref = Rotation.from_euler("XYZ", ang, degrees=True).as_matrix()
            assert np.allclose(ours, ref, atol=1e-12)

    def test_against_naive_matrix_chain(self, toy_skeleton):
        rng = np.random.default_rng(4)
        for _ in range(20):
            pose = make_pose(rng.uniform(-170, 170, (4, 3)), rng.normal(size=3))
            got = forward_kinematics(toy_skeleton, pose)
            # independent recomputation: walk each joint's ancestor chain
            for j in range(4):
                chain = []
                k = j
                while k >= 0:
                    chain.append(k)
                    k = toy_skeleton.parents[k]
                chain.reverse()          # root .. j
                pos = np.array(pose.root_position)
                rot = np.eye(3)
                for idx, joint in enumerate(chain):
                    if idx > 0:
                        pos = pos + rot @ toy_skeleton.offsets[joint]
                    rot = rot @ euler_xyz_matrix(pose.rotations[joint])
                assert np.allclose(got[j], pos, atol=1e-9)

    def test_bone_lengths_preserved(self, toy_skeleton):
        rng = np.random.default_rng(5)
        rest = {j: np.linalg.norm(toy_skeleton.offsets[j]) for j in range(1, 4)}
        for _ in range(30):
            pose = make_pose(rng.uniform(-180, 180, (4, 3)), rng.normal(size=3))
            pos = forward_kinematics(toy_skeleton, pose)
            for j in range(1, 4):
                d = np.linalg.norm(pos[j] - pos[toy_skeleton.parents[j]])
                assert abs(d - rest[j]) < 1e-9

    def test_root_rotation_is_rigid(self, toy_skeleton):
        rng = np.random.default_rng(6)
        rot = rng.uniform(-170, 170, (4, 3))
        base = forward_kinematics(toy_skeleton, make_pose(rot))
        turned = rot.copy()
        turned[0] = [10.0, -40.0, 25.0]
        moved = forward_kinematics(toy_skeleton, make_pose(turned))
        # pairwise distances survive a root rotation
        for i in range(4):
            for j in range(i + 1, 4):
                d0 = np.linalg.norm(base[i] - base[j])
                d1 = np.linalg.norm(moved[i] - moved[j])
                assert d0 == pytest.approx(d1, abs=1e-9)

    def test_joint_count_mismatch_rejected(self, toy_skeleton):
        with pytest.raises(ContractError):
            forward_kinematics(toy_skeleton, make_pose(np.zeros((3, 3))))

    def test_skeleton_validation(self):
        with pytest.raises(ContractError):
            Skeleton(("a", "b"), (0, -1), np.zeros((2, 3)))    # root not at index 0
        with pytest.raises(ContractError):
            Skeleton(("a", "b", "c"), (-1, 2, 1), np.zeros((3, 3)))   # forward reference


class TestMirror:
    def test_involution(self, toy_skeleton):
        rng = np.random.default_rng(7)
        pose = make_pose(rng.uniform(-170, 170, (4, 3)), rng.normal(size=3))
        back = mirror_pose(toy_skeleton, mirror_pose(toy_skeleton, pose))
        assert np.allclose(back.rotations, pose.rotations, atol=1e-12)
        assert np.allclose(back.root_position, pose.root_position, atol=1e-12)

    def test_sides_swap_and_signs_flip(self, toy_skeleton):
        rot = np.array([[1.0, 2, 3], [4, 5, 6], [7, 8, 9], [10, 11, 12]])
        m = mirror_pose(toy_skeleton, make_pose(rot, root=(0.3, 1.0, -0.2)))
        left, right = toy_skeleton.index("left_arm"), toy_skeleton.index("right_arm")
        assert np.allclose(m.rotations[left], [10.0, -11.0, -12.0])
        assert np.allclose(m.rotations[right], [7.0, -8.0, -9.0])
        assert np.allclose(m.rotations[0], [1.0, -2.0, -3.0])
        assert np.allclose(m.root_position, [-0.3, 1.0, -0.2])

    def test_mirrored_positions_are_reflections(self, toy_skeleton):
        rng = np.random.default_rng(8)
        pose = make_pose(rng.uniform(-60, 60, (4, 3)), root=(0.1, 0.9, 0.4))
        pos = forward_kinematics(toy_skeleton, pose)
        mpos = forward_kinematics(toy_skeleton, mirror_pose(toy_skeleton, pose))
        left, right = toy_skeleton.index("left_arm"), toy_skeleton.index("right_arm")
        assert np.allclose(mpos[left], pos[right] * np.array([-1.0, 1.0, 1.0]), atol=1e-9)
        assert np.allclose(mpos[right], pos[left] * np.array([-1.0, 1.0, 1.0]), atol=1e-9)
        assert np.allclose(mpos[0], pos[0] * np.array([-1.0, 1.0, 1.0]), atol=1e-9)

    def test_track_mirror_keeps_times(self, toy_skeleton):
        rng = np.random.default_rng(9)
        track = PoseTrack(tuple((float(t), make_pose(rng.uniform(-60, 60, (4, 3))))
                                for t in (0.0, 0.5, 1.0)))
        m = mirror_track(toy_skeleton, track)
        assert [t for t, _ in m.keyframes] == [0.0, 0.5, 1.0]
        assert m.n_joints == 4


class TestFiles:
    def test_skeleton_round_trip(self, toy_skeleton, tmp_path):
        path = tmp_path / "skel.tsv"
        save_skeleton(toy_skeleton, path)
        back = load_skeleton(path)
        assert back.names == toy_skeleton.names
        assert back.parents == toy_skeleton.parents
        assert np.allclose(back.offsets, toy_skeleton.offsets)

    def test_skeleton_text_example_parses(self, tmp_path):
        text = ("# comment line\n"
                "root\t-1\t0\t0\t0\n"
                "spine\t0\t0\t0.5\t0\n"
                "left_arm\t1\t0.2\t0.4\t0\n"
                "right_arm\t1\t-0.2\t0.4\t0\n")
        path = tmp_path / "toy.tsv"
        path.write_text(text)
        skel = load_skeleton(path)
        assert skel.n_joints == 4
        assert skel.parents == (-1, 0, 1, 1)

    def test_skeleton_errors_carry_line_numbers(self, tmp_path):
        path = tmp_path / "bad.tsv"
        path.write_text("root\t-1\t0\t0\t0\nspine\t0\tx\t0\t0\n")
        with pytest.raises(SceneFormatError, match="bad.tsv:2"):
            load_skeleton(path)

    def test_track_round_trip(self, tmp_path):
        rng = np.random.default_rng(10)
        track = PoseTrack(tuple((float(t), make_pose(rng.uniform(-170, 170, (3, 3)).round(4),
                                                     rng.normal(size=3).round(4)))
                                for t in (0.0, 0.5, 1.25)))
        path = tmp_path / "track.json"
        save_pose_track(track, path)
        back = load_pose_track(path)
        assert len(back.keyframes) == 3
        assert back.fps == track.fps
        for (t0, p0), (t1, p1) in zip(track.keyframes, back.keyframes):
            assert t0 == t1
            assert np.allclose(p0.rotations, p1.rotations, atol=1e-9)
            assert np.allclose(p0.root_position, p1.root_position, atol=1e-9)

    def test_track_schema_checked(self, tmp_path):
        path = tmp_path / "x.json"
        path.write_text('{"schema": "nope", "keyframes": []}')
        with pytest.raises(SceneFormatError, match="schema"):
            load_pose_track(path)


class TestPoseVadiRegressor:
    def test_recovers_linear_map(self):
        rng = np.random.default_rng(11)
        dim = 4 * 3 + 3
        w = rng.normal(scale=0.002, size=(dim, 4))
        b = np.array([0.5, 0.5, 0.5, 0.0])
        poses = [make_pose(rng.uniform(-30, 30, (4, 3)), rng.normal(size=3)) for _ in range(80)]
        targets = np.stack([p.vector() @ w + b for p in poses])
        # keep every target inside the clamp range so the fit is exact
        assert targets[:, :3].min() > 0.0 and targets[:, :3].max() < 1.0
        assert np.abs(targets[:, 3]).max() < 1.0
        reg = PoseVadiRegressor().fit(poses, targets)
        for p, t in zip(poses[:10], targets[:10]):
            assert np.allclose(reg.predict(p), t, atol=1e-6)

    def test_predict_clamps(self):
        poses = [make_pose([[0.0, 0, 0]]), make_pose([[10.0, 0, 0]])]
        reg = PoseVadiRegressor().fit(poses, np.array([[0.0, 0, 0, -1], [5.0, 2, 1, 3]]))
        v, a, d, i = reg.predict(make_pose([[100.0, 0, 0]]))
        assert 0.0 <= v <= 1.0 and 0.0 <= a <= 1.0 and 0.0 <= d <= 1.0
        assert -1.0 <= i <= 1.0

    def test_unfitted_raises(self):
        with pytest.raises(FitError):
            PoseVadiRegressor().predict(make_pose([[0.0, 0, 0]]))

    def test_vad_helper(self):
        poses = [make_pose([[float(k), 0, 0]]) for k in range(5)]
        targets = np.tile([0.5, 0.5, 0.5, 0.0], (5, 1))
        reg = PoseVadiRegressor().fit(poses, targets)
        vad = reg.predict_vad(poses[0])
        assert vad.valence == pytest.approx(0.5, abs=1e-6)
