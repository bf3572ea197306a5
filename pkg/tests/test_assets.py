"""Checks over the bundled starter corpus."""

import numpy as np
import pytest

from scene_grammar.assets import (
    fit_starter_face_model,
    load_starter_faces,
    load_starter_grammar,
    load_starter_lexicon,
    load_starter_skeleton,
    load_starter_track,
)
from scene_grammar.faces import LANDMARK_DIM
from scene_grammar.grammar import forward_sample, validate_parse_graph
from scene_grammar.motion import forward_kinematics, interpolate, resample_track
from scene_grammar.potentials import feature_vector
from scene_grammar.vadi import intimacy_from_distance, motion_vad


@pytest.fixture(scope="module")
def grammar():
    return load_starter_grammar()


@pytest.fixture(scope="module")
def lexicon():
    return load_starter_lexicon()


@pytest.fixture(scope="module")
def skeleton():
    return load_starter_skeleton()


class TestPools:
    def test_emotion_pool_has_21_expressions(self, grammar):
        assert len(grammar.emotion_pool) == 21

    def test_motion_pool_has_65_clips(self, grammar):
        assert len(grammar.motion_pool) == 65

    def test_scenario_expressions_present_with_expected_vads(self, grammar):
        byid = {e.id: e for e in grammar.emotion_pool}
        assert byid["neutral"].vad.valence == 0.5
        assert (byid["happy"].vad.valence, byid["happy"].vad.arousal, byid["happy"].vad.dominance) == (1.0, 0.7, 0.8)
        assert (byid["glad"].vad.valence, byid["glad"].vad.arousal, byid["glad"].vad.dominance) == (0.9, 0.7, 0.7)
        assert (byid["scared"].vad.valence, byid["scared"].vad.arousal, byid["scared"].vad.dominance) == (0.3, 0.8, 0.3)

    def test_relation_pool_levels(self, grammar):
        byname = {r.name: r for r in grammar.relation_pool}
        assert byname["brothers"].intimacy_level == "high"
        assert byname["strangers"].intimacy_level == "low"
        assert byname["employee-to-employer"].dominance_level == "low"
        assert byname["teacher-to-student"].dominance_level == "high"

    def test_every_motion_name_resolves_in_lexicon(self, grammar, lexicon):
        for m in grammar.motion_pool:
            vad = motion_vad(m.name, lexicon)
            assert 0.0 <= vad.valence <= 1.0

    def test_token_mean_fallback_example(self, lexicon):
        # "high five" is absent as a phrase; its tokens average instead
        assert "high five" not in lexicon
        got = motion_vad("high five", lexicon)
        hi, five = lexicon.lookup("high"), lexicon.lookup("five")
        assert got.valence == pytest.approx((hi.valence + five.valence) / 2)
        assert got.arousal == pytest.approx((hi.arousal + five.arousal) / 2)


class TestSkeletonAndTracks:
    def test_skeleton_is_65_joints_with_mirrored_sides(self, skeleton):
        assert skeleton.n_joints == 65
        lefts = {n for n in skeleton.names if n.startswith("left_")}
        rights = {n for n in skeleton.names if n.startswith("right_")}
        assert len(lefts) == len(rights) == 29
        assert {n.replace("left_", "right_") for n in lefts} == rights

    def test_every_track_loads_and_matches_duration(self, grammar, skeleton):
        for m in grammar.motion_pool:
            track = load_starter_track(m.id)
            assert track.n_joints == skeleton.n_joints
            assert track.duration == pytest.approx(m.duration_s)
            assert track.keyframes[0][0] == 0.0

    def test_tracks_run_through_fk(self, grammar, skeleton):
        track = load_starter_track(grammar.motion_pool[0].id)
        pose = interpolate(track, 0.25)
        pos = forward_kinematics(skeleton, pose)
        assert pos.shape == (65, 3)
        assert np.all(np.isfinite(pos))
        # head ends up above the hips in any sane clip
        head = skeleton.index("head")
        assert pos[head, 1] > pos[0, 1]

    def test_half_second_keyframe_cadence(self, grammar):
        track = load_starter_track(grammar.motion_pool[3].id)
        times = [t for t, _ in track.keyframes]
        assert np.allclose(np.diff(times), 0.5)


class TestFaces:
    def test_21_faces_with_full_landmark_sets(self):
        faces = load_starter_faces()
        assert len(faces) == 21
        for name, lm, vad in faces:
            assert lm.coords.shape == (LANDMARK_DIM,)

    def test_face_model_fits_at_rank_6(self):
        model = fit_starter_face_model(k=6)
        # regression drives the top 6 coefficients; the basis keeps every
        # non-degenerate component so reconstruction stays exact
        assert model.regression.shape == (6, 4)
        assert model.basis.shape[0] >= 6
        assert model.basis.shape[1] == LANDMARK_DIM
        n = model.basis.shape[0]
        assert np.allclose(model.basis @ model.basis.T, np.eye(n), atol=1e-8)

    def test_happier_faces_have_higher_mouth_corners(self):
        faces = {name: lm for name, lm, _ in load_starter_faces()}
        from scene_grammar.faces import LANDMARK_NAMES
        iy = 2 * LANDMARK_NAMES.index("mouth_0") + 1
        assert faces["happy"].coords[iy] > faces["sad"].coords[iy]


class TestStarterSampling:
    def test_forward_samples_validate(self, grammar):
        rng = np.random.default_rng(0)
        for _ in range(25):
            pg = forward_sample(grammar, rng)
            validate_parse_graph(pg, grammar)

    def test_seed_42_features_match_independent_recalculation(self, grammar, lexicon):
        pg = forward_sample(grammar, np.random.default_rng(42))
        fv = feature_vector(pg, lexicon)
        # independent recomputation with plain arithmetic
        i_me = (1.2 - pg.distance) / 1.2
        d_r, i_r = pg.relation.d_r, pg.relation.i_r
        for ci, c in enumerate(pg.characters):
            dv = c.end_face.vad.valence - c.start_face.vad.valence
            da = c.end_face.vad.arousal - c.start_face.vad.arousal
            dd = c.end_face.vad.dominance - c.start_face.vad.dominance
            mv = motion_vad(c.motion.name, lexicon)
            assert fv.me_dot[ci] == pytest.approx(mv.valence * dv + mv.arousal * da + mv.dominance * dd)
            assert fv.re_dot[ci] == pytest.approx(d_r * dd + i_r * i_me)
            assert fv.rm_dot[ci] == pytest.approx(d_r * mv.dominance + i_r * i_me)
            assert fv.me_gap_sq[ci] == pytest.approx((c.t_m - c.t_e) ** 2)
        c1, c2 = pg.characters
        assert fv.m_gap_sq == pytest.approx((c1.t_m_end - c2.t_m_end) ** 2)
        assert fv.e_gap_sq == pytest.approx((c1.t_e_end - c2.t_e_end) ** 2)
        assert i_me == pytest.approx(intimacy_from_distance(pg.distance))

    def test_resampled_track_frame_count(self, grammar):
        m = next(m for m in grammar.motion_pool if m.duration_s == 2.0)
        frames = resample_track(load_starter_track(m.id), 1.0 / 24.0)
        assert len(frames) == 49
