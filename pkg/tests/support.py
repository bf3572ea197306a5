"""Shared fixtures: a small in-memory grammar and deterministic scenes."""

import numpy as np

from scene_grammar.grammar import (
    CharacterParse, FaceRef, MotionClipRef, ParseGraph, build_staog,
    refresh_or_choices,
)
from scene_grammar.motion import Pose, PoseTrack, Skeleton
from scene_grammar.vadi import Lexicon, RelationScore, VadVector


def small_grammar(n_relations=3, motion_tracks=False):
    relations = [RelationScore("pals", "medium", "high"),
                 RelationScore("rivals", "low", "low"),
                 RelationScore("mentor", "high", "high")][:n_relations]
    tracks = {}
    if motion_tracks:
        def track(amp, dur):
            kfs = []
            for i in range(int(dur / 0.5) + 1):
                t = 0.5 * i
                rot = np.zeros((3, 3))
                rot[1, 2] = amp * np.sin(2 * np.pi * t / dur)
                kfs.append((t, Pose(rotations=rot, root_position=np.zeros(3))) if t > 0
                           else (0.0, Pose(rotations=np.zeros((3, 3)), root_position=np.zeros(3))))
            return PoseTrack(tuple(kfs))
        tracks = {"m_wave": track(30.0, 2.0), "m_idle": track(5.0, 1.5)}
    motions = [MotionClipRef("m_wave", "wave", 2.0, track=tracks.get("m_wave")),
               MotionClipRef("m_idle", "idle", 1.5, track=tracks.get("m_idle"))]
    emotions = [FaceRef("e_neutral", "neutral", VadVector(0.5, 0.5, 0.5)),
                FaceRef("e_happy", "happy", VadVector(0.9, 0.7, 0.8)),
                FaceRef("e_sad", "sad", VadVector(0.2, 0.3, 0.3))]
    return build_staog(relations, motions, emotions)


def small_lexicon():
    return Lexicon({
        "wave": VadVector(0.8, 0.6, 0.5),
        "idle": VadVector(0.5, 0.2, 0.4),
        "neutral": VadVector(0.5, 0.5, 0.5),
        "happy": VadVector(0.9, 0.7, 0.8),
        "sad": VadVector(0.2, 0.3, 0.3),
    })


def fixed_pg(g, rel_name="pals", end0_vad=(0.5, 0.5, 0.5)):
    """Deterministic two-character scene; char 0 waves, char 1 idles."""
    rel = g.relation_by_id(rel_name)
    wave, idle = g.motion_by_id("m_wave"), g.motion_by_id("m_idle")
    neutral = g.emotion_by_id("e_neutral")
    c0 = CharacterParse(position=np.array([-0.4, 0.0, 0.0]), yaw_deg=0.0,
                        motion=wave, start_face=neutral,
                        end_face=FaceRef("e_neutral", "neutral", VadVector(*end0_vad)),
                        t_m=1.0, t_e=0.5, t_m_end=3.0, t_e_end=1.5)
    c1 = CharacterParse(position=np.array([0.4, 0.0, 0.0]), yaw_deg=180.0,
                        motion=idle, start_face=neutral, end_face=neutral,
                        t_m=0.8, t_e=1.2, t_m_end=2.3, t_e_end=2.2)
    return refresh_or_choices(ParseGraph(characters=(c0, c1), relation=rel))


def tiny_skeleton():
    return Skeleton(names=("root", "mid", "tip"), parents=(-1, 0, 1),
                    offsets=np.array([[0.0, 0.0, 0.0], [0.0, 0.5, 0.0], [0.0, 0.4, 0.0]]))
