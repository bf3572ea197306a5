"""Bundled starter corpus: grammar, lexicon, skeleton, tracks, faces.

Everything here is generated by scripts/generate_starter_assets.py and
committed, so tests and demos run without external data. Paths resolve
through importlib.resources, which works both from a checkout and an
installed wheel.
"""

from __future__ import annotations

from importlib import resources
from pathlib import Path

from ..faces import FaceModel, fit_face_model, load_face
from ..grammar import StAog, load_grammar
from ..motion import PoseTrack, Skeleton, load_pose_track, load_skeleton
from ..vadi import Lexicon, load_lexicon

STARTER_FACE_RANK = 6


def _asset_path(name: str) -> Path:
    return Path(resources.files(__package__) / name)


def starter_grammar_path() -> Path:
    return _asset_path("grammar.json")


def starter_lexicon_path() -> Path:
    return _asset_path("lexicon.tsv")


def starter_skeleton_path() -> Path:
    return _asset_path("skeleton.tsv")


def load_starter_grammar() -> StAog:
    return load_grammar(starter_grammar_path())


def load_starter_lexicon() -> Lexicon:
    return load_lexicon(starter_lexicon_path())


def load_starter_skeleton() -> Skeleton:
    return load_skeleton(starter_skeleton_path())


def load_starter_track(motion_id: str) -> PoseTrack:
    return load_pose_track(_asset_path("tracks") / f"{motion_id}.json")


def load_starter_faces():
    """All 21 bundled expressions as (name, FaceLandmarks, VadVector)."""
    g = load_starter_grammar()
    out = []
    for e in g.emotion_pool:
        out.append(load_face(_asset_path(e.landmarks)))
    return out


def fit_starter_face_model(k: int = STARTER_FACE_RANK) -> FaceModel:
    faces = load_starter_faces()
    return fit_face_model([f for _, f, _ in faces], [v for _, _, v in faces], k=k)
