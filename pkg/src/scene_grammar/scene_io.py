"""Scene serialization, dataset persistence, and animation export.

A scene file is a single JSON document with a fixed key order and
shortest-round-trip float formatting, so semantically equal scenes
serialize byte-identically and diffs stay readable. Datasets are
line-delimited scene records for append-only growth. Animation export
walks a fixed frame grid, interpolating motion keyframes and in-between
faces (linear in VAD space, then synthesized through the face model).
"""

from __future__ import annotations

import json
import math
import os
import tempfile
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ContractError, SceneFormatError
from .faces import FaceLandmarks, FaceModel, LANDMARK_NAMES, vad_to_face
from .grammar import (
    CUSTOM_FACE_PREFIX, CharacterParse, FaceRef, MotionClipRef, ParseGraph,
    StAog, validate_parse_graph,
)
from .motion import Pose, PoseTrack, Skeleton, euler_xyz_matrix, forward_kinematics, interpolate, load_pose_track
from .potentials import PotentialParams, spatial_energy, temporal_energy, tree_energy, total_energy
from .vadi import DEFAULT_SOCIAL_DISTANCE, Lexicon, VadVector

SCENE_SCHEMA = "scene/1"
LABELS = ("good", "medium", "bad")


@dataclass(frozen=True)
class SceneDocument:
    """A parse graph plus its file-level envelope."""

    pg: ParseGraph
    grammar_name: str
    label: str | None = None
    energy: dict | None = None

    def __post_init__(self):
        if self.label is not None and self.label not in LABELS:
            raise SceneFormatError(f"label must be one of {LABELS}, got {self.label!r}")


def energy_breakdown(pg: ParseGraph, g: StAog, theta: PotentialParams, lex: Lexicon,
                     social_distance: float = DEFAULT_SOCIAL_DISTANCE) -> dict:
    """Per-term energies plus their total, for the optional scene block."""
    from .potentials import feature_vector
    fv = feature_vector(pg, lex, social_distance=social_distance)
    tree = tree_energy(pg, g)
    spatial = spatial_energy(fv, theta)
    temporal = temporal_energy(fv, theta)
    return {"tree": float(tree), "spatial": float(spatial),
            "temporal": float(temporal), "total": float(tree + spatial + temporal)}


# -- dict codec ---------------------------------------------------------------

def _face_block(face: FaceRef) -> dict:
    block = {"id": face.id, "name": face.name,
             "vad": [float(face.vad.valence), float(face.vad.arousal), float(face.vad.dominance)]}
    if isinstance(face.landmarks, FaceLandmarks):
        pts = face.landmarks.coords.reshape(-1, 2)
        block["landmarks"] = {n: [float(x), float(y)] for n, (x, y) in zip(LANDMARK_NAMES, pts)}
    return block


def _motion_block(motion: MotionClipRef) -> dict:
    block = {"id": motion.id, "name": motion.name, "duration_s": float(motion.duration_s)}
    if isinstance(motion.track, PoseTrack):
        block["keyframes"] = [
            {"t": float(t), "root": [float(v) for v in p.root_position],
             "rotations": [[float(v) for v in row] for row in p.rotations]}
            for t, p in motion.track.keyframes
        ]
    return block


def _character_block(c: CharacterParse) -> dict:
    return {
        "position": [float(v) for v in c.position],
        "yaw_deg": float(c.yaw_deg),
        "motion": _motion_block(c.motion),
        "start_face": _face_block(c.start_face),
        "end_face": _face_block(c.end_face),
        "t_m": float(c.t_m), "t_e": float(c.t_e),
        "t_m_end": float(c.t_m_end), "t_e_end": float(c.t_e_end),
    }


def scene_to_dict(doc: SceneDocument) -> dict:
    d = {
        "schema": SCENE_SCHEMA,
        "grammar": doc.grammar_name,
        "relation": {
            "name": doc.pg.relation.name,
            "dominance": doc.pg.relation.dominance_level,
            "intimacy": doc.pg.relation.intimacy_level,
        },
        "characters": [_character_block(c) for c in doc.pg.characters],
        "or_choices": {k: doc.pg.or_choices[k] for k in sorted(doc.pg.or_choices)},
    }
    if doc.label is not None:
        d["label"] = doc.label
    if doc.energy is not None:
        d["energy"] = {k: float(doc.energy[k]) for k in ("tree", "spatial", "temporal", "total")}
    return d


_TOP_KEYS = {"schema", "grammar", "relation", "characters", "or_choices", "label", "energy"}
_CHAR_KEYS = {"position", "yaw_deg", "motion", "start_face", "end_face",
              "t_m", "t_e", "t_m_end", "t_e_end"}
_FACE_KEYS = {"id", "name", "vad", "landmarks"}
_MOTION_KEYS = {"id", "name", "duration_s", "keyframes"}
_RELATION_KEYS = {"name", "dominance", "intimacy"}


def _check_keys(d: dict, allowed: set, where: str, strict: bool) -> None:
    unknown = sorted(set(d) - allowed)
    if not unknown:
        return
    msg = f"{where}: unknown fields {unknown}"
    if strict:
        raise SceneFormatError(msg)
    warnings.warn(msg, stacklevel=3)


def _load_face(block: dict, g: StAog, strict: bool, where: str) -> FaceRef:
    _check_keys(block, _FACE_KEYS, where, strict)
    try:
        fid = block["id"]
        vad = VadVector(*[float(v) for v in block["vad"]])
    except (KeyError, TypeError, ValueError) as e:
        raise SceneFormatError(f"{where}: bad face block ({e})") from None
    landmarks = None
    if "landmarks" in block:
        try:
            marks = block["landmarks"]
            coords = np.array([marks[n] for n in LANDMARK_NAMES], dtype=float).ravel()
        except (KeyError, TypeError, ValueError) as e:
            raise SceneFormatError(f"{where}: bad landmarks ({e})") from None
        landmarks = FaceLandmarks(coords)
    if fid.startswith(CUSTOM_FACE_PREFIX):
        return FaceRef(id=fid, name=block.get("name", fid), vad=vad, landmarks=landmarks)
    try:
        pool = g.emotion_by_id(fid)
    except Exception:
        raise SceneFormatError(f"{where}: face {fid!r} not in grammar") from None
    return pool if landmarks is None else replace(pool, landmarks=landmarks)


def _load_motion(block: dict, g: StAog, strict: bool, where: str) -> MotionClipRef:
    _check_keys(block, _MOTION_KEYS, where, strict)
    try:
        mid = block["id"]
    except KeyError:
        raise SceneFormatError(f"{where}: motion block missing id") from None
    if "keyframes" in block:
        try:
            kfs = tuple(
                (float(kf["t"]), Pose(rotations=np.array(kf["rotations"], dtype=float),
                                      root_position=np.array(kf["root"], dtype=float)))
                for kf in block["keyframes"]
            )
            track = PoseTrack(kfs)
            return MotionClipRef(id=mid, name=block.get("name", mid),
                                 duration_s=float(block["duration_s"]), track=track)
        except (KeyError, TypeError, ValueError, ContractError) as e:
            raise SceneFormatError(f"{where}: bad inline track ({e})") from None
    try:
        return g.motion_by_id(mid)
    except Exception:
        raise SceneFormatError(f"{where}: motion {mid!r} not in grammar") from None


def scene_from_dict(d: dict, g: StAog, strict: bool = True) -> SceneDocument:
    if not isinstance(d, dict):
        raise SceneFormatError("scene document must be a JSON object")
    schema = d.get("schema")
    if schema != SCENE_SCHEMA:
        raise SceneFormatError(f"unsupported scene schema {schema!r} (expected {SCENE_SCHEMA!r})")
    _check_keys(d, _TOP_KEYS, "scene", strict)
    try:
        rel_block = d["relation"]
        char_blocks = d["characters"]
    except KeyError as e:
        raise SceneFormatError(f"scene document missing {e}") from None
    _check_keys(rel_block, _RELATION_KEYS, "relation", strict)
    try:
        relation = g.relation_by_id(rel_block["name"])
    except Exception:
        raise SceneFormatError(f"relation {rel_block.get('name')!r} not in grammar") from None
    if len(char_blocks) != 2:
        raise SceneFormatError(f"scene needs exactly 2 characters, got {len(char_blocks)}")
    chars = []
    for ci, block in enumerate(char_blocks):
        where = f"characters[{ci}]"
        _check_keys(block, _CHAR_KEYS, where, strict)
        try:
            chars.append(CharacterParse(
                position=np.array(block["position"], dtype=float),
                yaw_deg=float(block["yaw_deg"]),
                motion=_load_motion(block["motion"], g, strict, f"{where}.motion"),
                start_face=_load_face(block["start_face"], g, strict, f"{where}.start_face"),
                end_face=_load_face(block["end_face"], g, strict, f"{where}.end_face"),
                t_m=float(block["t_m"]), t_e=float(block["t_e"]),
                t_m_end=float(block["t_m_end"]), t_e_end=float(block["t_e_end"]),
            ))
        except (KeyError, TypeError, ValueError) as e:
            raise SceneFormatError(f"{where}: bad character block ({e})") from None
    or_choices = dict(d.get("or_choices", {}))
    pg = ParseGraph(characters=tuple(chars), relation=relation, or_choices=or_choices)
    validate_parse_graph(pg, g)
    label = d.get("label")
    energy = d.get("energy")
    if energy is not None:
        energy = {k: float(v) for k, v in energy.items()}
    return SceneDocument(pg=pg, grammar_name=d.get("grammar", g.name), label=label, energy=energy)


def serialize_scene(doc: SceneDocument) -> str:
    """Canonical form: fixed key order, 2-space indent, shortest
    round-trip floats, trailing newline."""
    return json.dumps(scene_to_dict(doc), indent=2, ensure_ascii=False) + "\n"


def atomic_write_text(path: str | Path, text: str) -> None:
    """Whole-file atomicity: write a sibling temp file, then rename."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def save_scene(doc: SceneDocument, path: str | Path) -> None:
    atomic_write_text(path, serialize_scene(doc))


def load_scene(path: str | Path, g: StAog, strict: bool = True) -> SceneDocument:
    path = Path(path)
    try:
        d = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise SceneFormatError(f"{path}: no such file") from None
    except json.JSONDecodeError as e:
        raise SceneFormatError(f"{path}: invalid JSON ({e})") from None
    return scene_from_dict(d, g, strict=strict)


# -- line-delimited datasets --------------------------------------------------

def scene_record(doc: SceneDocument) -> str:
    """One-line compact record for append-only dataset files."""
    return json.dumps(scene_to_dict(doc), separators=(",", ":"), ensure_ascii=False)


def save_dataset(docs, path: str | Path) -> None:
    atomic_write_text(path, "".join(scene_record(d) + "\n" for d in docs))


def load_dataset(path: str | Path, g: StAog, strict: bool = True) -> list[SceneDocument]:
    path = Path(path)
    out = []
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except FileNotFoundError:
        raise SceneFormatError(f"{path}: no such file") from None
    for ln, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
        except json.JSONDecodeError as e:
            raise SceneFormatError(f"{path}:{ln}: invalid JSON ({e})") from None
        try:
            out.append(scene_from_dict(d, g, strict=strict))
        except SceneFormatError as e:
            raise SceneFormatError(f"{path}:{ln}: {e}") from None
    return out


# -- animation export ---------------------------------------------------------

@dataclass(frozen=True, slots=True)
class CharacterFrame:
    joints: np.ndarray       # (n_joints, 3) world positions
    face: FaceLandmarks      # 2D landmark set for this instant
    vad: VadVector


@dataclass(frozen=True, slots=True)
class RenderFrame:
    time: float
    characters: tuple


def resolve_track(g: StAog, motion: MotionClipRef) -> PoseTrack:
    """Inline track, or the grammar-relative clip file."""
    if isinstance(motion.track, PoseTrack):
        return motion.track
    if isinstance(motion.track, str):
        if g.base_dir is None:
            raise SceneFormatError(f"motion {motion.id!r}: track path with no grammar base dir")
        return load_pose_track(Path(g.base_dir) / motion.track)
    raise SceneFormatError(f"motion {motion.id!r} has no track data")


def _face_vad_at(c: CharacterParse, t: float) -> VadVector:
    if t <= c.t_e:
        return c.start_face.vad
    if t >= c.t_e_end:
        return c.end_face.vad
    u = (t - c.t_e) / (c.t_e_end - c.t_e)
    s, e = c.start_face.vad, c.end_face.vad
    return VadVector(s.valence + u * (e.valence - s.valence),
                     s.arousal + u * (e.arousal - s.arousal),
                     s.dominance + u * (e.dominance - s.dominance))


def export_animation(pg: ParseGraph, g: StAog, skel: Skeleton, face_model: FaceModel,
                     fps: float = 24.0) -> list[RenderFrame]:
    """Render frames on a fixed grid from t=0 to the scene's last event.

    Motion plays from each character's t_m (held at its first keyframe
    before that); faces interpolate linearly in VAD space over
    [t_e, t_e_end], then synthesize landmarks through the face model.
    """
    if fps <= 0:
        raise ContractError("fps must be positive")
    tracks = [resolve_track(g, c.motion) for c in pg.characters]
    for c, track in zip(pg.characters, tracks):
        if track.n_joints != skel.n_joints:
            raise SceneFormatError(
                f"motion {c.motion.id!r} has {track.n_joints} joints, skeleton has {skel.n_joints}")
    duration = pg.duration
    n_frames = int(math.floor(duration * fps + 1e-9)) + 1
    frames = []
    for i in range(n_frames):
        t = i / fps
        char_frames = []
        for c, track in zip(pg.characters, tracks):
            pose = interpolate(track, t - c.t_m)
            local = forward_kinematics(skel, pose)
            rot = euler_xyz_matrix(np.array([0.0, c.yaw_deg, 0.0]))
            world = local @ rot.T + c.position
            vad = _face_vad_at(c, t)
            char_frames.append(CharacterFrame(joints=world, face=vad_to_face(vad, face_model), vad=vad))
        frames.append(RenderFrame(time=t, characters=tuple(char_frames)))
    return frames


def frames_to_jsonable(frames) -> list[dict]:
    """Plain-data form of render frames for HTTP bodies and export files.

    Joints become [x, y, z] triples, the face its flat coordinate list.
    """
    out = []
    for f in frames:
        chars = []
        for c in f.characters:
            chars.append({
                "joints": [[float(v) for v in row] for row in np.asarray(c.joints)],
                "face": [float(v) for v in c.face.coords],
                "vad": [c.vad.valence, c.vad.arousal, c.vad.dominance],
            })
        out.append({"time": float(f.time), "characters": chars})
    return out
