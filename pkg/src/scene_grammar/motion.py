"""Skeletal poses, keyframe tracks, and forward kinematics.

A pose is per-joint Euler rotations (degrees, intrinsic XYZ) plus a
root position; the standard rig has 65 joints, so one pose is the
198-dimensional vector (65 x 3 + 3) used by the sequence model. Toy
skeletons of any joint count run through the same machinery.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContractError, FitError, SceneFormatError
from .vadi import VadVector

STANDARD_JOINT_COUNT = 65
STANDARD_POSE_DIM = 3 * STANDARD_JOINT_COUNT + 3   # 198
REFERENCE_FPS = 24.0


def wrap_degrees(x):
    """Wrap angles to (-180, 180]."""
    w = np.asarray(x, dtype=float) % 360.0
    w = np.where(w > 180.0, w - 360.0, w)
    return w


@dataclass(frozen=True, slots=True)
class Pose:
    """Joint Euler rotations (n_joints, 3) in degrees plus root position."""

    rotations: np.ndarray
    root_position: np.ndarray

    def __post_init__(self):
        rot = np.asarray(self.rotations, dtype=float)
        if rot.ndim != 2 or rot.shape[1] != 3:
            raise ContractError(f"rotations must be (n, 3), got {rot.shape}")
        pos = np.asarray(self.root_position, dtype=float).ravel()
        if pos.shape != (3,):
            raise ContractError(f"root position must have 3 components, got {pos.shape}")
        if not (np.all(np.isfinite(rot)) and np.all(np.isfinite(pos))):
            raise ContractError("pose contains non-finite values")
        object.__setattr__(self, "rotations", wrap_degrees(rot))
        object.__setattr__(self, "root_position", pos)

    @property
    def n_joints(self) -> int:
        return self.rotations.shape[0]

    def vector(self) -> np.ndarray:
        """Flatten to (3*n_joints + 3,): rotations joint-major, then root."""
        return np.concatenate([self.rotations.ravel(), self.root_position])

    @staticmethod
    def from_vector(vec: np.ndarray) -> "Pose":
        vec = np.asarray(vec, dtype=float).ravel()
        if vec.shape[0] < 6 or (vec.shape[0] - 3) % 3 != 0:
            raise ContractError(f"pose vector length {vec.shape[0]} is not 3n+3")
        return Pose(vec[:-3].reshape(-1, 3), vec[-3:])


@dataclass(frozen=True, slots=True)
class PoseTrack:
    """Ordered (time, Pose) keyframes; times strictly increasing."""

    keyframes: tuple
    fps: float = REFERENCE_FPS

    def __post_init__(self):
        kfs = tuple(self.keyframes)
        if not kfs:
            raise ContractError("pose track needs at least one keyframe")
        times = [t for t, _ in kfs]
        if any(b <= a for a, b in zip(times, times[1:])):
            raise ContractError("keyframe times must be strictly increasing")
        n = kfs[0][1].n_joints
        if any(p.n_joints != n for _, p in kfs):
            raise ContractError("keyframes have inconsistent joint counts")
        object.__setattr__(self, "keyframes", kfs)

    @property
    def duration(self) -> float:
        return self.keyframes[-1][0]

    @property
    def n_joints(self) -> int:
        return self.keyframes[0][1].n_joints


def interpolate(track: PoseTrack, t: float) -> Pose:
    """Pose at time t: clamped at the ends, linear in between.

    Euler components follow the shortest angular arc between the two
    keyframes; the root position is plain linear.
    """
    kfs = track.keyframes
    if t <= kfs[0][0]:
        return kfs[0][1]
    if t >= kfs[-1][0]:
        return kfs[-1][1]
    times = [k[0] for k in kfs]
    hi = int(np.searchsorted(times, t, side="right"))
    t0, p0 = kfs[hi - 1]
    t1, p1 = kfs[hi]
    if t == t0:
        return p0
    u = (t - t0) / (t1 - t0)
    arc = wrap_degrees(p1.rotations - p0.rotations)
    rot = wrap_degrees(p0.rotations + u * arc)
    pos = p0.root_position + u * (p1.root_position - p0.root_position)
    return Pose(rot, pos)


def resample_track(track: PoseTrack, dt: float, t0: float = 0.0, t1: float | None = None) -> list[Pose]:
    """Poses on a regular dt grid over [t0, t1] (default: track duration)."""
    if dt <= 0:
        raise ContractError("dt must be positive")
    if t1 is None:
        t1 = track.duration
    n = int(math.floor((t1 - t0) / dt + 1e-9)) + 1
    return [interpolate(track, t0 + i * dt) for i in range(n)]


@dataclass(frozen=True)
class Skeleton:
    """Topologically ordered joint table: (name, parent index, rest offset).

    parent < own index everywhere and exactly one joint (index 0) has
    no parent.
    """

    names: tuple
    parents: tuple           # -1 for the root
    offsets: np.ndarray      # (n, 3) rest offsets in meters

    def __post_init__(self):
        n = len(self.names)
        if len(self.parents) != n or np.asarray(self.offsets).shape != (n, 3):
            raise ContractError("skeleton fields have inconsistent lengths")
        roots = [i for i, p in enumerate(self.parents) if p < 0]
        if roots != [0]:
            raise ContractError("skeleton must have exactly one root at index 0")
        for i, p in enumerate(self.parents[1:], start=1):
            if not 0 <= p < i:
                raise ContractError(f"joint {i} has parent {p}; joints must be topologically ordered")
        object.__setattr__(self, "offsets", np.asarray(self.offsets, dtype=float))

    @property
    def n_joints(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        return self.names.index(name)


def euler_xyz_matrix(angles_deg) -> np.ndarray:
    """Rotation matrix for intrinsic XYZ Euler angles in degrees."""
    x, y, z = np.radians(np.asarray(angles_deg, dtype=float))
    cx, sx = math.cos(x), math.sin(x)
    cy, sy = math.cos(y), math.sin(y)
    cz, sz = math.cos(z), math.sin(z)
    rx = np.array([[1, 0, 0], [0, cx, -sx], [0, sx, cx]])
    ry = np.array([[cy, 0, sy], [0, 1, 0], [-sy, 0, cy]])
    rz = np.array([[cz, -sz, 0], [sz, cz, 0], [0, 0, 1]])
    return rx @ ry @ rz


def forward_kinematics(skel: Skeleton, pose: Pose) -> np.ndarray:
    """World positions of all joints, composing rotations down the tree.

    The root sits at the pose's root position; each child sits at
    parent position + parent world rotation applied to its rest offset.
    """
    if pose.n_joints != skel.n_joints:
        raise ContractError(f"pose has {pose.n_joints} joints, skeleton {skel.n_joints}")
    n = skel.n_joints
    world_rot = np.empty((n, 3, 3))
    world_pos = np.empty((n, 3))
    world_rot[0] = euler_xyz_matrix(pose.rotations[0])
    world_pos[0] = pose.root_position
    for j in range(1, n):
        p = skel.parents[j]
        world_pos[j] = world_pos[p] + world_rot[p] @ skel.offsets[j]
        world_rot[j] = world_rot[p] @ euler_xyz_matrix(pose.rotations[j])
    return world_pos


def mirror_pose(skel: Skeleton, pose: Pose) -> Pose:
    """Left-right mirror: swap left_/right_ joints, flip y/z rotation
    components and the root x position."""
    perm = _mirror_permutation(skel)
    rot = pose.rotations[perm] * np.array([1.0, -1.0, -1.0])
    pos = pose.root_position * np.array([-1.0, 1.0, 1.0])
    return Pose(rot, pos)


def mirror_track(skel: Skeleton, track: PoseTrack) -> PoseTrack:
    return PoseTrack(tuple((t, mirror_pose(skel, p)) for t, p in track.keyframes), fps=track.fps)


def _mirror_permutation(skel: Skeleton) -> np.ndarray:
    perm = np.arange(skel.n_joints)
    index = {n: i for i, n in enumerate(skel.names)}
    for i, name in enumerate(skel.names):
        if name.startswith("left_"):
            other = "right_" + name[len("left_"):]
        elif name.startswith("right_"):
            other = "left_" + name[len("right_"):]
        else:
            continue
        if other in index:
            perm[i] = index[other]
    return perm


# -- pose -> VADI regression --------------------------------------------------

class PoseVadiRegressor:
    """Affine map from a pose vector to (v, a, d, i).

    Fit by ridge least squares on labeled poses; v/a/d outputs are
    clamped to [0, 1] and intimacy to [-1, 1].
    """

    def __init__(self):
        self.weights = None      # (pose_dim + 1, 4)

    @property
    def fitted(self) -> bool:
        return self.weights is not None

    def fit(self, poses: list[Pose], vadi: np.ndarray, ridge: float = 1e-6) -> "PoseVadiRegressor":
        if not poses:
            raise FitError("need at least one labeled pose")
        vadi = np.asarray(vadi, dtype=float)
        if vadi.shape != (len(poses), 4):
            raise FitError(f"vadi labels must be ({len(poses)}, 4), got {vadi.shape}")
        x = np.stack([p.vector() for p in poses])
        design = np.column_stack([x, np.ones(len(poses))])
        gram = design.T @ design + ridge * np.eye(design.shape[1])
        self.weights = np.linalg.solve(gram, design.T @ vadi)
        return self

    def predict(self, pose: Pose) -> tuple[float, float, float, float]:
        if not self.fitted:
            raise FitError("regressor is not fitted")
        raw = np.append(pose.vector(), 1.0) @ self.weights
        v, a, d = np.clip(raw[:3], 0.0, 1.0)
        i = float(np.clip(raw[3], -1.0, 1.0))
        return (float(v), float(a), float(d), i)

    def predict_vad(self, pose: Pose) -> VadVector:
        v, a, d, _ = self.predict(pose)
        return VadVector(v, a, d)


# -- file formats -------------------------------------------------------------
#
# Skeleton: tab-separated rows "name<TAB>parent<TAB>ox<TAB>oy<TAB>oz"
# (parent -1 for the root), '#' comments allowed. Worked 4-joint example:
#
#   root	-1	0	0	0
#   spine	0	0	0.5	0
#   left_arm	1	0.2	0.4	0
#   right_arm	1	-0.2	0.4	0
#
# Pose track: JSON
#   {"schema": "pose-track/1", "skeleton": "starter_65", "fps": 24,
#    "keyframes": [{"t": 0.0, "root": [0,1,0], "rotations": [[0,0,0], ...]}]}

TRACK_SCHEMA = "pose-track/1"


def load_skeleton(path: str | Path) -> Skeleton:
    path = Path(path)
    names, parents, offsets = [], [], []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != 5:
            raise SceneFormatError(f"{path}:{lineno}: expected 5 columns, got {len(cols)}")
        try:
            names.append(cols[0])
            parents.append(int(cols[1]))
            offsets.append([float(c) for c in cols[2:5]])
        except ValueError:
            raise SceneFormatError(f"{path}:{lineno}: bad numeric column") from None
    try:
        return Skeleton(tuple(names), tuple(parents), np.array(offsets))
    except ContractError as e:
        raise SceneFormatError(f"{path}: {e}") from None


def save_skeleton(skel: Skeleton, path: str | Path) -> None:
    lines = ["# name\tparent\tox\toy\toz"]
    for name, parent, off in zip(skel.names, skel.parents, skel.offsets):
        lines.append(f"{name}\t{parent}\t{float(off[0])!r}\t{float(off[1])!r}\t{float(off[2])!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_pose_track(path: str | Path) -> PoseTrack:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise SceneFormatError(f"{path}: invalid JSON ({e})") from None
    if doc.get("schema") != TRACK_SCHEMA:
        raise SceneFormatError(f"{path}: unsupported schema {doc.get('schema')!r}")
    try:
        kfs = tuple(
            (float(kf["t"]), Pose(np.array(kf["rotations"], dtype=float), np.array(kf["root"], dtype=float)))
            for kf in doc["keyframes"]
        )
        return PoseTrack(kfs, fps=float(doc.get("fps", REFERENCE_FPS)))
    except (KeyError, TypeError, ContractError) as e:
        raise SceneFormatError(f"{path}: bad track data ({e})") from None


def save_pose_track(track: PoseTrack, path: str | Path, skeleton_name: str = "starter_65", ndigits: int = 4) -> None:
    doc = {
        "schema": TRACK_SCHEMA,
        "skeleton": skeleton_name,
        "fps": track.fps,
        "keyframes": [
            {
                "t": round(t, 6),
                "root": [round(float(v), ndigits) for v in p.root_position],
                "rotations": [[round(float(v), ndigits) for v in row] for row in p.rotations],
            }
            for t, p in track.keyframes
        ],
    }
    Path(path).write_text(json.dumps(doc, separators=(",", ":")) + "\n", encoding="utf-8")


def save_regressor(reg: PoseVadiRegressor, path: str | Path) -> None:
    if not reg.fitted:
        raise FitError("regressor is not fitted")
    with open(path, "wb") as fh:
        np.savez(fh, weights=reg.weights)


def load_regressor(path: str | Path) -> PoseVadiRegressor:
    path = Path(path)
    with np.load(path) as data:
        if "weights" not in data:
            raise SceneFormatError(f"{path}: not a pose-regressor archive")
        w = np.asarray(data["weights"], dtype=float)
    if w.ndim != 2 or w.shape[1] != 4:
        raise SceneFormatError(f"{path}: weights must be (pose_dim+1, 4), got {w.shape}")
    reg = PoseVadiRegressor()
    reg.weights = w
    return reg
