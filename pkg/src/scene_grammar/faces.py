"""Eigenface model over 2D facial landmark vectors.

Faces are fixed-layout sets of landmark points in face-box coordinates.
A FaceModel is a PCA basis over mean-centered landmark vectors plus a
linear regression from (valence, arousal, dominance) to the top-k
principal coefficients, so new expressions can be synthesized from a
VAD score alone.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ContractError, FitError, SceneFormatError
from .vadi import VadVector

# Named landmark layout: 24 points -> 48-dim vector. Order is fixed;
# files may list points in any order but must cover exactly these names.
LANDMARK_NAMES: tuple[str, ...] = tuple(
    [f"brow_l_{i}" for i in range(4)]
    + [f"brow_r_{i}" for i in range(4)]
    + [f"eye_l_{i}" for i in range(4)]
    + [f"eye_r_{i}" for i in range(4)]
    + [f"mouth_{i}" for i in range(6)]
    + ["cheek_l", "cheek_r"]
)

LANDMARK_DIM = 2 * len(LANDMARK_NAMES)

_ZERO_VARIANCE_TOL = 1e-12


@dataclass(frozen=True, slots=True)
class FaceLandmarks:
    """One facial expression as a flat (x0, y0, x1, y1, ...) vector."""

    coords: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.coords, dtype=float).ravel()
        if not np.all(np.isfinite(arr)):
            raise ContractError("face landmark coordinates must be finite")
        object.__setattr__(self, "coords", arr)

    @property
    def dim(self) -> int:
        return self.coords.shape[0]

    def points(self) -> np.ndarray:
        """(n_points, 2) view of the coordinates."""
        return self.coords.reshape(-1, 2)


@dataclass(frozen=True)
class FaceModel:
    """PCA basis + VAD -> coefficient regression.

    basis rows are orthonormal eigenfaces sorted by explained variance;
    regression maps (v, a, d, 1) to the first n_regress coefficients.
    """

    mean: np.ndarray
    basis: np.ndarray                   # (n_components, dim)
    explained_variance_ratio: np.ndarray
    regression: np.ndarray              # (n_regress, 4)
    train_residual: float               # max landmark-space residual on the training set
    per_face_residuals: np.ndarray = field(repr=False, default=None)

    @property
    def n_components(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def fit_face_model(faces: list[FaceLandmarks], vads: list[VadVector], k: int) -> FaceModel:
    """Fit the eigenface basis and the VAD regression.

    PCA is a covariance eigendecomposition of the mean-centered face
    matrix; all components with non-negligible variance are kept in the
    basis (so full-rank reconstruction is exact), and the regression
    maps VAD (+bias) to the first k coefficients only.
    """
    if len(faces) != len(vads):
        raise FitError(f"{len(faces)} faces but {len(vads)} VAD labels")
    if len(faces) < 2:
        raise FitError("need at least 2 faces to fit")
    dims = {f.dim for f in faces}
    if len(dims) != 1:
        raise FitError(f"faces have mixed dimensions: {sorted(dims)}")
    if k < 1 or k > len(faces) - 1:
        raise FitError(f"k={k} out of range for {len(faces)} faces")

    data = np.stack([f.coords for f in faces])          # (n, dim)
    mean = data.mean(axis=0)
    centered = data - mean

    cov = centered.T @ centered / (len(faces) - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.clip(eigvals[order], 0.0, None)
    eigvecs = eigvecs[:, order]

    n_keep = int(np.sum(eigvals > _ZERO_VARIANCE_TOL * max(eigvals.max(), 1.0)))
    n_keep = min(n_keep, len(faces) - 1)
    if n_keep < k:
        raise FitError(f"data supports only {n_keep} components with nonzero variance, k={k} requested")

    basis = eigvecs[:, :n_keep].T                        # rows orthonormal
    total_var = eigvals.sum()
    ratios = eigvals[:n_keep] / total_var if total_var > 0 else np.zeros(n_keep)

    coeffs = centered @ basis.T                          # (n, n_keep)
    design = np.column_stack([[v.as_tuple() for v in vads], np.ones(len(vads))])  # (n, 4)
    # ridge for numerical safety only
    eps = 1e-6
    gram = design.T @ design + eps * np.eye(4)
    regression = np.linalg.solve(gram, design.T @ coeffs[:, :k]).T   # (k, 4)

    predicted = mean + (design @ regression.T) @ basis[:k]
    per_face = np.linalg.norm(predicted - data, axis=1)

    return FaceModel(
        mean=mean,
        basis=basis,
        explained_variance_ratio=ratios,
        regression=regression,
        train_residual=float(per_face.max()),
        per_face_residuals=per_face,
    )


def project(face: FaceLandmarks, model: FaceModel, k: int | None = None) -> np.ndarray:
    """Coefficients of a face in the eigenface basis (top-k if given)."""
    if face.dim != model.dim:
        raise ContractError(f"face dim {face.dim} != model dim {model.dim}")
    coeffs = model.basis @ (face.coords - model.mean)
    return coeffs if k is None else coeffs[:k]


def reconstruct(coeffs: np.ndarray, model: FaceModel) -> FaceLandmarks:
    """Face synthesized from eigenface coefficients (mean + basis^T c)."""
    coeffs = np.asarray(coeffs, dtype=float).ravel()
    if coeffs.shape[0] > model.n_components:
        raise ContractError(f"{coeffs.shape[0]} coefficients exceed {model.n_components} components")
    return FaceLandmarks(model.mean + coeffs @ model.basis[: coeffs.shape[0]])


def vad_to_face(vad: VadVector, model: FaceModel) -> FaceLandmarks:
    """Synthesize a face purely from a VAD score via the regression."""
    design = np.array([vad.valence, vad.arousal, vad.dominance, 1.0])
    coeffs = model.regression @ design
    return reconstruct(coeffs, model)


# -- face file format ---------------------------------------------------------
#
# JSON: {"name": ..., "vad": [v, a, d], "landmarks": {"brow_l_0": [x, y], ...}}
# with coordinates in [0, 1]^2 face-box units.

def load_face(path: str | Path) -> tuple[str, FaceLandmarks, VadVector]:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise SceneFormatError(f"{path}: invalid JSON ({e})") from None
    try:
        name = doc["name"]
        vad = VadVector(*doc["vad"])
        marks = doc["landmarks"]
    except (KeyError, TypeError) as e:
        raise SceneFormatError(f"{path}: missing face field ({e})") from None
    missing = [n for n in LANDMARK_NAMES if n not in marks]
    if missing:
        raise SceneFormatError(f"{path}: missing landmarks {missing[:3]}...")
    coords = np.array([marks[n] for n in LANDMARK_NAMES], dtype=float).ravel()
    return name, FaceLandmarks(coords), vad


def save_face(path: str | Path, name: str, face: FaceLandmarks, vad: VadVector) -> None:
    pts = face.points()
    if pts.shape[0] != len(LANDMARK_NAMES):
        raise SceneFormatError(f"face has {pts.shape[0]} points, layout needs {len(LANDMARK_NAMES)}")
    doc = {
        "name": name,
        "vad": [vad.valence, vad.arousal, vad.dominance],
        "landmarks": {n: [float(x), float(y)] for n, (x, y) in zip(LANDMARK_NAMES, pts)},
    }
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
