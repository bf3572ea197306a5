"""Contrastive parameter estimation and the sample-label-update loop.

The model is exponential-family in the potential parameters, so the
log-likelihood gradient is a difference of feature means: labeled
expert scenes pull, synthesized scenes from the current model push.
Rounds of sample -> label -> update grow the labeled store; an oracle
labeler (energy percentiles under a fixed ground-truth parameter set)
stands in for human judges in automated runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ContractError, SceneFormatError, TrainError
from .grammar import ParseGraph, StAog, forward_sample
from .mcmc import EnergyContext, refine_scene
from .potentials import (
    COMPONENT_NAMES, N_SPATIAL, FeatureVector, PotentialParams, feature_vector,
    total_energy,
)
from .scene_io import LABELS, SceneDocument, scene_from_dict, scene_to_dict
from .vadi import DEFAULT_SOCIAL_DISTANCE, Lexicon

SOURCES = ("human", "oracle")
DEFAULT_EXPERT_LABELS = frozenset({"good"})


@dataclass(frozen=True, slots=True)
class LabeledScene:
    pg: ParseGraph
    label: str
    round: int
    source: str

    def __post_init__(self):
        if self.label not in LABELS:
            raise ContractError(f"label must be one of {LABELS}, got {self.label!r}")
        if self.round < 1:
            raise ContractError(f"round must be >= 1, got {self.round}")
        if self.source not in SOURCES:
            raise ContractError(f"source must be one of {SOURCES}, got {self.source!r}")


@dataclass(frozen=True, slots=True)
class TrainConfig:
    epochs: int = 100
    learning_rate: float = 1e-3
    expert_filter: frozenset = DEFAULT_EXPERT_LABELS
    synth_batch: int = 100
    truncate_fraction: float = 0.1
    refine_steps: int = 50

    def __post_init__(self):
        if self.epochs < 1:
            raise ContractError(f"epochs must be >= 1, got {self.epochs}")
        if not self.learning_rate > 0:
            raise ContractError("learning rate must be positive")
        if self.synth_batch < 1:
            raise ContractError(f"synth_batch must be >= 1, got {self.synth_batch}")
        if not 0.0 <= self.truncate_fraction < 1.0:
            raise ContractError("truncate_fraction must be in [0, 1)")
        if self.refine_steps < 0:
            raise ContractError("refine_steps must be >= 0")
        bad = set(self.expert_filter) - set(LABELS)
        if bad or not self.expert_filter:
            raise ContractError(f"expert_filter must be non-empty labels, got {self.expert_filter}")
        object.__setattr__(self, "expert_filter", frozenset(self.expert_filter))


def mle_gradient(expert: list, synth: list) -> np.ndarray:
    """Ascent direction for the log-likelihood: -mean(expert features)
    + mean(synth features), ordered as the parameter components."""
    if not expert or not synth:
        raise ContractError("expert and synth feature lists must both be non-empty")
    e = np.stack([fv.signed() for fv in expert])
    s = np.stack([fv.signed() for fv in synth])
    return -e.mean(axis=0) + s.mean(axis=0)


def _clip_temporal(arr: np.ndarray) -> np.ndarray:
    out = arr.copy()
    out[N_SPATIAL:] = np.maximum(out[N_SPATIAL:], 0.0)
    return out


def train_round(g: StAog, theta: PotentialParams, dataset: list, cfg: TrainConfig,
                rng: np.random.Generator, lexicon: Lexicon,
                social_distance: float = DEFAULT_SOCIAL_DISTANCE):
    """One training pass over the accumulated labeled set.

    Experts are the scenes whose label is in cfg.expert_filter, with the
    lowest-likelihood fraction dropped under the incoming parameters.
    Each epoch draws a fresh synthesized batch (forward samples pushed
    toward the current model by a short configuration-space refinement)
    and takes one clipped gradient step. Returns (new params, loss trace)
    where loss = mean expert energy - mean synth energy.
    """
    experts = [s for s in dataset if s.label in cfg.expert_filter]
    if not experts:
        raise TrainError("dataset contains no expert-labeled scenes")

    if cfg.truncate_fraction > 0 and len(experts) > 1:
        energies = np.array([total_energy(s.pg, g, theta, lexicon, social_distance=social_distance)
                             for s in experts])
        n_drop = int(cfg.truncate_fraction * len(experts))
        if n_drop:
            keep = np.argsort(energies)[: len(experts) - n_drop]
            experts = [experts[i] for i in keep]

    expert_fvs = [feature_vector(s.pg, lexicon, social_distance=social_distance)
                  for s in experts]
    expert_mean_l = np.stack([fv.signed() for fv in expert_fvs]).mean(axis=0)
    expert_tree = np.mean([total_energy(s.pg, g, PotentialParams.zeros(), lexicon,
                                        social_distance=social_distance)
                           for s in experts])

    arr = theta.as_array()
    losses = []
    for _ in range(cfg.epochs):
        cur = PotentialParams.from_array(arr)
        ctx = EnergyContext(grammar=g, theta=cur, lexicon=lexicon,
                            social_distance=social_distance)
        synth = [refine_scene(forward_sample(g, rng), ctx, rng, n_steps=cfg.refine_steps)
                 for _ in range(cfg.synth_batch)]
        synth_fvs = [feature_vector(pg, lexicon, social_distance=social_distance)
                     for pg in synth]
        synth_mean_l = np.stack([fv.signed() for fv in synth_fvs]).mean(axis=0)
        synth_tree = np.mean([total_energy(pg, g, PotentialParams.zeros(), lexicon,
                                           social_distance=social_distance)
                              for pg in synth])
        loss = float((expert_tree + arr @ expert_mean_l) - (synth_tree + arr @ synth_mean_l))
        grad = -expert_mean_l + synth_mean_l
        arr = _clip_temporal(arr + cfg.learning_rate * grad)
        if not (np.all(np.isfinite(arr)) and np.isfinite(loss)):
            raise TrainError("training diverged to non-finite values")
        losses.append(loss)
    return PotentialParams.from_array(arr), losses


# -- labeled-scene store ------------------------------------------------------

class LabeledSceneStore:
    """Append-only labeled dataset, optionally file-backed.

    Records are one JSON object per line: {"round", "source", "scene"}
    with the label inside the scene block. Reopening a file-backed store
    replays every line, so a crashed process resumes with exactly what
    reached disk.
    """

    def __init__(self, g: StAog, path: str | Path | None = None):
        self._g = g
        self._path = Path(path) if path is not None else None
        self._scenes: list[LabeledScene] = []
        if self._path is not None and self._path.exists():
            self._replay()

    def _replay(self) -> None:
        for ln, line in enumerate(self._path.read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
                if "event" in rec:
                    # journal entry from the serving layer, not a labeled scene
                    continue
                doc = scene_from_dict(rec["scene"], self._g, strict=True)
                if doc.label is None:
                    raise SceneFormatError("store record has no label")
                self._scenes.append(LabeledScene(pg=doc.pg, label=doc.label,
                                                 round=int(rec["round"]),
                                                 source=rec["source"]))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError,
                    ContractError, SceneFormatError) as e:
                raise SceneFormatError(f"{self._path}:{ln}: bad store record ({e})") from None

    def append(self, scene: LabeledScene) -> None:
        if self._path is not None:
            doc = SceneDocument(pg=scene.pg, grammar_name=self._g.name, label=scene.label)
            rec = {"round": scene.round, "source": scene.source, "scene": scene_to_dict(doc)}
            with open(self._path, "a", encoding="utf-8") as f:
                f.write(json.dumps(rec, separators=(",", ":"), ensure_ascii=False) + "\n")
                f.flush()
        self._scenes.append(scene)

    def scenes(self) -> tuple:
        return tuple(self._scenes)

    def __len__(self) -> int:
        return len(self._scenes)

    @property
    def max_round(self) -> int:
        return max((s.round for s in self._scenes), default=0)

    def label_counts(self, round_n: int | None = None) -> dict:
        out = {label: 0 for label in LABELS}
        for s in self._scenes:
            if round_n is None or s.round == round_n:
                out[s.label] += 1
        return out


# -- oracle labeler -----------------------------------------------------------

class OracleLabeler:
    """Labels by energy under fixed ground-truth parameters: below the
    low percentile of a reference sample is good, above the high
    percentile is bad, anything else (boundaries included) is medium."""

    def __init__(self, ctx_true: EnergyContext, reference_energies,
                 low_pct: float = 35.0, high_pct: float = 70.0):
        ref = np.asarray(list(reference_energies), dtype=float)
        if ref.size == 0:
            raise ContractError("need a non-empty reference sample")
        if not 0.0 <= low_pct <= high_pct <= 100.0:
            raise ContractError("percentiles must satisfy 0 <= low <= high <= 100")
        self.ctx = ctx_true
        self.low = float(np.percentile(ref, low_pct))
        self.high = float(np.percentile(ref, high_pct))

    @staticmethod
    def from_forward_samples(ctx_true: EnergyContext, rng: np.random.Generator,
                             n_reference: int = 400, low_pct: float = 35.0,
                             high_pct: float = 70.0) -> "OracleLabeler":
        ref = [ctx_true.energy(forward_sample(ctx_true.grammar, rng))
               for _ in range(n_reference)]
        return OracleLabeler(ctx_true, ref, low_pct, high_pct)

    def __call__(self, pg: ParseGraph) -> str:
        e = self.ctx.energy(pg)
        if e < self.low:
            return "good"
        if e > self.high:
            return "bad"
        return "medium"


# -- the round loop -----------------------------------------------------------

@dataclass(frozen=True, slots=True)
class RoundResult:
    scenes: tuple            # the newly labeled scenes
    theta: PotentialParams   # parameters after training (input theta if no experts yet)
    losses: tuple            # per-epoch loss trace ( () if training skipped)
    trained: bool


def idgal_round(g: StAog, theta: PotentialParams, n_samples: int, labeler,
                rng: np.random.Generator, store: LabeledSceneStore,
                cfg: TrainConfig, lexicon: Lexicon, round_n: int | None = None,
                source: str = "oracle", generation_refine_steps: int = 30,
                social_distance: float = DEFAULT_SOCIAL_DISTANCE) -> RoundResult:
    """One sample -> label -> update round.

    Scenes are drawn from the current model, labeled through the
    callback, appended to the store, and training runs on the full
    accumulated expert set. A labeler failure aborts before anything is
    stored or updated. With no experts anywhere yet, training is
    skipped and theta passes through unchanged.
    """
    if n_samples < 1:
        raise ContractError(f"n_samples must be >= 1, got {n_samples}")
    round_n = round_n if round_n is not None else store.max_round + 1
    ctx = EnergyContext(grammar=g, theta=theta, lexicon=lexicon,
                        social_distance=social_distance)
    sampled = [refine_scene(forward_sample(g, rng), ctx, rng, n_steps=generation_refine_steps)
               for _ in range(n_samples)]

    labeled = []
    for pg in sampled:
        try:
            label = labeler(pg)
        except Exception as e:
            raise TrainError(f"labeler failed: {e}") from e
        if label not in LABELS:
            raise TrainError(f"labeler returned {label!r}, expected one of {LABELS}")
        labeled.append(LabeledScene(pg=pg, label=label, round=round_n, source=source))

    for scene in labeled:
        store.append(scene)

    dataset = store.scenes()
    if not any(s.label in cfg.expert_filter for s in dataset):
        return RoundResult(scenes=tuple(labeled), theta=theta, losses=(), trained=False)
    new_theta, losses = train_round(g, theta, list(dataset), cfg, rng, lexicon,
                                    social_distance=social_distance)
    return RoundResult(scenes=tuple(labeled), theta=new_theta, losses=tuple(losses),
                       trained=True)


# -- loss-trace files ---------------------------------------------------------
#
# Tab-separated "epoch<TAB>loss" rows, one per epoch, '#' comments
# allowed; written by the train CLI verb and read back by plot-loss.

def save_loss_trace(losses, path) -> None:
    lines = ["# epoch\tloss"]
    for epoch, loss in enumerate(losses, start=1):
        lines.append(f"{epoch}\t{float(loss)!r}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_loss_trace(path) -> list[tuple[int, float]]:
    path = Path(path)
    out = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        cols = line.split("\t")
        if len(cols) != 2:
            raise SceneFormatError(f"{path}:{lineno}: expected 2 columns, got {len(cols)}")
        try:
            out.append((int(cols[0]), float(cols[1])))
        except ValueError:
            raise SceneFormatError(f"{path}:{lineno}: bad numeric column") from None
    return out
