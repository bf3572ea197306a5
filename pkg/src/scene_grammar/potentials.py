"""Energy terms over parse graphs.

A scene's energy is tree energy (Or-choice log-probabilities) plus a
linear form in the learned parameters: spatial terms reward VADI
alignment (energy -lambda * dot), temporal terms penalize squared time
gaps (energy +lambda * gap^2, lambda >= 0). Lower energy = more
plausible scene; the Gibbs normalizer is never computed because every
consumer (MH ratios, contrastive gradients) uses energy differences.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConsistencyError, ContractError, SceneFormatError
from .grammar import ParseGraph, StAog
from .vadi import DEFAULT_SOCIAL_DISTANCE, Lexicon, VadVector, emotion_delta, intimacy_from_distance, motion_vad

PARAMS_SCHEMA = "potential-params/1"

# 10-component layout shared by PotentialParams and FeatureVector:
# spatial dots per character, then timing gaps
COMPONENT_NAMES = (
    "me_s_c1", "me_s_c2",     # motion-emotion VAD dot, per character
    "re_s_c1", "re_s_c2",     # relation-emotion dot
    "rm_s_c1", "rm_s_c2",     # relation-motion dot
    "me_t_c1", "me_t_c2",     # (t_m - t_e)^2 within each character
    "m_t",                    # (t_1m_end - t_2m_end)^2 across characters
    "e_t",                    # (t_1e_end - t_2e_end)^2 across characters
)
N_COMPONENTS = len(COMPONENT_NAMES)
N_SPATIAL = 6


@dataclass(frozen=True, slots=True)
class PotentialParams:
    """Learned weights, one per feature component.

    Spatial weights are free reals; temporal weights must be >= 0 so
    each timing term stays a proper (bowl-shaped) energy.
    """

    lam_me_s: tuple     # (char1, char2)
    lam_re_s: tuple
    lam_rm_s: tuple
    lam_me_t: tuple
    lam_m_t: float
    lam_e_t: float

    def __post_init__(self):
        for name in ("lam_me_s", "lam_re_s", "lam_rm_s", "lam_me_t"):
            pair = tuple(float(x) for x in getattr(self, name))
            if len(pair) != 2:
                raise ContractError(f"{name} needs one value per character")
            object.__setattr__(self, name, pair)
        object.__setattr__(self, "lam_m_t", float(self.lam_m_t))
        object.__setattr__(self, "lam_e_t", float(self.lam_e_t))
        arr = self.as_array()
        if not np.all(np.isfinite(arr)):
            raise ContractError("potential parameters must be finite")
        if np.any(arr[N_SPATIAL:] < 0):
            raise ContractError("temporal weights must be non-negative")

    def as_array(self) -> np.ndarray:
        return np.array([*self.lam_me_s, *self.lam_re_s, *self.lam_rm_s,
                         *self.lam_me_t, self.lam_m_t, self.lam_e_t])

    @staticmethod
    def from_array(arr) -> "PotentialParams":
        arr = np.asarray(arr, dtype=float).ravel()
        if arr.shape != (N_COMPONENTS,):
            raise ContractError(f"parameter vector must have {N_COMPONENTS} entries, got {arr.shape}")
        return PotentialParams(lam_me_s=tuple(arr[0:2]), lam_re_s=tuple(arr[2:4]),
                               lam_rm_s=tuple(arr[4:6]), lam_me_t=tuple(arr[6:8]),
                               lam_m_t=arr[8], lam_e_t=arr[9])

    @staticmethod
    def zeros() -> "PotentialParams":
        return PotentialParams.from_array(np.zeros(N_COMPONENTS))


@dataclass(frozen=True, slots=True)
class FeatureVector:
    """Per-scene sufficient statistics, one entry per parameter."""

    me_dot: tuple       # (char1, char2)
    re_dot: tuple
    rm_dot: tuple
    me_gap_sq: tuple
    m_gap_sq: float
    e_gap_sq: float

    def __post_init__(self):
        for name in ("me_dot", "re_dot", "rm_dot", "me_gap_sq"):
            pair = tuple(float(x) for x in getattr(self, name))
            if len(pair) != 2:
                raise ContractError(f"{name} needs one value per character")
            object.__setattr__(self, name, pair)
        object.__setattr__(self, "m_gap_sq", float(self.m_gap_sq))
        object.__setattr__(self, "e_gap_sq", float(self.e_gap_sq))
        if any(g < 0 for g in (*self.me_gap_sq, self.m_gap_sq, self.e_gap_sq)):
            raise ContractError("squared gaps cannot be negative")

    def as_array(self) -> np.ndarray:
        """Raw statistics in component order (dots then squared gaps)."""
        return np.array([*self.me_dot, *self.re_dot, *self.rm_dot,
                         *self.me_gap_sq, self.m_gap_sq, self.e_gap_sq])

    def signed(self) -> np.ndarray:
        """Loss vector l: energy = tree + <theta, l>. Spatial dots enter
        negated (alignment lowers energy), gaps enter as-is."""
        raw = self.as_array()
        return np.concatenate([-raw[:N_SPATIAL], raw[N_SPATIAL:]])


def feature_vector(pg: ParseGraph, lex: Lexicon,
                   social_distance: float = DEFAULT_SOCIAL_DISTANCE,
                   motion_vads: dict[int, VadVector] | None = None) -> FeatureVector:
    """Compute the statistics behind every energy term.

    Emotion VAD is the end-face minus start-face delta; motion VAD comes
    from the lexicon by clip name unless overridden per character index
    (overrides serve motion completion, where realized poses replace the
    named clip). i_me is the intimacy score implied by the characters'
    distance.
    """
    i_me = intimacy_from_distance(pg.distance, social_distance)
    d_r, i_r = pg.relation.d_r, pg.relation.i_r

    me_dot, re_dot, rm_dot, me_gap_sq = [], [], [], []
    for ci, c in enumerate(pg.characters):
        delta = emotion_delta(c.start_face.vad, c.end_face.vad)
        e = np.array([delta.dv, delta.da, delta.dd])
        if motion_vads is not None and ci in motion_vads:
            mv = motion_vads[ci]
        else:
            mv = motion_vad(c.motion.name, lex)
        m = np.array([mv.valence, mv.arousal, mv.dominance])
        me_dot.append(float(m @ e))
        re_dot.append(d_r * delta.dd + i_r * i_me)
        rm_dot.append(d_r * mv.dominance + i_r * i_me)
        me_gap_sq.append((c.t_m - c.t_e) ** 2)

    c1, c2 = pg.characters
    return FeatureVector(me_dot=tuple(me_dot), re_dot=tuple(re_dot), rm_dot=tuple(rm_dot),
                         me_gap_sq=tuple(me_gap_sq),
                         m_gap_sq=(c1.t_m_end - c2.t_m_end) ** 2,
                         e_gap_sq=(c1.t_e_end - c2.t_e_end) ** 2)


def spatial_energy(fv: FeatureVector, theta: PotentialParams) -> float:
    """-sum(lambda_s * dot): aligned VADI lowers the energy."""
    lam = theta.as_array()[:N_SPATIAL]
    return float(-(lam @ fv.as_array()[:N_SPATIAL]))


def temporal_energy(fv: FeatureVector, theta: PotentialParams) -> float:
    """+sum(lambda_t * gap^2), minimized at perfectly aligned timings."""
    lam = theta.as_array()[N_SPATIAL:]
    if np.any(lam < 0):
        raise ContractError("temporal weights must be non-negative")
    return float(lam @ fv.as_array()[N_SPATIAL:])


def tree_energy(pg: ParseGraph, g: StAog,
                terminal_energies: dict[str, float] | None = None) -> float:
    """-log probability of the recorded Or-choices, plus optional
    per-terminal self-energies (default 0)."""
    total = 0.0
    for or_id, chosen in pg.or_choices.items():
        p = g.branch_prob(or_id, chosen)
        if p <= 0:
            raise ConsistencyError(f"chosen branch {chosen!r} of {or_id!r} has zero probability")
        total -= math.log(p)
        if terminal_energies:
            total += terminal_energies.get(chosen, 0.0)
    return total


def total_energy(pg: ParseGraph, g: StAog, theta: PotentialParams, lex: Lexicon,
                 social_distance: float = DEFAULT_SOCIAL_DISTANCE,
                 motion_vads: dict[int, VadVector] | None = None,
                 terminal_energies: dict[str, float] | None = None) -> float:
    """Tree + spatial + temporal energy; p(pg) is exp(-E) up to a
    constant that no consumer needs."""
    fv = feature_vector(pg, lex, social_distance=social_distance, motion_vads=motion_vads)
    return (tree_energy(pg, g, terminal_energies=terminal_energies)
            + float(theta.as_array() @ fv.signed()))


# -- parameter file -----------------------------------------------------------
#
# Flat named-value JSON document:
# {"schema": "potential-params/1", "lam_me_s": [a, b], ..., "lam_m_t": x, "lam_e_t": y}

def params_to_dict(theta: PotentialParams) -> dict:
    return {
        "schema": PARAMS_SCHEMA,
        "lam_me_s": list(theta.lam_me_s),
        "lam_re_s": list(theta.lam_re_s),
        "lam_rm_s": list(theta.lam_rm_s),
        "lam_me_t": list(theta.lam_me_t),
        "lam_m_t": theta.lam_m_t,
        "lam_e_t": theta.lam_e_t,
    }


def params_from_dict(doc: dict, where: str = "parameter document") -> PotentialParams:
    if doc.get("schema") != PARAMS_SCHEMA:
        raise SceneFormatError(f"{where}: unsupported schema {doc.get('schema')!r}")
    try:
        return PotentialParams(lam_me_s=tuple(doc["lam_me_s"]), lam_re_s=tuple(doc["lam_re_s"]),
                               lam_rm_s=tuple(doc["lam_rm_s"]), lam_me_t=tuple(doc["lam_me_t"]),
                               lam_m_t=doc["lam_m_t"], lam_e_t=doc["lam_e_t"])
    except (KeyError, TypeError, ValueError) as e:
        raise SceneFormatError(f"{where}: malformed parameter document ({e!r})") from None


def save_params(theta: PotentialParams, path: str | Path) -> None:
    Path(path).write_text(json.dumps(params_to_dict(theta), indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")


def load_params(path: str | Path) -> PotentialParams:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise SceneFormatError(f"{path}: invalid JSON ({e})") from None
    return params_from_dict(doc, where=str(path))
