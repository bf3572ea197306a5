"""Valence/arousal/dominance/intimacy scores and the word lexicon.

Motions, emotions, and relations are all compared in the same numeric
space: a motion gets the VAD of its labeled name, an emotion gets the
VAD difference between its end and start face, and a relation carries
categorical dominance/intimacy levels mapped to fixed scores.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

from .errors import ContractError, LexiconError, UnknownTermError

# Categorical relation levels map onto a symmetric three-point grid.
LEVEL_SCORES = {"low": 0.2, "medium": 0.5, "high": 0.8}

# Standard social distance in meters (personal/social proxemics boundary);
# overridable wherever an intimacy score is computed.
DEFAULT_SOCIAL_DISTANCE = 1.2


def _clamp01(x: float) -> float:
    return 0.0 if x < 0.0 else (1.0 if x > 1.0 else x)


@dataclass(frozen=True, slots=True)
class VadVector:
    """Absolute valence/arousal/dominance scores, each in [0, 1].

    Values are clamped on construction so lexicon rows and UI input
    cannot produce out-of-range scores.
    """

    valence: float
    arousal: float
    dominance: float

    def __post_init__(self):
        for name in ("valence", "arousal", "dominance"):
            v = float(getattr(self, name))
            if not math.isfinite(v):
                raise ContractError(f"non-finite {name}: {v!r}")
            object.__setattr__(self, name, _clamp01(v))

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.valence, self.arousal, self.dominance)


@dataclass(frozen=True, slots=True)
class VadDelta:
    """Componentwise difference of two VadVectors, each in [-1, 1]."""

    dv: float
    da: float
    dd: float

    def __post_init__(self):
        for name in ("dv", "da", "dd"):
            v = float(getattr(self, name))
            if not math.isfinite(v) or not -1.0 <= v <= 1.0:
                raise ContractError(f"delta component {name}={v!r} outside [-1, 1]")
            object.__setattr__(self, name, v)

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.dv, self.da, self.dd)


@dataclass(frozen=True, slots=True)
class RelationScore:
    """A social relation: categorical dominance/intimacy levels plus
    their numeric scores.

    The numeric scores are a fixed function of the levels (see
    LEVEL_SCORES); they are recomputed here so a config file cannot
    carry inconsistent level/score pairs.
    """

    name: str
    dominance_level: str
    intimacy_level: str
    d_r: float = 0.0
    i_r: float = 0.0

    def __post_init__(self):
        for level in (self.dominance_level, self.intimacy_level):
            if level not in LEVEL_SCORES:
                raise ContractError(f"unknown relation level {level!r}")
        object.__setattr__(self, "d_r", LEVEL_SCORES[self.dominance_level])
        object.__setattr__(self, "i_r", LEVEL_SCORES[self.intimacy_level])


class Lexicon:
    """Case-insensitive word -> VadVector lookup table.

    Immutable after construction; safe to share across threads.
    """

    def __init__(self, entries: dict[str, VadVector]):
        self._entries: dict[str, VadVector] = {}
        for term, vad in entries.items():
            key = term.strip().lower()
            if key in self._entries:
                raise LexiconError(f"duplicate lexicon term {key!r}")
            self._entries[key] = vad

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, term: str) -> bool:
        return term.strip().lower() in self._entries

    def lookup(self, term: str) -> VadVector:
        key = term.strip().lower()
        try:
            return self._entries[key]
        except KeyError:
            raise UnknownTermError(f"term {key!r} not in lexicon") from None

    def items(self):
        return self._entries.items()

    def nearest(self, vad: VadVector) -> tuple[str, VadVector]:
        """Word whose VAD is closest (Euclidean) to the given vector."""
        if not self._entries:
            raise LexiconError("empty lexicon has no nearest word")
        best = min(
            self._entries.items(),
            key=lambda kv: sum((a - b) ** 2 for a, b in zip(kv[1].as_tuple(), vad.as_tuple())),
        )
        return best


def load_lexicon(path: str | Path) -> Lexicon:
    """Load a tab-separated term/valence/arousal/dominance file.

    Lines starting with '#' are ignored; a header row is detected by
    non-numeric score columns. Values are clamped to [0, 1].
    """
    path = Path(path)
    entries: dict[str, VadVector] = {}
    with path.open(encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            cols = line.split("\t")
            if len(cols) != 4:
                raise LexiconError(f"{path}:{lineno}: expected 4 tab-separated columns, got {len(cols)}")
            term = cols[0].strip().lower()
            try:
                v, a, d = (float(c) for c in cols[1:])
            except ValueError:
                if lineno == 1:  # header row
                    continue
                raise LexiconError(f"{path}:{lineno}: non-numeric score column") from None
            if not term:
                raise LexiconError(f"{path}:{lineno}: empty term")
            if term in entries:
                raise LexiconError(f"{path}:{lineno}: duplicate term {term!r}")
            entries[term] = VadVector(v, a, d)
    return Lexicon(entries)


def save_lexicon(lex: Lexicon, path: str | Path) -> None:
    """Write a lexicon back out in the same tab-separated layout."""
    path = Path(path)
    lines = ["# term\tvalence\tarousal\tdominance"]
    for term, vad in sorted(lex.items()):
        lines.append(f"{term}\t{vad.valence!r}\t{vad.arousal!r}\t{vad.dominance!r}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _tokens(name: str) -> list[str]:
    out = []
    for piece in name.replace("-", " ").replace("_", " ").split():
        piece = piece.strip().lower()
        if piece:
            out.append(piece)
    return out


def motion_vad(motion_name: str, lex: Lexicon) -> VadVector:
    """Resolve a motion's labeled name to a VAD vector.

    The full (lowercased) name is looked up first. On a miss, the name
    is split on spaces/hyphens/underscores and the VADs of the tokens
    that resolve are averaged; if no token resolves either, an
    UnknownTermError is raised. The fallback exists because the lexicon
    layout is unigram-based while motion names may be phrases.
    """
    if not motion_name or not motion_name.strip():
        raise ContractError("motion name must be non-empty")
    if motion_name in lex:
        return lex.lookup(motion_name)
    hits = [lex.lookup(t) for t in _tokens(motion_name) if t in lex]
    if not hits:
        raise UnknownTermError(f"no token of {motion_name!r} found in lexicon")
    n = len(hits)
    return VadVector(
        sum(h.valence for h in hits) / n,
        sum(h.arousal for h in hits) / n,
        sum(h.dominance for h in hits) / n,
    )


def emotion_delta(start: VadVector, end: VadVector) -> VadDelta:
    """VAD change of an emotion: end face minus start face."""
    return VadDelta(
        end.valence - start.valence,
        end.arousal - start.arousal,
        end.dominance - start.dominance,
    )


def intimacy_from_distance(dist: float, dist0: float = DEFAULT_SOCIAL_DISTANCE) -> float:
    """Intimacy of a pairing from inter-character distance.

    Returns (dist0 - dist) / dist0: 1 at zero distance, 0 at the
    standard social distance, negative beyond it.
    """
    if dist0 <= 0:
        raise ContractError(f"standard social distance must be > 0, got {dist0}")
    if dist < 0:
        raise ContractError(f"distance must be >= 0, got {dist}")
    return (dist0 - dist) / dist0
