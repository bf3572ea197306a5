"""Scene grammar: an And-Or graph over two-character interactions.

The graph decomposes a scene into a transform branch (where the
characters stand), a relation branch, and one motion + start face +
end face selection per character. Or-nodes carry branch probabilities
(uniform unless configured); sampling a parse graph means choosing a
child at every Or-node, drawing the transform, and drawing start times
whose within-character motion/emotion offset is standard normal.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import ConsistencyError, GrammarError, SceneFormatError
from .vadi import LEVEL_SCORES, RelationScore, VadVector

GRAMMAR_SCHEMA = "grammar/1"
DEFAULT_DISTANCE_RANGE = (0.5, 3.0)
DEFAULT_EMOTION_TRANSITION_S = 1.0


class NodeKind(Enum):
    AND = "and"
    OR = "or"
    TERMINAL = "terminal"


class Branch(Enum):
    TRANSFORM = "transform"
    RELATION = "relation"
    MOTION = "motion"
    EMOTION = "emotion"


@dataclass(frozen=True, slots=True)
class MotionClipRef:
    """Pool entry for a single-character motion clip."""

    id: str
    name: str
    duration_s: float
    track: object | None = None  # pose-track file relative to the grammar
                                 # file, or an inline PoseTrack

    def __post_init__(self):
        if self.duration_s <= 0 or not math.isfinite(self.duration_s):
            raise GrammarError(f"motion {self.id!r}: duration must be positive")


@dataclass(frozen=True, slots=True)
class FaceRef:
    """Pool entry for a facial expression: a name, its VAD score, and
    optionally landmarks (a file reference for pool faces, or an inline
    landmark set for faces synthesized outside the pool)."""

    id: str
    name: str
    vad: VadVector
    landmarks: object | None = None


@dataclass(frozen=True, slots=True)
class Node:
    id: str
    kind: NodeKind
    branch: Branch
    payload: str | None = None   # pool id, terminals only


@dataclass(frozen=True, slots=True)
class CharacterParse:
    """One character's slice of a parse graph."""

    position: np.ndarray         # meters, world frame
    yaw_deg: float
    motion: MotionClipRef
    start_face: FaceRef
    end_face: FaceRef
    t_m: float                   # motion start, seconds
    t_e: float                   # expression-change start, seconds
    t_m_end: float
    t_e_end: float

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float).ravel()
        if pos.shape != (3,) or not np.all(np.isfinite(pos)):
            raise ConsistencyError("character position must be a finite 3-vector")
        object.__setattr__(self, "position", pos)
        for name in ("t_m", "t_e", "t_m_end", "t_e_end", "yaw_deg"):
            if not math.isfinite(getattr(self, name)):
                raise ConsistencyError(f"character field {name} must be finite")
        if self.t_m_end < self.t_m:
            raise ConsistencyError("t_m_end must be >= t_m")
        if self.t_e_end < self.t_e:
            raise ConsistencyError("t_e_end must be >= t_e")


@dataclass(frozen=True, slots=True)
class ParseGraph:
    """A fully instantiated scene: two characters, a relation, and the
    Or-choices that produced them."""

    characters: tuple
    relation: RelationScore
    or_choices: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.characters) != 2:
            raise ConsistencyError(f"parse graph needs exactly 2 characters, got {len(self.characters)}")
        object.__setattr__(self, "characters", tuple(self.characters))

    @property
    def distance(self) -> float:
        a, b = self.characters
        return float(np.linalg.norm(a.position - b.position))

    @property
    def duration(self) -> float:
        return max(max(c.t_m_end, c.t_e_end) for c in self.characters)


@dataclass(frozen=True)
class StAog:
    """The grammar itself: node table, production rules, pools."""

    root: str
    nodes: dict
    rules: dict                  # node id -> tuple of child ids
    relation_pool: tuple
    motion_pool: tuple
    emotion_pool: tuple
    or_weights: dict             # Or-node id -> tuple of branch probabilities
    distance_range_m: tuple = DEFAULT_DISTANCE_RANGE
    emotion_transition_s: float = DEFAULT_EMOTION_TRANSITION_S
    name: str = "unnamed"
    base_dir: Path | None = None  # for resolving track/landmark refs

    def __post_init__(self):
        if not (self.relation_pool and self.motion_pool and self.emotion_pool):
            raise GrammarError("relation, motion, and emotion pools must be non-empty")
        if self.root not in self.nodes:
            raise GrammarError(f"root node {self.root!r} missing from node table")
        for nid, children in self.rules.items():
            node = self.nodes.get(nid)
            if node is None:
                raise GrammarError(f"rule for unknown node {nid!r}")
            if node.kind is NodeKind.TERMINAL:
                raise GrammarError(f"terminal node {nid!r} cannot have children")
            if not children:
                raise GrammarError(f"node {nid!r} has no children")
            for c in children:
                if c not in self.nodes:
                    raise GrammarError(f"node {nid!r} references unknown child {c!r}")
        self._check_acyclic()
        for nid, weights in self.or_weights.items():
            node = self.nodes.get(nid)
            if node is None or node.kind is not NodeKind.OR:
                raise GrammarError(f"or_weights given for non-Or node {nid!r}")
            children = self.rules[nid]
            if len(weights) != len(children):
                raise GrammarError(f"or_weights for {nid!r}: {len(weights)} weights, {len(children)} branches")
            if any(w < 0 for w in weights):
                raise GrammarError(f"or_weights for {nid!r} must be non-negative")
            if abs(sum(weights) - 1.0) > 1e-9:
                raise GrammarError(f"or_weights for {nid!r} must sum to 1 (got {sum(weights)})")
        for node in self.nodes.values():
            if node.kind is NodeKind.OR and node.id not in self.or_weights:
                k = len(self.rules[node.id])
                self.or_weights[node.id] = tuple([1.0 / k] * k)

    def _check_acyclic(self):
        seen, stack = set(), set()

        def visit(nid):
            if nid in stack:
                raise GrammarError(f"production rules contain a cycle through {nid!r}")
            if nid in seen:
                return
            stack.add(nid)
            for c in self.rules.get(nid, ()):
                visit(c)
            stack.discard(nid)
            seen.add(nid)

        visit(self.root)

    # -- lookups --------------------------------------------------------------

    def children(self, nid: str) -> tuple:
        return self.rules.get(nid, ())

    def branch_prob(self, or_id: str, child_id: str) -> float:
        children = self.rules.get(or_id)
        if children is None or child_id not in children:
            raise ConsistencyError(f"{child_id!r} is not a branch of Or-node {or_id!r}")
        return float(self.or_weights[or_id][children.index(child_id)])

    def relation_by_id(self, rid: str) -> RelationScore:
        for r in self.relation_pool:
            if r.name == rid:
                return r
        raise ConsistencyError(f"unknown relation {rid!r}")

    def motion_by_id(self, mid: str) -> MotionClipRef:
        for m in self.motion_pool:
            if m.id == mid:
                return m
        raise ConsistencyError(f"unknown motion {mid!r}")

    def emotion_by_id(self, eid: str) -> FaceRef:
        for e in self.emotion_pool:
            if e.id == eid:
                return e
        raise ConsistencyError(f"unknown emotion {eid!r}")


def build_staog(relations, motions, emotions,
                distance_range_m=DEFAULT_DISTANCE_RANGE,
                emotion_transition_s=DEFAULT_EMOTION_TRANSITION_S,
                or_weights=None, name="inline") -> StAog:
    """Assemble the standard two-character scene graph from pools.

    Node layout: scene = And(transform, relation-Or, char1, char2);
    each character = And(motion-Or, start-face-Or, end-face-Or); every
    Or-node fans out to shared terminal nodes, one per pool entry.
    """
    relations = tuple(relations)
    motions = tuple(motions)
    emotions = tuple(emotions)
    nodes: dict[str, Node] = {}
    rules: dict[str, tuple] = {}

    def add(node, children=None):
        nodes[node.id] = node
        if children is not None:
            rules[node.id] = tuple(children)

    rel_terms = [Node(f"relation:{r.name}", NodeKind.TERMINAL, Branch.RELATION, r.name) for r in relations]
    mot_terms = [Node(f"motion:{m.id}", NodeKind.TERMINAL, Branch.MOTION, m.id) for m in motions]
    emo_terms = [Node(f"face:{e.id}", NodeKind.TERMINAL, Branch.EMOTION, e.id) for e in emotions]
    for t in rel_terms + mot_terms + emo_terms:
        add(t)
    add(Node("transform", NodeKind.TERMINAL, Branch.TRANSFORM))
    add(Node("relation", NodeKind.OR, Branch.RELATION), [t.id for t in rel_terms])
    for c in ("char1", "char2"):
        add(Node(f"{c}.motion", NodeKind.OR, Branch.MOTION), [t.id for t in mot_terms])
        add(Node(f"{c}.start_face", NodeKind.OR, Branch.EMOTION), [t.id for t in emo_terms])
        add(Node(f"{c}.end_face", NodeKind.OR, Branch.EMOTION), [t.id for t in emo_terms])
        add(Node(c, NodeKind.AND, Branch.MOTION),
            [f"{c}.motion", f"{c}.start_face", f"{c}.end_face"])
    add(Node("scene", NodeKind.AND, Branch.TRANSFORM), ["transform", "relation", "char1", "char2"])

    return StAog(root="scene", nodes=nodes, rules=rules,
                 relation_pool=relations, motion_pool=motions, emotion_pool=emotions,
                 or_weights=dict(or_weights or {}),
                 distance_range_m=tuple(distance_range_m),
                 emotion_transition_s=emotion_transition_s, name=name)


OR_NODE_IDS = ("relation",
               "char1.motion", "char1.start_face", "char1.end_face",
               "char2.motion", "char2.start_face", "char2.end_face")


def forward_sample(g: StAog, rng: np.random.Generator) -> ParseGraph:
    """Draw one parse graph from the grammar.

    Or-choices follow each node's branch distribution. The characters
    stand on the x-axis facing each other at a uniform random distance.
    Start times are drawn so that each character's motion-vs-emotion
    start offset (t_m - t_e) is standard normal, then shifted so the
    earliest event lands at t = 0.
    """
    def choose(or_id):
        children = g.rules[or_id]
        w = np.asarray(g.or_weights[or_id])
        idx = int(rng.choice(len(children), p=w / w.sum()))
        return children[idx]

    or_choices = {oid: choose(oid) for oid in OR_NODE_IDS}
    relation = g.relation_by_id(g.nodes[or_choices["relation"]].payload)

    lo, hi = g.distance_range_m
    dist = float(rng.uniform(lo, hi))
    placements = ((np.array([-dist / 2, 0.0, 0.0]), 0.0),
                  (np.array([+dist / 2, 0.0, 0.0]), 180.0))

    # t_m ~ N(t0, 1/2) per character makes the cross-character motion
    # gap standard normal; the within-character gap is drawn directly
    raw_times = []
    for _ in placements:
        t_m = float(rng.normal(1.0, math.sqrt(0.5)))
        t_e = t_m - float(rng.normal(0.0, 1.0))
        raw_times.append((t_m, t_e))
    shift = min(min(tm, te) for tm, te in raw_times)

    chars = []
    for ci, ((pos, yaw), (t_m, t_e)) in enumerate(zip(placements, raw_times), start=1):
        motion = g.motion_by_id(g.nodes[or_choices[f"char{ci}.motion"]].payload)
        start_face = g.emotion_by_id(g.nodes[or_choices[f"char{ci}.start_face"]].payload)
        end_face = g.emotion_by_id(g.nodes[or_choices[f"char{ci}.end_face"]].payload)
        t_m, t_e = t_m - shift, t_e - shift
        chars.append(CharacterParse(
            position=pos, yaw_deg=yaw, motion=motion,
            start_face=start_face, end_face=end_face,
            t_m=t_m, t_e=t_e,
            t_m_end=t_m + motion.duration_s,
            t_e_end=t_e + g.emotion_transition_s,
        ))
    return ParseGraph(characters=tuple(chars), relation=relation, or_choices=or_choices)


CUSTOM_FACE_PREFIX = "custom_"


def validate_parse_graph(pg: ParseGraph, g: StAog) -> None:
    """Raise ConsistencyError unless every pg reference exists in g and
    the recorded Or-choices are actual branches.

    Faces whose id starts with CUSTOM_FACE_PREFIX are continuous
    refinements that live off-pool (their or_choices entry still names
    the pool face the refinement started from); they carry their own
    VAD and are skipped in the pool lookup.
    """
    g.relation_by_id(pg.relation.name)
    for ci, c in enumerate(pg.characters, start=1):
        g.motion_by_id(c.motion.id)
        for face in (c.start_face, c.end_face):
            if not face.id.startswith(CUSTOM_FACE_PREFIX):
                g.emotion_by_id(face.id)
    for oid, chosen in pg.or_choices.items():
        g.branch_prob(oid, chosen)   # raises on dangling choice


def refresh_or_choices(pg: ParseGraph) -> ParseGraph:
    """Rebuild the or_choices map from the pg's current selections (used
    after pool reselection edits)."""
    c1, c2 = pg.characters
    choices = {
        "relation": f"relation:{pg.relation.name}",
        "char1.motion": f"motion:{c1.motion.id}",
        "char1.start_face": f"face:{c1.start_face.id}",
        "char1.end_face": f"face:{c1.end_face.id}",
        "char2.motion": f"motion:{c2.motion.id}",
        "char2.start_face": f"face:{c2.start_face.id}",
        "char2.end_face": f"face:{c2.end_face.id}",
    }
    return replace(pg, or_choices=choices)


# -- grammar config file ------------------------------------------------------
#
# JSON document:
# {
#   "schema": "grammar/1", "name": "starter",
#   "transform": {"distance_range_m": [0.5, 3.0]},
#   "emotion_transition_s": 1.0,
#   "relations": [{"name": "friends", "dominance": "medium", "intimacy": "medium"}, ...],
#   "motions": [{"id": "wave_hands", "name": "wave hands", "duration_s": 2.0,
#                "track": "tracks/wave_hands.json"}, ...],
#   "emotions": [{"id": "happy", "name": "happy", "vad": [1.0, 0.7, 0.8],
#                 "landmarks": "faces/happy.json"}, ...],
#   "or_weights": {"relation": [0.5, 0.25, 0.25]}          # optional
# }

def load_grammar(path: str | Path) -> StAog:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise SceneFormatError(f"{path}: invalid JSON ({e})") from None
    if doc.get("schema") != GRAMMAR_SCHEMA:
        raise SceneFormatError(f"{path}: unsupported schema {doc.get('schema')!r}")

    def require(section):
        entries = doc.get(section)
        if not isinstance(entries, list) or not entries:
            raise GrammarError(f"{path}: section {section!r} must be a non-empty list")
        return entries

    try:
        relations = []
        seen = set()
        for row in require("relations"):
            name = row["name"]
            if name in seen:
                raise GrammarError(f"{path}: duplicate relation {name!r}")
            seen.add(name)
            for level in (row["dominance"], row["intimacy"]):
                if level not in LEVEL_SCORES:
                    raise GrammarError(f"{path}: relation {name!r} has unknown level {level!r}")
            relations.append(RelationScore(name=name, dominance_level=row["dominance"],
                                           intimacy_level=row["intimacy"]))
        motions = []
        seen = set()
        for row in require("motions"):
            if row["id"] in seen:
                raise GrammarError(f"{path}: duplicate motion id {row['id']!r}")
            seen.add(row["id"])
            motions.append(MotionClipRef(id=row["id"], name=row.get("name", row["id"]),
                                         duration_s=float(row["duration_s"]),
                                         track=row.get("track")))
        emotions = []
        seen = set()
        for row in require("emotions"):
            if row["id"] in seen:
                raise GrammarError(f"{path}: duplicate emotion id {row['id']!r}")
            seen.add(row["id"])
            v, a, d = (float(x) for x in row["vad"])
            emotions.append(FaceRef(id=row["id"], name=row.get("name", row["id"]),
                                    vad=VadVector(v, a, d), landmarks=row.get("landmarks")))
    except (KeyError, TypeError, ValueError) as e:
        raise GrammarError(f"{path}: malformed pool entry ({e!r})") from None

    transform = doc.get("transform", {})
    rng_range = tuple(transform.get("distance_range_m", DEFAULT_DISTANCE_RANGE))
    if len(rng_range) != 2 or not (0 < rng_range[0] <= rng_range[1]):
        raise GrammarError(f"{path}: bad distance_range_m {rng_range}")

    or_weights = {k: tuple(float(w) for w in v) for k, v in doc.get("or_weights", {}).items()}
    g = build_staog(relations, motions, emotions,
                    distance_range_m=rng_range,
                    emotion_transition_s=float(doc.get("emotion_transition_s", DEFAULT_EMOTION_TRANSITION_S)),
                    or_weights=or_weights, name=doc.get("name", path.stem))
    object.__setattr__(g, "base_dir", path.parent)
    return g
