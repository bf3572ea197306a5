"""Metropolis-Hastings sampling over parse graphs.

Three proposal dynamics: relation reselection (q_r), single-component
face-VAD perturbation (q_e), and latent motion resampling through the
sequence model (q_m). Clamp masks freeze parts of the scene so the same
chain machinery serves free sampling, emotion completion, and motion
completion. A separate configuration-space refiner (pool reselection +
timing/distance resampling) nudges forward samples toward the model
distribution for training and batch generation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConsistencyError, ContractError
from .faces import FaceModel, vad_to_face
from .grammar import CUSTOM_FACE_PREFIX, FaceRef, ParseGraph, StAog
from .motion import Pose, PoseTrack, PoseVadiRegressor, resample_track
from .potentials import PotentialParams, total_energy
from .seqmodel import SequenceModel
from .vadi import DEFAULT_SOCIAL_DISTANCE, Lexicon, VadVector

DEFAULT_MIX = (0.2, 0.4, 0.4)
DEFAULT_EMOTION_STEP = 0.1
DEFAULT_BURN_IN = 1000
DEFAULT_THIN = 10
ENERGY_AUDIT_INTERVAL = 1000
ENERGY_AUDIT_TOL = 1e-9


@dataclass(frozen=True, slots=True)
class ClampMask:
    """Which scene parts proposals may touch (True = frozen)."""

    relation: bool = False
    start_faces: tuple = (False, False)
    end_faces: tuple = (False, False)
    motions: tuple = (False, False)

    @staticmethod
    def emotion_only(char: int) -> "ClampMask":
        """Free only one character's end face (the paper's completion setup)."""
        ends = [True, True]
        ends[char] = False
        return ClampMask(relation=True, start_faces=(True, True),
                         end_faces=tuple(ends), motions=(True, True))

    @staticmethod
    def motion_only(char: int) -> "ClampMask":
        mots = [True, True]
        mots[char] = False
        return ClampMask(relation=True, start_faces=(True, True),
                         end_faces=(True, True), motions=tuple(mots))


@dataclass(frozen=True, slots=True)
class ProposalDynamics:
    """Mixture weights over (q_r, q_e, q_m) plus the q_e step size."""

    mix: tuple = DEFAULT_MIX
    emotion_step: float = DEFAULT_EMOTION_STEP
    mask: ClampMask = field(default_factory=ClampMask)

    def __post_init__(self):
        mix = tuple(float(w) for w in self.mix)
        if len(mix) != 3 or any(w < 0 for w in mix):
            raise ContractError("mix needs three non-negative weights")
        if abs(sum(mix) - 1.0) > 1e-9:
            raise ContractError(f"mix weights must sum to 1, got {sum(mix)}")
        if not self.emotion_step > 0:
            raise ContractError("emotion step must be positive")
        object.__setattr__(self, "mix", mix)


@dataclass(frozen=True)
class EnergyContext:
    """Everything needed to score a parse graph, bundled once."""

    grammar: StAog
    theta: PotentialParams
    lexicon: Lexicon
    social_distance: float = DEFAULT_SOCIAL_DISTANCE
    face_model: FaceModel | None = None
    seq_model: SequenceModel | None = None
    pose_regressor: PoseVadiRegressor | None = None
    terminal_energies: dict | None = None

    def energy(self, pg: ParseGraph, latents: dict | None = None) -> float:
        overrides = {ci: lat.vad for ci, lat in (latents or {}).items()}
        return total_energy(pg, self.grammar, self.theta, self.lexicon,
                            social_distance=self.social_distance,
                            motion_vads=overrides or None,
                            terminal_energies=self.terminal_energies)


@dataclass(frozen=True, slots=True)
class LatentMotion:
    """One character's motion as sequence-model latents.

    Poses are the deterministic decode of zs from init_state, so the
    latents fully determine the motion; vad is the pose regressor's
    per-step mean.
    """

    zs: np.ndarray           # (T, latent_dim)
    init_state: np.ndarray   # recurrent state before the first step
    poses: np.ndarray        # (T, pose_dim), decoded
    states: np.ndarray       # (T, state_dim), state after each step
    vad: VadVector

    @staticmethod
    def from_zs(model: SequenceModel, regressor: PoseVadiRegressor,
                zs: np.ndarray, init_state: np.ndarray) -> "LatentMotion":
        zs = np.atleast_2d(np.asarray(zs, dtype=float))
        poses, states = [], []
        h = init_state
        for z in zs:
            x = model._decode(h, z)
            h = model._recur(h, x, z)
            poses.append(x)
            states.append(h)
        poses = np.stack(poses)
        vads = np.stack([regressor.predict(Pose.from_vector(x))[:3] for x in poses])
        mv = vads.mean(axis=0)
        return LatentMotion(zs=zs, init_state=np.asarray(init_state, dtype=float),
                            poses=poses, states=np.stack(states),
                            vad=VadVector(*mv))

    def state_before(self, k: int) -> np.ndarray:
        return self.init_state if k == 0 else self.states[k - 1]


@dataclass
class ChainState:
    """Mutable chain bookkeeping; energy is cached and audited."""

    pg: ParseGraph
    energy: float
    rng: np.random.Generator
    latents: dict = field(default_factory=dict)    # char index -> LatentMotion
    step: int = 0
    accepted: int = 0
    rejected: int = 0            # energy-based rejections
    boundary_rejected: int = 0   # proposals outside [0,1], auto-rejected

    @staticmethod
    def create(pg: ParseGraph, ctx: EnergyContext, rng: np.random.Generator,
               latents: dict | None = None) -> "ChainState":
        latents = dict(latents or {})
        return ChainState(pg=pg, energy=ctx.energy(pg, latents), rng=rng, latents=latents)

    @property
    def acceptance_rate(self) -> float:
        return self.accepted / self.step if self.step else 0.0


@dataclass(frozen=True, slots=True)
class Proposal:
    pg: ParseGraph
    latents: dict
    log_q_fwd: float
    log_q_rev: float
    kind: str


def _available_dynamics(state: ChainState, dyn: ProposalDynamics, ctx: EnergyContext):
    mask = dyn.mask
    avail = []
    if not mask.relation and len(ctx.grammar.relation_pool) >= 2 and dyn.mix[0] > 0:
        avail.append(("relation", dyn.mix[0]))
    face_slots = [(ci, slot)
                  for ci in (0, 1)
                  for slot, frozen in (("start", mask.start_faces[ci]), ("end", mask.end_faces[ci]))
                  if not frozen]
    if face_slots and dyn.mix[1] > 0:
        avail.append(("emotion", dyn.mix[1]))
    motion_chars = [ci for ci in (0, 1) if not mask.motions[ci] and ci in state.latents]
    if motion_chars and dyn.mix[2] > 0:
        avail.append(("motion", dyn.mix[2]))
    return avail, face_slots, motion_chars


def propose(state: ChainState, dyn: ProposalDynamics, ctx: EnergyContext) -> Proposal | None:
    """Draw one proposal; None means an out-of-range q_e draw that is
    rejected outright (the chain stays put, preserving symmetry)."""
    avail, face_slots, motion_chars = _available_dynamics(state, dyn, ctx)
    if not avail:
        raise ContractError("all proposal components are clamped")
    names = [a[0] for a in avail]
    weights = np.array([a[1] for a in avail])
    kind = names[int(state.rng.choice(len(names), p=weights / weights.sum()))]

    if kind == "relation":
        return _propose_relation(state, ctx)
    if kind == "emotion":
        return _propose_emotion(state, dyn, ctx, face_slots)
    return _propose_motion(state, ctx, motion_chars)


def _propose_relation(state: ChainState, ctx: EnergyContext) -> Proposal:
    pool = ctx.grammar.relation_pool
    others = [r for r in pool if r.name != state.pg.relation.name]
    pick = others[int(state.rng.integers(len(others)))]
    pg = replace(state.pg, relation=pick,
                 or_choices={**state.pg.or_choices, "relation": f"relation:{pick.name}"})
    # uniform over the n-1 others in both directions
    return Proposal(pg=pg, latents=state.latents, log_q_fwd=0.0, log_q_rev=0.0, kind="relation")


def _propose_emotion(state: ChainState, dyn: ProposalDynamics, ctx: EnergyContext,
                     face_slots) -> Proposal | None:
    rng = state.rng
    ci, slot = face_slots[int(rng.integers(len(face_slots)))]
    comp = int(rng.integers(3))
    sign = 1.0 if rng.integers(2) else -1.0
    char = state.pg.characters[ci]
    face = char.start_face if slot == "start" else char.end_face
    vad = [face.vad.valence, face.vad.arousal, face.vad.dominance]
    new = vad[comp] + sign * dyn.emotion_step
    if new < 0.0 or new > 1.0:
        return None               # boundary: reject outright, never clamp
    vad[comp] = new
    new_vad = VadVector(*vad)
    landmarks = vad_to_face(new_vad, ctx.face_model) if ctx.face_model is not None else None
    base = face.name.rstrip("*")
    new_face = FaceRef(id=f"{CUSTOM_FACE_PREFIX}{slot}_{ci}", name=f"{base}*", vad=new_vad,
                       landmarks=landmarks)
    patch = {"start_face": new_face} if slot == "start" else {"end_face": new_face}
    chars = list(state.pg.characters)
    chars[ci] = replace(char, **patch)
    # or_choices intentionally untouched: the tree branch stays at the
    # pool face this chain started from, so tree energy cancels in dE
    pg = replace(state.pg, characters=tuple(chars))
    return Proposal(pg=pg, latents=state.latents, log_q_fwd=0.0, log_q_rev=0.0, kind="emotion")


def _propose_motion(state: ChainState, ctx: EnergyContext, motion_chars) -> Proposal:
    if ctx.seq_model is None or ctx.pose_regressor is None:
        raise ContractError("motion proposals need seq_model and pose_regressor in the context")
    rng = state.rng
    ci = motion_chars[int(rng.integers(len(motion_chars)))]
    lat = state.latents[ci]
    k = int(rng.integers(lat.zs.shape[0]))
    h = lat.state_before(k)
    z_new = ctx.seq_model.sample_prior(h, rng)
    log_q_fwd = ctx.seq_model.prior_logpdf(h, z_new)
    log_q_rev = ctx.seq_model.prior_logpdf(h, lat.zs[k])
    zs = lat.zs.copy()
    zs[k] = z_new
    new_lat = LatentMotion.from_zs(ctx.seq_model, ctx.pose_regressor, zs, lat.init_state)
    latents = dict(state.latents)
    latents[ci] = new_lat
    return Proposal(pg=state.pg, latents=latents,
                    log_q_fwd=log_q_fwd, log_q_rev=log_q_rev, kind="motion")


def acceptance_probability(e_current: float, e_proposed: float,
                           log_q_fwd: float = 0.0, log_q_rev: float = 0.0) -> float:
    """min(1, exp(E - E') * q(pg|pg') / q(pg'|pg)) in log space."""
    log_alpha = (e_current - e_proposed) + (log_q_rev - log_q_fwd)
    if log_alpha >= 0:
        return 1.0
    return math.exp(max(log_alpha, -745.0))


def mh_step(state: ChainState, dyn: ProposalDynamics, ctx: EnergyContext) -> ChainState:
    """One Metropolis-Hastings transition, mutating state in place."""
    prop = propose(state, dyn, ctx)
    state.step += 1
    if prop is None:
        state.boundary_rejected += 1
    else:
        e_new = ctx.energy(prop.pg, prop.latents)
        alpha = acceptance_probability(state.energy, e_new, prop.log_q_fwd, prop.log_q_rev)
        if alpha >= 1.0 or state.rng.uniform() < alpha:
            state.pg = prop.pg
            state.latents = dict(prop.latents)
            state.energy = e_new
            state.accepted += 1
        else:
            state.rejected += 1
    if state.step % ENERGY_AUDIT_INTERVAL == 0:
        fresh = ctx.energy(state.pg, state.latents)
        if abs(fresh - state.energy) > ENERGY_AUDIT_TOL:
            raise ConsistencyError(
                f"energy cache drifted at step {state.step}: cached {state.energy}, fresh {fresh}")
        state.energy = fresh
    return state


def run_chain(state: ChainState, dyn: ProposalDynamics, ctx: EnergyContext, n_steps: int,
              burn_in: int = DEFAULT_BURN_IN, thin: int = DEFAULT_THIN, collect=None) -> list:
    """Drive n_steps transitions; collect(state) after burn-in, every
    thin-th step. Default collection is the current parse graph."""
    if burn_in < 0 or thin < 1:
        raise ContractError("burn_in must be >= 0 and thin >= 1")
    collect = collect if collect is not None else (lambda s: s.pg)
    out = []
    for _ in range(n_steps):
        mh_step(state, dyn, ctx)
        if state.step > burn_in and (state.step - burn_in) % thin == 0:
            out.append(collect(state))
    return out


# -- application operations ---------------------------------------------------

@dataclass(frozen=True, slots=True)
class EmotionSample:
    pg: ParseGraph
    vad: VadVector
    word: str


def sample_emotion(pg: ParseGraph, ctx: EnergyContext, rng: np.random.Generator,
                   target: int = 1, n_steps: int = 20,
                   step: float = DEFAULT_EMOTION_STEP) -> EmotionSample:
    """Run q_e on one character's end face with everything else given;
    describe the landed VAD by its nearest lexicon word."""
    if target not in (0, 1):
        raise ContractError("target must be 0 or 1")
    dyn = ProposalDynamics(mix=(0.0, 1.0, 0.0), emotion_step=step,
                           mask=ClampMask.emotion_only(target))
    state = ChainState.create(pg, ctx, rng)
    for _ in range(n_steps):
        mh_step(state, dyn, ctx)
    vad = state.pg.characters[target].end_face.vad
    word, _ = ctx.lexicon.nearest(vad)
    return EmotionSample(pg=state.pg, vad=vad, word=word)


@dataclass(frozen=True, slots=True)
class MotionCompletion:
    track: PoseTrack             # continuation keyframes after the prefix
    poses: tuple
    vad: VadVector
    energy: float


def complete_motion(prefix, pg: ParseGraph, ctx: EnergyContext,
                    rng: np.random.Generator, target: int = 1,
                    n_poses: int = 2, n_steps: int = 100,
                    dt: float | None = None) -> MotionCompletion:
    """Continue a character's motion past an observed prefix.

    The prefix (a PoseTrack, or a sequence of (time, Pose) keyframes)
    is folded into the sequence model's state, the suffix latents start
    at prior means, and q_m explores them; the lowest-energy state
    visited wins.
    """
    if ctx.seq_model is None or ctx.pose_regressor is None:
        raise ContractError("motion completion needs seq_model and pose_regressor")
    if not isinstance(prefix, PoseTrack):
        kfs = tuple(prefix)
        if not kfs:
            raise ContractError("prefix track is empty")
        prefix = PoseTrack(kfs)
    if n_poses < 1:
        raise ContractError("need at least one continuation pose")
    model = ctx.seq_model
    dt = dt if dt is not None else model.config.dt
    xs = np.stack([p.vector() for p in resample_track(prefix, dt)])
    h0 = model.encode_sequence(xs)

    # prior-mean rollout as the starting suffix
    zs = []
    h = h0
    for _ in range(n_poses):
        mu, _sigma = model._prior(h)
        x = model._decode(h, mu)
        h = model._recur(h, x, mu)
        zs.append(mu)
    lat0 = LatentMotion.from_zs(model, ctx.pose_regressor, np.stack(zs), h0)

    state = ChainState.create(pg, ctx, rng, latents={target: lat0})
    dyn = ProposalDynamics(mix=(0.0, 0.0, 1.0), mask=ClampMask.motion_only(target))
    best_lat, best_energy = lat0, state.energy
    for _ in range(n_steps):
        mh_step(state, dyn, ctx)
        if state.energy < best_energy:
            best_lat, best_energy = state.latents[target], state.energy

    t0 = prefix.duration
    kfs = tuple((t0 + dt * (i + 1), Pose.from_vector(x)) for i, x in enumerate(best_lat.poses))
    return MotionCompletion(track=PoseTrack(kfs), poses=tuple(p for _, p in kfs),
                            vad=best_lat.vad, energy=best_energy)


@dataclass(frozen=True, slots=True)
class RelationRanking:
    relation: object             # RelationScore
    energy: float
    probability: float


def infer_relation(pg: ParseGraph, ctx: EnergyContext) -> list[RelationRanking]:
    """Score every relation in the pool by exact enumeration; return
    them sorted by energy with normalized Gibbs probabilities."""
    energies = []
    for r in ctx.grammar.relation_pool:
        candidate = replace(pg, relation=r,
                            or_choices={**pg.or_choices, "relation": f"relation:{r.name}"})
        energies.append((r, ctx.energy(candidate)))
    es = np.array([e for _, e in energies])
    w = np.exp(-(es - es.min()))
    probs = w / w.sum()
    ranked = sorted(zip((r for r, _ in energies), es, probs), key=lambda t: t[1])
    return [RelationRanking(relation=r, energy=float(e), probability=float(p))
            for r, e, p in ranked]


# -- configuration-space refinement -------------------------------------------

_T_M_MEAN, _T_M_STD = 1.0, math.sqrt(0.5)


def _log_time_density(t_m: float, t_e: float) -> float:
    gap = t_m - t_e
    return (-0.5 * ((t_m - _T_M_MEAN) / _T_M_STD) ** 2 - math.log(_T_M_STD * math.sqrt(2 * math.pi))
            - 0.5 * gap * gap - math.log(math.sqrt(2 * math.pi)))


def refine_scene(pg: ParseGraph, ctx: EnergyContext, rng: np.random.Generator,
                 n_steps: int = 50) -> ParseGraph:
    """MH over the grammar's configuration space: pool reselection for
    relation/motions/faces, timing resampling, distance resampling.

    Used to push forward samples toward the model distribution (training
    batches, batch generation); distinct from the q_r/q_e/q_m dynamics,
    which move in continuous attribute space.
    """
    g = ctx.grammar
    current = pg
    e_cur = ctx.energy(current)
    moves = ["relation", "motion0", "motion1", "start0", "start1",
             "end0", "end1", "time0", "time1", "distance"]
    for _ in range(n_steps):
        move = moves[int(rng.integers(len(moves)))]
        log_q_fwd = log_q_rev = 0.0
        choice_patch = {}
        if move == "relation":
            pick = g.relation_pool[int(rng.integers(len(g.relation_pool)))]
            cand = replace(current, relation=pick)
            choice_patch["relation"] = f"relation:{pick.name}"
        elif move.startswith("motion"):
            ci = int(move[-1])
            pick = g.motion_pool[int(rng.integers(len(g.motion_pool)))]
            c = current.characters[ci]
            chars = list(current.characters)
            chars[ci] = replace(c, motion=pick, t_m_end=c.t_m + pick.duration_s)
            cand = replace(current, characters=tuple(chars))
            choice_patch[f"char{ci + 1}.motion"] = f"motion:{pick.id}"
        elif move.startswith("start") or move.startswith("end"):
            ci = int(move[-1])
            slot = "start_face" if move.startswith("start") else "end_face"
            pick = g.emotion_pool[int(rng.integers(len(g.emotion_pool)))]
            chars = list(current.characters)
            chars[ci] = replace(current.characters[ci], **{slot: pick})
            cand = replace(current, characters=tuple(chars))
            choice_patch[f"char{ci + 1}.{slot}"] = f"face:{pick.id}"
        elif move.startswith("time"):
            ci = int(move[-1])
            c = current.characters[ci]
            t_m = float(rng.normal(_T_M_MEAN, _T_M_STD))
            t_e = t_m - float(rng.normal(0.0, 1.0))
            log_q_fwd = _log_time_density(t_m, t_e)
            log_q_rev = _log_time_density(c.t_m, c.t_e)
            chars = list(current.characters)
            chars[ci] = replace(c, t_m=t_m, t_e=t_e,
                                t_m_end=t_m + c.motion.duration_s,
                                t_e_end=t_e + g.emotion_transition_s)
            cand = replace(current, characters=tuple(chars))
        else:
            lo, hi = g.distance_range_m
            d = float(rng.uniform(lo, hi))
            chars = []
            for c, sign in zip(current.characters, (-1.0, 1.0)):
                pos = c.position.copy()
                pos[0] = sign * d / 2
                chars.append(replace(c, position=pos))
            cand = replace(current, characters=tuple(chars))
        if choice_patch:
            cand = replace(cand, or_choices={**cand.or_choices, **choice_patch})
        e_new = ctx.energy(cand)
        if state_accept(e_cur, e_new, log_q_fwd, log_q_rev, rng):
            current, e_cur = cand, e_new

    # times may drift negative during refinement (energies are
    # shift-invariant); shift back so the first event is at t = 0
    shift = min(min(c.t_m, c.t_e) for c in current.characters)
    if shift != 0.0:
        chars = tuple(replace(c, t_m=c.t_m - shift, t_e=c.t_e - shift,
                              t_m_end=c.t_m_end - shift, t_e_end=c.t_e_end - shift)
                      for c in current.characters)
        current = replace(current, characters=chars)
    return current


def state_accept(e_cur: float, e_new: float, log_q_fwd: float, log_q_rev: float,
                 rng: np.random.Generator) -> bool:
    alpha = acceptance_probability(e_cur, e_new, log_q_fwd, log_q_rev)
    return alpha >= 1.0 or rng.uniform() < alpha
