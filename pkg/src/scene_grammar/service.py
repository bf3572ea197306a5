"""HTTP labeling service: sample batches, serve scenes with render
frames, accept good/medium/bad labels, and run training rounds.

One grammar, one parameter lineage, one append-only journal. The
journal file doubles as the labeled dataset: labeled scenes use the
dataset record shape, while pending/train entries ride along as
{"event": ...} lines the dataset loader skips. Restarting the process
replays the journal into an identical session, so a crash between
requests loses nothing that reached disk.

Concurrency: every state mutation happens under one lock, and a
training round additionally flips an exclusive flag; mutating requests
arriving mid-training get a 409 asking the client to retry.
"""

from __future__ import annotations

import hashlib
import json
import threading
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Literal

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .assets import fit_starter_face_model, load_starter_grammar, load_starter_lexicon, load_starter_skeleton
from .errors import SceneGrammarError
from .grammar import StAog, forward_sample
from .mcmc import EnergyContext, refine_scene
from .motion import Skeleton
from .potentials import COMPONENT_NAMES, PotentialParams, params_from_dict, params_to_dict
from .scene_io import (
    SceneDocument, energy_breakdown, export_animation, frames_to_jsonable,
    scene_from_dict, scene_to_dict, serialize_scene,
)
from .trainer import (
    LabeledScene, LabeledSceneStore, TrainConfig, train_round,
)
from .vadi import Lexicon

LABEL_VALUES = ("good", "medium", "bad")
DEFAULT_REFINE_STEPS = 30
DEFAULT_FPS = 24.0


def scene_id(doc: SceneDocument) -> str:
    """Content address of the unlabeled scene body."""
    bare = replace(doc, label=None, energy=None)
    return hashlib.sha256(serialize_scene(bare).encode("utf-8")).hexdigest()[:12]


def theta_version(theta: PotentialParams) -> str:
    body = json.dumps(params_to_dict(theta), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(body.encode("utf-8")).hexdigest()[:12]


@dataclass
class SceneInfo:
    doc: SceneDocument
    round: int
    status: str                  # pending | labeled | skipped
    label: str | None = None
    source: str | None = None


@dataclass
class SessionState:
    grammar: StAog
    lexicon: Lexicon
    theta: PotentialParams
    skeleton: Skeleton
    face_model: object
    store: LabeledSceneStore
    journal_path: Path | None
    seed: int | None
    refine_steps: int = DEFAULT_REFINE_STEPS
    fps: float = DEFAULT_FPS
    round: int = 1
    training: bool = False
    scenes: dict[str, SceneInfo] = field(default_factory=dict)
    frames: dict[str, list] = field(default_factory=dict)
    lock: threading.Lock = field(default_factory=threading.Lock)

    def journal(self, event: dict) -> None:
        if self.journal_path is not None:
            with open(self.journal_path, "a", encoding="utf-8") as f:
                f.write(json.dumps(event, separators=(",", ":"), ensure_ascii=False) + "\n")
                f.flush()

    def context(self) -> EnergyContext:
        return EnergyContext(self.grammar, self.theta, self.lexicon)

    def pending_ids(self) -> list[str]:
        return [sid for sid, info in self.scenes.items() if info.status == "pending"]

    def render(self, sid: str) -> list:
        cached = self.frames.get(sid)
        if cached is None:
            cached = frames_to_jsonable(export_animation(
                self.scenes[sid].doc.pg, self.grammar, self.skeleton,
                self.face_model, fps=self.fps))
            self.frames[sid] = cached
        return cached

    def label_counts(self) -> dict[int, dict[str, int]]:
        out: dict[int, dict[str, int]] = {}
        for info in self.scenes.values():
            if info.status != "labeled":
                continue
            row = out.setdefault(info.round, {v: 0 for v in LABEL_VALUES})
            row[info.label] += 1
        return out


def _replay(state: SessionState) -> None:
    """Rebuild round/theta/pending/labeled state from the journal."""
    if state.journal_path is None or not state.journal_path.exists():
        return
    for ln, line in enumerate(state.journal_path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as e:
            raise SceneGrammarError(f"{state.journal_path}:{ln}: bad journal line ({e})") from None
        event = rec.get("event")
        if event is None:
            doc = scene_from_dict(rec["scene"], state.grammar, strict=True)
            sid = scene_id(doc)
            state.scenes[sid] = SceneInfo(doc=doc, round=int(rec["round"]), status="labeled",
                                          label=doc.label, source=rec.get("source"))
        elif event == "pending":
            doc = scene_from_dict(rec["scene"], state.grammar, strict=True)
            sid = scene_id(doc)
            if sid not in state.scenes:
                state.scenes[sid] = SceneInfo(doc=doc, round=int(rec["round"]), status="pending")
        elif event == "train":
            state.theta = params_from_dict(rec["theta"],
                                           where=f"{state.journal_path}:{ln}")
            state.round = int(rec["round"]) + 1
            for info in state.scenes.values():
                if info.status == "pending":
                    info.status = "skipped"
        else:
            raise SceneGrammarError(f"{state.journal_path}:{ln}: unknown event {event!r}")


# -- request bodies -----------------------------------------------------------

class SampleRequest(BaseModel):
    count: int = Field(ge=1, le=10_000)


class LabelRequest(BaseModel):
    label: Literal["good", "medium", "bad"]


class TrainRequest(BaseModel):
    skip_pending: bool = False
    epochs: int = Field(default=100, ge=1)
    learning_rate: float = Field(default=1e-3, gt=0)
    synth_batch: int = Field(default=100, ge=1)
    refine_steps: int = Field(default=10, ge=0)
    truncate_fraction: float = Field(default=0.1, ge=0, lt=1)


def _error(status: int, code: str, message: str) -> HTTPException:
    return HTTPException(status_code=status, detail={"code": code, "message": message})


def build_app(grammar: StAog | None = None, lexicon: Lexicon | None = None,
              theta: PotentialParams | None = None, store_path: str | Path | None = None,
              seed: int | None = None, skeleton: Skeleton | None = None,
              face_model=None, refine_steps: int = DEFAULT_REFINE_STEPS,
              fps: float = DEFAULT_FPS) -> FastAPI:
    g = grammar if grammar is not None else load_starter_grammar()
    lex = lexicon if lexicon is not None else load_starter_lexicon()
    path = Path(store_path) if store_path is not None else None
    state = SessionState(
        grammar=g, lexicon=lex,
        theta=theta if theta is not None else PotentialParams.zeros(),
        skeleton=skeleton if skeleton is not None else load_starter_skeleton(),
        face_model=face_model if face_model is not None else fit_starter_face_model(),
        store=LabeledSceneStore(g, path=path),
        journal_path=path, seed=seed, refine_steps=refine_steps, fps=fps,
    )
    _replay(state)

    app = FastAPI(title="scene-grammar labeling service")
    app.state.session = state

    @app.exception_handler(HTTPException)
    async def http_error(_req: Request, exc: HTTPException):
        detail = exc.detail if isinstance(exc.detail, dict) else \
            {"code": "error", "message": str(exc.detail)}
        return JSONResponse(status_code=exc.status_code, content=detail)

    @app.exception_handler(RequestValidationError)
    async def validation_error(_req: Request, exc: RequestValidationError):
        return JSONResponse(status_code=422,
                            content={"code": "validation_error", "message": str(exc.errors())})

    @app.exception_handler(SceneGrammarError)
    async def domain_error(_req: Request, exc: SceneGrammarError):
        return JSONResponse(status_code=500,
                            content={"code": "internal_error", "message": str(exc)})

    def guard_training():
        if state.training:
            raise _error(409, "training_in_progress", "a training round is running; retry shortly")

    @app.post("/rounds/{n}/samples")
    def post_samples(n: int, req: SampleRequest):
        with state.lock:
            guard_training()
            if n != state.round:
                raise _error(409, "wrong_round", f"current round is {state.round}, not {n}")
            if state.seed is not None:
                rng = np.random.default_rng([state.seed, n, req.count])
            else:
                rng = np.random.default_rng()
            ctx = state.context()
            ids = []
            for _ in range(req.count):
                pg = refine_scene(forward_sample(g, rng), ctx, rng,
                                  n_steps=state.refine_steps)
                doc = SceneDocument(pg, grammar_name=g.name)
                sid = scene_id(doc)
                ids.append(sid)
                if sid in state.scenes:
                    continue
                state.scenes[sid] = SceneInfo(doc=doc, round=n, status="pending")
                state.render(sid)
                state.journal({"event": "pending", "round": n, "scene": scene_to_dict(doc)})
            return {"round": n, "ids": ids}

    @app.get("/scenes")
    def get_scenes(status: str = "pending"):
        if status not in ("pending", "labeled", "skipped"):
            raise _error(422, "bad_status", f"unknown status filter {status!r}")
        with state.lock:
            rows = [{"id": sid, "round": info.round, "label": info.label}
                    for sid, info in state.scenes.items() if info.status == status]
        return {"status": status, "scenes": rows}

    @app.get("/scenes/{sid}")
    def get_scene(sid: str):
        with state.lock:
            info = state.scenes.get(sid)
            if info is None:
                raise _error(404, "unknown_scene", f"no scene {sid!r}")
            return {
                "id": sid, "status": info.status, "round": info.round,
                "label": info.label,
                "scene": scene_to_dict(info.doc),
                "energy": energy_breakdown(info.doc.pg, g, state.theta, lex),
                "frames": state.render(sid),
                "fps": state.fps,
            }

    @app.post("/scenes/{sid}/label")
    def post_label(sid: str, req: LabelRequest):
        with state.lock:
            guard_training()
            info = state.scenes.get(sid)
            if info is None:
                raise _error(404, "unknown_scene", f"no scene {sid!r}")
            if info.status == "labeled":
                raise _error(409, "already_labeled",
                             f"scene {sid} already carries label {info.label!r}")
            state.store.append(LabeledScene(pg=info.doc.pg, label=req.label,
                                            round=info.round, source="human"))
            info.doc = replace(info.doc, label=req.label)
            info.status = "labeled"
            info.label = req.label
            info.source = "human"
            return {"id": sid, "label": req.label, "round": info.round,
                    "pending": len(state.pending_ids())}

    @app.post("/rounds/{n}/train")
    def post_train(n: int, req: TrainRequest | None = None):
        req = req if req is not None else TrainRequest()
        with state.lock:
            guard_training()
            if n != state.round:
                raise _error(409, "wrong_round", f"current round is {state.round}, not {n}")
            pending = state.pending_ids()
            if pending and not req.skip_pending:
                raise _error(409, "pending_scenes",
                             f"{len(pending)} scenes await labels; label them or "
                             f"pass skip_pending")
            dataset = list(state.store.scenes())
            cfg = TrainConfig(epochs=req.epochs, learning_rate=req.learning_rate,
                              synth_batch=req.synth_batch, refine_steps=req.refine_steps,
                              truncate_fraction=req.truncate_fraction)
            if not any(s.label in cfg.expert_filter for s in dataset):
                raise _error(409, "no_expert_scenes",
                             "no scene labeled good yet; training needs at least one "
                             "expert example")
            state.training = True
            before = state.theta
        try:
            body = "\n".join(
                json.dumps({"round": s.round, "source": s.source,
                            "scene": scene_to_dict(SceneDocument(
                                s.pg, grammar_name=g.name, label=s.label))},
                           sort_keys=True, separators=(",", ":"))
                for s in dataset)
            dataset_hash = hashlib.sha256(body.encode("utf-8")).hexdigest()[:16]
            rng = np.random.default_rng(None if state.seed is None else [state.seed, n, 0])
            new_theta, losses = train_round(g, before, dataset, cfg, rng, lex)
        except BaseException:
            with state.lock:
                state.training = False
            raise
        with state.lock:
            state.theta = new_theta
            state.round = n + 1
            for sid in pending:
                state.scenes[sid].status = "skipped"
            state.journal({"event": "train", "round": n,
                           "theta": params_to_dict(new_theta),
                           "theta_version": theta_version(new_theta),
                           "dataset_hash": dataset_hash,
                           "skip_pending": bool(pending)})
            state.training = False
            delta = new_theta.as_array() - before.as_array()
            return {
                "round": state.round,
                "theta_version": theta_version(new_theta),
                "dataset_hash": dataset_hash,
                "losses": list(losses),
                "param_diff": {
                    "l2": float(np.linalg.norm(delta)),
                    "linf": float(np.abs(delta).max()),
                    "per_component": {name: float(d)
                                      for name, d in zip(COMPONENT_NAMES, delta)},
                },
            }

    @app.get("/params")
    def get_params():
        with state.lock:
            return {"theta": params_to_dict(state.theta),
                    "version": theta_version(state.theta),
                    "round": state.round}

    @app.get("/rounds/current")
    def get_current_round():
        with state.lock:
            counts = state.label_counts()
            history = []
            for r in sorted(counts):
                row = counts[r]
                total = sum(row.values())
                history.append({"round": r, **row, "total": total})
            return {"round": state.round, "pending": len(state.pending_ids()),
                    "training": state.training, "history": history}

    return app
