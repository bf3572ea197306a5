"""Command-line front end for sampling, training, serving, and export.

Asset resolution is layered: explicit flags win, then a JSON config
file (./scene-grammar.json by default, path overridable through the
SCENE_GRAMMAR_CONFIG environment variable), then the bundled starter
assets. Exit codes: 0 success, 2 invalid input, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path

import numpy as np

from .assets import (
    fit_starter_face_model, load_starter_skeleton, starter_grammar_path,
    starter_lexicon_path,
)
from .errors import SceneGrammarError
from .grammar import StAog, forward_sample, load_grammar
from .mcmc import EnergyContext, complete_motion, infer_relation, refine_scene, sample_emotion
from .motion import load_pose_track, load_regressor, load_skeleton, save_pose_track
from .potentials import PotentialParams, load_params, save_params
from .scene_io import (
    SceneDocument, atomic_write_text, energy_breakdown, export_animation,
    frames_to_jsonable, load_scene, save_scene,
)
from .seqmodel import load_sequence_model
from .trainer import LabeledSceneStore, TrainConfig, save_loss_trace, load_loss_trace, train_round
from .vadi import Lexicon, load_lexicon

CONFIG_ENV = "SCENE_GRAMMAR_CONFIG"
DEFAULT_CONFIG = "scene-grammar.json"
FRAMES_SCHEMA = "frames/1"


def _load_config() -> dict:
    path = os.environ.get(CONFIG_ENV, DEFAULT_CONFIG)
    p = Path(path)
    if not p.exists():
        if CONFIG_ENV in os.environ:
            raise SceneGrammarError(f"config file {p} (from {CONFIG_ENV}) does not exist")
        return {}
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise SceneGrammarError(f"{p}: invalid config JSON ({e})") from None
    if not isinstance(doc, dict):
        raise SceneGrammarError(f"{p}: config must be a JSON object")
    return doc


def _opt(args: argparse.Namespace, name: str):
    return getattr(args, name, None)


@dataclasses.dataclass
class Runtime:
    grammar: StAog
    theta: PotentialParams
    lexicon: Lexicon
    rng: np.random.Generator
    config: dict

    def context(self, **kw) -> EnergyContext:
        return EnergyContext(self.grammar, self.theta, self.lexicon, **kw)

    def skeleton(self, flag_value):
        path = flag_value or self.config.get("skeleton")
        return load_skeleton(path) if path else load_starter_skeleton()


def _runtime(args: argparse.Namespace) -> Runtime:
    cfg = _load_config()
    g = load_grammar(_opt(args, "grammar") or cfg.get("grammar") or starter_grammar_path())
    lex = load_lexicon(_opt(args, "lexicon") or cfg.get("lexicon") or starter_lexicon_path())
    theta_path = _opt(args, "theta") or cfg.get("theta")
    theta = load_params(theta_path) if theta_path else PotentialParams.zeros()
    return Runtime(grammar=g, theta=theta, lexicon=lex,
                   rng=np.random.default_rng(_opt(args, "seed")), config=cfg)


def _positive_int(text: str) -> int:
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {n}")
    return n


def _nonneg_int(text: str) -> int:
    n = int(text)
    if n < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {n}")
    return n


# -- verbs --------------------------------------------------------------------

def cmd_sample(args: argparse.Namespace) -> int:
    rt = _runtime(args)
    pg = forward_sample(rt.grammar, rt.rng)
    if args.steps:
        pg = refine_scene(pg, rt.context(), rt.rng, n_steps=args.steps)
    energy = None
    if args.energy:
        energy = energy_breakdown(pg, rt.grammar, rt.theta, rt.lexicon)
    save_scene(SceneDocument(pg, grammar_name=rt.grammar.name, energy=energy), args.out)
    print(f"wrote {args.out} (relation {pg.relation.name}, duration {pg.duration:.2f} s)")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    rt = _runtime(args)
    store = LabeledSceneStore(rt.grammar, path=args.data)
    dataset = store.scenes()
    if not dataset:
        print(f"error: no labeled scenes in {args.data}", file=sys.stderr)
        return 2
    cfg = TrainConfig(epochs=args.epochs, learning_rate=args.lr,
                      synth_batch=args.synth_batch, refine_steps=args.refine_steps,
                      truncate_fraction=args.truncate)
    theta, losses = train_round(rt.grammar, rt.theta, list(dataset), cfg, rt.rng, rt.lexicon)
    save_params(theta, args.out)
    if args.loss_trace:
        save_loss_trace(losses, args.loss_trace)
    n_experts = sum(1 for s in dataset if s.label in cfg.expert_filter)
    print(f"trained on {n_experts} expert scenes for {len(losses)} epochs; "
          f"final loss {losses[-1]:.4f}; wrote {args.out}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import build_app

    rt = _runtime(args)
    app = build_app(grammar=rt.grammar, lexicon=rt.lexicon, theta=rt.theta,
                    store_path=args.store, seed=_opt(args, "seed"))
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def cmd_complete_emotion(args: argparse.Namespace) -> int:
    rt = _runtime(args)
    doc = load_scene(args.scene, rt.grammar)
    res = sample_emotion(doc.pg, rt.context(face_model=fit_starter_face_model()),
                         rt.rng, target=args.char, n_steps=args.steps, step=args.step)
    save_scene(dataclasses.replace(doc, pg=res.pg, energy=None), args.out)
    v = res.vad
    print(f"character {args.char} end face -> {res.word} "
          f"(v={v.valence:.2f} a={v.arousal:.2f} d={v.dominance:.2f}); wrote {args.out}")
    return 0


def cmd_complete_motion(args: argparse.Namespace) -> int:
    rt = _runtime(args)
    doc = load_scene(args.scene, rt.grammar)
    model = load_sequence_model(args.seq_model)
    reg = load_regressor(args.regressor)
    prefix = load_pose_track(args.prefix)
    ctx = rt.context(seq_model=model, pose_regressor=reg)
    res = complete_motion(prefix, doc.pg, ctx, rt.rng, target=args.char,
                          n_poses=args.poses, n_steps=args.steps)
    save_pose_track(res.track, args.out)
    print(f"completed {args.poses} poses for character {args.char} "
          f"(energy {res.energy:.4f}); wrote {args.out}")
    return 0


def cmd_infer_relation(args: argparse.Namespace) -> int:
    rt = _runtime(args)
    doc = load_scene(args.scene, rt.grammar)
    ranking = infer_relation(doc.pg, rt.context())
    print("relation\tenergy\tprobability")
    for r in ranking:
        print(f"{r.relation.name}\t{r.energy:.4f}\t{r.probability:.4f}")
    return 0


def cmd_export(args: argparse.Namespace) -> int:
    rt = _runtime(args)
    doc = load_scene(args.scene, rt.grammar)
    skel = rt.skeleton(_opt(args, "skeleton"))
    frames = export_animation(doc.pg, rt.grammar, skel, fit_starter_face_model(), fps=args.fps)
    payload = {"schema": FRAMES_SCHEMA, "fps": args.fps, "count": len(frames),
               "frames": frames_to_jsonable(frames)}
    atomic_write_text(args.out, json.dumps(payload) + "\n")
    print(f"wrote {len(frames)} frames at {args.fps} fps to {args.out}")
    return 0


def cmd_plot_loss(args: argparse.Namespace) -> int:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    trace = load_loss_trace(args.trace)
    if not trace:
        print(f"error: {args.trace} holds no data rows", file=sys.stderr)
        return 2
    fig, ax = plt.subplots(figsize=(6.0, 3.5))
    ax.plot([e for e, _ in trace], [l for _, l in trace], lw=1.5)
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(args.out, dpi=120)
    plt.close(fig)
    print(f"plotted {len(trace)} epochs to {args.out}")
    return 0


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    # SUPPRESS keeps an unset subcommand-position flag from clobbering a
    # value parsed at the top-level position
    common.add_argument("--grammar", default=argparse.SUPPRESS, metavar="PATH",
                        help="grammar JSON file (default: config, then bundled starter)")
    common.add_argument("--theta", default=argparse.SUPPRESS, metavar="PATH",
                        help="potential-parameter JSON file (default: config, then zeros)")
    common.add_argument("--lexicon", default=argparse.SUPPRESS, metavar="PATH",
                        help="lexicon TSV file (default: config, then bundled starter)")
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="RNG seed (default: nondeterministic)")

    p = argparse.ArgumentParser(prog="scene-grammar", parents=[common],
                                description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="verb", required=True, metavar="VERB")

    sp = sub.add_parser("sample", parents=[common], help="sample one scene and write it")
    sp.add_argument("out", help="output scene file")
    sp.add_argument("--steps", type=_nonneg_int, default=0,
                    help="refinement steps after forward sampling (default 0)")
    sp.add_argument("--energy", action="store_true", help="embed the energy breakdown")
    sp.set_defaults(func=cmd_sample)

    sp = sub.add_parser("train", parents=[common], help="fit parameters to a labeled dataset")
    sp.add_argument("data", help="labeled dataset (line-delimited records)")
    sp.add_argument("--out", required=True, help="output parameter file")
    sp.add_argument("--loss-trace", metavar="PATH", help="write per-epoch losses here")
    sp.add_argument("--epochs", type=_positive_int, default=100)
    sp.add_argument("--lr", type=float, default=1e-3)
    sp.add_argument("--synth-batch", type=_positive_int, default=100)
    sp.add_argument("--refine-steps", type=_nonneg_int, default=10)
    sp.add_argument("--truncate", type=float, default=0.1,
                    help="fraction of highest-energy experts dropped (default 0.1)")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("serve", parents=[common], help="run the labeling HTTP service")
    sp.add_argument("--host", default="127.0.0.1")
    sp.add_argument("--port", type=int, default=8000)
    sp.add_argument("--store", metavar="PATH",
                    help="append-only labeled-scene store (restored on restart)")
    sp.set_defaults(func=cmd_serve)

    sp = sub.add_parser("complete-emotion", parents=[common],
                        help="sample an end-face emotion for one character")
    sp.add_argument("scene", help="input scene file")
    sp.add_argument("out", help="output scene file")
    sp.add_argument("--char", type=int, choices=(0, 1), default=1)
    sp.add_argument("--steps", type=_nonneg_int, default=20)
    sp.add_argument("--step", type=float, default=0.1, help="proposal step size")
    sp.set_defaults(func=cmd_complete_emotion)

    sp = sub.add_parser("complete-motion", parents=[common],
                        help="extend a pose-track prefix for one character")
    sp.add_argument("scene", help="input scene file")
    sp.add_argument("prefix", help="pose-track prefix file")
    sp.add_argument("out", help="output pose-track file")
    sp.add_argument("--seq-model", required=True, metavar="PATH", help="sequence-model archive")
    sp.add_argument("--regressor", required=True, metavar="PATH", help="pose-regressor archive")
    sp.add_argument("--char", type=int, choices=(0, 1), default=0)
    sp.add_argument("--poses", type=_positive_int, default=2)
    sp.add_argument("--steps", type=_positive_int, default=100)
    sp.set_defaults(func=cmd_complete_motion)

    sp = sub.add_parser("infer-relation", parents=[common],
                        help="rank relations for a scene by energy")
    sp.add_argument("scene", help="input scene file")
    sp.set_defaults(func=cmd_infer_relation)

    sp = sub.add_parser("export", parents=[common], help="render a scene to animation frames")
    sp.add_argument("scene", help="input scene file")
    sp.add_argument("out", help="output frames JSON file")
    sp.add_argument("--fps", type=float, default=24.0)
    sp.add_argument("--skeleton", default=argparse.SUPPRESS, metavar="PATH",
                    help="skeleton TSV (default: config, then bundled starter)")
    sp.set_defaults(func=cmd_export)

    sp = sub.add_parser("plot-loss", parents=[common], help="plot a loss-trace file")
    sp.add_argument("trace", help="loss-trace file from train")
    sp.add_argument("out", help="output image file")
    sp.set_defaults(func=cmd_plot_loss)

    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SceneGrammarError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except KeyboardInterrupt:
        return 130
    except Exception as e:  # last resort: anything else is a runtime failure
        print(f"unexpected failure: {e!r}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
