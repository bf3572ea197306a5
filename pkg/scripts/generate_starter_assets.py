"""Regenerate the bundled starter assets.

Writes, deterministically (fixed seeds), into src/scene_grammar/assets/:
  - skeleton.tsv           65-joint humanoid rig
  - tracks/<id>.json       65 procedural keyframe clips (0.5 s keys)
  - faces/<id>.json        21 landmark sets, deformed from neutral by VAD
  - grammar.json           relations / motions / emotions pools
  - lexicon.tsv            word -> VAD table covering emotion words and
                           motion-name tokens

Run from the repository root:  python3 scripts/generate_starter_assets.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

ROOT = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(ROOT / "src"))

from scene_grammar.faces import LANDMARK_NAMES, FaceLandmarks, save_face  # noqa: E402
from scene_grammar.motion import Pose, PoseTrack, Skeleton, save_pose_track, save_skeleton  # noqa: E402
from scene_grammar.vadi import VadVector  # noqa: E402

ASSETS = ROOT / "src" / "scene_grammar" / "assets"


# -- skeleton -----------------------------------------------------------------

def finger(side, name, base_offset, seg):
    """Four-joint finger chain rooted at the hand."""
    rows = [(f"{side}_{name}1", f"{side}_hand", base_offset)]
    for i in range(2, 5):
        rows.append((f"{side}_{name}{i}", f"{side}_{name}{i-1}", seg))
    return rows


def build_skeleton_rows():
    sx = {"left": 1.0, "right": -1.0}
    rows = [
        ("hips", None, (0.0, 0.0, 0.0)),
        ("spine", "hips", (0.0, 0.12, 0.0)),
        ("spine1", "spine", (0.0, 0.13, 0.0)),
        ("spine2", "spine1", (0.0, 0.13, 0.0)),
        ("neck", "spine2", (0.0, 0.12, 0.0)),
        ("head", "neck", (0.0, 0.09, 0.0)),
        ("head_end", "head", (0.0, 0.18, 0.0)),
    ]
    for side in ("left", "right"):
        s = sx[side]
        rows += [
            (f"{side}_shoulder", "spine2", (0.07 * s, 0.10, 0.0)),
            (f"{side}_arm", f"{side}_shoulder", (0.12 * s, 0.0, 0.0)),
            (f"{side}_forearm", f"{side}_arm", (0.27 * s, 0.0, 0.0)),
            (f"{side}_hand", f"{side}_forearm", (0.26 * s, 0.0, 0.0)),
        ]
        rows += finger(side, "thumb", (0.03 * s, 0.0, 0.03), (0.025 * s, 0.0, 0.008))
        rows += finger(side, "index", (0.09 * s, 0.0, 0.025), (0.03 * s, 0.0, 0.0))
        rows += finger(side, "middle", (0.095 * s, 0.0, 0.008), (0.032 * s, 0.0, 0.0))
        rows += finger(side, "ring", (0.09 * s, 0.0, -0.01), (0.029 * s, 0.0, 0.0))
        rows += finger(side, "pinky", (0.08 * s, 0.0, -0.028), (0.024 * s, 0.0, 0.0))
    for side in ("left", "right"):
        s = sx[side]
        rows += [
            (f"{side}_upleg", "hips", (0.09 * s, -0.06, 0.0)),
            (f"{side}_leg", f"{side}_upleg", (0.0, -0.42, 0.0)),
            (f"{side}_foot", f"{side}_leg", (0.0, -0.42, 0.0)),
            (f"{side}_toe", f"{side}_foot", (0.0, -0.07, 0.12)),
            (f"{side}_toe_end", f"{side}_toe", (0.0, 0.0, 0.07)),
        ]
    return rows


def make_skeleton() -> Skeleton:
    rows = build_skeleton_rows()
    names = [r[0] for r in rows]
    index = {n: i for i, n in enumerate(names)}
    parents = tuple(-1 if r[1] is None else index[r[1]] for r in rows)
    offsets = np.array([r[2] for r in rows])
    return Skeleton(tuple(names), parents, offsets)


# -- motions ------------------------------------------------------------------

MOTION_NAMES = [
    "wave hand", "wave both hands", "raise hand", "raise both arms", "offer handshake",
    "high five", "clap hands", "bow deeply", "bow slightly", "nod head",
    "shake head", "tilt head", "point forward", "point upward", "point at self",
    "cross arms", "uncross arms", "hands on hips", "shrug shoulders", "stretch arms",
    "rub hands", "wring hands", "scratch head", "cover face", "cover mouth",
    "wipe forehead", "salute", "beckon closer", "push away", "reach forward",
    "pull back", "thumbs up", "thumbs down", "fist pump", "shake fist",
    "slap gesture", "facepalm", "cheer loudly", "jump excitedly", "dance happily",
    "stomp foot", "kneel down", "stand up", "sit down", "lean forward",
    "lean back", "step forward", "step backward", "turn away", "turn toward",
    "look around", "look down", "look up", "hang head", "hug gesture",
    "open arms", "clench fists", "tap foot", "check watch", "fold hands",
    "pray politely", "applaud softly", "argue angrily", "apologize humbly", "idle stand",
]

DURATIONS = [1.5, 2.0, 2.5, 3.0]

# joints a procedural clip may animate, with per-joint amplitude caps (deg)
ANIMATABLE = {
    "left_arm": 45, "right_arm": 45, "left_forearm": 40, "right_forearm": 40,
    "left_hand": 25, "right_hand": 25, "left_shoulder": 15, "right_shoulder": 15,
    "spine": 12, "spine1": 10, "spine2": 10, "neck": 15, "head": 20,
    "left_upleg": 15, "right_upleg": 15, "left_leg": 20, "right_leg": 20,
}


def base_pose(n_joints, index):
    """Relaxed A-pose: arms rotated down from the modeled T-pose."""
    rot = np.zeros((n_joints, 3))
    rot[index["left_arm"]] = [0.0, 0.0, -65.0]
    rot[index["right_arm"]] = [0.0, 0.0, 65.0]
    rot[index["left_forearm"]] = [0.0, 0.0, -8.0]
    rot[index["right_forearm"]] = [0.0, 0.0, 8.0]
    return rot


def make_tracks(skel: Skeleton, rng: np.random.Generator):
    index = {n: i for i, n in enumerate(skel.names)}
    names = list(ANIMATABLE)
    tracks = {}
    for mi, name in enumerate(MOTION_NAMES):
        duration = DURATIONS[mi % len(DURATIONS)]
        n_channels = int(rng.integers(2, 5))
        chosen = rng.choice(len(names), size=n_channels, replace=False)
        channels = []
        for j in chosen:
            joint = names[int(j)]
            axis = int(rng.integers(0, 3))
            amp = float(rng.uniform(8.0, ANIMATABLE[joint]))
            freq = float(rng.uniform(0.3, 1.0))
            phase = float(rng.uniform(0.0, 2 * np.pi))
            channels.append((index[joint], axis, amp, freq, phase))
        kfs = []
        for t in np.arange(0.0, duration + 1e-9, 0.5):
            rot = base_pose(skel.n_joints, index).copy()
            for joint, axis, amp, freq, phase in channels:
                rot[joint, axis] += amp * np.sin(2 * np.pi * freq * t + phase)
            kfs.append((float(t), Pose(rot, np.zeros(3))))
        mid = name.replace(" ", "_")
        tracks[mid] = (name, duration, PoseTrack(tuple(kfs)))
    return tracks


# -- emotions and faces -------------------------------------------------------

EMOTIONS = [
    # the nine scenario expressions
    ("neutral", 0.5, 0.5, 0.5),
    ("happy", 1.0, 0.7, 0.8),
    ("delight", 0.9, 0.6, 0.6),
    ("glad", 0.9, 0.7, 0.7),
    ("joyful", 0.8, 0.7, 0.6),
    ("respectful", 0.9, 0.4, 0.8),
    ("concerned", 0.3, 0.6, 0.4),
    ("scared", 0.3, 0.8, 0.3),
    ("annoyed", 0.1, 0.8, 0.3),
    # filled out to the 21-expression pool
    ("sad", 0.2, 0.3, 0.3),
    ("angry", 0.1, 0.9, 0.6),
    ("surprised", 0.6, 0.9, 0.4),
    ("disgusted", 0.2, 0.6, 0.6),
    ("calm", 0.7, 0.2, 0.6),
    ("bored", 0.4, 0.2, 0.4),
    ("excited", 0.9, 0.9, 0.6),
    ("proud", 0.8, 0.6, 0.9),
    ("ashamed", 0.2, 0.4, 0.2),
    ("confused", 0.4, 0.6, 0.3),
    ("curious", 0.7, 0.6, 0.5),
    ("grateful", 0.8, 0.4, 0.5),
]

NEUTRAL_FACE = {
    "brow_l_0": (-0.62, 0.40), "brow_l_1": (-0.48, 0.46), "brow_l_2": (-0.33, 0.46), "brow_l_3": (-0.18, 0.40),
    "brow_r_0": (0.18, 0.40), "brow_r_1": (0.33, 0.46), "brow_r_2": (0.48, 0.46), "brow_r_3": (0.62, 0.40),
    "eye_l_0": (-0.58, 0.18), "eye_l_1": (-0.22, 0.18), "eye_l_2": (-0.40, 0.26), "eye_l_3": (-0.40, 0.10),
    "eye_r_0": (0.22, 0.18), "eye_r_1": (0.58, 0.18), "eye_r_2": (0.40, 0.26), "eye_r_3": (0.40, 0.10),
    "mouth_0": (-0.32, -0.42), "mouth_1": (0.32, -0.42),
    "mouth_2": (-0.10, -0.34), "mouth_3": (0.10, -0.34),
    "mouth_4": (-0.10, -0.52), "mouth_5": (0.10, -0.52),
    "cheek_l": (-0.70, -0.12), "cheek_r": (0.70, -0.12),
}


def face_for_vad(vad: VadVector, rng: np.random.Generator) -> FaceLandmarks:
    sv, sa, sd = vad.valence - 0.5, vad.arousal - 0.5, vad.dominance - 0.5
    pts = {k: list(v) for k, v in NEUTRAL_FACE.items()}
    # valence: smile corners up, lower lip follows, brows ease up
    for k in ("mouth_0", "mouth_1"):
        pts[k][1] += 0.25 * sv
    for k in ("mouth_4", "mouth_5"):
        pts[k][1] -= 0.10 * sv
    for k in pts:
        if k.startswith("brow"):
            pts[k][1] += 0.05 * sv
    # arousal: eyes and mouth open, brows rise
    for k in ("eye_l_2", "eye_r_2"):
        pts[k][1] += 0.12 * sa
    for k in ("eye_l_3", "eye_r_3"):
        pts[k][1] -= 0.08 * sa
    for k in ("mouth_2", "mouth_3"):
        pts[k][1] += 0.08 * sa
    for k in ("mouth_4", "mouth_5"):
        pts[k][1] -= 0.08 * sa
    for k in pts:
        if k.startswith("brow"):
            pts[k][1] += 0.15 * sa
    # dominance: inner brows press down, face widens a touch
    for k in ("brow_l_3", "brow_r_0"):
        pts[k][1] -= 0.18 * sd
    for k in ("brow_l_0", "brow_r_3"):
        pts[k][1] += 0.04 * sd
    pts["cheek_l"][0] -= 0.05 * sd
    pts["cheek_r"][0] += 0.05 * sd
    coords = []
    for name in LANDMARK_NAMES:
        x, y = pts[name]
        coords += [x + rng.normal(0, 0.015), y + rng.normal(0, 0.015)]
    return FaceLandmarks(np.round(np.array(coords), 4))


# -- lexicon ------------------------------------------------------------------

MOTION_TOKEN_VADS = {
    "wave": (0.8, 0.6, 0.5), "hand": (0.5, 0.4, 0.5), "hands": (0.5, 0.4, 0.5),
    "raise": (0.6, 0.6, 0.6), "arms": (0.5, 0.4, 0.5), "offer": (0.7, 0.4, 0.6),
    "handshake": (0.8, 0.5, 0.6), "high": (0.8, 0.7, 0.6), "five": (0.8, 0.7, 0.5),
    "clap": (0.8, 0.7, 0.5), "bow": (0.6, 0.3, 0.2), "deeply": (0.5, 0.4, 0.3),
    "slightly": (0.5, 0.3, 0.5), "nod": (0.7, 0.4, 0.5), "head": (0.5, 0.4, 0.5),
    "shake": (0.3, 0.6, 0.5), "tilt": (0.5, 0.4, 0.4), "point": (0.4, 0.6, 0.7),
    "forward": (0.6, 0.5, 0.6), "upward": (0.6, 0.5, 0.6), "cross": (0.3, 0.5, 0.6),
    "uncross": (0.6, 0.4, 0.5), "hips": (0.5, 0.5, 0.6), "shrug": (0.4, 0.4, 0.3),
    "shoulders": (0.5, 0.4, 0.5), "stretch": (0.6, 0.4, 0.5), "rub": (0.5, 0.4, 0.4),
    "wring": (0.3, 0.6, 0.3), "scratch": (0.4, 0.4, 0.4), "cover": (0.3, 0.5, 0.3),
    "face": (0.5, 0.4, 0.5), "mouth": (0.5, 0.4, 0.5), "wipe": (0.4, 0.4, 0.4),
    "forehead": (0.5, 0.4, 0.5), "salute": (0.7, 0.6, 0.7), "beckon": (0.6, 0.5, 0.7),
    "closer": (0.7, 0.5, 0.6), "push": (0.2, 0.7, 0.7), "away": (0.3, 0.5, 0.5),
    "reach": (0.6, 0.5, 0.5), "pull": (0.4, 0.6, 0.6), "back": (0.4, 0.4, 0.4),
    "thumbs": (0.7, 0.5, 0.6), "up": (0.7, 0.5, 0.6), "down": (0.3, 0.4, 0.4),
    "fist": (0.3, 0.8, 0.7), "pump": (0.8, 0.8, 0.6), "slap": (0.1, 0.9, 0.7),
    "gesture": (0.5, 0.5, 0.5), "facepalm": (0.2, 0.5, 0.3), "cheer": (0.9, 0.8, 0.6),
    "loudly": (0.5, 0.8, 0.6), "jump": (0.8, 0.8, 0.5), "excitedly": (0.9, 0.9, 0.6),
    "dance": (0.9, 0.8, 0.5), "happily": (0.9, 0.7, 0.6), "stomp": (0.2, 0.8, 0.6),
    "foot": (0.5, 0.4, 0.5), "kneel": (0.4, 0.3, 0.2), "stand": (0.5, 0.4, 0.6),
    "sit": (0.5, 0.3, 0.4), "lean": (0.5, 0.4, 0.5), "step": (0.5, 0.5, 0.5),
    "backward": (0.4, 0.4, 0.4), "turn": (0.4, 0.5, 0.5), "toward": (0.6, 0.5, 0.5),
    "look": (0.5, 0.5, 0.5), "around": (0.5, 0.5, 0.4), "hang": (0.2, 0.3, 0.2),
    "hug": (0.9, 0.6, 0.5), "open": (0.7, 0.5, 0.5), "clench": (0.2, 0.8, 0.6),
    "fists": (0.2, 0.8, 0.6), "tap": (0.4, 0.6, 0.4), "check": (0.4, 0.5, 0.5),
    "watch": (0.5, 0.4, 0.5), "fold": (0.5, 0.3, 0.4), "pray": (0.6, 0.3, 0.3),
    "politely": (0.7, 0.3, 0.4), "applaud": (0.8, 0.6, 0.5), "softly": (0.6, 0.2, 0.4),
    "argue": (0.2, 0.8, 0.6), "angrily": (0.1, 0.9, 0.6), "apologize": (0.4, 0.4, 0.2),
    "humbly": (0.5, 0.3, 0.2), "idle": (0.5, 0.2, 0.4), "quarrel": (0.1, 0.8, 0.5),
    "criticize": (0.2, 0.7, 0.8), "greet": (0.8, 0.5, 0.5), "smile": (0.9, 0.5, 0.6),
    "frown": (0.2, 0.5, 0.5), "ignore": (0.3, 0.3, 0.6), "listen": (0.6, 0.4, 0.4),
}
# deliberately absent: stopword-ish tokens ("at", "on", "self", "both") so
# phrase names exercise the resolvable-token-mean fallback


def write_lexicon(path: Path):
    lines = ["# term\tvalence\tarousal\tdominance"]
    for name, v, a, d in EMOTIONS:
        lines.append(f"{name}\t{v}\t{a}\t{d}")
    for term, (v, a, d) in sorted(MOTION_TOKEN_VADS.items()):
        lines.append(f"{term}\t{v}\t{a}\t{d}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


# -- grammar ------------------------------------------------------------------

RELATIONS = [
    ("friends", "medium", "medium"),
    ("brothers", "medium", "high"),
    ("strangers", "medium", "low"),
    ("employee-to-employer", "low", "medium"),
    ("teacher-to-student", "high", "high"),
    ("colleagues", "medium", "medium"),
]


def write_grammar(path: Path, motions):
    doc = {
        "schema": "grammar/1",
        "name": "starter",
        "transform": {"distance_range_m": [0.5, 3.0]},
        "emotion_transition_s": 1.0,
        "relations": [{"name": n, "dominance": d, "intimacy": i} for n, d, i in RELATIONS],
        "motions": [{"id": mid, "name": name, "duration_s": duration,
                     "track": f"tracks/{mid}.json"}
                    for mid, (name, duration, _) in motions.items()],
        "emotions": [{"id": name, "name": name, "vad": [v, a, d],
                      "landmarks": f"faces/{name}.json"}
                     for name, v, a, d in EMOTIONS],
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def main():
    (ASSETS / "tracks").mkdir(parents=True, exist_ok=True)
    (ASSETS / "faces").mkdir(parents=True, exist_ok=True)

    skel = make_skeleton()
    assert skel.n_joints == 65, skel.n_joints
    save_skeleton(skel, ASSETS / "skeleton.tsv")

    rng = np.random.default_rng(20240817)
    tracks = make_tracks(skel, rng)
    assert len(tracks) == 65
    for mid, (_, _, track) in tracks.items():
        save_pose_track(track, ASSETS / "tracks" / f"{mid}.json", skeleton_name="starter_65", ndigits=2)

    face_rng = np.random.default_rng(909)
    for name, v, a, d in EMOTIONS:
        face = face_for_vad(VadVector(v, a, d), face_rng)
        save_face(ASSETS / "faces" / f"{name}.json", name, face, VadVector(v, a, d))

    write_lexicon(ASSETS / "lexicon.tsv")
    write_grammar(ASSETS / "grammar.json", tracks)
    n_files = len(list(ASSETS.rglob("*.json"))) + len(list(ASSETS.rglob("*.tsv")))
    print(f"wrote {n_files} asset files under {ASSETS}")


if __name__ == "__main__":
    main()
