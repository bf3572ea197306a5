"""Latent recurrent sequence model for body poses.

Per step, a prior network maps the recurrent state to a latent Gaussian,
an encoder maps (state, pose) to the approximate posterior, a decoder
maps (state, latent) to a pose, and a tanh recurrence folds (pose,
latent) back into the state. Training minimizes reconstruction MSE plus
the closed-form diagonal-Gaussian KL, with gradients backpropagated
through the reparameterized latents. Everything is plain numpy with
hand-written backward passes so gradients can be checked against finite
differences.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .errors import ContractError, SceneFormatError, TrainError
from .motion import Pose, PoseTrack, mirror_track, resample_track

DT_DEFAULT = 0.5     # seconds between generated poses
SIGMA_MIN = 1e-4


@dataclass
class SequenceModelConfig:
    pose_dim: int
    state_dim: int = 64
    latent_dim: int = 16
    hidden_dim: int = 128
    kl_weight: float = 0.01
    dt: float = DT_DEFAULT


def _softplus(x):
    return np.logaddexp(0.0, x)


def _sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def gaussian_kl(mu_q, sigma_q, mu_p, sigma_p) -> float:
    """KL(N(mu_q, sigma_q^2) || N(mu_p, sigma_p^2)), summed over dims."""
    mu_q, sigma_q = np.asarray(mu_q, float), np.asarray(sigma_q, float)
    mu_p, sigma_p = np.asarray(mu_p, float), np.asarray(sigma_p, float)
    if np.any(sigma_q <= 0) or np.any(sigma_p <= 0):
        raise ContractError("Gaussian standard deviations must be positive")
    terms = np.log(sigma_p / sigma_q) + (sigma_q**2 + (mu_q - mu_p) ** 2) / (2.0 * sigma_p**2) - 0.5
    return float(terms.sum())


class SequenceModel:
    """VRNN-style pose sequence model (see module docstring).

    Parameters live in a flat name -> array dict so the optimizer and
    the finite-difference tests can iterate them uniformly.
    """

    def __init__(self, config: SequenceModelConfig, rng: np.random.Generator | None = None,
                 init_scale: float | None = None):
        self.config = config
        d, h, l, nh = config.pose_dim, config.state_dim, config.latent_dim, config.hidden_dim
        rng = rng if rng is not None else np.random.default_rng(0)

        def init(shape, fan_in):
            if init_scale == 0.0:
                return np.zeros(shape)
            scale = init_scale if init_scale is not None else 1.0 / math.sqrt(fan_in)
            return rng.normal(0.0, scale, size=shape)

        self.params: dict[str, np.ndarray] = {
            "prior.W1": init((nh, h), h), "prior.b1": np.zeros(nh),
            "prior.Wmu": init((l, nh), nh), "prior.bmu": np.zeros(l),
            "prior.Ws": init((l, nh), nh), "prior.bs": np.zeros(l),
            "enc.W1": init((nh, h + d), h + d), "enc.b1": np.zeros(nh),
            "enc.Wmu": init((l, nh), nh), "enc.bmu": np.zeros(l),
            "enc.Ws": init((l, nh), nh), "enc.bs": np.zeros(l),
            "dec.W1": init((nh, h + l), h + l), "dec.b1": np.zeros(nh),
            "dec.Wout": init((d, nh), nh), "dec.bout": np.zeros(d),
            "rec.W": init((h, h + d + l), h + d + l), "rec.b": np.zeros(h),
        }

    # -- forward pieces -------------------------------------------------------

    def _prior(self, state):
        p = self.params
        t = np.tanh(p["prior.W1"] @ state + p["prior.b1"])
        mu = p["prior.Wmu"] @ t + p["prior.bmu"]
        s_pre = p["prior.Ws"] @ t + p["prior.bs"]
        return mu, _softplus(s_pre) + SIGMA_MIN

    def _decode(self, state, z):
        p = self.params
        v = np.concatenate([state, z])
        t = np.tanh(p["dec.W1"] @ v + p["dec.b1"])
        return p["dec.Wout"] @ t + p["dec.bout"]

    def _recur(self, state, x, z):
        p = self.params
        w = np.concatenate([state, x, z])
        return np.tanh(p["rec.W"] @ w + p["rec.b"])

    def _encode(self, state, x):
        p = self.params
        u = np.concatenate([state, x])
        t = np.tanh(p["enc.W1"] @ u + p["enc.b1"])
        mu = p["enc.Wmu"] @ t + p["enc.bmu"]
        s_pre = p["enc.Ws"] @ t + p["enc.bs"]
        return mu, _softplus(s_pre) + SIGMA_MIN

    # -- public API -----------------------------------------------------------

    def init_state(self) -> np.ndarray:
        return np.zeros(self.config.state_dim)

    def step(self, state: np.ndarray, rng: np.random.Generator | None = None,
             z: np.ndarray | None = None) -> tuple[Pose, np.ndarray]:
        """Generate one pose: z from the prior (sampled, or mean if no
        rng) unless supplied; the recurrence consumes the decoded pose."""
        if state.shape != (self.config.state_dim,):
            raise ContractError(f"state must have shape ({self.config.state_dim},)")
        mu_p, sigma_p = self._prior(state)
        if z is None:
            z = mu_p + sigma_p * rng.standard_normal(self.config.latent_dim) if rng is not None else mu_p
        z = np.asarray(z, dtype=float)
        if z.shape != (self.config.latent_dim,):
            raise ContractError(f"latent must have shape ({self.config.latent_dim},)")
        x = self._decode(state, z)
        new_state = self._recur(state, x, z)
        return Pose.from_vector(x), new_state

    def prior_logpdf(self, state: np.ndarray, z: np.ndarray) -> float:
        """Log density of z under the prior at this state (diagonal Gaussian)."""
        mu, sigma = self._prior(state)
        return float(-0.5 * np.sum(((z - mu) / sigma) ** 2 + np.log(2 * np.pi * sigma**2)))

    def sample_prior(self, state: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        mu, sigma = self._prior(state)
        return mu + sigma * rng.standard_normal(self.config.latent_dim)

    def encode_sequence(self, pose_vectors: np.ndarray) -> np.ndarray:
        """Fold observed poses into the state with posterior-mean latents;
        returns the state after the last pose."""
        state = self.init_state()
        for x in np.atleast_2d(pose_vectors):
            mu_q, _ = self._encode(state, x)
            state = self._recur(state, x, mu_q)
        return state

    # -- loss + gradients -----------------------------------------------------

    def loss_and_grads(self, xs: np.ndarray, eps: np.ndarray | None = None,
                       rng: np.random.Generator | None = None,
                       want_grads: bool = True):
        """Reconstruction MSE, summed KL, and (optionally) parameter
        gradients of recon + kl_weight * kl for one sequence.

        xs is (T, pose_dim); eps is the (T, latent_dim) reparameterization
        noise (zeros = posterior means; pass explicitly for grad checks).
        """
        cfg = self.config
        xs = np.asarray(xs, dtype=float)
        if xs.ndim != 2 or xs.shape[1] != cfg.pose_dim:
            raise ContractError(f"sequence must be (T, {cfg.pose_dim}), got {xs.shape}")
        T = xs.shape[0]
        if eps is None:
            eps = (rng.standard_normal((T, cfg.latent_dim)) if rng is not None
                   else np.zeros((T, cfg.latent_dim)))
        p = self.params
        kappa = cfg.kl_weight

        # forward with caches
        cache = []
        state = self.init_state()
        recon_sum = 0.0
        kl = 0.0
        for k in range(T):
            x = xs[k]
            tp = np.tanh(p["prior.W1"] @ state + p["prior.b1"])
            mu_p = p["prior.Wmu"] @ tp + p["prior.bmu"]
            sp_pre = p["prior.Ws"] @ tp + p["prior.bs"]
            sigma_p = _softplus(sp_pre) + SIGMA_MIN

            u = np.concatenate([state, x])
            tq = np.tanh(p["enc.W1"] @ u + p["enc.b1"])
            mu_q = p["enc.Wmu"] @ tq + p["enc.bmu"]
            sq_pre = p["enc.Ws"] @ tq + p["enc.bs"]
            sigma_q = _softplus(sq_pre) + SIGMA_MIN

            z = mu_q + sigma_q * eps[k]

            v = np.concatenate([state, z])
            td = np.tanh(p["dec.W1"] @ v + p["dec.b1"])
            xhat = p["dec.Wout"] @ td + p["dec.bout"]

            w = np.concatenate([state, x, z])
            new_state = np.tanh(p["rec.W"] @ w + p["rec.b"])

            recon_sum += float(np.sum((xhat - x) ** 2))
            kl += gaussian_kl(mu_q, sigma_q, mu_p, sigma_p)
            cache.append((state, x, tp, mu_p, sp_pre, sigma_p, u, tq, mu_q, sq_pre,
                          sigma_q, z, v, td, xhat, w, new_state))
            state = new_state

        recon = recon_sum / (T * cfg.pose_dim)
        if not want_grads:
            return recon, kl, None

        grads = {k: np.zeros_like(a) for k, a in p.items()}
        g_h = np.zeros(cfg.state_dim)
        H, L = cfg.state_dim, cfg.latent_dim
        D = cfg.pose_dim
        for k in range(T - 1, -1, -1):
            (state, x, tp, mu_p, sp_pre, sigma_p, u, tq, mu_q, sq_pre,
             sigma_q, z, v, td, xhat, w, new_state) = cache[k]

            # recurrence: h_k = tanh(rec.W @ w + rec.b)
            da_r = g_h * (1.0 - new_state**2)
            grads["rec.W"] += np.outer(da_r, w)
            grads["rec.b"] += da_r
            dw = p["rec.W"].T @ da_r
            g_h_prev = dw[:H].copy()
            dz = dw[H + D:].copy()

            # decoder + reconstruction term
            dxhat = 2.0 * (xhat - x) / (T * D)
            grads["dec.Wout"] += np.outer(dxhat, td)
            grads["dec.bout"] += dxhat
            dtd = p["dec.Wout"].T @ dxhat
            da_d = dtd * (1.0 - td**2)
            grads["dec.W1"] += np.outer(da_d, v)
            grads["dec.b1"] += da_d
            dv = p["dec.W1"].T @ da_d
            g_h_prev += dv[:H]
            dz += dv[H:]

            # KL term
            dmu_q = kappa * (mu_q - mu_p) / sigma_p**2
            dmu_p = -dmu_q
            dsigma_q = kappa * (-1.0 / sigma_q + sigma_q / sigma_p**2)
            dsigma_p = kappa * (1.0 / sigma_p - (sigma_q**2 + (mu_q - mu_p) ** 2) / sigma_p**3)

            # z = mu_q + sigma_q * eps
            dmu_q += dz
            dsigma_q += dz * eps[k]

            # encoder heads
            dsq_pre = dsigma_q * _sigmoid(sq_pre)
            grads["enc.Wmu"] += np.outer(dmu_q, tq)
            grads["enc.bmu"] += dmu_q
            grads["enc.Ws"] += np.outer(dsq_pre, tq)
            grads["enc.bs"] += dsq_pre
            dtq = p["enc.Wmu"].T @ dmu_q + p["enc.Ws"].T @ dsq_pre
            da_q = dtq * (1.0 - tq**2)
            grads["enc.W1"] += np.outer(da_q, u)
            grads["enc.b1"] += da_q
            du = p["enc.W1"].T @ da_q
            g_h_prev += du[:H]

            # prior heads
            dsp_pre = dsigma_p * _sigmoid(sp_pre)
            grads["prior.Wmu"] += np.outer(dmu_p, tp)
            grads["prior.bmu"] += dmu_p
            grads["prior.Ws"] += np.outer(dsp_pre, tp)
            grads["prior.bs"] += dsp_pre
            dtp = p["prior.Wmu"].T @ dmu_p + p["prior.Ws"].T @ dsp_pre
            da_p = dtp * (1.0 - tp**2)
            grads["prior.W1"] += np.outer(da_p, state)
            grads["prior.b1"] += da_p
            g_h_prev += p["prior.W1"].T @ da_p

            g_h = g_h_prev

        return recon, kl, grads


def elbo_loss(model: SequenceModel, track: PoseTrack, dt: float | None = None) -> tuple[float, float]:
    """(reconstruction MSE, summed KL) of a track resampled to the dt grid,
    evaluated at the posterior means."""
    dt = dt if dt is not None else model.config.dt
    poses = resample_track(track, dt)
    xs = np.stack([p.vector() for p in poses])
    recon, kl, _ = model.loss_and_grads(xs, eps=np.zeros((len(poses), model.config.latent_dim)),
                                        want_grads=False)
    return recon, kl


@dataclass
class TrainTrace:
    losses: list = field(default_factory=list)        # per-epoch total loss
    recon: list = field(default_factory=list)
    kl: list = field(default_factory=list)
    n_keyframes: int = 0                               # after augmentation


def train_sequence_model(model: SequenceModel, tracks: list[PoseTrack], epochs: int,
                         lr: float, rng: np.random.Generator,
                         skeleton=None, dt: float | None = None) -> tuple[SequenceModel, TrainTrace]:
    """Adam training on reconstruction + KL over dt-grid sequences.

    When a skeleton is given, each track is augmented with its
    left-right mirror, doubling the effective keyframe count.
    """
    if not tracks:
        raise TrainError("need at least one track")
    dt = dt if dt is not None else model.config.dt
    data = list(tracks)
    if skeleton is not None:
        data += [mirror_track(skeleton, t) for t in tracks]
    sequences = [np.stack([p.vector() for p in resample_track(t, dt)]) for t in data]
    trace = TrainTrace(n_keyframes=sum(len(t.keyframes) for t in data))

    m = {k: np.zeros_like(v) for k, v in model.params.items()}
    v = {k: np.zeros_like(a) for k, a in model.params.items()}
    b1, b2, eps_adam = 0.9, 0.999, 1e-8
    step = 0
    for _ in range(epochs):
        tot = tot_recon = tot_kl = 0.0
        grad_sum = {k: np.zeros_like(a) for k, a in model.params.items()}
        for xs in sequences:
            recon, kl, grads = model.loss_and_grads(xs, rng=rng)
            tot_recon += recon
            tot_kl += kl
            tot += recon + model.config.kl_weight * kl
            for k in grad_sum:
                grad_sum[k] += grads[k]
        if not math.isfinite(tot):
            raise TrainError(f"sequence-model training diverged (loss={tot}) at step {step}")
        step += 1
        for k, g in grad_sum.items():
            g = g / len(sequences)
            m[k] = b1 * m[k] + (1 - b1) * g
            v[k] = b2 * v[k] + (1 - b2) * g * g
            mhat = m[k] / (1 - b1**step)
            vhat = v[k] / (1 - b2**step)
            model.params[k] -= lr * mhat / (np.sqrt(vhat) + eps_adam)
        trace.losses.append(tot / len(sequences))
        trace.recon.append(tot_recon / len(sequences))
        trace.kl.append(tot_kl / len(sequences))
    return model, trace


# -- model files --------------------------------------------------------------
#
# npz archive: one entry per weight array plus a "_meta" JSON string
# carrying the SequenceModelConfig fields.

def save_sequence_model(model: SequenceModel, path: str | Path) -> None:
    with open(path, "wb") as fh:
        np.savez(fh, _meta=np.asarray(json.dumps(asdict(model.config))), **model.params)


def load_sequence_model(path: str | Path) -> SequenceModel:
    path = Path(path)
    with np.load(path) as data:
        if "_meta" not in data:
            raise SceneFormatError(f"{path}: not a sequence-model archive")
        try:
            cfg = SequenceModelConfig(**json.loads(str(data["_meta"][()])))
        except (TypeError, json.JSONDecodeError) as e:
            raise SceneFormatError(f"{path}: bad model metadata ({e!r})") from None
        model = SequenceModel(cfg, init_scale=0.0)
        for name, ref in model.params.items():
            if name not in data:
                raise SceneFormatError(f"{path}: missing weight {name!r}")
            arr = np.asarray(data[name], dtype=float)
            if arr.shape != ref.shape:
                raise SceneFormatError(
                    f"{path}: weight {name!r} has shape {arr.shape}, expected {ref.shape}")
            model.params[name] = arr
    return model
