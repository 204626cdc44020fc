"""The groove autoencoder.

Encoder: per-step token projection of the stacked hit/velocity/offset
grids plus sinusoidal positions, a small pre-norm self-attention stack,
mean-pooling, and linear heads for the latent Gaussian. Decoder mirrors
it: the latent is projected and broadcast to every step, learned positions
are added, the stack runs, and per-step heads emit hit logits, velocity
logits and raw offsets.

The live path always decodes from the posterior mean; sampling happens
only where a caller passes explicit noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import ConfigError
from ..hvo import HvoPattern
from ..outputs import VoiceGrouping
from .layers import Block, LayerNorm, Linear, sinusoidal_positions
from .params import Hyperparams, ModelWeights, ParamStore

LOGVAR_CLAMP = 8.0


@dataclass(frozen=True)
class LatentGaussian:
    mu: np.ndarray
    log_var: np.ndarray


@dataclass(frozen=True)
class DecodedGrids:
    """Decoder output bundle: probabilities and attributes, each [T, V]."""
    hit_probs: np.ndarray
    velocities: np.ndarray
    offsets: np.ndarray


@dataclass
class DensityMap:
    """Per-channel (voice-group) hit density in [0, 1]; 0.5 keeps cells the
    decoder considers more likely than not."""

    values: Dict[int, float] = field(default_factory=dict)
    default: float = 0.5

    def of(self, channel: int) -> float:
        d = self.values.get(channel, self.default)
        if not 0.0 <= d <= 1.0:
            raise ConfigError(f"density must be in [0,1], got {d}")
        return d

    def set(self, channel: int, value: float) -> None:
        if not 0.0 <= value <= 1.0:
            raise ConfigError(f"density must be in [0,1], got {value}")
        self.values[channel] = value


@dataclass(frozen=True)
class LossParts:
    total: float
    bce_hits: float
    mse_vel: float
    mse_off: float
    kl: float

    def as_dict(self) -> Dict[str, float]:
        return {"total": self.total, "bce_hits": self.bce_hits,
                "mse_vel": self.mse_vel, "mse_off": self.mse_off, "kl": self.kl}


def _softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class GrooveAutoencoder:
    """Owns the parameter store and the encoder/decoder layer graph."""

    def __init__(self, hp: Hyperparams, seed: int = 0):
        self.hp = hp
        self.store = ParamStore()
        rng = np.random.default_rng(seed)
        d, z = hp.token_dim, hp.latent

        self.enc_in = Linear(self.store, "enc.in", 3 * hp.voices, d, rng)
        self.enc_blocks = [Block(self.store, f"enc.b{i}", d, hp.heads, hp.ff_dim, rng)
                           for i in range(hp.layers)]
        self.enc_lnf = LayerNorm(self.store, "enc.lnf", d)
        self.head_mu = Linear(self.store, "enc.mu", d, z, rng)
        self.head_lv = Linear(self.store, "enc.lv", d, z, rng)

        self.dec_in = Linear(self.store, "dec.in", z, d, rng)
        # O(1) scale so step tokens differentiate from the first update on
        self.dec_pos = self.store.add("dec.pos", rng.normal(0.0, 0.5, size=(hp.steps, d)))
        self._g_dec_pos = self.store.grads["dec.pos"]
        self.dec_blocks = [Block(self.store, f"dec.b{i}", d, hp.heads, hp.ff_dim, rng)
                           for i in range(hp.layers)]
        self.dec_lnf = LayerNorm(self.store, "dec.lnf", d)
        self.dec_out = Linear(self.store, "dec.out", d, 3 * hp.voices, rng)

        self._enc_pe = sinusoidal_positions(hp.steps, d)

    @property
    def weights(self) -> ModelWeights:
        return ModelWeights(hyperparams=self.hp, store=self.store)

    # ---- batch plumbing ----

    def stack_batch(self, patterns: Sequence[HvoPattern]) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        hits = np.stack([p.hits.astype(np.float64) for p in patterns])
        vels = np.stack([p.velocities for p in patterns])
        offs = np.stack([p.offsets for p in patterns])
        if hits.shape[1:] != (self.hp.steps, self.hp.voices):
            raise ConfigError(
                f"pattern grid {hits.shape[1:]} does not match model "
                f"({self.hp.steps}, {self.hp.voices})")
        return hits, vels, offs

    # ---- encoder ----

    def encode_batch(self, hits: np.ndarray, vels: np.ndarray,
                     offs: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        x = np.concatenate([hits, vels, offs], axis=-1)
        h = self.enc_in.forward(x) + self._enc_pe
        for block in self.enc_blocks:
            h = block.forward(h)
        h = self.enc_lnf.forward(h)
        pooled = h.mean(axis=1)
        mu = self.head_mu.forward(pooled)
        lv_raw = self.head_lv.forward(pooled)
        self._lv_pass = (np.abs(lv_raw) < LOGVAR_CLAMP)
        return mu, np.clip(lv_raw, -LOGVAR_CLAMP, LOGVAR_CLAMP)

    def encode_backward(self, dmu: np.ndarray, dlv: np.ndarray) -> None:
        dpooled = self.head_mu.backward(dmu)
        dpooled += self.head_lv.backward(dlv * self._lv_pass)
        dh = np.repeat(dpooled[:, None, :] / self.hp.steps, self.hp.steps, axis=1)
        dh = self.enc_lnf.backward(dh)
        for block in reversed(self.enc_blocks):
            dh = block.backward(dh)
        self.enc_in.backward(dh)

    # ---- decoder ----

    def decode_batch(self, z: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        tok = self.dec_in.forward(z)
        h = np.repeat(tok[:, None, :], self.hp.steps, axis=1) + self.dec_pos
        for block in self.dec_blocks:
            h = block.forward(h)
        h = self.dec_lnf.forward(h)
        y = self.dec_out.forward(h)
        v = self.hp.voices
        return y[..., :v], y[..., v:2 * v], y[..., 2 * v:]

    def decode_backward(self, d_hit_logits: np.ndarray, d_vel_logits: np.ndarray,
                        d_off_raw: np.ndarray) -> np.ndarray:
        dy = np.concatenate([d_hit_logits, d_vel_logits, d_off_raw], axis=-1)
        dh = self.dec_out.backward(dy)
        dh = self.dec_lnf.backward(dh)
        for block in reversed(self.dec_blocks):
            dh = block.backward(dh)
        self._g_dec_pos += dh.sum(axis=0)
        dtok = dh.sum(axis=1)
        return self.dec_in.backward(dtok)

    # ---- loss ----

    def loss_batch(self, hits: np.ndarray, vels: np.ndarray, offs: np.ndarray,
                   noise: np.ndarray, beta: float,
                   compute_grads: bool = True) -> LossParts:
        """Evidence-style objective on one batch.

        bce is a mean over every grid cell; the velocity and offset squared
        errors are averaged over ground-truth hit cells only (attributes are
        undefined where there is no hit); kl is summed over latent
        dimensions and averaged over the batch; total adds beta * kl.
        """
        if beta < 0:
            raise ValueError("beta must be >= 0")
        b = hits.shape[0]
        mu, lv = self.encode_batch(hits, vels, offs)
        sigma = np.exp(0.5 * lv)
        z = mu + sigma * noise
        hit_logits, vel_logits, off_raw = self.decode_batch(z)

        n_cells = hits.size
        bce = float((_softplus(hit_logits) - hit_logits * hits).sum() / n_cells)

        pred_vel = _sigmoid(vel_logits)
        th = np.tanh(off_raw)
        pred_off = 0.5 * th
        n_hits = hits.sum()
        if n_hits > 0:
            mse_vel = float((hits * (pred_vel - vels) ** 2).sum() / n_hits)
            mse_off = float((hits * (pred_off - offs) ** 2).sum() / n_hits)
        else:
            mse_vel = mse_off = 0.0

        kl = float(0.5 * (mu ** 2 + np.exp(lv) - 1.0 - lv).sum() / b)
        total = bce + mse_vel + mse_off + beta * kl
        parts = LossParts(total, bce, mse_vel, mse_off, kl)

        if not compute_grads:
            return parts

        d_hl = (_sigmoid(hit_logits) - hits) / n_cells
        if n_hits > 0:
            d_vel = 2.0 * hits * (pred_vel - vels) / n_hits
            d_off = 2.0 * hits * (pred_off - offs) / n_hits
        else:
            d_vel = np.zeros_like(pred_vel)
            d_off = np.zeros_like(pred_off)
        d_vl = d_vel * pred_vel * (1.0 - pred_vel)
        d_or = d_off * 0.5 * (1.0 - th ** 2)

        dz = self.decode_backward(d_hl, d_vl, d_or)
        dmu = dz + beta * mu / b
        dlv = dz * noise * 0.5 * sigma + beta * 0.5 * (np.exp(lv) - 1.0) / b
        self.encode_backward(dmu, dlv)
        return parts

    # ---- inference conveniences ----

    def encode(self, pattern: HvoPattern) -> LatentGaussian:
        hits, vels, offs = self.stack_batch([pattern])
        mu, lv = self.encode_batch(hits, vels, offs)
        return LatentGaussian(mu=mu[0].copy(), log_var=lv[0].copy())

    def encode_mean(self, pattern: HvoPattern) -> np.ndarray:
        return self.encode(pattern).mu

    def decode_logits(self, z: np.ndarray) -> DecodedGrids:
        z = np.asarray(z, dtype=np.float64)
        if z.shape != (self.hp.latent,):
            raise ConfigError(f"latent must have length {self.hp.latent}")
        hl, vl, oraw = self.decode_batch(z[None, :])
        return DecodedGrids(hit_probs=_sigmoid(hl[0]),
                            velocities=_sigmoid(vl[0]),
                            offsets=0.5 * np.tanh(oraw[0]))


def reparameterize(g: LatentGaussian, noise: np.ndarray) -> np.ndarray:
    """z_i = mu_i + exp(log_var_i / 2) * noise_i."""
    noise = np.asarray(noise, dtype=np.float64)
    if noise.shape != g.mu.shape:
        raise ConfigError("noise length must match the latent")
    return g.mu + np.exp(0.5 * g.log_var) * noise


def kl_divergence(g: LatentGaussian) -> float:
    """KL(N(mu, sigma) || N(0, 1)), summed over dimensions."""
    return float(0.5 * (g.mu ** 2 + np.exp(g.log_var) - 1.0 - g.log_var).sum())


def extract_pattern(decoded: DecodedGrids, densities: DensityMap,
                    grouping: VoiceGrouping) -> HvoPattern:
    """Threshold hit probabilities by per-group density: a cell becomes a
    hit when hit_prob >= 1 - density of its voice's group. Attributes are
    copied at hits and zeroed elsewhere."""
    t, v = decoded.hit_probs.shape
    grouping.validate(v)
    thresholds = np.array([1.0 - densities.of(grouping.channel_of[voice])
                           for voice in range(v)])
    hits = (decoded.hit_probs >= thresholds).astype(np.uint8)
    return HvoPattern(hits=hits,
                      velocities=np.where(hits, decoded.velocities, 0.0),
                      offsets=np.where(hits, decoded.offsets, 0.0),
                      bars=t // 16)
