"""Finite-difference verification of the analytic backward pass.

Runs the full loss on a tiny double-precision model and compares every
analytic parameter gradient against central differences. The numeric side
never touches the backward code, so it stays an independent oracle.
"""

from __future__ import annotations

from typing import Tuple

import numpy as np

from .params import TINY_HPARAMS, Hyperparams
from .vae import GrooveAutoencoder

FD_STEP = 1e-5


def _tiny_batch(hp: Hyperparams, rng: np.random.Generator, batch: int = 3):
    hits = (rng.random((batch, hp.steps, hp.voices)) < 0.45).astype(np.float64)
    vels = hits * rng.uniform(0.2, 1.0, size=hits.shape)
    offs = hits * rng.uniform(-0.4, 0.4, size=hits.shape)
    noise = rng.standard_normal((batch, hp.latent))
    return hits, vels, offs, noise


def grad_check(hp: Hyperparams = TINY_HPARAMS, seed: int = 0,
               beta: float = 0.3, h: float = FD_STEP) -> float:
    """Max relative error between analytic and numeric gradients."""
    model = GrooveAutoencoder(hp, seed=seed)
    rng = np.random.default_rng(seed + 1)
    hits, vels, offs, noise = _tiny_batch(hp, rng)

    model.store.zero_grads()
    model.loss_batch(hits, vels, offs, noise, beta, compute_grads=True)
    analytic = {k: g.copy() for k, g in model.store.grads.items()}

    def loss_at() -> float:
        return model.loss_batch(hits, vels, offs, noise, beta,
                                compute_grads=False).total

    worst = 0.0
    for name, p in model.store.params.items():
        flat = p.reshape(-1)
        a = analytic[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            plus = loss_at()
            flat[i] = orig - h
            minus = loss_at()
            flat[i] = orig
            numeric = (plus - minus) / (2.0 * h)
            err = abs(a[i] - numeric) / max(abs(a[i]), abs(numeric), 1e-8)
            worst = max(worst, err)
    return worst


def perturbation_sanity(hp: Hyperparams = TINY_HPARAMS, seed: int = 0) -> Tuple[float, float]:
    """Loss at theta vs loss after a zero perturbation: must match exactly."""
    model = GrooveAutoencoder(hp, seed=seed)
    rng = np.random.default_rng(seed + 1)
    hits, vels, offs, noise = _tiny_batch(hp, rng)
    before = model.loss_batch(hits, vels, offs, noise, 0.3, compute_grads=False).total
    for p in model.store.params.values():
        p += 0.0
    after = model.loss_batch(hits, vels, offs, noise, 0.3, compute_grads=False).total
    return before, after
