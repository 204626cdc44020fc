"""Triangular latent navigation.

Two static reference patterns span the base of a triangle; a third,
re-encoded live from the input buffer, sits at the apex. The playback
point (alpha across the base, tau toward the apex) selects a bilinear
blend of the three reference latents. Corner positions reproduce the
reference latents exactly by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from .errors import ConfigError
from .hvo import HvoPattern


def _clamp01(x: float) -> float:
    return 0.0 if x < 0.0 else 1.0 if x > 1.0 else x


@dataclass(frozen=True)
class TrianglePos:
    alpha: float = 0.5
    tau: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "alpha", _clamp01(float(self.alpha)))
        object.__setattr__(self, "tau", _clamp01(float(self.tau)))


@dataclass(frozen=True)
class TriangleRefs:
    z_a: np.ndarray
    z_b: np.ndarray
    z_r: np.ndarray
    pattern_a: Optional[HvoPattern] = None
    pattern_b: Optional[HvoPattern] = None

    def __post_init__(self):
        if not (self.z_a.shape == self.z_b.shape == self.z_r.shape):
            raise ConfigError("reference latents must share one length")


def barycentric_weights(pos: TrianglePos) -> Tuple[float, float, float]:
    """(w_a, w_b, w_r): non-negative, summing to 1."""
    return ((1.0 - pos.tau) * (1.0 - pos.alpha),
            (1.0 - pos.tau) * pos.alpha,
            pos.tau)


def triangle_interp(refs: TriangleRefs, pos: TrianglePos) -> np.ndarray:
    """z = (1-tau) * lerp(z_a, z_b, alpha) + tau * z_r.

    Evaluated so that weights of exactly 0/1 return the corner latent with
    no floating residue: the apex returns z_r itself, the base corners
    return z_a / z_b.
    """
    if pos.tau == 1.0:
        return refs.z_r.copy()
    if pos.alpha == 0.0:
        base = refs.z_a
    elif pos.alpha == 1.0:
        base = refs.z_b
    else:
        base = (1.0 - pos.alpha) * refs.z_a + pos.alpha * refs.z_b
    if pos.tau == 0.0:
        return base.copy()
    return (1.0 - pos.tau) * base + pos.tau * refs.z_r


def set_reference_r(refs: TriangleRefs, pattern: HvoPattern, model) -> TriangleRefs:
    """Re-encode the live pattern into the apex latent; A and B are untouched.

    ``model`` is anything with an ``encode_mean(pattern) -> vector`` method.
    """
    z_r = model.encode_mean(pattern)
    if z_r.shape != refs.z_a.shape:
        raise ConfigError("encoder latent length does not match references")
    return replace(refs, z_r=z_r)


@dataclass(frozen=True)
class AutonomyState:
    """Self-navigation of the playback point, stepped once per bar.

    ``follow`` tracks recent input activity: tau chases the onset count of
    the last bar (16 onsets saturate it) through an exponential moving
    average while alpha random-walks. ``drift`` is a mean-reverting random
    walk on both coordinates. Both reflect at the [0,1] edges.
    """

    mode: str = "off"  # off | follow | drift
    pos: TrianglePos = TrianglePos()
    ema_lambda: float = 0.5
    walk_sigma: float = 0.05
    ou_theta: float = 0.5

    def __post_init__(self):
        if self.mode not in ("off", "follow", "drift"):
            raise ConfigError(f"unknown autonomy mode {self.mode!r}")
        if not (0.0 < self.ema_lambda < 1.0 and self.walk_sigma >= 0 and self.ou_theta >= 0):
            raise ConfigError("autonomy parameters out of range")


def reflect01(x: float) -> float:
    """Fold a real into [0,1] by reflecting at both edges."""
    r = x % 2.0
    return 2.0 - r if r > 1.0 else r


def autonomy_step(state: AutonomyState, onsets_last_bar: int,
                  noise: Tuple[float, float]) -> AutonomyState:
    """One bar-boundary update. ``noise`` is a pair of standard-normal draws."""
    if onsets_last_bar < 0:
        raise ValueError("onset count must be >= 0")
    n_alpha, n_tau = noise
    if state.mode == "off":
        return state
    if state.mode == "follow":
        target = min(1.0, onsets_last_bar / 16.0)
        tau = state.ema_lambda * state.pos.tau + (1.0 - state.ema_lambda) * target
        alpha = reflect01(state.pos.alpha + state.walk_sigma * n_alpha)
        return replace(state, pos=TrianglePos(alpha=alpha, tau=tau))
    # drift: mean-reverting walk, dt = 1 bar
    def ou(x: float, n: float) -> float:
        return reflect01(x + state.ou_theta * (0.5 - x) + state.walk_sigma * n)
    return replace(state, pos=TrianglePos(alpha=ou(state.pos.alpha, n_alpha),
                                          tau=ou(state.pos.tau, n_tau)))
