"""Synthetic groove corpus.

Parametric kick/snare/hat templates with random syncopation, accent
jitter and gaussian micro-timing, deterministic per seed. This is the
desk-scale training set; it is deliberately simple enough to train on a
laptop CPU in minutes while still exercising velocity and offset
modelling.
"""

from __future__ import annotations

from typing import List

import numpy as np

from ..hvo import DEFAULT_VOICES, HvoPattern

KICK, SNARE, CLOSED_HAT = 0, 1, 2

_KICK_MAIN_PROB = 0.9
_KICK_SYNC_PROB = 0.15
_SNARE_PROB = 0.85
_HAT_COVERAGES = (4, 2, 1)  # step strides: quarter, eighth, sixteenth
_OFFSET_STD = 0.06
_OFFSET_MAX = 0.5 - 1e-9

_ACCENT = {
    "kick_main": 0.9,
    "kick_sync": 0.65,
    "snare": 0.85,
    "hat_beat": 0.6,
    "hat_off": 0.45,
}


def _jitter(rng: np.random.Generator, base: float) -> float:
    return float(np.clip(base + rng.uniform(-0.1, 0.1), 0.05, 1.0))


def synth_pattern(rng: np.random.Generator, voices: int = DEFAULT_VOICES) -> HvoPattern:
    p = HvoPattern.zeros(voices=voices)
    steps = p.steps

    def put(step: int, voice: int, accent: str) -> None:
        p.hits[step, voice] = 1
        p.velocities[step, voice] = _jitter(rng, _ACCENT[accent])
        p.offsets[step, voice] = float(np.clip(rng.normal(0.0, _OFFSET_STD),
                                               -0.5, _OFFSET_MAX))

    kick_main = {s for s in range(0, steps, 8)}            # beats 1 and 3
    snare_main = {s for s in range(4, steps, 8)}           # beats 2 and 4
    for s in sorted(kick_main):
        if rng.random() < _KICK_MAIN_PROB:
            put(s, KICK, "kick_main")
    for s in range(steps):
        if s not in kick_main and rng.random() < _KICK_SYNC_PROB:
            put(s, KICK, "kick_sync")
    for s in sorted(snare_main):
        if rng.random() < _SNARE_PROB:
            put(s, SNARE, "snare")
    stride = _HAT_COVERAGES[int(rng.integers(len(_HAT_COVERAGES)))]
    for s in range(0, steps, stride):
        put(s, CLOSED_HAT, "hat_beat" if s % 4 == 0 else "hat_off")
    return p


def synth_corpus(seed: int, n: int, voices: int = DEFAULT_VOICES) -> List[HvoPattern]:
    if n <= 0:
        raise ValueError("corpus size must be > 0")
    rng = np.random.default_rng(seed)
    return [synth_pattern(rng, voices=voices) for _ in range(n)]
