"""Symbolic pattern core: fixed-grid hit/velocity/offset patterns and the
looper-style input buffer.

Everything here is value-semantic: operations return new objects and never
mutate their arguments, so any thread may call them. The grid is fixed at
4/4, 16 sixteenth steps per bar, 2 bars per loop (8 beats).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Union

import numpy as np

from .errors import ConfigError

STEPS_PER_BAR = 16
BEATS_PER_BAR = 4.0
STEP_BEATS = 0.25
DEFAULT_BARS = 2
DEFAULT_VOICES = 9
LOOP_BEATS = DEFAULT_BARS * BEATS_PER_BAR

#: Conventional reduced drum-kit order for the default 9 voices.
VOICE_NAMES = (
    "kick", "snare", "closed_hat", "open_hat",
    "low_tom", "mid_tom", "high_tom", "crash", "ride",
)


@dataclass(frozen=True)
class GridEvent:
    """A single timed onset: when, which voice, how loud, optional pitch."""

    time_beats: float
    voice: int
    velocity: float
    pitch: Optional[int] = None

    def __post_init__(self):
        if not math.isfinite(self.time_beats) or self.time_beats < 0:
            raise ValueError(f"event time must be finite and >= 0, got {self.time_beats}")
        if not 0.0 <= self.velocity <= 1.0:
            raise ValueError(f"velocity must be in [0,1], got {self.velocity}")
        if self.voice < 0:
            raise ValueError(f"voice must be >= 0, got {self.voice}")
        if self.pitch is not None and not 0 <= self.pitch <= 127:
            raise ValueError(f"pitch must be in 0..127, got {self.pitch}")


@dataclass
class HvoPattern:
    """Hits, velocities and micro-timing offsets on the fixed sixteenth grid.

    ``hits`` is a binary [T, V] grid; ``velocities`` lives in [0, 1] and
    ``offsets`` in [-0.5, 0.5) (fractions of one step). Wherever a cell has
    no hit, its velocity and offset are exactly zero.
    """

    hits: np.ndarray
    velocities: np.ndarray
    offsets: np.ndarray
    bars: int = DEFAULT_BARS

    @property
    def steps(self) -> int:
        return self.hits.shape[0]

    @property
    def voices(self) -> int:
        return self.hits.shape[1]

    @classmethod
    def zeros(cls, voices: int = DEFAULT_VOICES, bars: int = DEFAULT_BARS) -> "HvoPattern":
        t = bars * STEPS_PER_BAR
        return cls(
            hits=np.zeros((t, voices), dtype=np.uint8),
            velocities=np.zeros((t, voices)),
            offsets=np.zeros((t, voices)),
            bars=bars,
        )

    def validate(self) -> None:
        t = self.bars * STEPS_PER_BAR
        if self.hits.shape != (t, self.voices) or self.velocities.shape != self.hits.shape \
                or self.offsets.shape != self.hits.shape:
            raise ConfigError(f"grid shapes disagree: {self.hits.shape}")
        if not np.all(np.isin(self.hits, (0, 1))):
            raise ConfigError("hits must be binary")
        if not (np.all(np.isfinite(self.velocities)) and np.all(np.isfinite(self.offsets))):
            raise ConfigError("non-finite attribute values")
        if np.any(self.velocities < 0) or np.any(self.velocities > 1):
            raise ConfigError("velocities outside [0,1]")
        if np.any(self.offsets < -0.5) or np.any(self.offsets >= 0.5):
            raise ConfigError("offsets outside [-0.5, 0.5)")
        silent = self.hits == 0
        if np.any(self.velocities[silent] != 0) or np.any(self.offsets[silent] != 0):
            raise ConfigError("non-zero attributes at silent cells")

    def copy(self) -> "HvoPattern":
        return HvoPattern(self.hits.copy(), self.velocities.copy(),
                          self.offsets.copy(), self.bars)

    def bar_slice(self, bar: int) -> "HvoPattern":
        """One-bar view (copied) of this pattern, for bar-by-bar playback."""
        lo = bar * STEPS_PER_BAR
        hi = lo + STEPS_PER_BAR
        return HvoPattern(self.hits[lo:hi].copy(), self.velocities[lo:hi].copy(),
                          self.offsets[lo:hi].copy(), bars=1)

    def __eq__(self, other) -> bool:
        if not isinstance(other, HvoPattern):
            return NotImplemented
        return (self.bars == other.bars
                and np.array_equal(self.hits, other.hits)
                and np.array_equal(self.velocities, other.velocities)
                and np.array_equal(self.offsets, other.offsets))


Lifetime = Union[int, float]  # whole bars, or math.inf


@dataclass(frozen=True)
class BufferEntry:
    event: GridEvent
    birth_bar: int
    lifetime_bars: Lifetime

    def alive_at(self, bar: int) -> bool:
        return self.birth_bar + self.lifetime_bars > bar


@dataclass(frozen=True)
class InputBuffer:
    """Looper store of performance events with per-entry lifetimes.

    Frozen buffers ignore both additions and expiry, so their snapshots are
    identical from bar to bar until unfrozen.
    """

    entries: tuple = field(default_factory=tuple)
    loop_bars: int = DEFAULT_BARS
    frozen: bool = False

    def with_frozen(self, frozen: bool) -> "InputBuffer":
        return replace(self, frozen=frozen)

    def cleared(self) -> "InputBuffer":
        return replace(self, entries=())


def quantize_events(events: Iterable[GridEvent], voices: int = DEFAULT_VOICES) -> HvoPattern:
    """Fold timed events onto the 2-bar sixteenth grid.

    Times are interpreted modulo the 8-beat loop. Each event snaps to its
    nearest step (midpoint ties round up, so offsets live in [-0.5, 0.5));
    when two events land on the same (step, voice) cell the louder one wins,
    with ties going to the earlier event time.
    """
    pattern = HvoPattern.zeros(voices=voices)
    # cell -> (velocity, time, offset); the winner under the collision rule
    best: dict = {}
    for ev in events:
        if ev.voice >= voices:
            raise ConfigError(f"event voice {ev.voice} out of range for {voices} voices")
        folded = ev.time_beats % LOOP_BEATS
        pos = folded / STEP_BEATS
        step = math.floor(pos + 0.5)
        offset = pos - step
        if step == DEFAULT_BARS * STEPS_PER_BAR:
            step = 0  # late-in-loop event rounds up into the wrap
        key = (step, ev.voice)
        prev = best.get(key)
        if prev is None or ev.velocity > prev[0] or \
                (ev.velocity == prev[0] and ev.time_beats < prev[1]):
            best[key] = (ev.velocity, ev.time_beats, offset)
    for (step, voice), (velocity, _, offset) in best.items():
        pattern.hits[step, voice] = 1
        pattern.velocities[step, voice] = velocity
        pattern.offsets[step, voice] = offset
    return pattern


def pattern_to_events(pattern: HvoPattern, bar_offset_beats: float = 0.0) -> list:
    """Inverse of quantize_events for playback: one event per hit cell."""
    out = []
    for step, voice in zip(*np.nonzero(pattern.hits)):
        t = bar_offset_beats + (float(step) + float(pattern.offsets[step, voice])) * STEP_BEATS
        out.append(GridEvent(time_beats=t, voice=int(voice),
                             velocity=float(pattern.velocities[step, voice])))
    out.sort(key=lambda e: (e.time_beats, e.voice))
    return out


def buffer_add(buffer: InputBuffer, event: GridEvent, current_bar: int,
               lifetime_bars: Lifetime) -> InputBuffer:
    """Record an event with its birth bar. No-op while the buffer is frozen."""
    if buffer.frozen:
        return buffer
    if not (lifetime_bars == math.inf or (isinstance(lifetime_bars, int) and lifetime_bars > 0)):
        raise ValueError(f"lifetime must be a positive integer or inf, got {lifetime_bars}")
    entry = BufferEntry(event=event, birth_bar=current_bar, lifetime_bars=lifetime_bars)
    return replace(buffer, entries=buffer.entries + (entry,))


def buffer_sweep(buffer: InputBuffer, current_bar: int) -> InputBuffer:
    """Drop expired entries. Frozen buffers skip expiry."""
    if buffer.frozen:
        return buffer
    return replace(buffer, entries=tuple(e for e in buffer.entries if e.alive_at(current_bar)))


def buffer_snapshot(buffer: InputBuffer, current_bar: int,
                    voices: int = DEFAULT_VOICES) -> HvoPattern:
    """Fold the surviving events onto the loop grid.

    Expiry is evaluated at snapshot time; a frozen buffer keeps everything.
    """
    if buffer.frozen:
        live = buffer.entries
    else:
        live = tuple(e for e in buffer.entries if e.alive_at(current_bar))
    return quantize_events((e.event for e in live), voices=voices)
