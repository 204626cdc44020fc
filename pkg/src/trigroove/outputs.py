"""Output adaptation: micro-timed note scheduling, voice-to-channel grouping,
simulated gate/value frame rendering, and spline-based modulation curves.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import ConfigError
from .hvo import BEATS_PER_BAR, DEFAULT_VOICES, STEP_BEATS, HvoPattern

#: Default reduction of the 9 drum voices onto 5 output channels:
#: kick | snare | hats | toms | cymbals.
DEFAULT_GROUP_MAP = (0, 1, 2, 2, 3, 3, 3, 4, 4)


@dataclass(frozen=True)
class VoiceGrouping:
    """Total map voice -> channel, used both for CV reduction and for the
    per-group density/mute controls."""

    channel_of: Tuple[int, ...] = DEFAULT_GROUP_MAP
    labels: Optional[Tuple[str, ...]] = None  # channels are unlabeled by default

    @property
    def voices(self) -> int:
        return len(self.channel_of)

    @property
    def channels(self) -> int:
        return max(self.channel_of) + 1

    def validate(self, voices: int) -> None:
        if len(self.channel_of) != voices:
            raise ConfigError(f"grouping covers {len(self.channel_of)} voices, need {voices}")
        if sorted(set(self.channel_of)) != list(range(self.channels)):
            raise ConfigError("channels must be contiguous from 0")

    @classmethod
    def identity(cls, voices: int = DEFAULT_VOICES) -> "VoiceGrouping":
        return cls(channel_of=tuple(range(voices)))


@dataclass(frozen=True)
class ScheduledNote:
    time_s: float
    voice: int
    velocity: float


@dataclass(frozen=True)
class CvFrame:
    time_s: float
    channel: int
    gate: bool
    value: float


def beats_to_seconds(beats: float, bpm: float) -> float:
    return beats * 60.0 / bpm


def schedule_pattern(pattern: HvoPattern, bar_start_beats: float, bpm: float) -> List[ScheduledNote]:
    """Emission times for every hit, honoring micro-timing offsets.

    A negative offset on step 0 clamps to the bar start: generation is
    bar-synchronous, so nothing may sound before the bar begins.
    """
    notes = []
    for step, voice in zip(*np.nonzero(pattern.hits)):
        beats = (float(step) + float(pattern.offsets[step, voice])) * STEP_BEATS
        if beats < 0.0:
            beats = 0.0
        t = beats_to_seconds(bar_start_beats + beats, bpm)
        notes.append(ScheduledNote(time_s=t, voice=int(voice),
                                   velocity=float(pattern.velocities[step, voice])))
    notes.sort(key=lambda n: (n.time_s, n.voice))
    return notes


def group_step(pattern: HvoPattern, step: int, grouping: VoiceGrouping) -> List[Tuple[bool, float]]:
    """Reduce one grid step to per-channel (gate, value): gates OR together,
    values take the loudest member."""
    grouping.validate(pattern.voices)
    out = [(False, 0.0)] * grouping.channels
    for voice in range(pattern.voices):
        if pattern.hits[step, voice]:
            ch = grouping.channel_of[voice]
            gate, value = out[ch]
            out[ch] = (True, max(value, float(pattern.velocities[step, voice])))
    return out


@dataclass(frozen=True)
class CvOnset:
    time_s: float
    channel: int
    velocity: float


def render_cv(onsets: Sequence[CvOnset], n_channels: int, duration_s: float,
              sample_rate_hz: float, gate_ms: float = 10.0) -> List[CvFrame]:
    """Render onsets to sampled gate/value frames.

    Each onset raises its channel's gate for ``gate_ms`` and latches the
    velocity on the value line until the next onset (sample-and-hold).
    Frames are quantized to the sample grid and emitted per channel in time
    order.
    """
    if sample_rate_hz <= 0:
        raise ValueError("sample_rate_hz must be > 0")
    n_frames = int(round(duration_s * sample_rate_hz))
    gate_frames = max(1, int(round(gate_ms * 1e-3 * sample_rate_hz)))
    gates = np.zeros((n_channels, n_frames), dtype=bool)
    values = np.zeros((n_channels, n_frames))
    per_channel: Dict[int, List[CvOnset]] = {c: [] for c in range(n_channels)}
    for onset in onsets:
        if not 0 <= onset.channel < n_channels:
            raise ConfigError(f"onset channel {onset.channel} out of range")
        per_channel[onset.channel].append(onset)
    for ch, chain in per_channel.items():
        chain.sort(key=lambda o: o.time_s)
        for onset in chain:
            start = int(round(onset.time_s * sample_rate_hz))
            if start >= n_frames:
                continue
            gates[ch, start:start + gate_frames] = True
            values[ch, start:] = onset.velocity  # held until overwritten by the next onset
    frames = []
    for ch in range(n_channels):
        dt = 1.0 / sample_rate_hz
        for i in range(n_frames):
            frames.append(CvFrame(time_s=i * dt, channel=ch,
                                  gate=bool(gates[ch, i]), value=float(values[ch, i])))
    return frames


def fit_modulation_curve(values: Sequence[float], samples_per_step: int) -> np.ndarray:
    """Cyclic uniform Catmull-Rom spline through one value per step.

    The curve passes through every knot exactly; samples are clamped to the
    knot range so inter-knot overshoot never exceeds the written extremes.
    Returns ``len(values) * samples_per_step`` samples, starting at knot 0.
    """
    if samples_per_step < 1:
        raise ValueError("samples_per_step must be >= 1")
    v = np.asarray(values, dtype=float)
    n = len(v)
    if n < 2:
        raise ValueError("need at least 2 knots")
    out = np.empty(n * samples_per_step)
    ts = np.arange(samples_per_step) / samples_per_step
    for i in range(n):
        p0, p1, p2, p3 = v[(i - 1) % n], v[i], v[(i + 1) % n], v[(i + 2) % n]
        a0 = 2.0 * p1
        a1 = p2 - p0
        a2 = 2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3
        a3 = -p0 + 3.0 * p1 - 3.0 * p2 + p3
        seg = 0.5 * (a0 + ts * (a1 + ts * (a2 + ts * a3)))
        seg[0] = p1  # knot-exact regardless of rounding
        out[i * samples_per_step:(i + 1) * samples_per_step] = seg
    return np.clip(out, v.min(), v.max())


def bar_duration_s(bpm: float) -> float:
    return beats_to_seconds(BEATS_PER_BAR, bpm)
