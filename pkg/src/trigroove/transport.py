"""Clock and tempo: the internal step clock and tap-tempo estimation.

``tick`` is a pure function of (state, dt); the live server and the offline
simulator drive the same code, which is what makes rendered output
reproducible. Phase accumulates with Kahan compensation so that repeated
exact-step ticks never drift.
"""

from __future__ import annotations

import statistics
from dataclasses import dataclass, replace
from typing import List, Sequence, Tuple

from .errors import NoDataError
from .hvo import STEPS_PER_BAR

BPM_MIN = 40.0
BPM_MAX = 240.0
TAP_WINDOW = 4  # at most this many most-recent intervals


@dataclass(frozen=True)
class TransportState:
    bpm: float = 120.0
    running: bool = False
    step_index: int = 0
    phase: float = 0.0
    _comp: float = 0.0  # Kahan compensation carried between ticks

    @property
    def bar_index(self) -> int:
        return self.step_index // STEPS_PER_BAR

    @property
    def step_duration_s(self) -> float:
        return 60.0 / (self.bpm * 4.0)


def clamp_bpm(bpm: float) -> float:
    return min(BPM_MAX, max(BPM_MIN, bpm))


def tap(tap_times_s: Sequence[float]) -> float:
    """Estimate bpm from the median of the last few inter-tap intervals."""
    if len(tap_times_s) < 2:
        raise NoDataError("tap tempo needs at least 2 taps")
    intervals = [b - a for a, b in zip(tap_times_s, tap_times_s[1:])]
    if any(iv <= 0 for iv in intervals):
        raise ValueError("tap times must be strictly increasing")
    recent = intervals[-min(TAP_WINDOW, len(intervals)):]
    return clamp_bpm(60.0 / statistics.median(recent))


def tick(state: TransportState, dt_s: float) -> Tuple[TransportState, List[int]]:
    """Advance the clock by dt and report every step boundary crossed."""
    if dt_s < 0:
        raise ValueError("dt must be >= 0")
    if not state.running or dt_s == 0.0:
        return state, []
    # Kahan-compensated: acc = phase + dt/step_duration
    y = dt_s / state.step_duration_s - state._comp
    acc = state.phase + y
    comp = (acc - state.phase) - y
    whole = max(0, int(acc))
    crossed = [state.step_index + k for k in range(1, whole + 1)]
    new_phase = max(0.0, acc - whole)
    return replace(state, step_index=state.step_index + whole,
                   phase=new_phase, _comp=comp), crossed
