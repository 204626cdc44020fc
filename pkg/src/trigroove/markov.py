"""Online Markov engine for harmonic accompaniment.

Learns first-order pitch transitions and a note-duration histogram from
live performer input, then assigns pitches and durations to generated
rhythm onsets. Counts only, no decay: a short performance should keep its
own statistics undiluted.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import FormatError, NoDataError
from .hvo import GridEvent

#: Allowed quantized note durations, in beats.
DURATION_BUCKETS = (0.25, 0.5, 1.0, 2.0, 4.0)


@dataclass(frozen=True)
class NoteEvent:
    time_beats: float
    pitch: int
    velocity: float
    duration_beats: float


@dataclass(frozen=True)
class MarkovTable:
    transition_counts: Dict[int, Dict[int, int]] = field(default_factory=dict)
    unigram_counts: Dict[int, int] = field(default_factory=dict)
    duration_hist: Dict[float, int] = field(default_factory=dict)
    last_pitch: Optional[int] = None
    smoothing_k: float = 0.0

    @property
    def empty(self) -> bool:
        return not self.unigram_counts


def quantize_duration(duration_beats: float) -> float:
    """Nearest allowed bucket; exact midpoints take the shorter value."""
    if duration_beats <= 0:
        raise ValueError("duration must be > 0")
    best = DURATION_BUCKETS[0]
    best_err = abs(duration_beats - best)
    for bucket in DURATION_BUCKETS[1:]:
        err = abs(duration_beats - bucket)
        if err < best_err:  # ties keep the earlier (shorter) bucket
            best, best_err = bucket, err
    return best


def observe(table: MarkovTable, pitch: int, duration_beats: float) -> MarkovTable:
    """Fold one performed note into the table."""
    if not 0 <= pitch <= 127:
        raise ValueError(f"pitch must be in 0..127, got {pitch}")
    unigrams = dict(table.unigram_counts)
    unigrams[pitch] = unigrams.get(pitch, 0) + 1
    transitions = {k: dict(v) for k, v in table.transition_counts.items()}
    if table.last_pitch is not None:
        row = transitions.setdefault(table.last_pitch, {})
        row[pitch] = row.get(pitch, 0) + 1
    durations = dict(table.duration_hist)
    bucket = quantize_duration(duration_beats)
    durations[bucket] = durations.get(bucket, 0) + 1
    return replace(table, transition_counts=transitions, unigram_counts=unigrams,
                   duration_hist=durations, last_pitch=pitch)


def _weighted_choice(weights: Sequence[Tuple], rng: np.random.Generator):
    keys = [k for k, _ in weights]
    w = np.array([x for _, x in weights], dtype=float)
    probs = w / w.sum()
    return keys[int(rng.choice(len(keys), p=probs))]


def sample_pitch(table: MarkovTable, prev_pitch: Optional[int],
                 rng: np.random.Generator) -> int:
    """Sample the next pitch from the transition row of ``prev_pitch``,
    falling back to the unigram distribution when the row is empty.

    With smoothing_k > 0, every known pitch gets k added to its row count,
    which softens small rows toward the performer's overall vocabulary.
    """
    if table.empty:
        raise NoDataError("markov table has no observations")
    row = table.transition_counts.get(prev_pitch, {}) if prev_pitch is not None else {}
    k = table.smoothing_k
    if row:
        support = sorted(set(row) | set(table.unigram_counts)) if k > 0 else sorted(row)
        weights = [(p, row.get(p, 0) + k) for p in support]
    else:
        weights = sorted(table.unigram_counts.items())
    return _weighted_choice(weights, rng)


def sample_duration(table: MarkovTable, rng: np.random.Generator) -> float:
    """Sample a quantized duration proportionally to the learned histogram."""
    if not table.duration_hist:
        raise NoDataError("duration histogram is empty")
    weights = [(b, table.duration_hist[b]) for b in DURATION_BUCKETS
               if table.duration_hist.get(b, 0) > 0]
    return _weighted_choice(weights, rng)


@dataclass
class HarmonizeResult:
    notes: List[NoteEvent]
    skipped: int  # onsets dropped because the table was still empty


def harmonize(rhythm: Sequence[GridEvent], table: MarkovTable,
              rng: np.random.Generator) -> HarmonizeResult:
    """Assign a pitch and duration to each rhythm onset.

    The pitch chain starts from the performer's most recent pitch and then
    follows the engine's own emissions. Durations are truncated so a note
    never rings past the next onset. Onsets are skipped (and counted) while
    the table has nothing to offer.
    """
    notes: List[NoteEvent] = []
    skipped = 0
    prev = table.last_pitch
    for i, onset in enumerate(rhythm):
        if table.empty or not table.duration_hist:
            skipped += 1
            continue
        pitch = sample_pitch(table, prev, rng)
        duration = sample_duration(table, rng)
        if i + 1 < len(rhythm):
            gap = rhythm[i + 1].time_beats - onset.time_beats
            if gap > 0:
                duration = min(duration, gap)
        notes.append(NoteEvent(time_beats=onset.time_beats, pitch=pitch,
                               velocity=onset.velocity, duration_beats=duration))
        prev = pitch
    return HarmonizeResult(notes=notes, skipped=skipped)


def dump_table(table: MarkovTable) -> str:
    """Counts-only structured text, stable ordering."""
    lines = [f"k {table.smoothing_k!r}"]
    if table.last_pitch is not None:
        lines.append(f"last {table.last_pitch}")
    for pitch in sorted(table.unigram_counts):
        lines.append(f"unigram {pitch} {table.unigram_counts[pitch]}")
    for src in sorted(table.transition_counts):
        row = table.transition_counts[src]
        for dst in sorted(row):
            lines.append(f"trans {src} {dst} {row[dst]}")
    for bucket in DURATION_BUCKETS:
        if table.duration_hist.get(bucket):
            lines.append(f"dur {bucket!r} {table.duration_hist[bucket]}")
    return "".join(line + "\n" for line in lines)


def load_table(text: str) -> MarkovTable:
    unigrams: Dict[int, int] = {}
    transitions: Dict[int, Dict[int, int]] = {}
    durations: Dict[float, int] = {}
    last: Optional[int] = None
    k = 0.0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        try:
            if parts[0] == "k" and len(parts) == 2:
                k = float(parts[1])
            elif parts[0] == "last" and len(parts) == 2:
                last = int(parts[1])
            elif parts[0] == "unigram" and len(parts) == 3:
                unigrams[int(parts[1])] = int(parts[2])
            elif parts[0] == "trans" and len(parts) == 4:
                transitions.setdefault(int(parts[1]), {})[int(parts[2])] = int(parts[3])
            elif parts[0] == "dur" and len(parts) == 3:
                bucket = float(parts[1])
                if bucket not in DURATION_BUCKETS:
                    raise ValueError(f"unknown duration bucket {bucket}")
                durations[bucket] = int(parts[2])
            else:
                raise ValueError(f"unrecognized record {parts[0]!r}")
        except (ValueError, IndexError) as exc:
            raise FormatError(f"markov table line {lineno}: {exc}") from None
    return MarkovTable(transition_counts=transitions, unigram_counts=unigrams,
                       duration_hist=durations, last_pitch=last, smoothing_k=k)
