"""Offline deterministic rendering with a simulated clock.

Drives the same session pipeline the live server runs, but on virtual
time: events and scripted control messages are delivered by beat
position, the generate cycle for bar b runs at the half-bar before it,
and an optional injected model delay exercises the deadline policy
without any real waiting. Output is byte-stable for fixed inputs.

Bar 0 is primed synchronously before the clock starts (a performer hits
play after loading), so deadline-bound cycles are those for bars 1..N-1.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from .errors import FormatError
from .hvo import BEATS_PER_BAR, GridEvent, HvoPattern
from .outputs import beats_to_seconds
from .records import format_cv_line, format_note_line, format_pattern_lines
from .session import BarOutputs, Session


@dataclass(frozen=True)
class ScriptEntry:
    """A control message scheduled at a beat position."""
    time_beats: float
    message: dict


def parse_script(text: str) -> List[ScriptEntry]:
    """``<time_beats> <json message>`` per line."""
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            beat_str, payload = line.split(None, 1)
            entries.append(ScriptEntry(float(beat_str), json.loads(payload)))
        except (ValueError, json.JSONDecodeError) as exc:
            raise FormatError(f"script line {lineno}: {exc}") from None
    entries.sort(key=lambda e: e.time_beats)
    return entries


@dataclass
class RenderResult:
    pattern_lines: List[str] = field(default_factory=list)
    output_lines: List[str] = field(default_factory=list)
    metrics_lines: List[str] = field(default_factory=list)
    played: List[HvoPattern] = field(default_factory=list)
    outputs: List[BarOutputs] = field(default_factory=list)


def _outputs_to_lines(out: BarOutputs, mode: str,
                      harmonic_group: Optional[int]) -> List[str]:
    if mode == "drums":
        return [format_note_line(n.time_s, n.voice, n.velocity) for n in out.notes]
    if mode == "harmony":
        return [format_note_line(t, harmonic_group, vel, pitch, dur)
                for t, pitch, vel, dur in out.pitched]
    return [format_cv_line(f.time_s, f.channel, f.gate, f.value) for f in out.cv_frames]


def generation_beat(bar_index: int) -> float:
    """The cycle for bar b runs at the preceding half-bar (bar 0: priming)."""
    return 0.0 if bar_index == 0 else bar_index * BEATS_PER_BAR - BEATS_PER_BAR / 2.0


def render_offline(session: Session, events: Sequence[GridEvent], bars: int,
                   inject_delay_s: float = 0.0,
                   script: Sequence[ScriptEntry] = ()) -> RenderResult:
    if bars <= 0:
        raise ValueError("bars must be > 0")
    pending_events = sorted(events, key=lambda e: (e.time_beats, e.voice))
    pending_script = list(script)
    result = RenderResult()
    budget_s = beats_to_seconds(BEATS_PER_BAR / 2.0, session.transport.bpm)

    for bar in range(bars):
        gen_beat = generation_beat(bar)
        while pending_script and pending_script[0].time_beats < gen_beat:
            entry = pending_script.pop(0)
            session.handle(entry.message,
                           now_s=beats_to_seconds(entry.time_beats, session.transport.bpm))
        while pending_events and pending_events[0].time_beats < gen_beat:
            session.ingest_event(pending_events.pop(0))

        # the computation always runs; a missed deadline only discards it
        session.refresh_live_reference(bar)
        session.step_autonomy()
        computed = session.compute_pattern()
        missed = bar > 0 and inject_delay_s > budget_s
        if missed:
            session.metrics.deadline_misses += 1
        else:
            session.playing = computed
        out = session.emit(session.playing, bar)

        result.played.append(session.playing.copy())
        result.outputs.append(out)
        result.pattern_lines.extend(format_pattern_lines(bar, session.playing))
        result.output_lines.extend(_outputs_to_lines(
            out, session.config.mode, session.config.harmonic_group))

    for name, value in session.metrics.as_dict().items():
        result.metrics_lines.append(f"{name} {value}")
    return result


def write_render(result: RenderResult, out_dir, mode: str) -> List[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, lines in (("patterns.txt", result.pattern_lines),
                        ("cv.txt" if mode == "cv" else "notes.txt", result.output_lines),
                        ("metrics.txt", result.metrics_lines)):
        path = out / name
        path.write_text("".join(line + "\n" for line in lines))
        written.append(path)
    return written
