"""Newline-delimited record formats.

One record per line, whitespace-separated fields, ``#`` starts a comment.
These are the CLI input (event lists) and output (note events, CV frames,
per-bar pattern logs) formats; writers use fixed-width float formatting so
identical data always serializes to identical bytes.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Union

from .errors import FormatError
from .hvo import GridEvent, HvoPattern

PathLike = Union[str, Path]


def parse_events(text: str) -> List[GridEvent]:
    """Parse ``time_beats voice velocity [pitch]`` lines."""
    events: List[GridEvent] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) not in (3, 4):
            raise FormatError(f"line {lineno}: expected 3 or 4 fields, got {len(parts)}")
        try:
            time_beats = float(parts[0])
            voice = int(parts[1])
            velocity = float(parts[2])
            pitch = int(parts[3]) if len(parts) == 4 else None
        except ValueError as exc:
            raise FormatError(f"line {lineno}: {exc}") from None
        try:
            events.append(GridEvent(time_beats, voice, velocity, pitch))
        except ValueError as exc:
            raise FormatError(f"line {lineno}: {exc}") from None
    return events


def read_events(path: PathLike) -> List[GridEvent]:
    return parse_events(Path(path).read_text())


def format_events(events: Iterable[GridEvent]) -> str:
    lines = []
    for ev in events:
        line = f"{ev.time_beats:.6f} {ev.voice} {ev.velocity:.4f}"
        if ev.pitch is not None:
            line += f" {ev.pitch}"
        lines.append(line)
    return "".join(line + "\n" for line in lines)


def write_events(path: PathLike, events: Iterable[GridEvent]) -> None:
    Path(path).write_text(format_events(events))


def format_note_line(time_s: float, channel: int, velocity: float,
                     pitch: Optional[int] = None,
                     duration_s: Optional[float] = None) -> str:
    """``note <time_s> <channel> <velocity> [pitch [duration_s]]``"""
    line = f"note {time_s:.6f} {channel} {velocity:.4f}"
    if pitch is not None:
        line += f" {pitch}"
        if duration_s is not None:
            line += f" {duration_s:.6f}"
    return line


def format_cv_line(time_s: float, channel: int, gate: bool, value: float) -> str:
    """``cv <time_s> <channel> <gate 0|1> <value>``"""
    return f"cv {time_s:.6f} {channel} {int(gate)} {value:.4f}"


def format_pattern_lines(bar_index: int, pattern: HvoPattern) -> List[str]:
    """Hit cells of one generated pattern: ``pat <bar> <step> <voice> <vel> <off>``."""
    lines = []
    for step in range(pattern.steps):
        for voice in range(pattern.voices):
            if pattern.hits[step, voice]:
                lines.append(
                    f"pat {bar_index} {step} {voice} "
                    f"{pattern.velocities[step, voice]:.4f} "
                    f"{pattern.offsets[step, voice]:+.6f}"
                )
    return lines


def write_lines(path: PathLike, lines: Sequence[str]) -> None:
    Path(path).write_text("".join(line + "\n" for line in lines))
