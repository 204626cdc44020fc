"""Session orchestration: the bar-synchronous generate cycle, control
message handling, and preset persistence.

One engine, three playing modes. ``drums`` schedules the generated pattern
as note events; ``harmony`` routes the designated voice-group's onsets
through the Markov engine and emits pitched notes; ``cv`` reduces voices
to channels and renders gate/value frames. The generation pipeline
(snapshot -> encode live reference -> autonomy -> triangle blend ->
decode -> threshold) is identical in all three.

Threading contract: a single timing activity owns the session and is the
only mutator; control ingestion enqueues message dicts that the timing
activity drains. Everything here is synchronous and deterministic given
the message order.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Dict, List, Optional, Set, Tuple, Union

import numpy as np

from .errors import ConfigError, FormatError
from .hvo import (BEATS_PER_BAR, STEPS_PER_BAR, GridEvent, HvoPattern,
                  InputBuffer, buffer_add, buffer_snapshot, buffer_sweep)
from .latentnav import (AutonomyState, TrianglePos, TriangleRefs,
                        autonomy_step, triangle_interp)
from .markov import MarkovTable, NoteEvent, harmonize, observe
from .model import DensityMap, GrooveAutoencoder, extract_pattern
from .model.corpus import synth_pattern
from .outputs import (CvFrame, CvOnset, ScheduledNote, VoiceGrouping,
                      bar_duration_s, beats_to_seconds, group_step,
                      render_cv, schedule_pattern)
from .transport import TransportState, clamp_bpm, tap

PRESET_VERSION = 1
MODES = ("drums", "harmony", "cv")
DEFAULT_LIFETIMES: Dict[str, Union[int, float]] = {"drums": 4, "harmony": 8, "cv": math.inf}
TAP_RESET_GAP_S = 2.5

#: Register split for pitched input: low pitches condition the kick lane,
#: mid the snare lane, high the closed-hat lane.
REGISTER_SPLITS = ((48, 0), (72, 1), (128, 2))


def voice_for_pitch(pitch: int) -> int:
    for limit, voice in REGISTER_SPLITS:
        if pitch < limit:
            return voice
    return REGISTER_SPLITS[-1][1]


@dataclass(frozen=True)
class SessionConfig:
    mode: str = "drums"
    bpm: float = 120.0
    seed: int = 0
    autonomy_mode: str = "off"
    harmonic_group: Optional[int] = None
    lifetime_bars: Optional[Union[int, float]] = None
    cv_sample_rate_hz: float = 100.0
    gate_ms: float = 10.0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.mode == "harmony" and self.harmonic_group is None:
            raise ConfigError("harmony mode requires harmonic_group")

    @property
    def lifetime(self) -> Union[int, float]:
        return self.lifetime_bars if self.lifetime_bars is not None \
            else DEFAULT_LIFETIMES[self.mode]


@dataclass
class Preset:
    pattern_a: HvoPattern
    pattern_b: HvoPattern
    latent_a: np.ndarray
    latent_b: np.ndarray
    densities: DensityMap
    grouping: VoiceGrouping
    autonomy_params: Dict[str, float]
    weights_checksum: str
    version: int = PRESET_VERSION


def make_default_preset(model: GrooveAutoencoder, seed: int = 0) -> Preset:
    """A and B from the synthetic template family: A busy, B sparse."""
    rng_a = np.random.default_rng(seed * 2 + 101)
    rng_b = np.random.default_rng(seed * 2 + 202)
    a = synth_pattern(rng_a, voices=model.hp.voices)
    b = synth_pattern(rng_b, voices=model.hp.voices)
    b.hits[:, 0][1::2] = 0  # thin B out a little for contrast
    b.velocities[:, 0][1::2] = 0.0
    b.offsets[:, 0][1::2] = 0.0
    return Preset(pattern_a=a, pattern_b=b,
                  latent_a=model.encode_mean(a), latent_b=model.encode_mean(b),
                  densities=DensityMap(), grouping=VoiceGrouping(),
                  autonomy_params={"ema_lambda": 0.5, "walk_sigma": 0.05, "ou_theta": 0.5},
                  weights_checksum=model.weights.checksum())


def _pattern_to_json(p: HvoPattern) -> dict:
    return {"hits": p.hits.astype(int).tolist(),
            "velocities": p.velocities.tolist(),
            "offsets": p.offsets.tolist()}


def _pattern_from_json(obj: dict, context: str) -> HvoPattern:
    try:
        hits = np.asarray(obj["hits"], dtype=np.uint8)
        vels = np.asarray(obj["velocities"], dtype=np.float64)
        offs = np.asarray(obj["offsets"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"preset field {context}: {exc}") from None
    p = HvoPattern(hits=hits, velocities=vels, offsets=offs, bars=hits.shape[0] // STEPS_PER_BAR)
    p.validate()
    return p


def save_preset(preset: Preset, path: Union[str, Path]) -> None:
    doc = {
        "version": preset.version,
        "weights_checksum": preset.weights_checksum,
        "pattern_a": _pattern_to_json(preset.pattern_a),
        "pattern_b": _pattern_to_json(preset.pattern_b),
        "latent_a": preset.latent_a.tolist(),
        "latent_b": preset.latent_b.tolist(),
        "densities": {"default": preset.densities.default,
                      "values": {str(k): v for k, v in sorted(preset.densities.values.items())}},
        "grouping": {"channel_of": list(preset.grouping.channel_of),
                     "labels": list(preset.grouping.labels) if preset.grouping.labels else None},
        "autonomy": preset.autonomy_params,
    }
    Path(path).write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def load_preset(path: Union[str, Path], model: GrooveAutoencoder) -> Preset:
    """Load and validate a preset against the model.

    Cached latents are checked by re-encoding; a weights-checksum or latent
    mismatch re-encodes with a warning rather than failing.
    """
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"preset is not valid JSON: {exc}") from None
    version = doc.get("version")
    if version != PRESET_VERSION:
        raise FormatError(f"unsupported preset version {version!r}")
    for key in ("pattern_a", "pattern_b", "latent_a", "latent_b",
                "densities", "grouping", "weights_checksum"):
        if key not in doc:
            raise FormatError(f"preset field {key}: missing")
    pattern_a = _pattern_from_json(doc["pattern_a"], "pattern_a")
    pattern_b = _pattern_from_json(doc["pattern_b"], "pattern_b")
    try:
        densities = DensityMap(values={int(k): float(v)
                                       for k, v in doc["densities"]["values"].items()},
                               default=float(doc["densities"]["default"]))
        grouping = VoiceGrouping(
            channel_of=tuple(int(c) for c in doc["grouping"]["channel_of"]),
            labels=tuple(doc["grouping"]["labels"]) if doc["grouping"].get("labels") else None)
        latent_a = np.asarray(doc["latent_a"], dtype=np.float64)
        latent_b = np.asarray(doc["latent_b"], dtype=np.float64)
        autonomy_params = {k: float(v) for k, v in doc.get("autonomy", {}).items()}
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"preset field: {exc}") from None

    fresh_a = model.encode_mean(pattern_a)
    fresh_b = model.encode_mean(pattern_b)
    stale = doc["weights_checksum"] != model.weights.checksum()
    if stale or not (np.array_equal(latent_a, fresh_a) and np.array_equal(latent_b, fresh_b)):
        warnings.warn("preset latents do not match these weights; re-encoding",
                      stacklevel=2)
        latent_a, latent_b = fresh_a, fresh_b
    return Preset(pattern_a=pattern_a, pattern_b=pattern_b,
                  latent_a=latent_a, latent_b=latent_b,
                  densities=densities, grouping=grouping,
                  autonomy_params=autonomy_params,
                  weights_checksum=model.weights.checksum())


@dataclass
class SessionMetrics:
    deadline_misses: int = 0
    dropped_frames: int = 0
    markov_skips: int = 0

    def as_dict(self) -> Dict[str, int]:
        return {"deadline_misses": self.deadline_misses,
                "dropped_frames": self.dropped_frames,
                "markov_skips": self.markov_skips}


@dataclass
class BarOutputs:
    """Everything one generate cycle scheduled for its bar."""
    bar_index: int
    notes: List[ScheduledNote] = field(default_factory=list)
    pitched: List[Tuple[float, int, float, float]] = field(default_factory=list)
    cv_frames: List[CvFrame] = field(default_factory=list)


class Session:
    """Mutable engine state; owned by a single timing activity."""

    def __init__(self, model: GrooveAutoencoder, preset: Preset,
                 config: SessionConfig):
        preset.grouping.validate(model.hp.voices)
        if config.mode == "harmony" and not (
                0 <= config.harmonic_group < preset.grouping.channels):
            raise ConfigError(f"harmonic_group {config.harmonic_group} out of range")
        self.model = model
        self.config = config
        self.grouping = preset.grouping
        self.densities = DensityMap(values=dict(preset.densities.values),
                                    default=preset.densities.default)
        empty_r = model.encode_mean(HvoPattern.zeros(voices=model.hp.voices))
        self.refs = TriangleRefs(z_a=preset.latent_a, z_b=preset.latent_b, z_r=empty_r,
                                 pattern_a=preset.pattern_a, pattern_b=preset.pattern_b)
        self.pos = TrianglePos(alpha=0.5, tau=0.0)
        self.autonomy = AutonomyState(mode=config.autonomy_mode, pos=self.pos,
                                      **preset.autonomy_params)
        self.buffer = InputBuffer()
        self.markov = MarkovTable()
        self.transport = TransportState(bpm=clamp_bpm(config.bpm))
        self.metrics = SessionMetrics()
        self.rng = np.random.default_rng(config.seed)
        self.muted: Set[int] = set()
        self.playing = HvoPattern.zeros(voices=model.hp.voices)
        self.onsets_since_cycle = 0
        self._frozen_z_r: Optional[np.ndarray] = None
        self._tap_times: List[float] = []
        self._last_note_beats: Optional[float] = None
        self.preset = preset

    # ------------------------------------------------------------------
    # control messages

    def control_state(self) -> dict:
        return {
            "type": "ack",
            "alpha": self.pos.alpha,
            "tau": self.pos.tau,
            "bpm": self.transport.bpm,
            "densities": {str(ch): self.densities.of(ch)
                          for ch in range(self.grouping.channels)},
            "autonomy": self.autonomy.mode,
            "frozen_r": self.buffer.frozen,
            "muted": sorted(self.muted),
            "mode": self.config.mode,
        }

    def handle(self, msg: dict, now_s: float = 0.0) -> dict:
        """Apply one control message; returns the ack (or an error reply,
        leaving the session unchanged)."""
        try:
            self._apply(msg, now_s)
        except (FormatError, ConfigError, KeyError, TypeError, ValueError) as exc:
            return {"type": "error", "code": "bad_message", "detail": str(exc)}
        return self.control_state()

    def _set_pos(self, pos: TrianglePos) -> None:
        self.pos = pos
        self.autonomy = replace(self.autonomy, pos=pos)

    def _apply(self, msg: dict, now_s: float) -> None:
        if not isinstance(msg, dict) or "type" not in msg:
            raise FormatError("message must be an object with a 'type' field")
        kind = msg["type"]
        if kind == "set_position":
            self._set_pos(TrianglePos(alpha=float(msg["alpha"]), tau=float(msg["tau"])))
        elif kind == "crossfade":
            self._set_pos(TrianglePos(alpha=float(msg["alpha"]), tau=self.pos.tau))
        elif kind == "set_density":
            group = int(msg["group"])
            if not 0 <= group < self.grouping.channels:
                raise ConfigError(f"density group {group} out of range")
            self.densities.set(group, float(msg["value"]))
        elif kind == "toggle":
            self._apply_toggle(msg)
        elif kind == "tap":
            self._apply_tap(float(msg.get("time_s", now_s)))
        elif kind == "set_tempo":
            self.transport = replace(self.transport, bpm=clamp_bpm(float(msg["bpm"])))
        elif kind == "note_in":
            pitch = int(msg["pitch"])
            event = GridEvent(time_beats=float(msg.get("time_beats", self._now_beats())),
                              voice=voice_for_pitch(pitch),
                              velocity=float(msg["velocity"]), pitch=pitch)
            self.ingest_event(event)
        elif kind == "onset_in":
            event = GridEvent(time_beats=float(msg.get("time_beats", self._now_beats())),
                              voice=0, velocity=float(msg["velocity"]))
            self.ingest_event(event)
        else:
            raise FormatError(f"unknown message type {kind!r}")

    def _apply_toggle(self, msg: dict) -> None:
        name = msg["name"]
        if name == "freeze_r":
            frozen = not self.buffer.frozen
            self.buffer = self.buffer.with_frozen(frozen)
            if not frozen:
                self._frozen_z_r = None
        elif name == "autonomous":
            if self.autonomy.mode == "off":
                mode = self.config.autonomy_mode if self.config.autonomy_mode != "off" \
                    else "follow"
            else:
                mode = "off"
            self.autonomy = replace(self.autonomy, mode=mode)
        elif name == "mute_group":
            group = int(msg["group"])
            if not 0 <= group < self.grouping.channels:
                raise ConfigError(f"mute group {group} out of range")
            self.muted.symmetric_difference_update({group})
        elif name == "clear_buffer":
            self.buffer = self.buffer.cleared()
            self._frozen_z_r = None
        else:
            raise FormatError(f"unknown toggle {name!r}")

    def _apply_tap(self, time_s: float) -> None:
        if self._tap_times and time_s <= self._tap_times[-1]:
            raise ValueError("tap times must be strictly increasing")
        if self._tap_times and time_s - self._tap_times[-1] > TAP_RESET_GAP_S:
            self._tap_times = []
        self._tap_times.append(time_s)
        self._tap_times = self._tap_times[-5:]
        if len(self._tap_times) >= 2:
            self.transport = replace(self.transport, bpm=tap(self._tap_times))

    def _now_beats(self) -> float:
        return (self.transport.step_index + self.transport.phase) * 0.25

    def ingest_event(self, event: GridEvent) -> None:
        """Performance input: into the loop buffer and, for pitched input in
        harmony mode, into the Markov table (duration = inter-onset gap)."""
        birth_bar = int(event.time_beats // BEATS_PER_BAR)
        self.buffer = buffer_add(self.buffer, event, birth_bar, self.config.lifetime)
        self.onsets_since_cycle += 1
        if event.pitch is not None and self.config.mode == "harmony":
            if self._last_note_beats is None:
                duration = 1.0
            else:
                gap = event.time_beats - self._last_note_beats
                duration = gap if gap > 0 else 0.25
            self.markov = observe(self.markov, event.pitch, duration)
            self._last_note_beats = event.time_beats

    # ------------------------------------------------------------------
    # the generate cycle

    def _live_reference(self, bar_index: int) -> np.ndarray:
        if self.buffer.frozen:
            if self._frozen_z_r is None:
                snap = buffer_snapshot(self.buffer, bar_index, voices=self.model.hp.voices)
                self._frozen_z_r = self.model.encode_mean(snap)
            return self._frozen_z_r
        self.buffer = buffer_sweep(self.buffer, bar_index)
        snap = buffer_snapshot(self.buffer, bar_index, voices=self.model.hp.voices)
        return self.model.encode_mean(snap)

    def _emission_pattern(self, pattern: HvoPattern) -> HvoPattern:
        """Muted groups do not sound (broadcast keeps the full pattern)."""
        if not self.muted:
            return pattern
        out = pattern.copy()
        for voice in range(out.voices):
            if self.grouping.channel_of[voice] in self.muted:
                out.hits[:, voice] = 0
                out.velocities[:, voice] = 0.0
                out.offsets[:, voice] = 0.0
        return out

    def refresh_live_reference(self, bar_index: int) -> None:
        """Pipeline step 1+2: snapshot (or frozen cache) and re-encode R."""
        self.refs = replace(self.refs, z_r=self._live_reference(bar_index))

    def step_autonomy(self) -> None:
        """Pipeline step 3: advance self-navigation; resets the onset count."""
        if self.autonomy.mode != "off":
            noise = (float(self.rng.standard_normal()), float(self.rng.standard_normal()))
            self.autonomy = autonomy_step(self.autonomy, self.onsets_since_cycle, noise)
            self.pos = self.autonomy.pos
        self.onsets_since_cycle = 0

    def compute_pattern(self) -> HvoPattern:
        """Pipeline steps 4+5 over the current refs/pos/controls."""
        return compute_pattern(self.model, self.refs, self.pos,
                               self.densities, self.grouping)

    def generate(self, bar_index: int) -> Tuple[HvoPattern, BarOutputs]:
        """One full bar cycle: refresh the live reference, navigate, decode,
        and schedule the half of the 2-bar pattern selected by bar parity."""
        self.refresh_live_reference(bar_index)
        self.step_autonomy()
        pattern = self.compute_pattern()
        outputs = self.emit(pattern, bar_index)
        return pattern, outputs

    def emit(self, pattern: HvoPattern, bar_index: int) -> BarOutputs:
        parity = bar_index % 2
        bar_pat = self._emission_pattern(pattern).bar_slice(parity)
        bpm = self.transport.bpm
        bar_start_beats = bar_index * BEATS_PER_BAR
        out = BarOutputs(bar_index=bar_index)
        if self.config.mode == "drums":
            out.notes = schedule_pattern(bar_pat, bar_start_beats, bpm)
        elif self.config.mode == "harmony":
            onsets = []
            for step in range(bar_pat.steps):
                for v in range(bar_pat.voices):
                    if not bar_pat.hits[step, v] or \
                            self.grouping.channel_of[v] != self.config.harmonic_group:
                        continue
                    # same pre-bar clamp as the drum scheduler
                    beats = max(0.0, (step + float(bar_pat.offsets[step, v])) * 0.25)
                    onsets.append(GridEvent(time_beats=bar_start_beats + beats, voice=v,
                                            velocity=float(bar_pat.velocities[step, v])))
            onsets.sort(key=lambda e: (e.time_beats, e.voice))
            result = harmonize(onsets, self.markov, self.rng)
            self.metrics.markov_skips += result.skipped
            out.pitched = [(beats_to_seconds(n.time_beats, bpm), n.pitch, n.velocity,
                            beats_to_seconds(n.duration_beats, bpm))
                           for n in result.notes]
        else:  # cv
            onsets = []
            step_s = 60.0 / (bpm * 4.0)
            for step in range(bar_pat.steps):
                for ch, (gate, value) in enumerate(group_step(bar_pat, step, self.grouping)):
                    if gate:
                        onsets.append(CvOnset(time_s=step * step_s, channel=ch, velocity=value))
            frames = render_cv(onsets, n_channels=self.grouping.channels,
                               duration_s=bar_duration_s(bpm),
                               sample_rate_hz=self.config.cv_sample_rate_hz,
                               gate_ms=self.config.gate_ms)
            bar_start_s = beats_to_seconds(bar_start_beats, bpm)
            out.cv_frames = [replace(f, time_s=bar_start_s + f.time_s) for f in frames]
        return out


def compute_pattern(model: GrooveAutoencoder, refs: TriangleRefs, pos: TrianglePos,
                    densities: DensityMap, grouping: VoiceGrouping) -> HvoPattern:
    """Triangle blend -> decode -> density threshold. Pure: safe on a
    helper thread against immutable snapshots of its inputs."""
    z = triangle_interp(refs, pos)
    grids = model.decode_logits(z)
    return extract_pattern(grids, densities, grouping)


def handle_message(session: Session, msg: dict, now_s: float = 0.0) -> Session:
    """Functional wrapper: apply and return the session (unchanged on a
    malformed message; the error reply is available via session.handle)."""
    session.handle(msg, now_s)
    return session


def run_bar_cycle(session: Session, bar_index: int) -> Tuple[HvoPattern, BarOutputs]:
    return session.generate(bar_index)


def preset_from_session(session: Session) -> Preset:
    return Preset(pattern_a=session.refs.pattern_a, pattern_b=session.refs.pattern_b,
                  latent_a=session.refs.z_a, latent_b=session.refs.z_b,
                  densities=DensityMap(values=dict(session.densities.values),
                                       default=session.densities.default),
                  grouping=session.grouping,
                  autonomy_params={"ema_lambda": session.autonomy.ema_lambda,
                                   "walk_sigma": session.autonomy.walk_sigma,
                                   "ou_theta": session.autonomy.ou_theta},
                  weights_checksum=session.model.weights.checksum())
