import math

import numpy as np
import pytest

from trigroove.hvo import GridEvent, HvoPattern
from trigroove.session import (Session, SessionConfig, load_preset,
                               make_default_preset, preset_from_session,
                               run_bar_cycle, save_preset, voice_for_pitch)


@pytest.fixture()
def preset(engine_model):
    return make_default_preset(engine_model, seed=0)


def _session(engine_model, preset, **kw):
    return Session(engine_model, preset, SessionConfig(**kw))


def test_last_writer_wins_on_position(engine_model, preset):
    s = _session(engine_model, preset)
    s.handle({"type": "crossfade", "alpha": 0.3})
    s.handle({"type": "set_position", "alpha": 0.7, "tau": s.pos.tau})
    assert s.pos.alpha == 0.7


def test_crossfade_keeps_tau(engine_model, preset):
    s = _session(engine_model, preset)
    s.handle({"type": "set_position", "alpha": 0.2, "tau": 0.9})
    s.handle({"type": "crossfade", "alpha": 0.8})
    assert s.pos.alpha == 0.8
    assert s.pos.tau == 0.9


def test_malformed_message_rejected_without_effect(engine_model, preset):
    s = _session(engine_model, preset)
    before = s.control_state()
    reply = s.handle({"type": "set_density", "group": "not-a-number", "value": 0.4})
    assert reply["type"] == "error"
    assert s.control_state() == before
    reply = s.handle({"type": "no_such_thing"})
    assert reply["type"] == "error"
    reply = s.handle({"type": "set_density", "group": 99, "value": 0.4})
    assert reply["type"] == "error"


def test_clear_buffer_toggle(engine_model, preset):
    s = _session(engine_model, preset)
    s.handle({"type": "onset_in", "velocity": 0.9, "time_beats": 0.0})
    assert len(s.buffer.entries) == 1
    s.handle({"type": "toggle", "name": "clear_buffer"})
    assert len(s.buffer.entries) == 0


def test_onset_in_lands_on_voice_zero(engine_model, preset):
    s = _session(engine_model, preset, mode="cv")
    s.handle({"type": "onset_in", "velocity": 0.9, "time_beats": 1.0})
    assert s.buffer.entries[0].event.voice == 0
    assert s.buffer.entries[0].event.pitch is None


def test_note_in_register_mapping(engine_model, preset):
    assert voice_for_pitch(36) == 0
    assert voice_for_pitch(60) == 1
    assert voice_for_pitch(100) == 2
    s = _session(engine_model, preset)
    s.handle({"type": "note_in", "pitch": 40, "velocity": 0.5, "time_beats": 0.0})
    assert s.buffer.entries[0].event.voice == 0
    assert s.buffer.entries[0].event.pitch == 40


def test_note_in_feeds_markov_in_harmony_mode(engine_model, preset):
    s = _session(engine_model, preset, mode="harmony", harmonic_group=2)
    s.handle({"type": "note_in", "pitch": 60, "velocity": 0.5, "time_beats": 0.0})
    s.handle({"type": "note_in", "pitch": 64, "velocity": 0.5, "time_beats": 0.5})
    assert s.markov.unigram_counts == {60: 1, 64: 1}
    assert s.markov.transition_counts == {60: {64: 1}}
    assert s.markov.duration_hist.get(0.5) == 1  # inter-onset gap
    # drums mode must not touch the table
    d = _session(engine_model, preset)
    d.handle({"type": "note_in", "pitch": 60, "velocity": 0.5, "time_beats": 0.0})
    assert d.markov.empty


def test_tap_messages_set_exact_bpm(engine_model, preset):
    s = _session(engine_model, preset)
    for t in (0.0, 0.5, 1.0, 1.5):
        reply = s.handle({"type": "tap", "time_s": t})
    assert reply["bpm"] == 120.0
    assert s.transport.bpm == 120.0


def test_single_tap_changes_nothing(engine_model, preset):
    s = _session(engine_model, preset, bpm=97.0)
    s.handle({"type": "tap", "time_s": 0.0})
    assert s.transport.bpm == 97.0


def test_duplicate_tap_rejected_without_effect(engine_model, preset):
    s = _session(engine_model, preset, bpm=97.0)
    s.handle({"type": "tap", "time_s": 1.0})
    reply = s.handle({"type": "tap", "time_s": 1.0})
    assert reply["type"] == "error"
    assert s.transport.bpm == 97.0
    s.handle({"type": "tap", "time_s": 1.5})
    assert s.transport.bpm == 120.0  # history undisturbed by the reject


def test_tap_gesture_resets_after_long_gap(engine_model, preset):
    s = _session(engine_model, preset, bpm=97.0)
    for t in (0.0, 0.25, 0.5):
        s.handle({"type": "tap", "time_s": t})
    assert s.transport.bpm == 240.0
    # a fresh gesture after a long silence starts a new measurement
    s.handle({"type": "tap", "time_s": 10.0})
    assert s.transport.bpm == 240.0  # single tap of the new gesture: unchanged
    s.handle({"type": "tap", "time_s": 10.5})
    assert s.transport.bpm == 120.0


def test_set_tempo_clamps(engine_model, preset):
    s = _session(engine_model, preset)
    s.handle({"type": "set_tempo", "bpm": 999.0})
    assert s.transport.bpm == 240.0


def test_density_message(engine_model, preset):
    s = _session(engine_model, preset)
    ack = s.handle({"type": "set_density", "group": 2, "value": 0.9})
    assert ack["densities"]["2"] == 0.9


def test_freeze_r_stabilizes_generation(engine_model, preset):
    s = _session(engine_model, preset)
    s.handle({"type": "set_position", "alpha": 0.5, "tau": 1.0})  # all weight on R
    s.handle({"type": "onset_in", "velocity": 0.9, "time_beats": 0.0})
    s.handle({"type": "toggle", "name": "freeze_r"})
    first, _ = run_bar_cycle(s, 1)
    s.handle({"type": "onset_in", "velocity": 0.9, "time_beats": 4.5})  # ignored: frozen
    second, _ = run_bar_cycle(s, 2)
    assert first == second
    s.handle({"type": "toggle", "name": "freeze_r"})
    assert not s.buffer.frozen


def test_tau_zero_ignores_input_buffer(engine_model, preset):
    rng = np.random.default_rng(0)
    outputs = []
    for salt in range(2):
        s = _session(engine_model, preset)
        s.handle({"type": "set_position", "alpha": 0.37, "tau": 0.0})
        for _ in range(10):
            s.handle({"type": "onset_in", "velocity": float(rng.uniform(0.2, 1)),
                      "time_beats": float(rng.uniform(0, 4))})
        pattern, _ = run_bar_cycle(s, 1)
        outputs.append(pattern)
    assert outputs[0] == outputs[1]


def test_mute_group_silences_emission_not_broadcast(engine_model, preset):
    s = _session(engine_model, preset)
    s.handle({"type": "set_density", "group": 0, "value": 1.0})  # force kick hits
    s.handle({"type": "toggle", "name": "mute_group", "group": 0})
    pattern, out = run_bar_cycle(s, 0)
    assert pattern.hits[:, 0].sum() > 0  # broadcast pattern keeps the hits
    assert all(n.voice != 0 for n in out.notes)
    s.handle({"type": "toggle", "name": "mute_group", "group": 0})  # unmute
    _, out2 = run_bar_cycle(s, 0)
    assert any(n.voice == 0 for n in out2.notes)


def test_autonomy_toggle(engine_model, preset):
    s = _session(engine_model, preset, autonomy_mode="drift")
    assert s.autonomy.mode == "drift"
    s.handle({"type": "toggle", "name": "autonomous"})
    assert s.autonomy.mode == "off"
    s.handle({"type": "toggle", "name": "autonomous"})
    assert s.autonomy.mode == "drift"


def test_bar_parity_selects_half(engine_model, preset):
    s = _session(engine_model, preset)
    p = HvoPattern.zeros()
    p.hits[3, 0] = 1       # first half
    p.velocities[3, 0] = 0.5
    p.hits[16 + 7, 1] = 1  # second half
    p.velocities[16 + 7, 1] = 0.7
    out0 = s.emit(p, 0)
    assert len(out0.notes) == 1
    assert out0.notes[0].voice == 0
    assert out0.notes[0].time_s == pytest.approx((0 * 4 + 3 * 0.25) * 0.5)
    out1 = s.emit(p, 1)
    assert len(out1.notes) == 1
    assert out1.notes[0].voice == 1
    assert out1.notes[0].time_s == pytest.approx((1 * 4 + 7 * 0.25) * 0.5)


def test_cv_mode_emits_frames(engine_model, preset):
    s = _session(engine_model, preset, mode="cv", cv_sample_rate_hz=200.0)
    s.handle({"type": "set_density", "group": 0, "value": 1.0})
    _, out = run_bar_cycle(s, 0)
    assert out.cv_frames
    kick_frames = [f for f in out.cv_frames if f.channel == 0]
    assert any(f.gate for f in kick_frames)
    # frames cover exactly one bar at 120 bpm: 2 s * 200 Hz per channel
    assert len(kick_frames) == 400


def test_harmony_mode_counts_skips(engine_model, preset):
    s = _session(engine_model, preset, mode="harmony", harmonic_group=2)
    s.handle({"type": "set_density", "group": 2, "value": 1.0})
    # group 2 holds two hat voices: 16 steps x 2 voices, all hit at d=1
    _, out = run_bar_cycle(s, 0)
    assert out.pitched == []
    assert s.metrics.markov_skips == 32  # table empty: every onset skipped
    s.handle({"type": "note_in", "pitch": 60, "velocity": 0.5, "time_beats": 0.0})
    _, out = run_bar_cycle(s, 1)
    assert len(out.pitched) == 32
    assert all(p == 60 for _, p, _, _ in out.pitched)


def test_preset_round_trip(engine_model, preset, tmp_path):
    path = tmp_path / "p.json"
    save_preset(preset, path)
    loaded = load_preset(path, engine_model)
    assert loaded.pattern_a == preset.pattern_a
    assert loaded.pattern_b == preset.pattern_b
    assert np.array_equal(loaded.latent_a, preset.latent_a)
    assert loaded.grouping == preset.grouping
    assert loaded.densities.default == preset.densities.default


def test_preset_version_rejected(engine_model, preset, tmp_path):
    from trigroove.errors import FormatError
    path = tmp_path / "p.json"
    save_preset(preset, path)
    path.write_text(path.read_text().replace('"version": 1', '"version": 99'))
    with pytest.raises(FormatError):
        load_preset(path, engine_model)


def test_preset_corrupt_field_named(engine_model, preset, tmp_path):
    from trigroove.errors import FormatError
    import json
    path = tmp_path / "p.json"
    save_preset(preset, path)
    doc = json.loads(path.read_text())
    del doc["pattern_b"]
    path.write_text(json.dumps(doc))
    with pytest.raises(FormatError, match="pattern_b"):
        load_preset(path, engine_model)


def test_preset_stale_weights_reencodes(engine_model, preset, tmp_path):
    from trigroove.model import GrooveAutoencoder, Hyperparams
    other = GrooveAutoencoder(Hyperparams(), seed=99)
    path = tmp_path / "p.json"
    save_preset(preset, path)
    with pytest.warns(UserWarning, match="re-encoding"):
        loaded = load_preset(path, other)
    assert np.array_equal(loaded.latent_a, other.encode_mean(loaded.pattern_a))


def test_preset_from_session_round_trip(engine_model, preset, tmp_path):
    s = _session(engine_model, preset)
    s.handle({"type": "set_density", "group": 1, "value": 0.25})
    path = tmp_path / "p.json"
    save_preset(preset_from_session(s), path)
    loaded = load_preset(path, engine_model)
    assert loaded.densities.of(1) == 0.25


def test_harmony_requires_group(engine_model, preset):
    from trigroove.errors import ConfigError
    with pytest.raises(ConfigError):
        SessionConfig(mode="harmony")


def test_lifetime_defaults_per_mode():
    assert SessionConfig(mode="drums").lifetime == 4
    assert SessionConfig(mode="harmony", harmonic_group=0).lifetime == 8
    assert SessionConfig(mode="cv").lifetime == math.inf
    assert SessionConfig(mode="drums", lifetime_bars=7).lifetime == 7
