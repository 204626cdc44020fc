"""Acceptance gate: one test per release criterion, each printing a
pass/fail line (run with ``pytest -s tests/test_acceptance.py`` to watch).

The training criteria run the full default configuration twice (once for
quality, once more for bit-exact determinism), so this module dominates
the suite's runtime; everything else is seconds.
"""

import time

import numpy as np
import pytest

from trigroove.cli import main
from trigroove.hvo import GridEvent, HvoPattern, InputBuffer, buffer_add, \
    buffer_snapshot, pattern_to_events, quantize_events
from trigroove.latentnav import TrianglePos, TriangleRefs, barycentric_weights, \
    triangle_interp
from trigroove.markov import MarkovTable, sample_pitch
from trigroove.model import TINY_HPARAMS, TrainConfig, grad_check, save_weights, train
from trigroove.records import write_events
from trigroove.render import render_offline
from trigroove.session import Session, SessionConfig, make_default_preset
from trigroove.transport import TransportState, tick


def _report(name: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


# ----------------------------------------------------------------- training

@pytest.fixture(scope="module")
def trained():
    t0 = time.monotonic()
    model, metrics = train(TrainConfig())
    return model, metrics, time.monotonic() - t0


def test_gradient_correctness():
    t0 = time.monotonic()
    err = grad_check(TINY_HPARAMS, seed=0)
    elapsed = time.monotonic() - t0
    _report("gradient correctness",
            err < 1e-4 and elapsed < 60.0,
            f"max relative error {err:.3e} (< 1e-4), {elapsed:.1f}s (< 60s)")


def test_training_quality(trained):
    _, metrics, elapsed = trained
    ok = metrics.holdout_f1 >= 0.85 and metrics.holdout_vel_mae <= 0.10 \
        and elapsed <= 15 * 60
    _report("training quality", ok,
            f"holdout F1 {metrics.holdout_f1:.4f} (>= 0.85), "
            f"velocity MAE {metrics.holdout_vel_mae:.4f} (<= 0.10), "
            f"{elapsed / 60:.1f} min (<= 15)")


def test_training_determinism(trained, tmp_path):
    model_a, _, _ = trained
    model_b, _ = train(TrainConfig())
    pa, pb = tmp_path / "a.gw", tmp_path / "b.gw"
    save_weights(model_a.weights, pa)
    save_weights(model_b.weights, pb)
    same = pa.read_bytes() == pb.read_bytes()
    _report("training determinism", same,
            f"two same-seed runs -> bitwise-identical weight files ({same})")


# ------------------------------------------------------------ interpolation

def test_interpolation_suite():
    rng = np.random.default_rng(2024)
    failures = 0
    for _ in range(1000):
        z = int(rng.integers(2, 24))
        refs = TriangleRefs(z_a=rng.normal(size=z) * 3, z_b=rng.normal(size=z) * 3,
                            z_r=rng.normal(size=z) * 3)
        pos = TrianglePos(alpha=rng.random(), tau=rng.random())
        wa, wb, wr = barycentric_weights(pos)
        if not (wa >= 0 and wb >= 0 and wr >= 0 and abs(wa + wb + wr - 1) < 1e-12):
            failures += 1
            continue
        out = triangle_interp(refs, pos)
        stacked = np.stack([refs.z_a, refs.z_b, refs.z_r])
        if not (np.all(out >= stacked.min(axis=0) - 1e-12)
                and np.all(out <= stacked.max(axis=0) + 1e-12)):
            failures += 1
            continue
        if not (np.array_equal(triangle_interp(refs, TrianglePos(0, 0)), refs.z_a)
                and np.array_equal(triangle_interp(refs, TrianglePos(1, 0)), refs.z_b)
                and np.array_equal(triangle_interp(refs, TrianglePos(pos.alpha, 1)),
                                   refs.z_r)):
            failures += 1
    _report("interpolation suite", failures == 0,
            f"1000 random (refs, pos): corner exactness, weight partition, "
            f"hull bounds -> {failures} failures")


# ------------------------------------------------------------- quantization

def test_quantization_round_trip():
    rng = np.random.default_rng(77)
    failures = 0
    for _ in range(1000):
        p = HvoPattern.zeros()
        mask = rng.random((32, 9)) < rng.uniform(0.05, 0.5)
        p.hits[mask] = 1
        p.velocities[mask] = rng.uniform(0.01, 1.0, size=int(mask.sum()))
        q = quantize_events(pattern_to_events(p))
        if q != p or np.any(q.offsets < -0.5) or np.any(q.offsets >= 0.5):
            failures += 1
    _report("quantization round-trip", failures == 0,
            f"1000 on-grid patterns: events -> grid identity, offsets in "
            f"[-0.5, 0.5) -> {failures} failures")


# ------------------------------------------------------------------- markov

def test_markov_convergence():
    rng = np.random.default_rng(5)
    worst_tv = 0.0
    for _ in range(100):
        pitches = rng.choice(128, size=int(rng.integers(2, 6)), replace=False)
        counts = {int(p): int(rng.integers(1, 20)) for p in pitches}
        table = MarkovTable(transition_counts={60: counts},
                            unigram_counts={60: 1, **counts})
        total = sum(counts.values())
        expected = {p: c / total for p, c in counts.items()}
        draws = [sample_pitch(table, 60, rng) for _ in range(10_000)]
        tv = 0.5 * sum(abs(draws.count(p) / len(draws) - q)
                       for p, q in expected.items())
        worst_tv = max(worst_tv, tv)
    _report("markov convergence", worst_tv <= 0.05,
            f"100 random tables x 10,000 draws: worst total variation "
            f"{worst_tv:.4f} (<= 0.05)")


# ---------------------------------------------------------------- transport

def test_transport_exactness():
    state = TransportState(bpm=120.0, running=True)
    step_ok = state.step_duration_s == 0.125
    for _ in range(10_000):
        state, _ = tick(state, 0.125)
    ok = step_ok and state.step_index == 10_000 and abs(state.phase) < 1e-9
    _report("transport exactness", ok,
            f"step 0.125s exact: {step_ok}; 10,000 ticks -> step_index "
            f"{state.step_index} (= 10000), |phase| {abs(state.phase):.2e} (< 1e-9)")


# ------------------------------------------------------- end-to-end via CLI

@pytest.fixture(scope="module")
def render_inputs(tmp_path_factory):
    root = tmp_path_factory.mktemp("e2e")
    weights = root / "model.gw"
    assert main(["train", "--out", str(weights), "--seed", "11",
                 "--epochs", "2", "--corpus-size", "64"]) == 0
    events = root / "events.txt"
    rng = np.random.default_rng(3)
    write_events(events, [GridEvent(float(rng.uniform(0, 16)),
                                    int(rng.integers(0, 3)),
                                    float(rng.uniform(0.3, 1.0)))
                          for _ in range(20)])
    return weights, events, root


def test_end_to_end_determinism(render_inputs):
    weights, events, root = render_inputs
    base = ["render", "--model", str(weights), "--events", str(events),
            "--alpha", "0.3", "--tau", "0.6", "--bars", "6", "--seed", "4",
            "--lifetime-bars", "4"]
    for name in ("r1", "r2"):
        assert main(base + ["--out", str(root / name)]) == 0
    assert main(base + ["--mode", "cv", "--out", str(root / "rcv")]) == 0
    identical_reruns = all(
        (root / "r1" / f).read_bytes() == (root / "r2" / f).read_bytes()
        for f in ("patterns.txt", "notes.txt", "metrics.txt"))
    shared_core = (root / "r1" / "patterns.txt").read_bytes() == \
        (root / "rcv" / "patterns.txt").read_bytes()
    _report("end-to-end determinism", identical_reruns and shared_core,
            f"byte-identical reruns: {identical_reruns}; drums/cv shared "
            f"rhythm core identical: {shared_core}")


# ----------------------------------------------------------------- deadline

def test_deadline_behavior(engine_model):
    preset = make_default_preset(engine_model, seed=0)
    bars = 8
    runs = {}
    for delay in (0.0, 0.3, 1.2):
        s = Session(engine_model, preset, SessionConfig(bpm=120.0))
        s.handle({"type": "set_position", "alpha": 0.5, "tau": 0.0})
        runs[delay] = render_offline(s, [], bars=bars, inject_delay_s=delay)
    # at 120 bpm the bar is 2s and the generation budget is the half bar (1s)
    within = runs[0.3]
    over = runs[1.2]
    timing_ok = within.output_lines == runs[0.0].output_lines \
        and over.output_lines == runs[0.0].output_lines
    misses_ok = within.metrics_lines[0] == "deadline_misses 0" \
        and over.metrics_lines[0] == f"deadline_misses {bars - 1}"
    _report("deadline behavior", timing_ok and misses_ok,
            f"300ms delay: 0 misses, output unchanged ({timing_ok}); "
            f"1.2s delay: misses = {bars - 1} deadline-bound cycles ({misses_ok})")


# ----------------------------------------------------------------- lifetime

def test_lifetime_semantics():
    buf = buffer_add(InputBuffer(), GridEvent(0.0, 0, 0.9), 0, 4)
    present = [buffer_snapshot(buf, bar).hits.sum() == 1 for bar in range(4)]
    absent = [buffer_snapshot(buf, bar).hits.sum() == 0 for bar in range(4, 12)]
    ok = all(present) and all(absent)
    _report("lifetime semantics", ok,
            f"event born bar 0, lifetime 4: in snapshots 0-3 {all(present)}, "
            f"gone from bar 4 on {all(absent)}")
