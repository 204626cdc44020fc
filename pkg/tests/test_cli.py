import json
from pathlib import Path

import pytest

from trigroove.cli import main
from trigroove.records import format_events, write_events


@pytest.fixture(scope="module")
def cli_weights(tmp_path_factory):
    """A quickly-trained weights file shared by the CLI tests."""
    path = tmp_path_factory.mktemp("cli") / "model.gw"
    rc = main(["train", "--out", str(path), "--seed", "5",
               "--epochs", "2", "--corpus-size", "64"])
    assert rc == 0
    return path


@pytest.fixture(scope="module")
def events_file(tmp_path_factory):
    from trigroove.hvo import GridEvent
    path = tmp_path_factory.mktemp("events") / "events.txt"
    write_events(path, [GridEvent(0.0, 0, 0.9), GridEvent(1.5, 1, 0.5),
                        GridEvent(3.25, 2, 0.7, pitch=64),
                        GridEvent(6.0, 0, 0.8)])
    return path


def test_train_writes_loadable_weights(cli_weights):
    from trigroove.model import load_autoencoder
    model = load_autoencoder(cli_weights)
    assert model.hp.latent == 16


def test_train_determinism_short(tmp_path):
    out = []
    for name in ("a.gw", "b.gw"):
        path = tmp_path / name
        assert main(["train", "--out", str(path), "--seed", "9",
                     "--epochs", "2", "--corpus-size", "64"]) == 0
        out.append(path.read_bytes())
    assert out[0] == out[1]


def test_eval_runs(cli_weights, capsys):
    assert main(["eval", "--model", str(cli_weights), "--corpus-seed", "3",
                 "-n", "32"]) == 0
    assert "hit F1" in capsys.readouterr().out


def test_gradcheck_cli(capsys):
    assert main(["gradcheck"]) == 0
    assert "ok" in capsys.readouterr().out


def test_make_preset_and_render(cli_weights, events_file, tmp_path):
    preset = tmp_path / "preset.json"
    assert main(["make-preset", "--model", str(cli_weights),
                 "--out", str(preset)]) == 0
    assert json.loads(preset.read_text())["version"] == 1

    out1 = tmp_path / "r1"
    out2 = tmp_path / "r2"
    args = ["render", "--model", str(cli_weights), "--preset", str(preset),
            "--events", str(events_file), "--alpha", "0.3", "--tau", "0.5",
            "--bars", "4", "--seed", "7"]
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    for name in ("patterns.txt", "notes.txt", "metrics.txt"):
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()


def test_render_cv_mode_shares_pattern_log(cli_weights, events_file, tmp_path):
    base = ["render", "--model", str(cli_weights), "--events", str(events_file),
            "--alpha", "0.3", "--tau", "0.5", "--bars", "4", "--seed", "7"]
    assert main(base + ["--out", str(tmp_path / "drums")]) == 0
    assert main(base + ["--mode", "cv", "--out", str(tmp_path / "cv")]) == 0
    assert (tmp_path / "drums" / "patterns.txt").read_bytes() == \
        (tmp_path / "cv" / "patterns.txt").read_bytes()
    assert (tmp_path / "cv" / "cv.txt").exists()


def test_simulate_cv(events_file, tmp_path):
    out = tmp_path / "cv"
    assert main(["simulate-cv", "--events", str(events_file),
                 "--rate", "500", "--out", str(out)]) == 0
    lines = (out / "cv.txt").read_text().splitlines()
    assert lines and all(line.startswith("cv ") for line in lines)
    # byte-stable
    first = (out / "cv.txt").read_bytes()
    assert main(["simulate-cv", "--events", str(events_file),
                 "--rate", "500", "--out", str(out)]) == 0
    assert (out / "cv.txt").read_bytes() == first


def test_render_figures(cli_weights, tmp_path):
    out = tmp_path / "r"
    figs = tmp_path / "figs"
    assert main(["render", "--model", str(cli_weights), "--bars", "2",
                 "--out", str(out), "--figures", str(figs)]) == 0
    assert (figs / "patterns.png").stat().st_size > 0
    assert (figs / "modulation.png").stat().st_size > 0


def test_train_figures_and_metrics(tmp_path):
    figs = tmp_path / "figs"
    metrics = tmp_path / "metrics.json"
    assert main(["train", "--out", str(tmp_path / "m.gw"), "--seed", "1",
                 "--epochs", "2", "--corpus-size", "64",
                 "--figures", str(figs), "--metrics-out", str(metrics)]) == 0
    assert (figs / "loss_curves.png").stat().st_size > 0
    assert "epoch_losses" in json.loads(metrics.read_text())


def test_render_with_pretrained_markov_table(cli_weights, tmp_path):
    from trigroove.markov import MarkovTable, dump_table, observe
    table = MarkovTable()
    for pitch in (60, 64, 67):
        table = observe(table, pitch, 0.5)
    table_path = tmp_path / "table.txt"
    table_path.write_text(dump_table(table))
    script = tmp_path / "script.txt"
    script.write_text('-1 {"type": "set_density", "group": 2, "value": 1.0}\n')
    out = tmp_path / "h"
    assert main(["render", "--model", str(cli_weights), "--mode", "harmony",
                 "--bars", "2", "--out", str(out),
                 "--markov-table", str(table_path), "--script", str(script)]) == 0
    lines = (out / "notes.txt").read_text().splitlines()
    assert lines, "pre-trained table should pitch notes from bar 0"
    pitches = {int(line.split()[4]) for line in lines}
    assert pitches <= {60, 64, 67}
    assert (out / "metrics.txt").read_text().splitlines()[2] == "markov_skips 0"


def test_missing_model_is_reported(tmp_path, capsys):
    assert main(["render", "--model", str(tmp_path / "nope.gw"),
                 "--out", str(tmp_path / "o")]) == 2
    assert "error:" in capsys.readouterr().err


def test_events_round_trip_format(events_file):
    from trigroove.records import read_events
    events = read_events(events_file)
    assert format_events(events) == events_file.read_text()
