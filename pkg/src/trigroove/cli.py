"""Command line interface.

Verbs: train, eval, gradcheck, make-preset, render, simulate-cv, serve.
Offline verbs are deterministic for fixed arguments; --figures adds PNG
reports next to the delimited output files.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, FormatError
from .hvo import DEFAULT_VOICES
from .latentnav import TrianglePos
from .model import (TINY_HPARAMS, TrainConfig, evaluate_reconstruction,
                    grad_check, load_autoencoder, save_weights, synth_corpus,
                    train)
from .outputs import CvOnset, VoiceGrouping, beats_to_seconds, render_cv
from .records import format_cv_line, read_events, write_lines
from .render import parse_script, render_offline, write_render
from .service import DEFAULT_PORT, EngineServer
from .session import (Session, SessionConfig, load_preset, make_default_preset,
                      preset_from_session, save_preset)


def _add_common_session_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", required=True, help="weights file")
    p.add_argument("--preset", help="preset file (default: built-in templates)")
    p.add_argument("--mode", choices=("drums", "harmony", "cv"), default="drums")
    p.add_argument("--bpm", type=float, default=120.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--harmonic-group", type=int, default=None,
                   help="voice group driving the harmony mode")
    p.add_argument("--lifetime-bars", type=float, default=None,
                   help="input event lifetime (bars); default depends on mode")
    p.add_argument("--autonomy", choices=("off", "follow", "drift"), default="off")
    p.add_argument("--cv-rate", type=float, default=100.0,
                   help="cv sample rate in Hz (cv mode)")


def _build_session(args) -> Session:
    model = load_autoencoder(args.model)
    preset = load_preset(args.preset, model) if args.preset \
        else make_default_preset(model, seed=args.seed)
    lifetime = args.lifetime_bars
    if lifetime is not None and lifetime != float("inf"):
        lifetime = int(lifetime)
    harmonic_group = args.harmonic_group
    if args.mode == "harmony" and harmonic_group is None:
        harmonic_group = 2  # hat group in the default reduction
    config = SessionConfig(mode=args.mode, bpm=args.bpm, seed=args.seed,
                           autonomy_mode=args.autonomy,
                           harmonic_group=harmonic_group,
                           lifetime_bars=lifetime,
                           cv_sample_rate_hz=args.cv_rate)
    return Session(model, preset, config)


def cmd_train(args) -> int:
    config = TrainConfig(epochs=args.epochs, seed=args.seed,
                         corpus_size=args.corpus_size, beta_max=args.beta_max)
    model, metrics = train(config)
    save_weights(model.weights, args.out)
    print(f"wrote {args.out} ({model.weights.checksum()})")
    print(f"holdout hit F1 {metrics.holdout_f1:.4f}  "
          f"velocity MAE {metrics.holdout_vel_mae:.4f}")
    if args.metrics_out:
        Path(args.metrics_out).write_text(json.dumps(metrics.as_dict(), indent=1))
    if args.figures:
        from .figures import save_loss_curves
        fig_dir = Path(args.figures)
        fig_dir.mkdir(parents=True, exist_ok=True)
        save_loss_curves(metrics.epoch_losses, fig_dir / "loss_curves.png",
                         holdout_f1=metrics.holdout_f1,
                         vel_mae=metrics.holdout_vel_mae)
        print(f"wrote {fig_dir / 'loss_curves.png'}")
    return 0


def cmd_eval(args) -> int:
    model = load_autoencoder(args.model)
    patterns = synth_corpus(args.corpus_seed, args.n, voices=model.hp.voices)
    f1, mae = evaluate_reconstruction(model, patterns)
    print(f"hit F1 {f1:.4f}  velocity MAE {mae:.4f}  (n={args.n}, seed={args.corpus_seed})")
    return 0


def cmd_gradcheck(args) -> int:
    err = grad_check(TINY_HPARAMS, seed=args.seed)
    ok = err < 1e-4
    print(f"max relative gradient error {err:.3e} ({'ok' if ok else 'FAIL'})")
    return 0 if ok else 1


def cmd_make_preset(args) -> int:
    model = load_autoencoder(args.model)
    preset = make_default_preset(model, seed=args.seed)
    save_preset(preset, args.out)
    print(f"wrote {args.out}")
    return 0


def cmd_render(args) -> int:
    session = _build_session(args)
    if args.markov_table:
        from .markov import load_table
        session.markov = load_table(Path(args.markov_table).read_text())
    session.handle({"type": "set_position", "alpha": args.alpha, "tau": args.tau})
    events = read_events(args.events) if args.events else []
    script = parse_script(Path(args.script).read_text()) if args.script else ()
    result = render_offline(session, events, bars=args.bars,
                            inject_delay_s=args.inject_delay_s, script=script)
    written = write_render(result, args.out, session.config.mode)
    for path in written:
        print(f"wrote {path}")
    if args.figures:
        from .figures import save_cv_traces, save_modulation, save_pattern_roll
        fig_dir = Path(args.figures)
        fig_dir.mkdir(parents=True, exist_ok=True)
        save_pattern_roll(result.played, fig_dir / "patterns.png",
                          title=f"{args.bars} bars, alpha={args.alpha} tau={args.tau}")
        print(f"wrote {fig_dir / 'patterns.png'}")
        # continuous-modulation view of the final pattern's loudness contour
        contour = result.played[-1].velocities.max(axis=1)
        save_modulation(contour, fig_dir / "modulation.png")
        print(f"wrote {fig_dir / 'modulation.png'}")
        if session.config.mode == "cv":
            frames = [f for out in result.outputs for f in out.cv_frames]
            save_cv_traces(frames, fig_dir / "cv.png")
            print(f"wrote {fig_dir / 'cv.png'}")
    return 0


def cmd_simulate_cv(args) -> int:
    events = read_events(args.events)
    grouping = VoiceGrouping()
    onsets = []
    last_t = 0.0
    for ev in events:
        if ev.voice >= grouping.voices:
            raise ConfigError(f"event voice {ev.voice} not covered by the grouping")
        t = beats_to_seconds(ev.time_beats, args.bpm)
        onsets.append(CvOnset(time_s=t, channel=grouping.channel_of[ev.voice],
                              velocity=ev.velocity))
        last_t = max(last_t, t)
    duration = last_t + args.tail_s
    frames = render_cv(onsets, n_channels=grouping.channels, duration_s=duration,
                       sample_rate_hz=args.rate)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "cv.txt"
    write_lines(path, [format_cv_line(f.time_s, f.channel, f.gate, f.value)
                       for f in frames])
    print(f"wrote {path}")
    if args.figures:
        from .figures import save_cv_traces
        fig_dir = Path(args.figures)
        fig_dir.mkdir(parents=True, exist_ok=True)
        save_cv_traces(frames, fig_dir / "cv.png")
        print(f"wrote {fig_dir / 'cv.png'}")
    return 0


def cmd_serve(args) -> int:
    session = _build_session(args)
    server = EngineServer(session, host=args.host, port=args.port,
                          log_path=args.log)
    print(f"serving mode={args.mode} on ws://{args.host}:{args.port}  (ctrl-c stops)")
    server.run_forever()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="trigroove",
                                     description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train the groove autoencoder")
    p.add_argument("--out", required=True, help="weights file to write")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epochs", type=int, default=TrainConfig().epochs)
    p.add_argument("--corpus-size", type=int, default=TrainConfig().corpus_size)
    p.add_argument("--beta-max", type=float, default=TrainConfig().beta_max)
    p.add_argument("--metrics-out", help="write per-epoch metrics as JSON")
    p.add_argument("--figures", help="directory for loss-curve figures")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="reconstruction quality on a fresh corpus")
    p.add_argument("--model", required=True)
    p.add_argument("--corpus-seed", type=int, default=1)
    p.add_argument("-n", type=int, default=200)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", help="verify gradients against finite differences")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gradcheck)

    p = sub.add_parser("make-preset", help="write a starter preset for a model")
    p.add_argument("--model", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_make_preset)

    p = sub.add_parser("render", help="offline deterministic render")
    _add_common_session_args(p)
    p.add_argument("--events", help="input event file (time voice velocity [pitch])")
    p.add_argument("--script", help="scripted control messages (beat + json per line)")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--tau", type=float, default=0.0)
    p.add_argument("--bars", type=int, default=8)
    p.add_argument("--out", default="render_out")
    p.add_argument("--inject-delay-s", type=float, default=0.0,
                   help="simulated model delay for deadline testing")
    p.add_argument("--markov-table", help="pre-trained pitch table (harmony mode)")
    p.add_argument("--figures", help="directory for figures")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("simulate-cv", help="render an event file to cv frames")
    p.add_argument("--events", required=True)
    p.add_argument("--rate", type=float, default=1000.0)
    p.add_argument("--bpm", type=float, default=120.0)
    p.add_argument("--tail-s", type=float, default=0.1)
    p.add_argument("--out", default="cv_out")
    p.add_argument("--figures", help="directory for figures")
    p.set_defaults(func=cmd_simulate_cv)

    p = sub.add_parser("serve", help="run the live engine service")
    _add_common_session_args(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=DEFAULT_PORT)
    p.add_argument("--log", help="write emitted note events to this file")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, FormatError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
