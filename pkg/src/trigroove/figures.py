"""Figure rendering for the CLI report paths.

Written next to the delimited outputs when --figures is passed: pattern
rolls for renders, per-channel traces for CV simulations, loss curves for
training runs. Uses the Agg backend so it works headless.
"""

from __future__ import annotations

from pathlib import Path
from typing import List, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .hvo import STEPS_PER_BAR, HvoPattern, VOICE_NAMES
from .outputs import CvFrame, fit_modulation_curve


def save_pattern_roll(patterns: Sequence[HvoPattern], path, title: str = "generated bars"):
    """Velocity-shaded hit roll of consecutive played bars, with micro-timing
    drawn as horizontal displacement inside each cell."""
    bars = [p.bar_slice(b) for p in patterns for b in range(p.bars)] \
        if patterns and patterns[0].bars > 1 else list(patterns)
    voices = bars[0].voices if bars else len(VOICE_NAMES)
    total_steps = len(bars) * STEPS_PER_BAR
    fig, ax = plt.subplots(figsize=(max(6, total_steps / 8), 3.2))
    for i, bar in enumerate(bars):
        for step in range(bar.steps):
            for voice in range(bar.voices):
                if bar.hits[step, voice]:
                    x = i * STEPS_PER_BAR + step + float(bar.offsets[step, voice])
                    ax.add_patch(plt.Rectangle(
                        (x, voice), 0.9, 0.9,
                        color=plt.cm.viridis(float(bar.velocities[step, voice]))))
    for b in range(len(bars) + 1):
        ax.axvline(b * STEPS_PER_BAR, color="0.8", lw=0.5)
    ax.set_xlim(-0.5, total_steps + 0.5)
    ax.set_ylim(-0.5, voices + 0.5)
    ax.set_yticks(np.arange(voices) + 0.45)
    ax.set_yticklabels(VOICE_NAMES[:voices], fontsize=7)
    ax.set_xlabel("sixteenth steps")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def save_cv_traces(frames: Sequence[CvFrame], path, title: str = "cv channels"):
    channels = sorted({f.channel for f in frames}) or [0]
    fig, axes = plt.subplots(len(channels), 1, figsize=(8, 1.4 * len(channels)),
                             sharex=True, squeeze=False)
    for ax_row, ch in zip(axes[:, 0], channels):
        chan = [f for f in frames if f.channel == ch]
        t = [f.time_s for f in chan]
        ax_row.step(t, [f.value for f in chan], where="post", lw=0.9, label="value")
        ax_row.fill_between(t, 0, [0.15 if f.gate else 0.0 for f in chan],
                            step="post", alpha=0.6, color="tab:red", label="gate")
        ax_row.set_ylim(-0.05, 1.05)
        ax_row.set_ylabel(f"ch {ch}", fontsize=8)
    axes[0, 0].legend(loc="upper right", fontsize=7)
    axes[-1, 0].set_xlabel("seconds")
    axes[0, 0].set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def save_loss_curves(epoch_losses: List[dict], path, holdout_f1=None, vel_mae=None):
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 3.4))
    epochs = np.arange(len(epoch_losses))
    for key in ("total", "bce_hits", "mse_vel", "mse_off"):
        ax1.plot(epochs, [row[key] for row in epoch_losses], label=key, lw=1.1)
    ax1.set_yscale("log")
    ax1.set_xlabel("epoch")
    ax1.legend(fontsize=7)
    ax1.set_title("loss components")
    ax2.plot(epochs, [row["kl"] for row in epoch_losses], label="kl", lw=1.1)
    ax2.plot(epochs, [row["beta"] * 100 for row in epoch_losses],
             label="beta x100", lw=1.1, ls="--")
    ax2.set_xlabel("epoch")
    ax2.legend(fontsize=7)
    note = []
    if holdout_f1 is not None:
        note.append(f"holdout F1 {holdout_f1:.3f}")
    if vel_mae is not None:
        note.append(f"vel MAE {vel_mae:.3f}")
    ax2.set_title("  ".join(note) or "kl / beta")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)


def save_modulation(values: Sequence[float], path, samples_per_step: int = 16):
    curve = fit_modulation_curve(list(values), samples_per_step)
    fig, ax = plt.subplots(figsize=(8, 2.6))
    xs = np.arange(len(curve)) / samples_per_step
    ax.plot(xs, curve, lw=1.0)
    ax.plot(np.arange(len(values)), values, "o", ms=3)
    ax.set_xlabel("step")
    ax.set_title("modulation curve through per-step values")
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
