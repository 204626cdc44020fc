/**
 * DOM control surface. The layout follows the engine mode: drums mode
 * leads with the on/off toggle row, cv mode leads with the crossfader and
 * the continuous density knobs. All controls send exactly one message per
 * gesture and display only acknowledged values.
 */

import { EngineClient } from './client';
import { PadGeometry, padToPosition, positionToPad, triangleCorners } from './geometry';
import type { UiState } from './state';

const GROUP_LABELS = ['kick', 'snare', 'hats', 'toms', 'cymbals'];

export interface ControlRefs {
  padCanvas: HTMLCanvasElement;
  crossfader: HTMLInputElement;
  densitySliders: HTMLInputElement[];
  toggleButtons: Map<string, HTMLButtonElement>;
  tapButton: HTMLButtonElement;
  statusLine: HTMLElement;
  errorBanner: HTMLElement;
  metricsLine: HTMLElement;
}

export function buildControls(
  root: HTMLElement,
  client: EngineClient,
  groups: number,
  mode: string,
  getState: () => UiState,
): ControlRefs {
  root.innerHTML = '';

  const statusLine = el('div', 'status', 'connecting…');
  const errorBanner = el('div', 'error-banner', '');
  errorBanner.style.display = 'none';

  const padCanvas = document.createElement('canvas');
  padCanvas.width = 360;
  padCanvas.height = 300;
  padCanvas.className = 'pad';

  const crossfader = slider(0, 1, 0.001);
  crossfader.className = 'crossfader';
  crossfader.addEventListener('change', () => {
    client.send({ type: 'crossfade', alpha: Number(crossfader.value) });
  });

  const densitySliders: HTMLInputElement[] = [];
  const densityRow = el('div', 'density-row', '');
  for (let g = 0; g < groups; g++) {
    const knob = slider(0, 1, 0.01);
    knob.addEventListener('change', () => {
      client.send({ type: 'set_density', group: g, value: Number(knob.value) });
    });
    const wrap = el('label', 'knob', GROUP_LABELS[g] ?? `group ${g}`);
    wrap.prepend(knob);
    densityRow.appendChild(wrap);
    densitySliders.push(knob);
  }

  const toggleButtons = new Map<string, HTMLButtonElement>();
  const toggleRow = el('div', 'toggle-row', '');
  for (const name of ['freeze_r', 'autonomous', 'clear_buffer'] as const) {
    const btn = document.createElement('button');
    btn.textContent = name.replace('_', ' ');
    btn.addEventListener('click', () => client.send({ type: 'toggle', name }));
    toggleRow.appendChild(btn);
    toggleButtons.set(name, btn);
  }
  for (let g = 0; g < groups; g++) {
    const btn = document.createElement('button');
    btn.textContent = `mute ${GROUP_LABELS[g] ?? g}`;
    btn.addEventListener('click', () =>
      client.send({ type: 'toggle', name: 'mute_group', group: g }));
    toggleRow.appendChild(btn);
    toggleButtons.set(`mute_${g}`, btn);
  }

  const tapButton = document.createElement('button');
  tapButton.textContent = 'tap';
  tapButton.className = 'tap';
  tapButton.addEventListener('click', () => client.tap(performance.now() / 1000));

  const metricsLine = el('div', 'metrics', '');

  // pad pointer handling: one message per pointer move/down gesture sample
  const geometry: PadGeometry = { left: 10, top: 10, width: 340, height: 280 };
  let dragging = false;
  const sendFromPointer = (ev: PointerEvent) => {
    const rect = padCanvas.getBoundingClientRect();
    const state = getState();
    const prevAlpha = state.control?.alpha ?? 0.5;
    const pos = padToPosition(ev.clientX - rect.left, ev.clientY - rect.top,
      geometry, prevAlpha);
    client.send({ type: 'set_position', alpha: pos.alpha, tau: pos.tau });
  };
  padCanvas.addEventListener('pointerdown', (ev) => {
    dragging = true;
    padCanvas.setPointerCapture(ev.pointerId);
    sendFromPointer(ev);
  });
  padCanvas.addEventListener('pointermove', (ev) => {
    if (dragging) sendFromPointer(ev);
  });
  padCanvas.addEventListener('pointerup', () => {
    dragging = false;
  });

  root.appendChild(statusLine);
  root.appendChild(errorBanner);
  if (mode === 'cv') {
    root.appendChild(crossfader);
    root.appendChild(densityRow);
    root.appendChild(padCanvas);
    root.appendChild(toggleRow);
  } else {
    root.appendChild(padCanvas);
    root.appendChild(toggleRow);
    root.appendChild(crossfader);
    root.appendChild(densityRow);
  }
  root.appendChild(tapButton);
  root.appendChild(metricsLine);

  return {
    padCanvas, crossfader, densitySliders, toggleButtons, tapButton,
    statusLine, errorBanner, metricsLine,
  };
}

export function paintPad(refs: ControlRefs, state: UiState): void {
  const ctx = refs.padCanvas.getContext('2d');
  if (!ctx) return;
  const geometry: PadGeometry = { left: 10, top: 10, width: 340, height: 280 };
  ctx.clearRect(0, 0, refs.padCanvas.width, refs.padCanvas.height);
  const { a, b, r } = triangleCorners(geometry);
  ctx.fillStyle = '#1d1f24';
  ctx.beginPath();
  ctx.moveTo(a.x, a.y);
  ctx.lineTo(b.x, b.y);
  ctx.lineTo(r.x, r.y);
  ctx.closePath();
  ctx.fill();
  ctx.strokeStyle = '#4a4f5a';
  ctx.stroke();
  ctx.fillStyle = '#9aa0ab';
  ctx.font = '11px sans-serif';
  ctx.fillText('A', a.x - 2, a.y + 14);
  ctx.fillText('B', b.x - 6, b.y + 14);
  ctx.fillText('R', r.x - 3, r.y - 4);
  if (state.control) {
    const dot = positionToPad({ alpha: state.control.alpha, tau: state.control.tau },
      geometry);
    ctx.fillStyle = '#ffb14e';
    ctx.beginPath();
    ctx.arc(dot.x, dot.y, 6, 0, Math.PI * 2);
    ctx.fill();
  }
}

/** Reflect acknowledged state into the widgets (never optimistic). */
export function reflectState(refs: ControlRefs, state: UiState): void {
  refs.statusLine.textContent =
    `${state.connection}` + (state.control ? `  ·  ${state.control.bpm.toFixed(1)} bpm`
      + `  ·  alpha ${state.control.alpha.toFixed(2)} tau ${state.control.tau.toFixed(2)}`
      + (state.transport ? `  ·  bar ${state.transport.bar} step ${state.transport.step}` : '')
      : '');
  refs.errorBanner.style.display = state.lastError ? 'block' : 'none';
  refs.errorBanner.textContent = state.lastError ?? '';
  if (state.control) {
    refs.crossfader.value = String(state.control.alpha);
    for (const [g, knob] of refs.densitySliders.entries()) {
      const v = state.control.densities[String(g)];
      if (v !== undefined) knob.value = String(v);
    }
    refs.toggleButtons.get('freeze_r')?.classList.toggle('on', state.control.frozen_r);
    refs.toggleButtons.get('autonomous')?.classList
      .toggle('on', state.control.autonomy !== 'off');
    for (let g = 0; g < refs.densitySliders.length; g++) {
      refs.toggleButtons.get(`mute_${g}`)?.classList
        .toggle('on', state.control.muted.includes(g));
    }
  }
  if (state.metrics) {
    refs.metricsLine.textContent =
      `misses ${state.metrics.deadline_misses} · dropped ${state.metrics.dropped_frames}`
      + ` · markov skips ${state.metrics.markov_skips}`;
  }
  paintPad(refs, state);
}

function el(tag: string, className: string, text: string): HTMLElement {
  const node = document.createElement(tag);
  node.className = className;
  node.textContent = text;
  return node;
}

function slider(min: number, max: number, step: number): HTMLInputElement {
  const input = document.createElement('input');
  input.type = 'range';
  input.min = String(min);
  input.max = String(max);
  input.step = String(step);
  return input;
}
