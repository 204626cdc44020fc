/**
 * Pattern grid view: one cell per (step, voice), shaded by velocity, with
 * micro-timing shown as a horizontal displacement of the cell fill. The
 * cell layout is computed separately from canvas painting so it can be
 * verified without a DOM.
 */

import type { PatternMessage, TransportMessage } from './protocol';

export interface GridCell {
  step: number;
  voice: number;
  intensity: number;   // velocity in [0,1] -> fill intensity
  offsetFrac: number;  // micro-timing as a fraction of one cell width
}

export function patternCells(pattern: PatternMessage): GridCell[] {
  const cells: GridCell[] = [];
  for (let step = 0; step < pattern.hits.length; step++) {
    for (let voice = 0; voice < pattern.hits[step].length; voice++) {
      if (pattern.hits[step][voice]) {
        cells.push({
          step,
          voice,
          intensity: pattern.velocities[step][voice],
          offsetFrac: pattern.offsets[step][voice],
        });
      }
    }
  }
  return cells;
}

/** The grid column to highlight for the playing step, or null while the
 * broadcast bar does not match what the grid displays. */
export function highlightedStep(
  pattern: PatternMessage | null,
  transport: TransportMessage | null,
): number | null {
  if (!pattern || !transport) return null;
  const steps = pattern.hits.length;
  const stepsPerBar = 16;
  const parity = transport.bar % Math.max(1, Math.floor(steps / stepsPerBar));
  return parity * stepsPerBar + transport.step;
}

export function drawPatternGrid(
  ctx: CanvasRenderingContext2D,
  width: number,
  height: number,
  pattern: PatternMessage | null,
  transport: TransportMessage | null,
): void {
  ctx.clearRect(0, 0, width, height);
  if (!pattern) return;
  const steps = pattern.hits.length;
  const voices = pattern.hits[0].length;
  const cw = width / steps;
  const ch = height / voices;

  ctx.fillStyle = '#141414';
  ctx.fillRect(0, 0, width, height);
  ctx.strokeStyle = '#2a2a2a';
  ctx.lineWidth = 1;
  for (let s = 0; s <= steps; s += 4) {
    ctx.beginPath();
    ctx.moveTo(s * cw, 0);
    ctx.lineTo(s * cw, height);
    ctx.stroke();
  }

  const playing = highlightedStep(pattern, transport);
  if (playing !== null && playing < steps) {
    ctx.fillStyle = 'rgba(255, 255, 255, 0.08)';
    ctx.fillRect(playing * cw, 0, cw, height);
  }

  for (const cell of patternCells(pattern)) {
    const shade = Math.round(55 + 200 * cell.intensity);
    ctx.fillStyle = `rgb(${shade}, ${Math.round(shade * 0.75)}, 40)`;
    const rect = cellRect(cell, cw, ch, voices);
    ctx.fillRect(rect.x + 1, rect.y + 1, cw - 2, ch - 2);
  }
}

/** Pixel rectangle of one cell: micro-timing displaces the fill
 * horizontally by its fraction of the cell width. */
export function cellRect(
  cell: GridCell,
  cellWidth: number,
  cellHeight: number,
  voices: number,
): { x: number; y: number } {
  return {
    x: (cell.step + cell.offsetFrac) * cellWidth,
    y: (voices - 1 - cell.voice) * cellHeight,
  };
}
