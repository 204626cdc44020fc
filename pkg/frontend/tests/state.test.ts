import { describe, expect, it } from 'vitest';
import type { AckMessage, PatternMessage } from '../src/protocol';
import { applyServerMessage, initialState, patternIsWellFormed } from '../src/state';

const ack: AckMessage = {
  type: 'ack', alpha: 0.3, tau: 0.7, bpm: 120, densities: { '0': 0.5 },
  autonomy: 'off', frozen_r: false, muted: [], mode: 'drums',
};

function pattern(steps = 32, voices = 9): PatternMessage {
  const grid = () => Array.from({ length: steps }, () => Array(voices).fill(0));
  return { type: 'pattern', bar_index: 0, hits: grid(), velocities: grid(),
           offsets: grid(), densities: {} };
}

describe('ui state', () => {
  it('mirrors control values only from acknowledgements', () => {
    const s0 = initialState();
    expect(s0.control).toBeNull();
    const s1 = applyServerMessage(s0, ack);
    expect(s1.control?.alpha).toBe(0.3);
    expect(s1.control?.bpm).toBe(120);
    // the original state is untouched (renders are pure swaps)
    expect(s0.control).toBeNull();
  });

  it('applying the same message twice is idempotent', () => {
    const once = applyServerMessage(initialState(), ack);
    const twice = applyServerMessage(once, ack);
    expect(twice.control).toEqual(once.control);
  });

  it('keeps the previous grid and raises a banner on malformed broadcasts', () => {
    const good = pattern();
    good.hits[3][2] = 1;
    let s = applyServerMessage(initialState(), good);
    expect(s.pattern).toBe(good);
    const bad = pattern();
    (bad as unknown as { hits: number[][] }).hits = [[1, 0], [0]];  // ragged
    s = applyServerMessage(s, bad);
    expect(s.pattern).toBe(good);
    expect(s.lastError).toMatch(/malformed/);
    // a following good broadcast clears nothing implicitly but replaces the grid
    const next = pattern();
    s = applyServerMessage(s, next);
    expect(s.pattern).toBe(next);
  });

  it('validates pattern shape', () => {
    expect(patternIsWellFormed(pattern())).toBe(true);
    const empty = pattern(0, 0);
    expect(patternIsWellFormed(empty)).toBe(false);
    const ragged = pattern();
    ragged.velocities = ragged.velocities.slice(0, 5);
    expect(patternIsWellFormed(ragged)).toBe(false);
  });

  it('stores transport, metrics and error messages', () => {
    let s = initialState();
    s = applyServerMessage(s, { type: 'transport', bpm: 97, bar: 4, step: 11 });
    expect(s.transport?.step).toBe(11);
    s = applyServerMessage(s, { type: 'metrics', deadline_misses: 1,
                                dropped_frames: 2, markov_skips: 3 });
    expect(s.metrics).toEqual({ deadline_misses: 1, dropped_frames: 2, markov_skips: 3 });
    s = applyServerMessage(s, { type: 'error', code: 'bad_message', detail: 'nope' });
    expect(s.lastError).toBe('bad_message: nope');
  });
});
