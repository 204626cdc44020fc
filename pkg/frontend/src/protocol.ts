/**
 * Wire protocol with the engine service: JSON messages over one WebSocket.
 * The server is the source of truth; every applied control message is
 * answered with an `ack` carrying the authoritative control state.
 */

export type ControlMessage =
  | { type: 'set_position'; alpha: number; tau: number }
  | { type: 'crossfade'; alpha: number }
  | { type: 'set_density'; group: number; value: number }
  | { type: 'toggle'; name: 'freeze_r' | 'autonomous' | 'clear_buffer' }
  | { type: 'toggle'; name: 'mute_group'; group: number }
  | { type: 'tap'; time_s: number }
  | { type: 'set_tempo'; bpm: number }
  | { type: 'note_in'; pitch: number; velocity: number; time_beats?: number }
  | { type: 'onset_in'; velocity: number; time_beats?: number };

export type EngineMode = 'drums' | 'harmony' | 'cv';

export interface AckMessage {
  type: 'ack';
  alpha: number;
  tau: number;
  bpm: number;
  densities: Record<string, number>;
  autonomy: 'off' | 'follow' | 'drift';
  frozen_r: boolean;
  muted: number[];
  mode: EngineMode;
}

export interface PatternMessage {
  type: 'pattern';
  bar_index: number;
  hits: number[][];
  velocities: number[][];
  offsets: number[][];
  densities: Record<string, number>;
}

export interface TransportMessage {
  type: 'transport';
  bpm: number;
  bar: number;
  step: number;
}

export interface MetricsMessage {
  type: 'metrics';
  deadline_misses: number;
  dropped_frames: number;
  markov_skips: number;
}

export interface ErrorMessage {
  type: 'error';
  code: string;
  detail: string;
}

export type ServerMessage =
  | AckMessage
  | PatternMessage
  | TransportMessage
  | MetricsMessage
  | ErrorMessage;

export function parseServerMessage(raw: string): ServerMessage | null {
  let obj: unknown;
  try {
    obj = JSON.parse(raw);
  } catch {
    return null;
  }
  if (typeof obj !== 'object' || obj === null) return null;
  const type = (obj as { type?: unknown }).type;
  if (type === 'ack' || type === 'pattern' || type === 'transport'
    || type === 'metrics' || type === 'error') {
    return obj as ServerMessage;
  }
  return null;
}
