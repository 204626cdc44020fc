/**
 * UI state mirror. Displayed control values come exclusively from server
 * acknowledgements — a moved slider shows its old value until the ack
 * lands, keeping the server the single source of truth. Pattern and
 * transport broadcasts are idempotent display updates.
 */

import type {
  AckMessage,
  PatternMessage,
  ServerMessage,
  TransportMessage,
} from './protocol';

export type ConnectionStatus = 'connecting' | 'open' | 'closed';

export interface UiState {
  connection: ConnectionStatus;
  control: AckMessage | null;        // last acknowledged control state
  pattern: PatternMessage | null;    // last well-formed pattern broadcast
  transport: TransportMessage | null;
  metrics: { deadline_misses: number; dropped_frames: number; markov_skips: number } | null;
  lastError: string | null;
}

export function initialState(): UiState {
  return {
    connection: 'connecting',
    control: null,
    pattern: null,
    transport: null,
    metrics: null,
    lastError: null,
  };
}

export function patternIsWellFormed(msg: PatternMessage): boolean {
  const rows = msg.hits?.length ?? 0;
  if (rows === 0) return false;
  const cols = msg.hits[0]?.length ?? 0;
  if (cols === 0) return false;
  const rectangular = (grid: number[][]) =>
    Array.isArray(grid) && grid.length === rows
    && grid.every((row) => Array.isArray(row) && row.length === cols);
  return rectangular(msg.hits) && rectangular(msg.velocities) && rectangular(msg.offsets);
}

/**
 * Fold one server message into the state. Returns a new state object;
 * malformed pattern broadcasts set an error banner and keep the previous
 * grid on screen.
 */
export function applyServerMessage(state: UiState, msg: ServerMessage): UiState {
  switch (msg.type) {
    case 'ack':
      return { ...state, control: msg, lastError: null };
    case 'pattern':
      if (!patternIsWellFormed(msg)) {
        return { ...state, lastError: 'malformed pattern broadcast' };
      }
      return { ...state, pattern: msg };
    case 'transport':
      return { ...state, transport: msg };
    case 'metrics':
      return {
        ...state,
        metrics: {
          deadline_misses: msg.deadline_misses,
          dropped_frames: msg.dropped_frames,
          markov_skips: msg.markov_skips,
        },
      };
    case 'error':
      return { ...state, lastError: `${msg.code}: ${msg.detail}` };
  }
}

export function setConnection(state: UiState, connection: ConnectionStatus): UiState {
  return { ...state, connection };
}
