import { EngineClient } from './client';
import { buildControls, reflectState } from './controls';
import { drawPatternGrid } from './gridView';
import { applyServerMessage, initialState, setConnection, UiState } from './state';

const params = new URLSearchParams(window.location.search);
const url = params.get('engine') ?? 'ws://127.0.0.1:8962';

let state: UiState = initialState();

const gridCanvas = document.getElementById('grid') as HTMLCanvasElement;
const controlsRoot = document.getElementById('controls') as HTMLElement;

const client = new EngineClient({
  url,
  socketFactory: (u) => new WebSocket(u) as unknown as
    import('./client').SocketLike,
  onMessage: (msg) => {
    state = applyServerMessage(state, msg);
    scheduleRender();
  },
  onStatus: (status) => {
    state = setConnection(state, status);
    scheduleRender();
  },
});

const refs = buildControls(controlsRoot, client,
  Number(params.get('groups') ?? 5), params.get('mode') ?? 'drums',
  () => state);

let renderQueued = false;
function scheduleRender(): void {
  if (renderQueued) return;
  renderQueued = true;
  requestAnimationFrame(() => {
    renderQueued = false;
    reflectState(refs, state);
    const ctx = gridCanvas.getContext('2d');
    if (ctx) drawPatternGrid(ctx, gridCanvas.width, gridCanvas.height,
      state.pattern, state.transport);
  });
}

client.connect();
scheduleRender();
