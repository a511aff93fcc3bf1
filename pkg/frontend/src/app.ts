// Browser entry point: connect to the daemon (host/port from query
// parameters), apply messages to the store, render on every animation
// frame, reconnect with backoff when the socket drops.

import { ControlId, commandFor } from "./controls.js";
import { renderPanels, wireControls } from "./panels.js";
import { SessionStore } from "./store.js";
import { WsTransport } from "./transport.js";

const params = new URLSearchParams(window.location.search);
const host = params.get("host") ?? "127.0.0.1";
const port = Number(params.get("port") ?? "8787");

let store = new SessionStore();
let transport: WsTransport | null = null;
let reconnectDelayMs = 500;

function sendControl(control: ControlId): void {
  if (!transport) return;
  const { type, payload } = commandFor(control);
  const seq = store.nextSeq();
  store.markPending(seq);
  transport.send({ type, seq, payload });
}

async function connect(): Promise<void> {
  // fresh store per connection: the daemon snapshot is the only state
  store = new SessionStore();
  const ws = new WsTransport(`ws://${host}:${port}/`);
  ws.onMessage((msg) => store.apply(msg));
  ws.onClose(() => {
    store.markDisconnected();
    transport = null;
    setTimeout(connect, reconnectDelayMs);
    reconnectDelayMs = Math.min(reconnectDelayMs * 2, 5000);
  });
  try {
    await ws.ready();
    transport = ws;
    reconnectDelayMs = 500;
  } catch {
    setTimeout(connect, reconnectDelayMs);
    reconnectDelayMs = Math.min(reconnectDelayMs * 2, 5000);
  }
}

function loop(): void {
  renderPanels(store.view());
  requestAnimationFrame(loop);
}

wireControls(sendControl);
void connect();
requestAnimationFrame(loop);
