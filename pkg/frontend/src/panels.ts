// DOM renderers for the operator panels. Pure functions of the view state;
// canvas drawing is skipped when a 2D context is unavailable (jsdom), with
// all data still exposed through attributes for tests.

import { ControlId, commandFor, enabledControls } from "./controls.js";
import { decodeF32 } from "./protocol.js";
import { ViewState } from "./store.js";

const GATE_COLORS: Record<string, string> = {
  InRange: "#2e9e4f",
  TooClose: "#d96b0c",
  TooFar: "#d96b0c",
  Invalid: "#888888",
};

export const CHECKLIST_STEPS = ["rgbd", "10N", "15N", "20N", "audio", "complete"] as const;

export function checklistState(view: ViewState): Record<string, boolean> {
  const s = view.session;
  const captured = new Set((s?.captured_targets ?? []).map((t) => `${Math.round(t)}N`));
  return {
    rgbd: !!s?.has_rgbd,
    "10N": captured.has("10N"),
    "15N": captured.has("15N"),
    "20N": captured.has("20N"),
    audio: !!s?.has_audio,
    complete: s?.phase === "PointComplete",
  };
}

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing panel element #${id}`);
  return node;
}

function setImage(img: HTMLImageElement, png: string | undefined): void {
  if (png) img.src = `data:image/png;base64,${png}`;
}

function context2d(canvas: HTMLCanvasElement): CanvasRenderingContext2D | null {
  try {
    return canvas.getContext ? canvas.getContext("2d") : null;
  } catch {
    return null; // jsdom: canvas drawing unavailable, data attrs still set
  }
}

function drawWave(canvas: HTMLCanvasElement, samples: Float32Array): void {
  const ctx = context2d(canvas);
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.strokeStyle = "#6fb7ff";
  ctx.beginPath();
  const mid = canvas.height / 2;
  for (let i = 0; i < samples.length; i++) {
    const x = (i / Math.max(samples.length - 1, 1)) * canvas.width;
    const y = mid - samples[i] * mid;
    if (i === 0) ctx.moveTo(x, y);
    else ctx.lineTo(x, y);
  }
  ctx.stroke();
}

function drawSpectrogram(canvas: HTMLCanvasElement, mags: Float32Array, frames: number, bins: number): void {
  const ctx = context2d(canvas);
  if (!ctx || frames === 0) return;
  const image = ctx.createImageData(frames, bins);
  let peak = 1e-12;
  for (let i = 0; i < mags.length; i++) peak = Math.max(peak, mags[i]);
  for (let f = 0; f < frames; f++) {
    for (let b = 0; b < bins; b++) {
      const db = 20 * Math.log10(Math.max(mags[f * bins + b] / peak, 1e-6));
      const level = Math.max(0, Math.min(255, Math.round(255 * (1 + db / 120))));
      const idx = ((bins - 1 - b) * frames + f) * 4;
      image.data[idx] = level;
      image.data[idx + 1] = Math.round(level * 0.7);
      image.data[idx + 2] = 255 - level;
      image.data[idx + 3] = 255;
    }
  }
  canvas.width = frames;
  canvas.height = bins;
  ctx.putImageData(image, 0, 0);
}

export function renderPanels(view: ViewState): void {
  const session = view.session;

  // connection banner: controls are unusable until reconnected
  const banner = el("banner");
  banner.classList.toggle("hidden", view.connected);
  banner.textContent = view.connected ? "" : "connection lost - reconnecting...";

  // RGB with center crosshairs
  setImage(el("rgb-image") as HTMLImageElement, view.rgb?.png);
  el("rgb-panel").dataset.timestamp = String(view.rgb?.timestampNs ?? "");

  // depth image + gate bar
  setImage(el("depth-image") as HTMLImageElement, view.depth?.png);
  const gate = view.depth?.gate ?? session?.depth_gate ?? "Invalid";
  const gateBar = el("depth-bar");
  gateBar.dataset.gate = gate;
  gateBar.style.background = GATE_COLORS[gate] ?? "#888";
  gateBar.textContent =
    view.depth?.centerDepthM != null ? `${(view.depth.centerDepthM * 100).toFixed(1)} cm  ${gate}` : gate;

  // tactile image + live force bar
  setImage(el("tactile-image") as HTMLImageElement, view.tactile?.png);
  const force = view.lastForceN ?? 0;
  const forceBar = el("force-bar");
  const maxN = 25;
  forceBar.style.width = `${Math.max(0, Math.min(100, (force / maxN) * 100))}%`;
  forceBar.dataset.newtons = force.toFixed(2);
  el("force-label").textContent = `${force.toFixed(2)} N`;

  // device-angle indicator vs the reference pose
  const angle = el("angle-panel");
  if (session?.angle_deg != null) {
    angle.textContent = `angle ${session.angle_deg.toFixed(1)} deg ${session.angle_ok ? "(ok)" : "(off)"}`;
    angle.dataset.ok = String(session.angle_ok);
  } else {
    angle.textContent = "angle: no reference";
    angle.dataset.ok = "";
  }

  // spectrogram + impulse
  const specPanel = el("spectrogram-panel");
  if (view.spectrogram) {
    specPanel.dataset.frames = String(view.spectrogram.frames);
    specPanel.dataset.bins = String(view.spectrogram.bins);
    drawSpectrogram(
      el("spectrogram-canvas") as HTMLCanvasElement,
      decodeF32(view.spectrogram.magsB64),
      view.spectrogram.frames,
      view.spectrogram.bins,
    );
  }
  const impulsePanel = el("impulse-panel");
  if (view.impulse) {
    impulsePanel.dataset.peakIndex = String(view.impulse.peakIndex);
    impulsePanel.dataset.secondaryRatio = view.impulse.secondaryPeakRatio.toFixed(3);
    drawWave(el("impulse-canvas") as HTMLCanvasElement, decodeF32(view.impulse.samplesB64));
  }

  // per-point checklist
  const checklist = el("checklist");
  const states = checklistState(view);
  checklist.innerHTML = "";
  for (const step of CHECKLIST_STEPS) {
    const item = document.createElement("li");
    item.dataset.step = step;
    item.className = states[step] ? "done" : "todo";
    item.textContent = `${states[step] ? "[x]" : "[ ]"} ${step}`;
    checklist.appendChild(item);
  }

  // header facts
  el("session-line").textContent = session
    ? `${session.object_id ?? "-"} point ${session.point_index ?? "-"} | ${session.phase} | ` +
      `${session.label} @ ${session.environment} | gains ${session.mic_gain_db}/${session.hammer_gain_db} dB`
    : "no session";

  // controls
  const enabled = enabledControls(session, view.connected, view.pendingCommandSeq !== null);
  const buttons = el("controls").querySelectorAll<HTMLButtonElement>("button[data-control]");
  buttons.forEach((button) => {
    const id = button.dataset.control as ControlId;
    button.disabled = !enabled.has(id);
  });

  // error toasts
  const toasts = el("toasts");
  toasts.innerHTML = "";
  for (const message of view.toasts.slice(-3)) {
    const div = document.createElement("div");
    div.className = "toast";
    div.textContent = message;
    toasts.appendChild(div);
  }

  // compare-to-previous
  const history = el("history");
  history.dataset.count = String(view.history.length);
  const last = view.history[view.history.length - 1];
  if (last) {
    setImage(el("history-rgb") as HTMLImageElement, last.rgb?.png);
    setImage(el("history-tactile") as HTMLImageElement, last.tactile?.png);
    el("history-label").textContent = `previous: point ${last.pointIndex}`;
  }
}

export function wireControls(sendControl: (c: ControlId) => void): void {
  const buttons = el("controls").querySelectorAll<HTMLButtonElement>("button[data-control]");
  buttons.forEach((button) => {
    button.addEventListener("click", () => sendControl(button.dataset.control as ControlId));
  });
}

export { commandFor };
