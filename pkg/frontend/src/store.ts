// Client-side session store. Holds no authoritative state: everything is
// rebuilt from the daemon's messages, and a reconnect starts from the Hello
// snapshot. Messages must arrive in seq order (the daemon guarantees it per
// connection); a gap or regression throws.

import { SessionSnapshot, WireMessage } from "./protocol.js";

export interface FramePanel {
  png: string;
  timestampNs: number;
  centerDepthM: number | null;
}

export interface DepthPanel extends FramePanel {
  gate: string;
}

export interface TactilePanel {
  png: string;
  timestampNs: number;
  forceN: number;
}

export interface SpectrogramPanel {
  frames: number;
  bins: number;
  magsB64: string;
  sampleRateHz: number;
}

export interface ImpulsePanel {
  peakIndex: number;
  peakValue: number;
  secondaryPeakRatio: number;
  pulseWindow: [number, number];
  samplesB64: string;
  stride: number;
}

export interface CompletedPointView {
  pointIndex: number;
  rgb: FramePanel | null;
  tactile: TactilePanel | null;
  spectrogram: SpectrogramPanel | null;
}

export interface ViewState {
  connected: boolean;
  role: string | null;
  schemaVersion: number | null;
  session: SessionSnapshot | null;
  rgb: FramePanel | null;
  depth: DepthPanel | null;
  tactile: TactilePanel | null;
  lastForceN: number | null;
  lastAccel: { gravityDir: number[]; timestampNs: number } | null;
  spectrogram: SpectrogramPanel | null;
  impulse: ImpulsePanel | null;
  audioEvents: string[];
  pendingCommandSeq: number | null;
  toasts: string[];
  history: CompletedPointView[];
}

function emptyView(): ViewState {
  return {
    connected: false,
    role: null,
    schemaVersion: null,
    session: null,
    rgb: null,
    depth: null,
    tactile: null,
    lastForceN: null,
    lastAccel: null,
    spectrogram: null,
    impulse: null,
    audioEvents: [],
    pendingCommandSeq: null,
    toasts: [],
    history: [],
  };
}

export class SessionStore {
  private view_: ViewState = emptyView();
  private lastSeq = 0;
  private sendSeq = 0;
  forceArrivals: number[] = []; // wall-clock ms, for the update-rate check

  view(): ViewState {
    return this.view_;
  }

  /** Comparable rendered-state core: what a golden-state check diffs. */
  renderedState(): object {
    const v = this.view_;
    return {
      session: v.session,
      role: v.role,
      rgb: v.rgb,
      depth: v.depth,
      tactile: v.tactile,
      spectrogram: v.spectrogram,
      impulse: v.impulse,
    };
  }

  nextSeq(): number {
    this.sendSeq += 1;
    return this.sendSeq;
  }

  markPending(seq: number): void {
    this.view_.pendingCommandSeq = seq;
  }

  markDisconnected(): void {
    this.view_.connected = false;
    this.view_.pendingCommandSeq = null;
    this.lastSeq = 0; // a reconnect starts a fresh per-connection sequence
  }

  apply(msg: WireMessage, nowMs: number = Date.now()): void {
    if (msg.seq !== this.lastSeq + 1) {
      throw new Error(`out-of-order message: seq ${msg.seq} after ${this.lastSeq}`);
    }
    this.lastSeq = msg.seq;
    const v = this.view_;
    if (msg.reply_to !== undefined && msg.reply_to === v.pendingCommandSeq) {
      v.pendingCommandSeq = null;
    }

    switch (msg.type) {
      case "Hello":
        v.connected = true;
        v.role = msg.payload.role;
        v.schemaVersion = msg.payload.schema_version;
        v.session = msg.payload.session as SessionSnapshot;
        break;
      case "StateUpdate": {
        const prev = v.session;
        v.session = msg.payload.session as SessionSnapshot;
        if (
          prev &&
          v.session &&
          v.session.phase === "PointComplete" &&
          prev.phase !== "PointComplete"
        ) {
          v.history.push({
            pointIndex: v.session.point_index ?? -1,
            rgb: v.rgb,
            tactile: v.tactile,
            spectrogram: v.spectrogram,
          });
        }
        break;
      }
      case "RgbFrame":
        v.rgb = {
          png: msg.payload.png,
          timestampNs: msg.payload.timestamp_ns,
          centerDepthM: msg.payload.center_depth_m ?? null,
        };
        break;
      case "DepthFrame":
        v.depth = {
          png: msg.payload.png16,
          timestampNs: msg.payload.timestamp_ns,
          centerDepthM: msg.payload.center_depth_m ?? null,
          gate: msg.payload.gate,
        };
        break;
      case "TactileFrame":
        v.tactile = {
          png: msg.payload.png,
          timestampNs: msg.payload.timestamp_ns,
          forceN: msg.payload.force_n,
        };
        break;
      case "ForceReading":
        v.lastForceN = msg.payload.newtons;
        this.forceArrivals.push(nowMs);
        if (this.forceArrivals.length > 4096) this.forceArrivals.shift();
        break;
      case "AccelReading":
        v.lastAccel = {
          gravityDir: msg.payload.gravity_dir,
          timestampNs: msg.payload.timestamp_ns,
        };
        break;
      case "SpectrogramFrame":
        v.spectrogram = {
          frames: msg.payload.frames,
          bins: msg.payload.bins,
          magsB64: msg.payload.mags_f32,
          sampleRateHz: msg.payload.sample_rate_hz,
        };
        break;
      case "HammerImpulse":
        v.impulse = {
          peakIndex: msg.payload.peak_index,
          peakValue: msg.payload.peak_value,
          secondaryPeakRatio: msg.payload.secondary_peak_ratio,
          pulseWindow: msg.payload.pulse_window,
          samplesB64: msg.payload.samples_f32,
          stride: msg.payload.stride,
        };
        break;
      case "AudioStatus":
        v.audioEvents.push(msg.payload.event ?? msg.payload.status ?? "status");
        if (v.audioEvents.length > 64) v.audioEvents.shift();
        break;
      case "Error":
        v.toasts.push(msg.payload.message ?? "unknown error");
        if (v.toasts.length > 16) v.toasts.shift();
        break;
      default:
        throw new Error(`unknown message type: ${msg.type}`);
    }
  }

  /** Force-bar update rate over the trailing window, in Hz. */
  forceRateHz(windowMs = 1000, nowMs: number = Date.now()): number {
    const cutoff = nowMs - windowMs;
    const n = this.forceArrivals.filter((t) => t >= cutoff).length;
    return (n * 1000) / windowMs;
  }
}
