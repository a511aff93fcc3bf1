// Wire protocol types and codecs shared by the browser (WebSocket text
// frames) and node tests (length-prefixed TCP). Mirrors protocol.md.

export interface WireMessage {
  type: string;
  seq: number;
  payload: Record<string, any>;
  reply_to?: number;
}

export interface SessionSnapshot {
  phase: string;
  object_id: string | null;
  point_index: number | null;
  captured_targets: number[];
  targets_n: number[];
  pending_retake: string | null;
  has_rgbd: boolean;
  has_audio: boolean;
  label: string;
  environment: string;
  completed_points: number[];
  depth_gate: string;
  angle_deg: number | null;
  angle_ok: boolean | null;
  mic_gain_db: number;
  hammer_gain_db: number;
  finished: boolean;
  clock_ns: number;
}

export const DAEMON_MESSAGES = [
  "Hello",
  "StateUpdate",
  "RgbFrame",
  "DepthFrame",
  "TactileFrame",
  "ForceReading",
  "AccelReading",
  "SpectrogramFrame",
  "HammerImpulse",
  "AudioStatus",
  "Error",
] as const;

export const COMMANDS = [
  "SnapshotRgbd",
  "BeginTactile",
  "ArmHammer",
  "Retake",
  "NextPoint",
  "SetLabel",
  "SetEnvironment",
] as const;

export type CommandType = (typeof COMMANDS)[number];

export function encodeMessage(msg: WireMessage): string {
  const body: Record<string, any> = { type: msg.type, seq: msg.seq, payload: msg.payload };
  if (msg.reply_to !== undefined && msg.reply_to !== null) body.reply_to = msg.reply_to;
  return JSON.stringify(body);
}

export function decodeMessage(text: string): WireMessage {
  const body = JSON.parse(text);
  if (typeof body.type !== "string" || typeof body.seq !== "number") {
    throw new Error("message must carry 'type' and 'seq'");
  }
  return {
    type: body.type,
    seq: body.seq,
    payload: body.payload ?? {},
    reply_to: body.reply_to ?? undefined,
  };
}

/** Incremental parser for the 4-byte big-endian length-prefixed TCP framing. */
export class FrameDecoder {
  private buffer = new Uint8Array(0);

  feed(chunk: Uint8Array): WireMessage[] {
    const merged = new Uint8Array(this.buffer.length + chunk.length);
    merged.set(this.buffer);
    merged.set(chunk, this.buffer.length);
    this.buffer = merged;

    const out: WireMessage[] = [];
    const view = () => new DataView(this.buffer.buffer, this.buffer.byteOffset, this.buffer.length);
    while (this.buffer.length >= 4) {
      const length = view().getUint32(0, false);
      if (this.buffer.length < 4 + length) break;
      const body = this.buffer.slice(4, 4 + length);
      this.buffer = this.buffer.slice(4 + length);
      out.push(decodeMessage(new TextDecoder().decode(body)));
    }
    return out;
  }
}

export function encodeFrame(msg: WireMessage): Uint8Array {
  const body = new TextEncoder().encode(encodeMessage(msg));
  const out = new Uint8Array(4 + body.length);
  new DataView(out.buffer).setUint32(0, body.length, false);
  out.set(body, 4);
  return out;
}

/** Decode a base64 float32 payload (spectrogram magnitudes, waveforms). */
export function decodeF32(b64: string): Float32Array {
  const raw = typeof atob === "function" ? atob(b64) : Buffer.from(b64, "base64").toString("binary");
  const bytes = new Uint8Array(raw.length);
  for (let i = 0; i < raw.length; i++) bytes[i] = raw.charCodeAt(i);
  return new Float32Array(bytes.buffer);
}
