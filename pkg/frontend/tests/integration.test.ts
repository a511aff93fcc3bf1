// Scripted session against the real daemon over TCP: completes one full
// point, checks the force-bar update rate, and verifies that a forced
// reconnect restores the same rendered session state.

import { ChildProcess, spawn } from "node:child_process";
import fs from "node:fs";
import os from "node:os";
import path from "node:path";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { commandFor } from "../src/controls.js";
import { checklistState, CHECKLIST_STEPS } from "../src/panels.js";
import { SessionSnapshot } from "../src/protocol.js";
import { SessionStore } from "../src/store.js";
import { TcpTransport } from "../src/transport.js";

const SCENARIO = {
  name: "console-integration",
  seed: 7,
  sample_rate_hz: 48000,
  audio: { record_pre_s: 0.1, record_post_s: 0.35, noise_floor: 1e-5 },
  calibration: { scale_n_per_count: 2e-5, tare_counts: 120000.0, m_eff_kg: 0.05 },
  strike: { force_n: 15.0, width_samples: 64 },
  objects: [
    {
      object_id: "mug01",
      label: "ceramic mug",
      environment: "kitchen",
      modes: [
        [700.0, 12.0, 1.0],
        [1800.0, 25.0, 0.4],
      ],
      loudness_scale: 0.0005,
      geometry: { kind: "plane", distance_m: 0.1, normal: [0, 0, 1] },
      stiffness_n_per_mm: 9.0,
    },
  ],
  script: [
    {
      on_phase: "TactileApproach",
      after_s: 0.05,
      command: "press",
      profile: { peak_n: 22.0, rise_s: 1.2, hold_s: 0.8 },
    },
    { on_phase: "TactileDone", after_s: 0.02, command: "stop_press" },
    { on_phase: "AudioArmed", after_s: 0.08, command: "pull_hammer" },
  ],
};

const SESSION_CONFIG = {
  hammer: { release_delay_s: 0.4, record_pre_s: 0.1, record_post_s: 0.35, timeout_s: 3.0 },
};

let workdir: string;
let daemon: ChildProcess;
let host = "127.0.0.1";
let port = 0;

function spawnDaemon(): Promise<void> {
  return new Promise((resolve, reject) => {
    daemon = spawn(
      "python3",
      [
        "-m",
        "multisense.cli",
        "capture",
        "--sim",
        path.join(workdir, "scenario.json"),
        "--dataset",
        path.join(workdir, "dataset"),
        "--config",
        path.join(workdir, "session.json"),
        "--listen",
        "127.0.0.1:0",
      ],
      { env: { ...process.env, PYTHONUNBUFFERED: "1" } },
    );
    let buffer = "";
    const timer = setTimeout(() => reject(new Error(`daemon never announced a port: ${buffer}`)), 30000);
    daemon.stdout!.on("data", (chunk: Buffer) => {
      buffer += chunk.toString();
      const match = buffer.match(/capture daemon on ([\d.]+):(\d+)/);
      if (match) {
        clearTimeout(timer);
        host = match[1];
        port = Number(match[2]);
        resolve();
      }
    });
    daemon.stderr!.on("data", () => {});
    daemon.on("exit", (code) => {
      clearTimeout(timer);
      if (port === 0) reject(new Error(`daemon exited early with code ${code}: ${buffer}`));
    });
  });
}

interface Client {
  store: SessionStore;
  transport: TcpTransport;
  send(control: Parameters<typeof commandFor>[0]): number;
  waitFor(predicate: (s: SessionStore) => boolean, label: string, timeoutMs?: number): Promise<void>;
  close(): void;
}

async function connect(): Promise<Client> {
  const store = new SessionStore();
  const transport = await TcpTransport.connect(host, port);
  transport.onMessage((msg) => store.apply(msg));
  transport.onClose(() => store.markDisconnected());
  const client: Client = {
    store,
    transport,
    send(control) {
      const { type, payload } = commandFor(control);
      const seq = store.nextSeq();
      store.markPending(seq);
      transport.send({ type, seq, payload });
      return seq;
    },
    async waitFor(predicate, label, timeoutMs = 60000) {
      const deadline = Date.now() + timeoutMs;
      while (Date.now() < deadline) {
        if (predicate(store)) return;
        await new Promise((r) => setTimeout(r, 20));
      }
      throw new Error(`timed out waiting for ${label} (phase ${store.view().session?.phase})`);
    },
    close() {
      transport.close();
    },
  };
  await client.waitFor((s) => s.view().connected, "Hello");
  return client;
}

function phase(store: SessionStore): string {
  return store.view().session?.phase ?? "";
}

function stableProjection(session: SessionSnapshot) {
  // everything the panels render except the free-running clock and
  // jitter-prone live angle readout
  const { clock_ns, angle_deg, ...rest } = session;
  return rest;
}

beforeAll(async () => {
  workdir = fs.mkdtempSync(path.join(os.tmpdir(), "console-"));
  fs.writeFileSync(path.join(workdir, "scenario.json"), JSON.stringify(SCENARIO, null, 2));
  fs.writeFileSync(path.join(workdir, "session.json"), JSON.stringify(SESSION_CONFIG, null, 2));
  await spawnDaemon();
}, 60000);

afterAll(() => {
  daemon?.kill("SIGTERM");
  fs.rmSync(workdir, { recursive: true, force: true });
});

describe("scripted session against the sim daemon", () => {
  it("completes one full point and survives a forced reconnect", async () => {
    const client = await connect();

    // the force bar must update at >= 10 Hz while telemetry streams
    await new Promise((r) => setTimeout(r, 1500));
    expect(client.store.forceRateHz(1000)).toBeGreaterThanOrEqual(10);

    await client.waitFor(
      (s) => s.view().session?.depth_gate === "InRange",
      "depth gate in range",
    );
    client.send("SnapshotRgbd");
    await client.waitFor((s) => phase(s) === "RgbdCaptured", "RgbdCaptured");

    client.send("BeginTactile");
    await client.waitFor((s) => phase(s) === "TactileDone", "TactileDone");
    expect(client.store.view().session?.captured_targets).toEqual([10, 15, 20]);

    client.send("ArmHammer");
    // settled = phase reached AND the persisted point is reflected
    await client.waitFor(
      (s) =>
        phase(s) === "PointComplete" &&
        (s.view().session?.completed_points ?? []).includes(0),
      "PointComplete (persisted)",
    );

    // all six checklist steps done
    const done = checklistState(client.store.view());
    for (const step of CHECKLIST_STEPS) expect(done[step], step).toBe(true);

    // live panels actually arrived from the daemon
    expect(client.store.view().rgb?.png).toBeTruthy();
    expect(client.store.view().depth?.gate).toBeTruthy();
    expect(client.store.view().spectrogram?.bins).toBe(513);
    expect(client.store.view().impulse?.secondaryPeakRatio).toBeLessThan(0.2);

    const before = stableProjection(client.store.view().session!);

    // forced reconnect: a fresh store must rebuild the identical view
    client.close();
    await new Promise((r) => setTimeout(r, 200));
    const reconnected = await connect();
    await reconnected.waitFor((s) => s.view().session !== null, "Hello session");
    const after = stableProjection(reconnected.store.view().session!);
    expect(after).toEqual(before);

    // the reconnected operator can keep driving the session
    reconnected.send("NextPoint");
    await reconnected.waitFor(
      (s) => s.view().session?.point_index === 1 && phase(s) !== "PointComplete",
      "next point started",
    );
    reconnected.close();
  }, 120000);

  it("rejecting an illegal command leaves the session unchanged", async () => {
    const client = await connect();
    const seqBeforeErrors = client.store.view().toasts.length;
    const phaseBefore = phase(client.store);
    client.send("ArmHammer"); // illegal in any early phase of point 1
    await client.waitFor(
      (s) => s.view().toasts.length > seqBeforeErrors,
      "error toast",
    );
    expect(phase(client.store)).toBe(phaseBefore);
    client.close();
  }, 60000);
});
