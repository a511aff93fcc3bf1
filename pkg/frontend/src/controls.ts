// Command enablement, table-driven from the FSM edge list in protocol.md.
// A control is enabled exactly in the phases where its command is legal.

import { SessionSnapshot } from "./protocol.js";

export type ControlId =
  | "SnapshotRgbd"
  | "BeginTactile"
  | "ArmHammer"
  | "Retake:rgbd"
  | "Retake:tactile"
  | "Retake:audio"
  | "NextPoint"
  | "SetLabel"
  | "SetEnvironment";

const RETAKE_PHASES = ["RgbdCaptured", "TactileDone", "AudioDone", "PointComplete"];
const ANY_PHASE = [
  "Idle",
  "RgbdTargeting",
  "RgbdCaptured",
  "TactileApproach",
  "TactilePressing",
  "TactileDone",
  "AudioArmed",
  "AudioReleased",
  "AudioDone",
  "PointComplete",
];

interface Edge {
  phases: string[];
  extra?: (s: SessionSnapshot) => boolean;
}

/** The published edge list: one row per control. */
export const COMMAND_EDGES: Record<ControlId, Edge> = {
  SnapshotRgbd: {
    phases: ["RgbdTargeting"],
    extra: (s) => s.depth_gate === "InRange",
  },
  BeginTactile: { phases: ["RgbdCaptured"] },
  ArmHammer: { phases: ["TactileDone"] },
  "Retake:rgbd": { phases: RETAKE_PHASES, extra: (s) => s.has_rgbd },
  "Retake:tactile": {
    phases: RETAKE_PHASES,
    extra: (s) => s.captured_targets.length === s.targets_n.length,
  },
  "Retake:audio": { phases: RETAKE_PHASES, extra: (s) => s.has_audio },
  NextPoint: { phases: ["PointComplete"] },
  SetLabel: { phases: ANY_PHASE },
  SetEnvironment: { phases: ANY_PHASE },
};

export function enabledControls(
  session: SessionSnapshot | null,
  connected: boolean,
  pending: boolean,
): Set<ControlId> {
  const enabled = new Set<ControlId>();
  if (!session || !connected || pending) return enabled;
  for (const [control, edge] of Object.entries(COMMAND_EDGES) as [ControlId, Edge][]) {
    if (!edge.phases.includes(session.phase)) continue;
    if (edge.extra && !edge.extra(session)) continue;
    enabled.add(control);
  }
  return enabled;
}

export function commandFor(control: ControlId): { type: string; payload: Record<string, any> } {
  if (control.startsWith("Retake:")) {
    return { type: "Retake", payload: { modality: control.split(":")[1] } };
  }
  return { type: control, payload: {} };
}
