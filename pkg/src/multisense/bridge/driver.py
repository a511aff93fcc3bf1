"""Session driver: couples the sim rig, capture engines, FSM, and storage.

One driver owns one session. Each tick (200 Hz of sim time by default) it
plays due script entries into the rig, routes rig emissions through the
engines (gravity compensation, triggering, hammer sequencing, AGC), applies
the resulting events to the session state machine, persists completed
points, and queues notifications for the daemon to broadcast. Operator
commands arrive through ``handle_command``; ``auto`` mode issues them
itself so a scenario can run unattended.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import audio as audio_ops
from .. import store
from ..capture.forces import ForceCalibration, contact_force
from ..capture.session import (
    ArmHammer,
    AudioFailed,
    BeginTactile,
    ContactDetected,
    Finalize,
    HammerReleased,
    HammerSequencer,
    ImpactCaptured,
    NextPoint,
    Phase,
    Retake,
    SessionConfig,
    SessionState,
    SnapshotRgbd,
    StartPoint,
    TargetCaptured,
    advance,
    build_point_record,
)
from ..capture.triggers import GateStatus, IncrementalTrigger, angle_match, depth_gate_check
from ..errors import TransitionError
from ..records import POINTS_PER_OBJECT, Environment, RgbdFrame, TactileSnapshot
from ..sim.objects import ForceProfile, Scenario, ScriptEntry
from ..sim.rig import SimRig

log = logging.getLogger(__name__)


@dataclass
class Notification:
    kind: str
    payload: dict = field(default_factory=dict)


class CommandError(Exception):
    pass


class SessionDriver:
    def __init__(
        self,
        scenario: Scenario,
        config: SessionConfig | None = None,
        dataset_root: Path | None = None,
        auto: bool = False,
        max_audio_attempts: int = 3,
    ):
        self.scenario = scenario
        self.config = config or SessionConfig()
        self.config.validate()
        self.dataset_root = Path(dataset_root) if dataset_root else None
        self.auto = auto
        self.max_audio_attempts = max_audio_attempts

        self.rig = SimRig(scenario)
        self.calib = ForceCalibration(
            scale_n_per_count=scenario.scale_n_per_count,
            tare_counts=scenario.tare_counts,
            m_eff_kg=scenario.m_eff_kg,
        )
        self.session = SessionState()
        self.tick_ns = int(round(1e9 / self.config.tick_rate_hz))
        self.now_ns = 0

        self._accel_history: deque = deque(maxlen=64)
        self._latest_frame: RgbdFrame | None = None
        self._trigger = IncrementalTrigger(self.config.trigger)
        self._force_log: list[tuple[int, float, float]] = []
        self._sequencer: HammerSequencer | None = None
        self._adhered = False
        self._pending_impact = None
        self._audio_attempts = 0
        self._agc = audio_ops.AgcConfig()
        self._label = ""
        self._environment = Environment.WORKSPACE
        self._script_fired: set[int] = set()
        self._phase_reactions: list[tuple[int, ScriptEntry]] = []
        self._auto_handled_phase: Phase | None = None
        self._last_gate: GateStatus | None = None
        self._notifications: list[Notification] = []
        self.completed_points: list[int] = []
        self.point_dirs: list[Path] = []
        self.records: list = []
        self.finished = False

        self.rig.apply_command(
            "set_gains", mic_gain_db=self._agc.default_gain_db, hammer_gain_db=self._agc.default_gain_db
        )
        self._start_point(0)

    # ------------------------------------------------------------------
    # public surface

    def drain_notifications(self) -> list[Notification]:
        out = self._notifications
        self._notifications = []
        return out

    def state_snapshot(self) -> dict:
        s = self.session
        gate = depth_gate_check(self._latest_frame, self.config.depth_gate) if self._latest_frame else GateStatus.INVALID
        angle_deg = None
        angle_ok = None
        if s.reference_pose is not None and self._accel_history:
            angle_ok, angle_deg = angle_match(
                self._accel_history[-1][1], s.reference_pose, self.config.angle_tol_deg
            )
        return {
            "phase": s.phase.value,
            "object_id": s.object_id,
            "point_index": s.point_index,
            "captured_targets": sorted(s.captured_targets),
            "targets_n": list(self.config.trigger.targets_n),
            "pending_retake": s.pending_retake,
            "has_rgbd": s.rgbd_frame is not None,
            "has_audio": s.audio_take is not None and s.audio_verified,
            "label": self._label,
            "environment": self._environment.value,
            "completed_points": sorted(self.completed_points),
            "depth_gate": gate.value,
            "angle_deg": angle_deg,
            "angle_ok": angle_ok,
            "mic_gain_db": self.rig.mic_gain_db,
            "hammer_gain_db": self.rig.hammer_gain_db,
            "finished": self.finished,
            "clock_ns": self.now_ns,
        }

    def handle_command(self, name: str, payload: dict | None = None) -> dict:
        """Apply one operator command; returns the fresh state snapshot.

        Raises CommandError (state unchanged) when the command is malformed
        or illegal in the current phase.
        """

        payload = payload or {}
        try:
            if name == "SnapshotRgbd":
                self._snapshot_rgbd()
            elif name == "BeginTactile":
                self._advance(BeginTactile())
            elif name == "ArmHammer":
                self._advance(ArmHammer())
                self._start_hammer()
            elif name == "Retake":
                modality = payload.get("modality", "")
                self._advance(Retake(modality))
                if modality == "audio":
                    self._start_hammer()
                elif modality == "tactile":
                    self._reset_press()
            elif name == "NextPoint":
                self._next_point()
            elif name == "SetLabel":
                self._label = str(payload.get("label", ""))
                self._write_meta()
            elif name == "SetEnvironment":
                try:
                    self._environment = Environment(payload.get("environment", ""))
                except ValueError as exc:
                    raise CommandError(f"unknown environment: {payload.get('environment')}") from exc
                self._write_meta()
            elif name == "SetConfig":
                raise CommandError("SetConfig is not supported while a session is active")
            else:
                raise CommandError(f"unknown command: {name}")
        except TransitionError as exc:
            raise CommandError(str(exc)) from exc
        if name in ("SetLabel", "SetEnvironment"):
            self._notify_state()
        return self.state_snapshot()

    def tick(self) -> None:
        """Advance one control tick of sim time."""

        if self.finished:
            return
        self._run_script()
        emissions = self.rig.step(None, self.tick_ns / 1e9)
        for emission in emissions:
            self._dispatch(emission)
        self._tick_sequencer()
        if self.auto:
            self._auto_step()

    def run_until(self, predicate, max_s: float = 60.0) -> bool:
        """Tick until predicate(driver) or the sim-time budget runs out."""

        deadline = self.now_ns + int(max_s * 1e9)
        while self.now_ns < deadline and not self.finished:
            self.tick()
            if predicate(self):
                return True
        return predicate(self)

    def run_to_completion(self, max_s: float = 300.0) -> bool:
        return self.run_until(lambda d: d.finished, max_s)

    # ------------------------------------------------------------------
    # internals

    def _advance(self, event) -> None:
        before = self.session.phase
        self.session = advance(self.session, event, self.config)
        if self.session.phase is not before:
            log.debug(
                "phase %s -> %s at %.3fs", before.value, self.session.phase.value, self.now_ns / 1e9
            )
            self._auto_handled_phase = None
            for entry in self.scenario.script:
                if entry.on_phase == self.session.phase.value:
                    self._phase_reactions.append(
                        (self.now_ns + int(entry.after_s * 1e9), entry)
                    )
        self._notify_state()

    def _notify(self, kind: str, **payload) -> None:
        self._notifications.append(Notification(kind=kind, payload=payload))

    def _notify_state(self) -> None:
        self._notify("state", snapshot=self.state_snapshot())

    def _start_point(self, point_index: int) -> None:
        obj = self.rig.obj
        self.rig.apply_command("select_point", point=point_index)
        self._label = obj.label
        self._environment = obj.environment
        self._force_log = []
        self._trigger.reset()
        self._audio_attempts = 0
        self._write_meta()
        self._advance(StartPoint(obj.object_id, point_index))

    def _write_meta(self) -> None:
        if self.dataset_root and self.session.object_id:
            store.write_object_meta(
                self.dataset_root, self.session.object_id, self._label, self._environment
            )

    def _run_script(self) -> None:
        for idx, entry in enumerate(self.scenario.script):
            if entry.at_s is not None and idx not in self._script_fired:
                if self.now_ns >= int(entry.at_s * 1e9):
                    self._script_fired.add(idx)
                    self._apply_script_entry(entry)
        due = [r for r in self._phase_reactions if r[0] <= self.now_ns]
        self._phase_reactions = [r for r in self._phase_reactions if r[0] > self.now_ns]
        for _, entry in due:
            self._apply_script_entry(entry)

    def _apply_script_entry(self, entry: ScriptEntry) -> None:
        args = dict(entry.args)
        if entry.command == "press":
            profile = args.pop("profile", None)
            if isinstance(profile, dict):
                profile = ForceProfile.ramp(
                    peak_n=float(profile.get("peak_n", 22.0)),
                    rise_s=float(profile.get("rise_s", 2.0)),
                    hold_s=float(profile.get("hold_s", 0.5)),
                )
            elif profile is None:
                profile = ForceProfile.ramp(peak_n=22.0, rise_s=2.0)
            self.rig.apply_command("press", profile=profile)
        elif entry.command == "set_pose":
            self.rig.apply_command("set_pose", pose=args["pose"])
        else:
            self.rig.apply_command(entry.command, **args)

    def _dispatch(self, emission) -> None:
        self.now_ns = max(self.now_ns, emission.timestamp_ns)
        if emission.kind == "accel":
            self._accel_history.append((emission.timestamp_ns, emission.payload))
            self._notify("accel", timestamp_ns=emission.timestamp_ns, pose=emission.payload)
        elif emission.kind == "force":
            self._on_force(emission.timestamp_ns, emission.payload["counts"])
        elif emission.kind == "frame":
            self._latest_frame = emission.payload
            gate = depth_gate_check(emission.payload, self.config.depth_gate)
            if gate is not self._last_gate:
                self._last_gate = gate
                self._notify_state()
            self._notify("frame", timestamp_ns=emission.timestamp_ns, frame=emission.payload)
            if self.session.phase in (Phase.TACTILE_APPROACH, Phase.TACTILE_PRESSING):
                self._notify(
                    "tactile_frame",
                    timestamp_ns=emission.timestamp_ns,
                    image=self.rig.current_tactile(),
                    force_n=self._current_force(),
                )
        elif emission.kind == "hammer_adhered":
            self._adhered = True
            self._notify("audio_status", status="hammer_adhered")
        elif emission.kind == "impact":
            self._pending_impact = (emission.timestamp_ns, emission.payload)
        self.now_ns = max(self.now_ns, self.rig.clock_ns)

    def _current_force(self) -> float:
        if not self._accel_history:
            return 0.0
        counts = self.rig.current_counts()
        return contact_force(counts, self._accel_history[-1][1], self.calib)

    def _on_force(self, ts_ns: int, counts: float) -> None:
        if not self._accel_history:
            return
        pose = self._accel_history[-1][1]
        force = contact_force(counts, pose, self.calib)
        self._notify("force", timestamp_ns=ts_ns, newtons=force)

        phase = self.session.phase
        if phase in (Phase.TACTILE_APPROACH, Phase.TACTILE_PRESSING):
            self._force_log.append((ts_ns, counts, force))
        if phase is Phase.TACTILE_APPROACH and force > self.config.contact_threshold_n:
            self._advance(ContactDetected())
            self._trigger.reset()
            return
        if phase is Phase.TACTILE_PRESSING:
            fired = self._trigger.push(ts_ns, force)
            if fired is not None:
                ts, target, measured = fired
                snap = TactileSnapshot(
                    image=self.rig.current_tactile(force_n=measured),
                    target_force_n=target,
                    measured_force_n=measured,
                    pose=pose,
                    timestamp_ns=ts,
                )
                self._advance(TargetCaptured(snap))
                self._notify("tactile_captured", target_n=target, measured_n=measured)

    def _snapshot_rgbd(self) -> None:
        if self._latest_frame is None:
            raise CommandError("no RGBD frame received yet")
        frame = self._latest_frame
        if not self._accel_history:
            raise CommandError("no accelerometer data yet")
        # pair the accel sample closest in time to the frame
        ts = frame.timestamp_ns
        pose = min(self._accel_history, key=lambda item: abs(item[0] - ts))[1]
        self._advance(SnapshotRgbd(frame, pose))

    def _start_hammer(self) -> None:
        self._sequencer = HammerSequencer(self.config.hammer, self.now_ns)
        self._adhered = False
        self._pending_impact = None
        self._audio_attempts += 1
        self._sequencer.begin()
        self._notify("audio_status", status="magnet_on")

    def _tick_sequencer(self) -> None:
        if self._sequencer is None or self._sequencer.done:
            # an impact with no active sequencer is stale; drop it
            self._pending_impact = None
            return
        impact_ns = self._pending_impact[0] if self._pending_impact else None
        events = self._sequencer.tick(self.now_ns, adhered=self._adhered, impact_ns=impact_ns)
        for event in events:
            if event.kind == "magnet_off":
                self.rig.apply_command("magnet_off")
                self._advance(HammerReleased())
                self._notify("audio_status", status="magnet_off")
            elif event.kind == "recording_window":
                self._finish_take(event.payload)
            elif event.kind == "audio_failed":
                self._advance(AudioFailed(event.payload["reason"]))
                self._notify("audio_status", status="failed", reason=event.payload["reason"])
                self._sequencer = None
                self._maybe_retry_audio()

    def _finish_take(self, window: dict) -> None:
        assert self._pending_impact is not None
        _, take = self._pending_impact
        self._pending_impact = None
        self._sequencer = None
        self._advance(ImpactCaptured(take))

        if self.session.phase is not Phase.AUDIO_DONE:
            self._notify("audio_status", status="rejected", reason="impulse not clean")
            self._maybe_retry_audio()
            return

        # AGC: accept only a take peaking in the accept band without clipping
        mic = take.mic_samples
        peak = float(np.max(np.abs(mic))) if mic.size else 0.0
        clipped = audio_ops.detect_clipping(mic)
        in_band = (
            not clipped
            and peak > 0
            and self._agc.accept_min_dbfs <= audio_ops.linear_to_db(peak) < 0.0
        )
        if not in_band and self._audio_attempts < self.max_audio_attempts:
            new_mic = audio_ops.choose_gain(
                peak,
                take.mic_gain_db,
                self._agc.target_peak_dbfs,
                self._agc.gain_min_db,
                self._agc.gain_max_db,
                self._agc.step_db,
            )
            ham_peak = float(np.max(np.abs(take.hammer_samples))) if take.hammer_samples.size else 0.0
            new_ham = audio_ops.choose_gain(
                ham_peak,
                take.hammer_gain_db,
                self._agc.target_peak_dbfs,
                self._agc.gain_min_db,
                self._agc.gain_max_db,
                self._agc.step_db,
            )
            self.rig.apply_command("set_gains", mic_gain_db=new_mic, hammer_gain_db=new_ham)
            self._notify("audio_status", status="gain_adjusted", mic_gain_db=new_mic, hammer_gain_db=new_ham)
            self._advance(Retake("audio"))
            self._start_hammer()
            return

        self._emit_audio_views(take)
        self._advance(Finalize())
        self._persist_point()

    def _maybe_retry_audio(self) -> None:
        if self.auto and self._audio_attempts < self.max_audio_attempts:
            if self.session.phase is Phase.TACTILE_DONE:
                self._advance(ArmHammer())
                self._start_hammer()

    def _emit_audio_views(self, take) -> None:
        spec = audio_ops.spectrogram(
            take.mic_samples, window=1024, hop=512, sample_rate_hz=take.sample_rate_hz
        )
        floor = audio_ops.estimate_noise_floor(take.hammer_samples)
        info = audio_ops.find_impulse(take.hammer_samples, floor, snr=self.config.impulse_snr)
        self._notify("spectrogram", spec=spec)
        self._notify("hammer_impulse", info=info, samples=take.hammer_samples)

    def _persist_point(self) -> None:
        record = build_point_record(self.session, force_log=self._force_log)
        self.records.append(record)
        if self.dataset_root:
            self._write_meta()
            path = store.write_point_record(record, self.dataset_root)
            self.point_dirs.append(path)
            store.save_manifest(store.build_manifest(self.dataset_root))
            self._notify("point_saved", path=str(path))
        if self.session.point_index is not None and self.session.point_index not in self.completed_points:
            self.completed_points.append(self.session.point_index)
        self._notify_state()

    def _next_point(self) -> None:
        current = self.session.point_index or 0
        self._advance(NextPoint())
        if current + 1 >= POINTS_PER_OBJECT:
            self.finished = True
            self._notify("audio_status", status="object_complete")
            self._notify_state()
            return
        self._start_point(current + 1)

    def _reset_press(self) -> None:
        self._force_log = []
        self._trigger.reset()
        self.rig.apply_command("stop_press")

    def _auto_step(self) -> None:
        phase = self.session.phase
        if phase is self._auto_handled_phase:
            return
        try:
            if phase is Phase.RGBD_TARGETING:
                if (
                    self._latest_frame is not None
                    and depth_gate_check(self._latest_frame, self.config.depth_gate) is GateStatus.IN_RANGE
                ):
                    self._auto_handled_phase = phase
                    self.handle_command("SnapshotRgbd")
            elif phase is Phase.RGBD_CAPTURED:
                self._auto_handled_phase = phase
                self.handle_command("BeginTactile")
            elif phase is Phase.TACTILE_DONE:
                if self._sequencer is None and self._audio_attempts < self.max_audio_attempts:
                    self._auto_handled_phase = phase
                    self.handle_command("ArmHammer")
            elif phase is Phase.POINT_COMPLETE:
                self._auto_handled_phase = phase
                self.handle_command("NextPoint")
        except CommandError as exc:
            log.debug("auto command rejected: %s", exc)
