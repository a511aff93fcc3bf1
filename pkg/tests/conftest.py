"""Shared fixtures: a fast happy-path scenario and simulator-produced records."""

from __future__ import annotations

import dataclasses

import pytest

from multisense import store
from multisense.bridge.driver import SessionDriver
from multisense.capture.session import HammerConfig, SessionConfig
from multisense.records import POINTS_PER_OBJECT
from multisense.sim.objects import Scenario, scenario_from_dict


def make_scenario(**overrides) -> Scenario:
    """One-object happy-path scenario tuned for fast tests."""

    raw = {
        "name": "happy",
        "seed": 7,
        "sample_rate_hz": 48000,
        "audio": {"record_pre_s": 0.1, "record_post_s": 0.35, "noise_floor": 1e-5},
        "calibration": {"scale_n_per_count": 2e-5, "tare_counts": 120000.0, "m_eff_kg": 0.05},
        "strike": {"force_n": 15.0, "width_samples": 64},
        "objects": [
            {
                "object_id": "mug01",
                "label": "ceramic mug",
                "environment": "kitchen",
                "modes": [[700.0, 12.0, 1.0], [1800.0, 25.0, 0.4]],
                "loudness_scale": 0.0005,
                "geometry": {"kind": "plane", "distance_m": 0.10, "normal": [0.0, 0.0, 1.0]},
                "stiffness_n_per_mm": 9.0,
            }
        ],
        "script": [
            {
                "on_phase": "TactileApproach",
                "after_s": 0.05,
                "command": "press",
                "profile": {"peak_n": 22.0, "rise_s": 1.2, "hold_s": 0.8},
            },
            {"on_phase": "TactileDone", "after_s": 0.02, "command": "stop_press"},
            {"on_phase": "AudioArmed", "after_s": 0.08, "command": "pull_hammer"},
        ],
    }
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(raw.get(key), dict):
            raw[key].update(value)
        else:
            raw[key] = value
    return scenario_from_dict(raw)


def fast_session_config() -> SessionConfig:
    return SessionConfig(
        hammer=HammerConfig(release_delay_s=0.4, record_pre_s=0.1, record_post_s=0.35, timeout_s=3.0)
    )


@pytest.fixture(scope="session")
def driver_run():
    """Drive one point to completion once; reused by many tests."""

    driver = SessionDriver(make_scenario(), config=fast_session_config(), auto=True)
    ok = driver.run_until(lambda d: len(d.completed_points) >= 1, max_s=30.0)
    assert ok, "happy-path scenario failed to complete a point"
    return driver


@pytest.fixture(scope="session")
def sim_record(driver_run):
    return driver_run.records[0]


def clone_for_point(record, object_id: str, point_index: int):
    return dataclasses.replace(record, object_id=object_id, point_index=point_index)


def write_complete_object(root, record, object_id: str, environment="kitchen") -> None:
    from multisense.records import Environment

    store.write_object_meta(root, object_id, f"label {object_id}", Environment(environment))
    for k in range(POINTS_PER_OBJECT):
        store.write_point_record(clone_for_point(record, object_id, k), root)


@pytest.fixture
def dataset_root(tmp_path, sim_record):
    """Dataset with 2 complete objects and 1 partial (4 points)."""

    root = tmp_path / "dataset"
    root.mkdir()
    write_complete_object(root, sim_record, "obj_a")
    write_complete_object(root, sim_record, "obj_b", environment="workshop")
    from multisense.records import Environment

    store.write_object_meta(root, "obj_c", "partial object", Environment.BEDROOM)
    for k in range(4):
        store.write_point_record(clone_for_point(sim_record, "obj_c", k), root)
    return root
