"""Simulated sensor backends and synthetic ground-truth objects."""

from .acoustics import HAMMER_CHANNEL_PER_NEWTON, impulse_response, synth_impact
from .objects import (
    DevicePose,
    ForceProfile,
    HammerPulse,
    Scenario,
    ScriptEntry,
    SimObject,
    load_scenario,
    scenario_from_dict,
)
from .rig import (
    ADHERE_DELAY_S,
    FLIGHT_TIME_S,
    MIN_DEPTH_M,
    Emission,
    SimRig,
    load_cell_counts,
    object_hit_mask,
    render_depth_m,
    render_rgbd,
    tactile_blank,
    tactile_contact_area,
    tactile_image,
)

__all__ = [
    "ADHERE_DELAY_S",
    "DevicePose",
    "Emission",
    "FLIGHT_TIME_S",
    "ForceProfile",
    "HAMMER_CHANNEL_PER_NEWTON",
    "HammerPulse",
    "MIN_DEPTH_M",
    "Scenario",
    "ScriptEntry",
    "SimObject",
    "SimRig",
    "impulse_response",
    "load_cell_counts",
    "load_scenario",
    "object_hit_mask",
    "render_depth_m",
    "render_rgbd",
    "scenario_from_dict",
    "synth_impact",
    "tactile_blank",
    "tactile_contact_area",
    "tactile_image",
]
