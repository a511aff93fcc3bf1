"""Linear modal impact-sound synthesis.

The microphone channel is the hammer pulse convolved with a bank of damped
sinusoids, scaled by the point's loudness. Because the whole chain is
linear, gain/strike-normalization behavior downstream is exactly verifiable
against it.
"""

from __future__ import annotations

import numpy as np

from .. import kernels
from .objects import HammerPulse, SimObject

#: Hammer channel full-scale units per Newton of strike force.
HAMMER_CHANNEL_PER_NEWTON = 0.02


def impulse_response(
    obj: SimObject, point: int, sample_rate_hz: int, n_samples: int
) -> np.ndarray:
    """Sum of damped sinusoids for one probe point, sampled at the given rate."""

    modes = obj.modes[point]
    if not modes:
        return np.zeros(n_samples, dtype=np.float64)
    freqs = np.array([m[0] for m in modes])
    damps = np.array([m[1] for m in modes])
    amps = np.array([m[2] for m in modes])
    if np.any(freqs >= sample_rate_hz / 2.0):
        raise ValueError("mode frequency at or above Nyquist")
    return kernels.modal_synth(freqs, damps, amps, n_samples, 1.0 / sample_rate_hz)


def synth_impact(
    obj: SimObject,
    point: int,
    pulse: HammerPulse,
    sample_rate_hz: int,
    duration_s: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Render (mic, hammer) float64 signals for one strike at unit gain.

    mic = loudness * (pulse conv impulse_response); hammer carries exactly
    the pulse (piezo sensitivity folded into a fixed per-Newton factor).
    Output is linear in pulse amplitude.
    """

    if not 0 <= point < len(obj.modes):
        raise ValueError(f"unknown point index {point}")
    n = int(round(duration_s * sample_rate_hz))
    force = pulse.render(n)  # raises if the pulse does not fit
    ir = impulse_response(obj, point, sample_rate_hz, n)
    mic = obj.loudness_scale[point] * np.convolve(force, ir)[:n]
    hammer = force * HAMMER_CHANNEL_PER_NEWTON
    return mic, hammer
