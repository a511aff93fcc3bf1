"""Pure numpy/Python fallbacks for the hot kernels.

Semantics here are the reference; the compiled extension in ``_native.pyx``
must agree result-for-result. The trigger scan is a genuinely sequential
per-sample state machine, so the fallback is a plain Python loop; the modal
oscillator bank is vectorized with numpy, accumulated mode by mode in the
same order as the native kernel.
"""

from __future__ import annotations

import numpy as np


def trigger_scan(
    forces: np.ndarray,
    targets: np.ndarray,
    window: float,
    debounce: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Scan a force stream for target crossings.

    A target fires at the `debounce`-th consecutive sample inside its
    +/-window band; targets fire in ascending order, at most once each, and a
    fired target is never re-armed. When bands overlap, the lowest unfired
    target claims the sample. Returns (sample_indices, target_indices).
    """

    forces = np.ascontiguousarray(forces, dtype=np.float64)
    targets = np.ascontiguousarray(targets, dtype=np.float64)
    if debounce < 1:
        raise ValueError("debounce must be >= 1")
    n_targets = len(targets)

    fired_idx: list[int] = []
    fired_target: list[int] = []
    next_target = 0
    active = -1
    run = 0
    for i, force in enumerate(forces):
        if next_target >= n_targets:
            break
        hit = -1
        for j in range(next_target, n_targets):
            if abs(force - targets[j]) <= window:
                hit = j
                break
        if hit < 0:
            active = -1
            run = 0
            continue
        if hit == active:
            run += 1
        else:
            active = hit
            run = 1
        if run >= debounce:
            fired_idx.append(i)
            fired_target.append(hit)
            next_target = hit + 1
            active = -1
            run = 0
    return np.array(fired_idx, dtype=np.int64), np.array(fired_target, dtype=np.int64)


def modal_synth(
    freqs: np.ndarray,
    dampings: np.ndarray,
    amps: np.ndarray,
    n_samples: int,
    dt: float,
) -> np.ndarray:
    """Sum of exponentially damped sinusoids sampled at t = i*dt.

    out[i] = sum_k amps[k] * exp(-dampings[k] * t_i) * sin(2*pi*freqs[k] * t_i)
    """

    freqs = np.asarray(freqs, dtype=np.float64)
    dampings = np.asarray(dampings, dtype=np.float64)
    amps = np.asarray(amps, dtype=np.float64)
    t = np.arange(n_samples, dtype=np.float64) * dt
    out = np.zeros(n_samples, dtype=np.float64)
    for f, d, a in zip(freqs, dampings, amps):
        out += a * np.exp(-d * t) * np.sin(2.0 * np.pi * f * t)
    return out
