"""Backend parity: the compiled kernels must match the pure fallback."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multisense import kernels
from multisense.kernels import _pure

TARGETS = np.array([10.0, 15.0, 20.0])


def test_backend_reports_name():
    assert kernels.BACKEND in ("native", "pure")


@settings(max_examples=50, deadline=None)
@given(
    seed=st.integers(0, 2**31 - 1),
    debounce=st.integers(1, 5),
    n=st.integers(1, 400),
)
def test_trigger_scan_parity_random_streams(seed, debounce, n):
    rng = np.random.default_rng(seed)
    forces = rng.uniform(-1.0, 25.0, size=n)
    got = kernels.trigger_scan(forces, TARGETS, 0.5, debounce)
    want = _pure.trigger_scan(forces, TARGETS, 0.5, debounce)
    assert np.array_equal(got[0], want[0])
    assert np.array_equal(got[1], want[1])


def test_trigger_scan_empty_and_no_hits():
    idx, tgt = kernels.trigger_scan(np.array([]), TARGETS, 0.5, 1)
    assert len(idx) == 0
    idx, tgt = kernels.trigger_scan(np.full(100, 5.0), TARGETS, 0.5, 3)
    assert len(idx) == 0


def test_trigger_scan_rejects_bad_debounce():
    with pytest.raises(ValueError):
        kernels.trigger_scan(np.zeros(4), TARGETS, 0.5, 0)


def test_modal_synth_parity():
    freqs = np.array([440.0, 1200.0, 3300.0])
    damps = np.array([5.0, 20.0, 80.0])
    amps = np.array([1.0, 0.5, 0.25])
    native = kernels.modal_synth(freqs, damps, amps, 4800, 1.0 / 48000)
    pure = _pure.modal_synth(freqs, damps, amps, 4800, 1.0 / 48000)
    np.testing.assert_allclose(native, pure, rtol=1e-12, atol=1e-14)


def test_modal_synth_no_modes_silent():
    out = kernels.modal_synth(np.array([]), np.array([]), np.array([]), 100, 1e-4)
    assert np.all(out == 0.0)
