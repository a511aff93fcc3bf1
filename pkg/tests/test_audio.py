"""Audio DSP: clipping, AGC, impulse verification, spectrogram, normalization."""

import dataclasses

import numpy as np
import pytest

from multisense import audio
from multisense.records import AudioTake
from multisense.sim import HammerPulse, SimRig, synth_impact

from conftest import make_scenario
from test_sim import make_object


class TestClipping:
    def test_all_zero(self):
        assert not audio.detect_clipping(np.zeros(100))

    def test_full_scale_sample(self):
        x = np.zeros(100)
        x[3] = 1.0
        assert audio.detect_clipping(x)

    def test_threshold_inclusive(self):
        x = np.array([0.99])
        assert audio.detect_clipping(x)
        assert not audio.detect_clipping(np.array([0.98]))


class TestChooseGain:
    def test_arithmetic_example(self):
        # peak -20 dBFS at 0 dB, target -3 -> +17 dB
        assert audio.choose_gain(10 ** (-20 / 20), 0.0, -3.0) == pytest.approx(17.0)

    def test_peak_at_target_unchanged(self):
        assert audio.choose_gain(10 ** (-3 / 20), 12.0, -3.0) == pytest.approx(12.0)

    def test_zero_peak_raises_by_max_step(self):
        assert audio.choose_gain(0.0, 6.0, -3.0) == 6.0 + audio.MAX_GAIN_STEP_DB

    def test_clamped_to_device_range(self):
        assert audio.choose_gain(1e-6, 50.0, -3.0, gain_max_db=60.0) == 60.0

    def test_quantized_to_step(self):
        gain = audio.choose_gain(10 ** (-7.3 / 20), 0.0, -3.0, step_db=1.0)
        assert gain == round(gain)


def rig_take_fn(loudness):
    """take_fn(gain) -> recorded mic samples for a fixed-strike sim object."""

    scenario = make_scenario(objects=[
        {
            "object_id": "agc",
            "modes": [[900.0, 15.0, 1.0]],
            "loudness_scale": loudness,
            "geometry": {"kind": "plane", "distance_m": 0.10, "normal": [0, 0, 1]},
            "stiffness_n_per_mm": 9.0,
        }
    ])
    rig = SimRig(scenario)

    def take(gain_db):
        rig.apply_command("set_gains", mic_gain_db=gain_db, hammer_gain_db=gain_db)
        rig.apply_command("pull_hammer")
        rig.apply_command("magnet_off")
        for _ in range(40):
            for emission in rig.step(None, 0.005):
                if emission.kind == "impact":
                    return emission.payload.mic_samples
        raise AssertionError("no impact emitted")

    return take


class TestAgc:
    def test_corpus_spanning_40db_converges_in_two_takes(self):
        """Loudness range of 40 dB: each object lands in [-6, 0) dBFS, <= 2 takes."""

        base = 1.2e-5
        for step in range(9):  # 9 loudness levels across 40 dB
            loudness = base * 10 ** (step * 5.0 / 20.0)
            samples, history = audio.run_agc(rig_take_fn(loudness))
            assert len(history) <= 2, f"loudness {loudness} needed {len(history)} takes"
            peak = float(np.max(np.abs(samples)))
            assert not audio.detect_clipping(samples)
            assert -6.0 <= audio.linear_to_db(peak) < 0.0

    def test_excessive_gain_clips(self):
        take = rig_take_fn(1.2e-3)(40.0)
        assert audio.detect_clipping(take)


class TestFindImpulse:
    def test_raised_cosine_peak_index(self):
        n = 4096
        signal = HammerPulse(amplitude_n=1.0, width_samples=40, onset_sample=1000).render(n)
        info = audio.find_impulse(signal, noise_floor=1e-6)
        assert abs(info.peak_index - 1020) <= 1
        assert info.pulse_window[0] <= info.peak_index < info.pulse_window[1]

    def test_silence_raises(self):
        with pytest.raises(audio.NoImpulseError):
            audio.find_impulse(np.zeros(1024), noise_floor=0.0)

    def test_noise_only_raises(self):
        rng = np.random.default_rng(0)
        x = rng.normal(0, 1e-3, 4096)
        floor = audio.estimate_noise_floor(x)
        with pytest.raises(audio.NoImpulseError):
            audio.find_impulse(x, floor)

    def test_double_hit_secondary_ratio(self):
        n = 8192
        signal = HammerPulse(amplitude_n=1.0, width_samples=40, onset_sample=1000).render(n)
        signal += HammerPulse(amplitude_n=0.5, width_samples=40, onset_sample=4000).render(n)
        info = audio.find_impulse(signal, noise_floor=1e-6)
        assert info.secondary_peak_ratio == pytest.approx(0.5, abs=0.02)


class TestVerifyCleanImpulse:
    def test_single_pulse_accepted(self):
        signal = HammerPulse(amplitude_n=1.0, width_samples=40, onset_sample=500).render(2048)
        info = audio.find_impulse(signal, 1e-6)
        assert audio.verify_clean_impulse(info)

    def test_double_hit_rejected(self):
        signal = HammerPulse(amplitude_n=1.0, width_samples=40, onset_sample=500).render(8192)
        signal += HammerPulse(amplitude_n=0.5, width_samples=40, onset_sample=4000).render(8192)
        info = audio.find_impulse(signal, 1e-6)
        assert not audio.verify_clean_impulse(info)

    def test_threshold_boundary_inclusive(self):
        info = audio.ImpulseInfo(
            peak_index=10, peak_value=1.0, secondary_peak_ratio=0.2, pulse_window=(5, 15)
        )
        assert audio.verify_clean_impulse(info, max_secondary_ratio=0.2)


class TestSpectrogram:
    def test_pure_tone_dominant_bin(self):
        sr = 48000
        t = np.arange(sr) / sr
        x = np.sin(2 * np.pi * 1000.0 * t)
        spec = audio.spectrogram(x, window=1024, hop=512, sample_rate_hz=sr)
        dominant = np.argmax(np.mean(spec.magnitudes, axis=0))
        assert dominant == round(1000 * 1024 / 48000) == 21

    def test_zeros(self):
        spec = audio.spectrogram(np.zeros(4096), window=1024, hop=512)
        assert np.all(spec.magnitudes == 0.0)

    def test_linearity(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=8192)
        a = audio.spectrogram(x, 1024, 512).magnitudes
        b = audio.spectrogram(2.0 * x, 1024, 512).magnitudes
        np.testing.assert_allclose(b, 2.0 * a, rtol=1e-12)

    def test_short_signal_zero_padded_single_frame(self):
        spec = audio.spectrogram(np.ones(100), window=256, hop=256)
        assert spec.magnitudes.shape == (1, 129)

    def test_energy_preserved_rectangular(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=4096)
        spec = audio.spectrogram(x, window=512, hop=512)
        energy_sig = float(np.sum(x * x))
        energy_spec = float(np.sum(spec.magnitudes**2))
        assert energy_spec == pytest.approx(energy_sig, rel=1e-6)

    def test_bad_window_rejected(self):
        with pytest.raises(ValueError):
            audio.spectrogram(np.zeros(100), window=1000, hop=100)


def sim_take(amplitude_n, mic_gain_db, hammer_gain_db, loudness=2e-4):
    obj = make_object(modes=[(700.0, 12.0, 1.0)], loudness=loudness)
    pulse = HammerPulse(amplitude_n=amplitude_n, width_samples=64, onset_sample=4800)
    mic, hammer = synth_impact(obj, 0, pulse, 48000, 0.4)
    mic_rec = np.clip(mic * 10 ** (mic_gain_db / 20), -1, 1).astype(np.float32)
    ham_rec = np.clip(hammer * 10 ** (hammer_gain_db / 20), -1, 1).astype(np.float32)
    assert np.max(np.abs(mic_rec)) < 0.99 and np.max(np.abs(ham_rec)) < 0.99
    return AudioTake(
        mic_samples=mic_rec,
        hammer_samples=ham_rec,
        sample_rate_hz=48000,
        mic_gain_db=mic_gain_db,
        hammer_gain_db=hammer_gain_db,
        timestamp_ns=0,
    )


def rms_diff(a, b):
    return float(np.sqrt(np.mean((a - b) ** 2)) / (np.sqrt(np.mean(b**2)) + 1e-30))


class TestNormalizeRecording:
    def test_strike_amplitude_invariance(self):
        a = audio.normalize_recording(sim_take(5.0, 0.0, 0.0))
        b = audio.normalize_recording(sim_take(10.0, 0.0, 0.0))
        assert rms_diff(a, b) <= 0.01

    def test_gain_invariance(self):
        a = audio.normalize_recording(sim_take(5.0, 0.0, 0.0))
        b = audio.normalize_recording(sim_take(5.0, 12.0, 12.0))
        assert rms_diff(a, b) <= 0.01

    def test_reference_gain_unit_hammer_is_identity(self):
        take = sim_take(5.0, 0.0, 0.0)
        scale = 1.0 / np.max(np.abs(take.hammer_samples))
        unit_peak = dataclasses.replace(
            take, hammer_samples=(take.hammer_samples * scale).astype(np.float32)
        )
        out = audio.normalize_recording(unit_peak, reference_gain_db=0.0)
        np.testing.assert_allclose(out, take.mic_samples.astype(np.float64), rtol=1e-5, atol=1e-8)

    def test_zero_hammer_rejected(self):
        take = sim_take(5.0, 0.0, 0.0)
        silent = dataclasses.replace(take, hammer_samples=np.zeros_like(take.hammer_samples))
        with pytest.raises(audio.NormalizationError):
            audio.normalize_recording(silent)


def test_noise_floor_estimates_quiet_baseline():
    rng = np.random.default_rng(9)
    x = rng.normal(0, 1e-4, 48000)
    x[20000:21000] += 0.5
    floor = audio.estimate_noise_floor(x)
    assert 0.5e-4 < floor < 2e-4
