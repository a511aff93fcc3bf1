"""Audio DSP: clipping, automatic gain selection, impulse verification,
spectrograms, and post-hoc normalization of recordings.

Gains are decibels applied as exact linear multipliers (10^(dB/20)).
Normalization never deconvolves; recordings are rescaled to a reference
gain and divided by the peak of the gain-normalized hammer signal.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MultisenseError, ValidationError
from .records import AudioTake

#: |sample| at or above this fraction of full scale counts as clipping.
CLIPPING_THRESHOLD = 0.99

#: Largest single gain correction applied blind (previous peak unmeasurable).
MAX_GAIN_STEP_DB = 12.0


class NoImpulseError(MultisenseError):
    """The hammer channel contains no detectable impulse."""


class NormalizationError(MultisenseError):
    """The hammer peak is unusable for strike normalization."""


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 20.0)


def linear_to_db(value: float) -> float:
    return 20.0 * np.log10(value)


def detect_clipping(samples: np.ndarray) -> bool:
    samples = np.asarray(samples)
    if samples.size == 0:
        return False
    return bool(np.max(np.abs(samples)) >= CLIPPING_THRESHOLD)


@dataclass
class GainSettings:
    mic_gain_db: float
    hammer_gain_db: float

    def validate(self, min_db: float, max_db: float) -> None:
        for name, value in (("mic_gain_db", self.mic_gain_db), ("hammer_gain_db", self.hammer_gain_db)):
            if not min_db <= value <= max_db:
                raise ValidationError(f"{name} {value} outside device range [{min_db}, {max_db}]")


def choose_gain(
    prev_peak_linear: float,
    prev_gain_db: float,
    target_peak_dbfs: float = -3.0,
    gain_min_db: float = 0.0,
    gain_max_db: float = 60.0,
    step_db: float = 1.0,
) -> float:
    """Gain for the next take so its peak lands on the target level.

    With no usable previous peak the gain is raised by the maximum single
    step instead. The result is clamped to the device range and quantized
    to the gain step.
    """

    if prev_peak_linear <= 0:
        new_gain = prev_gain_db + MAX_GAIN_STEP_DB
    else:
        new_gain = prev_gain_db + (target_peak_dbfs - linear_to_db(prev_peak_linear))
    new_gain = float(np.clip(new_gain, gain_min_db, gain_max_db))
    return round(new_gain / step_db) * step_db


@dataclass
class AgcConfig:
    target_peak_dbfs: float = -3.0
    accept_min_dbfs: float = -6.0
    default_gain_db: float = 0.0
    gain_min_db: float = 0.0
    gain_max_db: float = 60.0
    step_db: float = 1.0
    max_takes: int = 4


def run_agc(take_fn, cfg: AgcConfig | None = None) -> tuple[np.ndarray, list[float]]:
    """Drive takes until one peaks in the accept band without clipping.

    take_fn(gain_db) -> recorded samples at that gain. Returns the accepted
    take and the gain history (one entry per take).
    """

    cfg = cfg or AgcConfig()
    gain = cfg.default_gain_db
    history: list[float] = []
    samples = np.zeros(0, dtype=np.float32)
    for _ in range(cfg.max_takes):
        samples = take_fn(gain)
        history.append(gain)
        peak = float(np.max(np.abs(samples))) if samples.size else 0.0
        if not detect_clipping(samples) and peak > 0:
            peak_dbfs = linear_to_db(peak)
            if cfg.accept_min_dbfs <= peak_dbfs < 0.0:
                return samples, history
        gain = choose_gain(
            peak,
            gain,
            cfg.target_peak_dbfs,
            cfg.gain_min_db,
            cfg.gain_max_db,
            cfg.step_db,
        )
    return samples, history


# --------------------------------------------------------------------------
# impulse detection


@dataclass
class ImpulseInfo:
    peak_index: int
    peak_value: float
    secondary_peak_ratio: float
    pulse_window: tuple[int, int]  # [start, end)

    def validate(self) -> None:
        if self.secondary_peak_ratio < 0:
            raise ValidationError("secondary_peak_ratio must be non-negative")
        start, end = self.pulse_window
        if not start <= self.peak_index < end:
            raise ValidationError("peak_index outside pulse_window")


def estimate_noise_floor(samples: np.ndarray, window: int = 256) -> float:
    """Quietest short-window RMS in the signal (the pre-impact baseline)."""

    x = np.asarray(samples, dtype=np.float64)
    if x.size == 0:
        return 0.0
    if x.size < window:
        return float(np.sqrt(np.mean(x * x)))
    n = (x.size // window) * window
    frames = x[:n].reshape(-1, window)
    rms = np.sqrt(np.mean(frames * frames, axis=1))
    return float(np.min(rms))


def find_impulse(
    hammer_samples: np.ndarray,
    noise_floor: float,
    snr: float = 10.0,
    window_fraction: float = 0.05,
) -> ImpulseInfo:
    """Locate the dominant pulse and how much signal lies outside it.

    The pulse window is the contiguous region around the peak staying above
    ``window_fraction`` of the peak; the secondary ratio is the largest
    |sample| outside that window relative to the peak.
    """

    x = np.asarray(hammer_samples, dtype=np.float64)
    if x.size == 0:
        raise ValueError("empty signal")
    magnitude = np.abs(x)
    peak_index = int(np.argmax(magnitude))
    peak = float(magnitude[peak_index])
    if peak <= 0 or peak < snr * noise_floor:
        raise NoImpulseError(
            f"peak {peak:.3g} below {snr:.0f}x noise floor {noise_floor:.3g}"
        )

    threshold = window_fraction * peak
    start = peak_index
    while start > 0 and magnitude[start - 1] >= threshold:
        start -= 1
    end = peak_index + 1
    while end < x.size and magnitude[end] >= threshold:
        end += 1

    outside = np.concatenate([magnitude[:start], magnitude[end:]])
    secondary = float(np.max(outside) / peak) if outside.size else 0.0
    info = ImpulseInfo(
        peak_index=peak_index,
        peak_value=peak,
        secondary_peak_ratio=secondary,
        pulse_window=(start, end),
    )
    info.validate()
    return info


def verify_clean_impulse(info: ImpulseInfo, max_secondary_ratio: float = 0.2) -> bool:
    return info.secondary_peak_ratio <= max_secondary_ratio


# --------------------------------------------------------------------------
# spectrogram


@dataclass
class Spectrogram:
    magnitudes: np.ndarray  # frames x bins, linear
    window_samples: int
    hop_samples: int
    sample_rate_hz: int

    def validate(self) -> None:
        if self.magnitudes.shape[1] != self.window_samples // 2 + 1:
            raise ValidationError("bins must equal window/2 + 1")

    def to_db(self, floor_db: float = -120.0) -> np.ndarray:
        return 20.0 * np.log10(np.maximum(self.magnitudes, 10 ** (floor_db / 20.0)))


def spectrogram(samples: np.ndarray, window: int = 1024, hop: int = 512, sample_rate_hz: int = 48000) -> Spectrogram:
    """Magnitude short-time spectrum with energy-preserving bin scaling.

    Bins are scaled so the sum of squared magnitudes over frames and bins
    equals the framed signal energy (rectangular window). A signal shorter
    than the window yields a single zero-padded frame.
    """

    if window < 2 or window & (window - 1):
        raise ValueError("window must be a power of two")
    if not 0 < hop <= window:
        raise ValueError("hop must satisfy 0 < hop <= window")
    x = np.asarray(samples, dtype=np.float64)
    if x.size < window:
        x = np.pad(x, (0, window - x.size))
    n_frames = 1 + (x.size - window) // hop
    frames = np.stack([x[i * hop : i * hop + window] for i in range(n_frames)])
    spectrum = np.fft.rfft(frames, axis=1)
    weights = np.full(window // 2 + 1, 2.0)
    weights[0] = 1.0
    weights[-1] = 1.0  # Nyquist bin is unpaired for even windows
    mags = np.abs(spectrum) * np.sqrt(weights / window)
    spec = Spectrogram(
        magnitudes=mags,
        window_samples=window,
        hop_samples=hop,
        sample_rate_hz=sample_rate_hz,
    )
    spec.validate()
    return spec


# --------------------------------------------------------------------------
# post-hoc normalization


def normalize_recording(take: AudioTake, reference_gain_db: float = 0.0) -> np.ndarray:
    """Rescale the mic channel to the reference gain, then divide by the peak
    of the gain-normalized hammer signal, cancelling strike-force variation."""

    mic = np.asarray(take.mic_samples, dtype=np.float64) * db_to_linear(
        reference_gain_db - take.mic_gain_db
    )
    hammer = np.asarray(take.hammer_samples, dtype=np.float64) * db_to_linear(
        reference_gain_db - take.hammer_gain_db
    )
    peak = float(np.max(np.abs(hammer))) if hammer.size else 0.0
    if peak < 1e-12:
        raise NormalizationError("hammer peak is ~0; cannot normalize strike force")
    return mic / peak
