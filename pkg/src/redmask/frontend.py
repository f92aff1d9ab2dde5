"""MFCC + CMVN feature extraction and speed perturbation.

The front end follows the usual 25 ms / 10 ms, 40-coefficient setup.
Constants that are not pinned by that setup are fixed in ``MfccConfig``
so features are reproducible bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .align import PhoneSegment, UttAlignment, build_word_spans, frames_from_seconds


class FrontendError(ValueError):
    pass


@dataclass
class Waveform:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.sample_rate <= 0:
            raise FrontendError(f"sample_rate={self.sample_rate} must be positive")

    def __len__(self):
        return len(self.samples)


@dataclass
class FeatureMatrix:
    utt_id: str
    data: np.ndarray
    frame_shift_ms: float = 10.0
    frame_length_ms: float = 25.0

    @property
    def num_frames(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1] if self.data.ndim == 2 else 0

    def with_data(self, data: np.ndarray) -> "FeatureMatrix":
        return replace(self, data=data)


@dataclass(frozen=True)
class MfccConfig:
    sample_rate: int = 16000
    frame_length_ms: float = 25.0
    frame_shift_ms: float = 10.0
    num_ceps: int = 40
    num_mel_filters: int = 40
    fft_size: int = 512
    preemphasis: float = 0.97
    mel_low_hz: float = 20.0
    mel_high_hz: Optional[float] = None  # None -> sample_rate / 2 - 400
    log_floor: float = 1e-10

    def __post_init__(self):
        if self.num_ceps > self.num_mel_filters:
            raise FrontendError("num_ceps must not exceed num_mel_filters")
        if self.fft_size < self.frame_samples:
            raise FrontendError(f"fft_size={self.fft_size} < frame of {self.frame_samples} samples")
        if not (0 <= self.mel_low_hz < self.high_hz <= self.sample_rate / 2):
            raise FrontendError(f"need 0 <= mel_low < mel_high <= Nyquist, "
                                f"got {self.mel_low_hz}, {self.high_hz}")

    @property
    def high_hz(self) -> float:
        if self.mel_high_hz is None:
            return self.sample_rate / 2 - 400
        return self.mel_high_hz

    @property
    def frame_samples(self) -> int:
        return int(round(self.sample_rate * self.frame_length_ms / 1000))

    @property
    def shift_samples(self) -> int:
        return int(round(self.sample_rate * self.frame_shift_ms / 1000))


def num_frames(num_samples: int, config: MfccConfig) -> int:
    """Frame count under snip-edges framing (only whole frames are kept)."""
    if num_samples < config.frame_samples:
        return 0
    return (num_samples - config.frame_samples) // config.shift_samples + 1


def hz_to_mel(hz):
    return 1127.0 * np.log1p(np.asarray(hz, dtype=np.float64) / 700.0)


def mel_to_hz(mel):
    return 700.0 * np.expm1(np.asarray(mel, dtype=np.float64) / 1127.0)


def mel_center_frequencies(config: MfccConfig) -> np.ndarray:
    lo, hi = hz_to_mel(config.mel_low_hz), hz_to_mel(config.high_hz)
    edges = np.linspace(lo, hi, config.num_mel_filters + 2)
    return mel_to_hz(edges[1:-1])


def mel_filterbank(config: MfccConfig) -> np.ndarray:
    """Triangular filters, linear in mel, shape (num_mel_filters, fft_size // 2 + 1)."""
    lo, hi = hz_to_mel(config.mel_low_hz), hz_to_mel(config.high_hz)
    edges = np.linspace(lo, hi, config.num_mel_filters + 2)
    bin_mel = hz_to_mel(np.arange(config.fft_size // 2 + 1) * config.sample_rate / config.fft_size)
    left, center, right = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    up = (bin_mel - left) / (center - left)
    down = (right - bin_mel) / (right - center)
    return np.maximum(0.0, np.minimum(up, down))


def dct_matrix(num_ceps: int, num_filters: int) -> np.ndarray:
    """Orthonormal DCT-II basis, shape (num_ceps, num_filters)."""
    n = np.arange(num_filters)
    k = np.arange(num_ceps)[:, None]
    m = np.cos(np.pi * k * (2 * n + 1) / (2 * num_filters)) * math.sqrt(2.0 / num_filters)
    m[0] /= math.sqrt(2.0)
    return m


def _frames(waveform: Waveform, config: MfccConfig) -> np.ndarray:
    if waveform.sample_rate != config.sample_rate:
        raise FrontendError(f"sample_rate mismatch: waveform {waveform.sample_rate} Hz, "
                            f"config {config.sample_rate} Hz")
    x = waveform.samples
    t = num_frames(len(x), config)
    if t == 0:
        raise FrontendError(f"waveform too short: {len(x)} samples < one frame "
                            f"({config.frame_samples})")
    idx = np.arange(t)[:, None] * config.shift_samples + np.arange(config.frame_samples)
    return x[idx]


def compute_fbank(waveform: Waveform, config: MfccConfig = MfccConfig()) -> np.ndarray:
    """Mel filterbank energies before the log, shape (T, num_mel_filters)."""
    frames = _frames(waveform, config)
    # per-frame pre-emphasis; the first sample is emphasised against itself
    prev = np.concatenate([frames[:, :1], frames[:, :-1]], axis=1)
    frames = frames - config.preemphasis * prev
    frames = frames * np.hamming(config.frame_samples)
    power = np.abs(np.fft.rfft(frames, n=config.fft_size, axis=1)) ** 2
    return power @ mel_filterbank(config).T


def compute_mfcc(waveform: Waveform, config: MfccConfig = MfccConfig(),
                 utt_id: str = "") -> FeatureMatrix:
    energies = compute_fbank(waveform, config)
    logmel = np.log(np.maximum(energies, config.log_floor))
    ceps = logmel @ dct_matrix(config.num_ceps, config.num_mel_filters).T
    return FeatureMatrix(utt_id, ceps, config.frame_shift_ms, config.frame_length_ms)


# a dimension whose spread is below this fraction of its magnitude is roundoff, not signal
CMVN_CONSTANT_RTOL = 1e-10


def apply_cmvn(features: FeatureMatrix) -> FeatureMatrix:
    """Per-utterance mean and variance normalization.

    Dimensions that are constant over the utterance (up to roundoff,
    see CMVN_CONSTANT_RTOL) come out as zeros.
    """
    x = np.asarray(features.data, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise FrontendError(f"{features.utt_id}: CMVN needs at least 2 frames")
    if not np.all(np.isfinite(x)):
        raise FrontendError(f"{features.utt_id}: non-finite feature values")
    centered = x - x.mean(axis=0)
    centered -= centered.mean(axis=0)  # second pass removes the first pass's rounding
    std = np.sqrt((centered ** 2).mean(axis=0))
    scale = np.abs(x).max(axis=0)
    live = std > CMVN_CONSTANT_RTOL * scale
    out = np.zeros_like(x)
    out[:, live] = centered[:, live] / std[live]
    return features.with_data(out)


# ---------------------------------------------------------------- speed perturbation

SPEED_RANGE = (0.5, 2.0)


@dataclass(frozen=True)
class ResamplerConfig:
    zero_crossings: int = 16
    kaiser_beta: float = 8.0


def _check_factor(factor: float) -> None:
    lo, hi = SPEED_RANGE
    if not (lo < factor < hi):
        raise FrontendError(f"speed factor {factor} outside ({lo}, {hi})")


def speed_perturb(waveform: Waveform, factor: float,
                  resampler: ResamplerConfig = ResamplerConfig()) -> Waveform:
    """Play ``waveform`` ``factor`` times faster (pitch shifts with speed).

    Band-limited interpolation with a Kaiser-windowed sinc.  For factor > 1
    the kernel cutoff drops to 1/factor of Nyquist to avoid aliasing.
    """
    _check_factor(factor)
    x = waveform.samples
    if factor == 1.0:
        return Waveform(x.copy(), waveform.sample_rate)

    n_in = len(x)
    n_out = int(math.floor(n_in / factor + 0.5))
    cutoff = min(1.0, 1.0 / factor)
    half_width = resampler.zero_crossings / cutoff

    t = np.arange(n_out) * factor  # output sample positions on the input grid
    first = np.ceil(t - half_width).astype(np.int64)
    taps = int(math.ceil(2 * half_width)) + 1
    idx = first[:, None] + np.arange(taps)
    offset = t[:, None] - idx
    inside = (np.abs(offset) <= half_width) & (idx >= 0) & (idx < n_in)
    window = np.i0(resampler.kaiser_beta * np.sqrt(np.clip(1 - (offset / half_width) ** 2, 0, 1)))
    window /= np.i0(resampler.kaiser_beta)
    kernel = cutoff * np.sinc(cutoff * offset) * window * inside
    y = (x[np.clip(idx, 0, n_in - 1)] * kernel).sum(axis=1)
    return Waveform(np.clip(y, -1.0, 1.0), waveform.sample_rate)


def scale_alignment(alignment: UttAlignment, factor: float,
                    frame_shift_ms: float = 10.0) -> UttAlignment:
    """Re-time an alignment to match audio perturbed by ``speed_perturb``."""
    _check_factor(factor)
    if factor == 1.0:
        return UttAlignment(alignment.utt_id, list(alignment.phones), list(alignment.words))
    phones = []
    for p in alignment.phones:
        start, dur = p.seconds(frame_shift_ms)
        start, dur = start / factor, dur / factor
        sf, nf = frames_from_seconds(start, dur, frame_shift_ms)
        phones.append(PhoneSegment(p.phone, sf, nf, p.word_index, start, dur))
    return UttAlignment(alignment.utt_id, phones, build_word_spans(phones))
