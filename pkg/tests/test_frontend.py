import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from redmask.align import PhoneSegment, UttAlignment
from redmask.frontend import (FeatureMatrix, FrontendError, MfccConfig, Waveform, apply_cmvn,
                              compute_fbank, compute_mfcc, dct_matrix, mel_center_frequencies,
                              scale_alignment, speed_perturb)

SR = 16000


def tone(freq, seconds=1.0, amp=0.5, sr=SR):
    t = np.arange(int(sr * seconds)) / sr
    return Waveform(amp * np.sin(2 * np.pi * freq * t), sr)


# ---------------------------------------------------------------- MFCC

def test_one_second_gives_98_frames():
    m = compute_mfcc(Waveform(np.random.default_rng(0).uniform(-0.5, 0.5, SR), SR))
    assert m.data.shape == (98, 40)
    assert np.all(np.isfinite(m.data))


@settings(max_examples=40, deadline=None)
@given(st.integers(min_value=400, max_value=20000))
def test_frame_count_formula(n):
    m = compute_mfcc(Waveform(np.zeros(n), SR))
    assert m.num_frames == (n - 400) // 160 + 1


def test_zero_signal_is_dct_of_log_floor():
    m = compute_mfcc(Waveform(np.zeros(SR), SR))
    expected = dct_matrix(40, 40) @ np.full(40, math.log(1e-10))
    assert np.allclose(m.data, expected[None, :], rtol=0, atol=1e-9)
    assert np.all(m.data == m.data[0])


def test_too_short_and_rate_mismatch():
    with pytest.raises(FrontendError, match="too short"):
        compute_mfcc(Waveform(np.zeros(399), SR))
    with pytest.raises(FrontendError, match="sample_rate"):
        compute_mfcc(Waveform(np.zeros(8000), 8000))


def test_mfcc_deterministic():
    w = Waveform(np.random.default_rng(3).uniform(-1, 1, 5000), SR)
    a, b = compute_mfcc(w), compute_mfcc(w)
    assert a.data.tobytes() == b.data.tobytes()


def test_dct_is_orthonormal():
    m = dct_matrix(40, 40)
    assert np.max(np.abs(m.T @ m - np.eye(40))) < 1e-12


def _oracle_fbank_frame(frame, cfg):
    """Filterbank energies of one frame from a naive DFT and hand-built triangles."""
    n = cfg.frame_samples
    x = np.array(frame, dtype=np.float64)
    emph = np.empty(n)
    emph[0] = x[0] - cfg.preemphasis * x[0]
    for i in range(1, n):
        emph[i] = x[i] - cfg.preemphasis * x[i - 1]
    win = np.array([0.54 - 0.46 * math.cos(2 * math.pi * i / (n - 1)) for i in range(n)])
    y = emph * win
    nfft = cfg.fft_size
    k = np.arange(nfft // 2 + 1)
    dft = np.array([sum(y[j] * complex(math.cos(-2 * math.pi * kk * j / nfft),
                                       math.sin(-2 * math.pi * kk * j / nfft)) for j in range(n))
                    for kk in k])
    power = np.abs(dft) ** 2

    def mel(f):
        return 1127.0 * math.log(1 + f / 700.0)

    lo, hi = mel(cfg.mel_low_hz), mel(cfg.high_hz)
    step = (hi - lo) / (cfg.num_mel_filters + 1)
    energies = []
    for m in range(cfg.num_mel_filters):
        left, center, right = lo + m * step, lo + (m + 1) * step, lo + (m + 2) * step
        e = 0.0
        for kk in k:
            b = mel(kk * cfg.sample_rate / nfft)
            if left < b <= center:
                e += power[kk] * (b - left) / (center - left)
            elif center < b < right:
                e += power[kk] * (right - b) / (right - center)
        energies.append(e)
    return np.array(energies)


def test_tone_energy_lands_in_nearest_mel_filter():
    cfg = MfccConfig()
    w = tone(1000.0)
    nearest = int(np.argmin(np.abs(mel_center_frequencies(cfg) - 1000.0)))
    oracle = _oracle_fbank_frame(w.samples[:cfg.frame_samples], cfg)
    assert int(np.argmax(oracle)) == nearest
    fb = compute_fbank(w, cfg)
    assert np.all(np.argmax(fb, axis=1) == nearest)
    assert np.allclose(fb[0], oracle, rtol=1e-9, atol=1e-12)


# ---------------------------------------------------------------- CMVN

def test_cmvn_constant_matrix_becomes_zero():
    out = apply_cmvn(FeatureMatrix("u", np.full((10, 4), 5.0)))
    assert np.all(out.data == 0.0)


def test_cmvn_two_frames():
    out = apply_cmvn(FeatureMatrix("u", np.array([[0.0], [2.0]])))
    assert out.data[:, 0].tolist() == [-1.0, 1.0]


def test_cmvn_moments(rng):
    x = rng.normal(3.0, 7.0, (100, 40))
    out = apply_cmvn(FeatureMatrix("u", x)).data
    for d in range(40):
        col = out[:, d].tolist()
        mean = sum(col) / len(col)
        var = sum((v - mean) ** 2 for v in col) / len(col)
        assert abs(mean) < 1e-9
        assert abs(var - 1) < 1e-9


def test_cmvn_idempotent(rng):
    once = apply_cmvn(FeatureMatrix("u", rng.normal(size=(50, 8))))
    twice = apply_cmvn(once)
    assert np.max(np.abs(twice.data - once.data)) <= 1e-9


def test_cmvn_roundoff_level_spread_counts_as_constant():
    # frames of a tone whose period divides the frame shift are equal up to roundoff
    out = apply_cmvn(compute_mfcc(tone(1000.0)))
    assert np.all(out.data == 0.0)


def test_cmvn_large_offset_small_spread(rng):
    for _ in range(50):
        x = rng.normal(rng.normal(0, 1e4), 1e-2, (int(rng.integers(2, 300)), 6))
        out = apply_cmvn(FeatureMatrix("u", x)).data
        assert np.max(np.abs(out.mean(axis=0))) < 1e-9
        assert np.max(np.abs(out.var(axis=0) - 1)) < 1e-9


def test_cmvn_errors():
    with pytest.raises(FrontendError):
        apply_cmvn(FeatureMatrix("u", np.zeros((1, 3))))
    bad = np.zeros((3, 2))
    bad[1, 1] = np.nan
    with pytest.raises(FrontendError, match="non-finite"):
        apply_cmvn(FeatureMatrix("u", bad))


# ---------------------------------------------------------------- speed perturbation

def test_speed_factor_one_is_identity(rng):
    w = Waveform(rng.uniform(-1, 1, 1000), SR)
    out = speed_perturb(w, 1.0)
    assert out.samples.tobytes() == w.samples.tobytes()
    assert out.samples is not w.samples


@pytest.mark.parametrize("n", [16000, 12345, 401])
@pytest.mark.parametrize("factor", [0.9, 1.1, 0.6, 1.9])
def test_speed_output_length(n, factor):
    out = speed_perturb(Waveform(np.zeros(n), SR), factor)
    assert abs(len(out) - round(n / factor)) <= 1


def test_speed_length_example():
    assert abs(len(speed_perturb(Waveform(np.zeros(16000), SR), 0.9)) - 17778) <= 1


@pytest.mark.parametrize("factor", [0.9, 1.1])
def test_speed_shifts_tone_frequency(factor):
    out = speed_perturb(tone(440.0), factor).samples
    spec = np.abs(np.fft.rfft(out))
    peak = np.argmax(spec) * SR / len(out)
    assert abs(peak - 440.0 * factor) <= SR / len(out)


def test_speed_range_checked():
    with pytest.raises(FrontendError):
        speed_perturb(Waveform(np.zeros(10), SR), 2.5)


@pytest.mark.parametrize("factor", [0.9, 1.1])
def test_speed_then_mfcc_frame_count(factor):
    for n in (8000, 16000, 23456):
        t = compute_mfcc(Waveform(np.zeros(n), SR)).num_frames
        t2 = compute_mfcc(speed_perturb(Waveform(np.zeros(n), SR), factor)).num_frames
        assert abs(t2 - round(t / factor)) <= 2


# ---------------------------------------------------------------- alignment scaling

def _ali(spans):
    phones = [PhoneSegment(lab, round(s * 100), round(d * 100), wi, s, d) for lab, s, d, wi in spans]
    return UttAlignment.from_phones("u", phones)


def test_scale_identity():
    a = _ali([("a", 0.10, 0.08, 0)])
    assert scale_alignment(a, 1.0).phones == a.phones


def test_scale_divides_seconds():
    a = _ali([("a", 0.10, 0.08, 0)])
    (p,) = scale_alignment(a, 0.9).phones
    assert p.start_sec == pytest.approx(0.1111, abs=1e-4)
    assert p.start_sec + p.dur_sec == pytest.approx(0.2000, abs=1e-12)
    assert (p.start_frame, p.end_frame) == (11, 20)


def test_scale_shrinks_total_span(rng):
    spans, t = [], 0.0
    for i in range(20):
        d = float(rng.uniform(0.03, 0.2))
        spans.append(("x", round(t, 2), round(d, 2), i))
        t = round(t, 2) + round(d, 2)
    a = _ali(spans)
    s = scale_alignment(a, 1.1)
    for orig, new in zip(a.phones, s.phones):
        st_, du = orig.seconds()
        assert abs(new.start_frame - st_ / 1.1 * 100) <= 1
        assert abs(new.end_frame - (st_ + du) / 1.1 * 100) <= 1
    assert [p.phone for p in s.phones] == [p.phone for p in a.phones]
