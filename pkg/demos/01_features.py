# MFCC front end: framing, a tone through the mel bank, CMVN, speed perturbation
import numpy as np

from redmask import MfccConfig, Waveform, apply_cmvn, compute_fbank, compute_mfcc, speed_perturb
from redmask.frontend import mel_center_frequencies

sr = 16000
t = np.arange(sr) / sr

# %% one second of a 1 kHz tone -> 98 frames of 40 coefficients
tone = Waveform(0.5 * np.sin(2 * np.pi * 1000 * t), sr)
feats = compute_mfcc(tone, utt_id="tone1k")
print("frames x dims:", feats.data.shape)

# %% where does the energy land in the filterbank?
cfg = MfccConfig()
fb = compute_fbank(tone, cfg)
centers = mel_center_frequencies(cfg)
k = int(np.argmax(fb[10]))
print(f"peak filter {k}, centre {centers[k]:.0f} Hz")

# %% per-utterance CMVN; a steady tone has identical frames, so add some noise
noisy = Waveform(tone.samples + 0.05 * np.random.default_rng(0).normal(size=sr), sr)
norm = apply_cmvn(compute_mfcc(noisy))
print("max |mean| after cmvn:", np.abs(norm.data.mean(axis=0)).max())
print("max |var-1| after cmvn:", np.abs(norm.data.var(axis=0) - 1).max())
print("the clean tone normalizes to all zeros:", bool(np.all(apply_cmvn(feats).data == 0)))

# %% speed perturbation shifts pitch and shortens the signal
a440 = Waveform(0.5 * np.sin(2 * np.pi * 440 * t), sr)
for factor in (0.9, 1.0, 1.1):
    out = speed_perturb(a440, factor).samples
    spec = np.abs(np.fft.rfft(out))
    print(f"factor {factor}: {len(out)} samples, peak at {np.argmax(spec) * sr / len(out):.1f} Hz")
