import numpy as np
import pytest

from redmask.align import PhoneSegment, UttAlignment
from redmask.frontend import FeatureMatrix, Waveform
from redmask.io import write_wav


def make_alignment(utt_id, words, sil_frames=5, start=0):
    """Build an alignment from ``words``: a list of per-word phone lists.

    Each phone is (label, num_frames).  Silence of ``sil_frames`` frames
    is placed before the first word and after the last.
    """
    phones = []
    t = start
    if sil_frames:
        phones.append(PhoneSegment("SIL", t, sil_frames))
        t += sil_frames
    for wi, word in enumerate(words):
        for label, nf in word:
            phones.append(PhoneSegment(label, t, nf, wi))
            t += nf
    if sil_frames:
        phones.append(PhoneSegment("SIL", t, sil_frames))
        t += sil_frames
    return UttAlignment.from_phones(utt_id, phones)


def random_corpus(rng, num_utts, dim=40, min_words=2, max_words=8, max_phones=6,
                  alphabet="abcdefghijklmnopqrstuvwxyz"):
    """Synthetic (archive, alignments) pair with random words and features."""
    archive, alignments = {}, {}
    for n in range(num_utts):
        utt = f"utt{n:05d}"
        words = []
        for _ in range(int(rng.integers(min_words, max_words + 1))):
            k = int(rng.integers(1, max_phones + 1))
            words.append([(alphabet[int(rng.integers(len(alphabet)))], int(rng.integers(3, 12)))
                          for _ in range(k)])
        ali = make_alignment(utt, words)
        alignments[utt] = ali
        archive[utt] = FeatureMatrix(utt, rng.normal(size=(ali.end_frame, dim)))
    return archive, alignments


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_alignment():
    # word 0: a b (3+4 frames), word 1: c (5 frames)
    return make_alignment("u1", [[("a", 3), ("b", 4)], [("c", 5)]], sil_frames=2)


def _ctm_lines(utt, rng):
    """Phones of 30-120 ms grouped into words, silence at both ends, within 0.95 s."""
    lines = [f"{utt} 1 0.00 0.05 SIL -"]
    t, wi = 0.05, 0
    while True:
        nph = int(rng.integers(1, 4))
        durs = [round(float(rng.integers(3, 13)) / 100, 2) for _ in range(nph)]
        if t + sum(durs) > 0.90:
            break
        for k, d in enumerate(durs):
            lines.append(f"{utt} 1 {t:.2f} {d:.2f} {'abcdefgh'[(wi + k) % 8]} {wi}")
            t = round(t + d, 2)
        wi += 1
    lines.append(f"{utt} 1 {t:.2f} {0.95 - t:.2f} SIL -")
    return lines


def write_toy_dataset(root, num_utts=4, sr=16000):
    """One-second WAVs in root/wav, a matching root/ali.ctm and root/vocab.txt."""
    rng = np.random.default_rng(7)
    wav_dir = root / "wav"
    wav_dir.mkdir()
    ctm = []
    for n in range(num_utts):
        utt = f"utt{n}"
        t = np.arange(sr) / sr
        x = 0.3 * np.sin(2 * np.pi * (200 + 150 * n) * t) + 0.05 * rng.normal(size=sr)
        write_wav(Waveform(np.clip(x, -1, 1), sr), wav_dir / f"{utt}.wav")
        ctm += _ctm_lines(utt, rng)
    (root / "ali.ctm").write_text("\n".join(ctm) + "\n")
    (root / "vocab.txt").write_text("ab\ncd\ne\nfgh\n")
    return root


@pytest.fixture
def dataset(tmp_path):
    return write_toy_dataset(tmp_path)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
