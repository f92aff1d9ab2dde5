# The whole pipeline through the command line entry point, in a scratch directory:
# featize -> stats -> augment (phone mask 20%, word-mean fill) -> rerun check -> score
import tempfile
from pathlib import Path

import numpy as np

from redmask import Waveform, write_wav
from redmask.cli import main

root = Path(tempfile.mkdtemp(prefix="redmask-demo-"))
(root / "wav").mkdir()
rng = np.random.default_rng(3)
sr = 16000
ctm = []
for n in range(3):
    utt = f"utt{n}"
    t = np.arange(sr) / sr
    write_wav(Waveform(0.3 * np.sin(2 * np.pi * (220 + 110 * n) * t) + 0.02 * rng.normal(size=sr), sr),
              root / "wav" / f"{utt}.wav")
    ctm.append(f"{utt} 1 0.00 0.10 SIL -")
    start = 0.10
    for w in range(8):
        for p in range(2):
            ctm.append(f"{utt} 1 {start:.2f} 0.05 {'abcdefgh'[(w + p) % 8]} {w}")
            start += 0.05
    ctm.append(f"{utt} 1 {start:.2f} 0.05 SIL -")
(root / "ali.ctm").write_text("\n".join(ctm) + "\n")


def run(*args):
    code = main(["-q", *map(str, args)])
    print("$ redmask", " ".join(map(str, args)).replace(str(root) + "/", ""), "->", code)
    return code


run("featize", "--wav-dir", root / "wav", "--out", root / "feats.ark", "--cmvn", "--speed", "0.9,1.0,1.1")
run("stats", "--ctm", root / "ali.ctm")
feats = root / "feats.ark"
base = ["--ctm", root / "ali.ctm", "--preset", "pm20-fw", "--seed", 17]
# only the unperturbed ids have alignments here, so make a 1.0-speed archive
run("featize", "--wav-dir", root / "wav", "--out", feats, "--cmvn")
run("augment", "--feats", feats, *base, "--jobs", 1, "--out", root / "a.ark", "--plan-log", root / "a.tsv")
run("augment", "--feats", feats, *base, "--jobs", 4, "--out", root / "b.ark", "--plan-log", root / "b.tsv")
print("byte-identical across --jobs:", (root / "a.ark").read_bytes() == (root / "b.ark").read_bytes())
print((root / "a.tsv").read_text())

# missing alignment for a phone mask is a usage error (exit 2)
run("augment", "--feats", feats, "--method", "pm", "--out", root / "c.ark")

(root / "ref.trn").write_text("utt0\ta b c d\nutt1\te f g\n")
(root / "hyp.trn").write_text("utt0\ta b x d\nutt1\te f g h\n")
run("score", "--ref", root / "ref.trn", "--hyp", root / "hyp.trn")
run("kernel-selftest")
