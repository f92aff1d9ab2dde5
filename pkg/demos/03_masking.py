# Phone, word-piece and word masks on one synthetic utterance, plus SpecAugment
import numpy as np

from redmask import (MaskConfig, PhoneSegment, SpecAugmentParams, UttAlignment, FeatureMatrix,
                     WordPieceVocab, apply_mask, plan_mask)

# "the cat sat": SIL | dh ah | k ae t | s ae t | SIL
labels = [("SIL", 4, None), ("d", 3, 0), ("h", 5, 0), ("k", 4, 1), ("a", 6, 1), ("t", 3, 1),
          ("s", 5, 2), ("a", 6, 2), ("t", 4, 2), ("SIL", 4, None)]
phones, t = [], 0
for lab, n, w in labels:
    phones.append(PhoneSegment(lab, t, n, w))
    t += n
ali = UttAlignment.from_phones("demo", phones)

rng = np.random.default_rng(0)
feats = FeatureMatrix("demo", rng.normal(size=(t, 8)))
vocab = WordPieceVocab(frozenset({"dh", "ka", "t", "sa"}))


def show(name, plan):
    row = np.full(t, ".")
    for r in plan.regions:
        row[r.start:r.end] = "#"
    print(f"{name:12s} {''.join(row)}")


print(f"{'phones':12s} " + "".join(lab[0] * n for lab, n, _ in labels))
for method, fill in (("PM", "UtteranceMean"), ("PM", "WordMean"), ("WPM", "UtteranceMean"),
                     ("STM", "UtteranceMean")):
    cfg = MaskConfig(method, 0.3, fill, seed=17)
    plan = plan_mask(ali, feats, cfg, vocab)
    show(f"{method}/{fill[:4]}", plan)

# %% masked rows hold the fill, everything else is untouched
cfg = MaskConfig("PM", 0.3, "WordMean", seed=17)
plan = plan_mask(ali, feats, cfg)
out = apply_mask(feats, plan)
masked = np.zeros(t, dtype=bool)
for r in plan.regions:
    masked[r.start:r.end] = True
    print("region", (r.start, r.end), "word", r.word_index, "fill", np.round(r.fill[:3], 3))
    print("  rows equal fill:", bool(np.all(out.data[r.start:r.end] == r.fill)))
print("unmasked rows identical:", np.array_equal(out.data[~masked], feats.data[~masked]))

# %% SpecAugment needs no alignment; overlapping masks, last one wins
spec = MaskConfig("SpecAugment", spec=SpecAugmentParams(3, 1, 10, 2), seed=17)
plan = plan_mask(None, feats, spec)
for r in plan.regions:
    print("specaugment region frames", (r.start, r.end), "dims", (r.d0, r.d1))
