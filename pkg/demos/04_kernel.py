# Model maths at desk scale: a Conformer block, CTC, and the joint loss / decode scores
import itertools
import math

import numpy as np

from redmask import (KernelParams, conformer_block, ctc_loss, greedy_ctc_decode, joint_decode,
                     joint_decode_score, joint_loss, layer_norm)
from redmask.selftest import brute_force_ctc_nll, random_lattice

rng = np.random.default_rng(1)

# %% with every sub-module zeroed the block is just a LayerNorm per frame
x = rng.normal(size=(5, 16))
y = conformer_block(x, KernelParams.zeros(16, num_heads=4))
print("zero block == layer norm:", np.max(np.abs(y - layer_norm(x))))

# a random block keeps shape and stays finite
y = conformer_block(x, KernelParams.random(16, num_heads=4, seed=2))
print("random block output", y.shape, "finite:", bool(np.all(np.isfinite(y))))

# %% CTC: dynamic programme vs enumerating every path
lat = random_lattice(rng, 4, 3)
for labels in ([1], [1, 2], [2, 2]):
    print(labels, f"dp {ctc_loss(lat, labels):.10f}  brute {brute_force_ctc_nll(lat, labels):.10f}")

# uniform two-frame lattice over {blank, a}: three of four paths give "a"
print("-ln 0.75 =", ctc_loss(np.log(np.full((2, 2), 0.5)), [1]), math.log(1 / 0.75))

# probability over all label sequences sums to one
total = sum(math.exp(-ctc_loss(lat, list(s))) for n in range(5)
            for s in itertools.product([1, 2], repeat=n) if ctc_loss(lat, list(s)) < math.inf)
print("total probability", total)

print("greedy decode:", greedy_ctc_decode(lat))

# %% joint training loss and decode score with the default weights
print("joint_loss(1, 2) =", joint_loss(1.0, 2.0))
print("joint_decode_score(-1, -3) =", joint_decode_score(-1.0, -3.0))
hyps = [("A", -1.0, -6.0), ("B", -3.0, -2.0)]
for lam in (0.0, 0.5, 0.7, 1.0):
    print(f"lambda {lam}: best {joint_decode(hyps, lam)[0]}")
