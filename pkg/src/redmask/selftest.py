"""Brute-force oracles for the kernel and a runnable comparison suite.

The oracles enumerate every frame-level path, so they only scale to toy
sizes, and they share no code with the dynamic programs they check.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, List, Sequence, Tuple

import numpy as np

from . import kernel


def collapse(path: Sequence[int], blank: int = 0) -> Tuple[int, ...]:
    out = []
    prev = None
    for k in path:
        if k != prev and k != blank:
            out.append(k)
        prev = k
    return tuple(out)


def brute_force_ctc_nll(lattice, labels: Sequence[int]) -> float:
    """-log of the summed probability of all V**T paths collapsing to ``labels``."""
    lp = np.asarray(lattice, dtype=np.float64)
    t_len, v = lp.shape
    target = tuple(labels)
    logs = [sum(lp[t, k] for t, k in enumerate(path))
            for path in itertools.product(range(v), repeat=t_len)
            if collapse(path) == target]
    if not logs:
        return math.inf
    m = max(logs)
    return -(m + math.log(sum(math.exp(x - m) for x in logs)))


def random_lattice(rng: np.random.Generator, t_len: int, v: int) -> np.ndarray:
    z = rng.normal(0.0, 1.5, (t_len, v))
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def central_difference(f: Callable[[np.ndarray], float], x: np.ndarray, h: float = 1e-5) -> np.ndarray:
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += h
        xm[idx] -= h
        g[idx] = (f(xp) - f(xm)) / (2 * h)
    return g


def relative_error(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(np.max(np.abs(a)), np.max(np.abs(b)), 1e-12)
    return float(np.max(np.abs(a - b)) / scale)


@dataclass
class CheckResult:
    name: str
    passed: int
    total: int
    worst: float

    @property
    def ok(self) -> bool:
        return self.passed == self.total

    def line(self) -> str:
        status = "PASS" if self.ok else "FAIL"
        return f"{status}  {self.name}: {self.passed}/{self.total} (worst {self.worst:.3g})"


def ctc_instances(seed: int = 0, per_shape: int = 12):
    """Random lattices over every (T<=5, V<=3, |labels|<=2) shape."""
    rng = np.random.default_rng(seed)
    for t_len in range(1, 6):
        for v in (2, 3):
            label_sets = [()] + [(a,) for a in range(1, v)] + \
                         [(a, b) for a in range(1, v) for b in range(1, v)]
            for labels in label_sets:
                for _ in range(per_shape):
                    yield random_lattice(rng, t_len, v), list(labels)


def check_ctc_oracle(seed: int = 0, tol: float = 1e-8) -> CheckResult:
    passed = total = 0
    worst = 0.0
    for lattice, labels in ctc_instances(seed):
        got = kernel.ctc_loss(lattice, labels)
        want = brute_force_ctc_nll(lattice, labels)
        total += 1
        if math.isinf(want):
            passed += math.isinf(got)
            continue
        err = abs(got - want)
        worst = max(worst, err)
        passed += err <= tol
    return CheckResult("ctc_loss vs path enumeration", passed, total, worst)


def check_ctc_grad(seed: int = 1, count: int = 50, tol: float = 1e-5) -> CheckResult:
    rng = np.random.default_rng(seed)
    passed = 0
    worst = 0.0
    for _ in range(count):
        t_len = int(rng.integers(2, 6))
        v = int(rng.integers(2, 5))
        labels = [int(x) for x in rng.integers(1, v, size=int(rng.integers(1, 3)))]
        if not kernel.ctc_feasible(t_len, labels):
            labels = labels[:1]
        lattice = random_lattice(rng, t_len, v)
        _, g = kernel.ctc_loss_grad(lattice, labels)
        fd = central_difference(lambda x: kernel.ctc_loss(x, labels), lattice)
        err = relative_error(g, fd)
        worst = max(worst, err)
        passed += err < tol
    return CheckResult("ctc_loss gradient vs finite differences", passed, count, worst)


def check_ce_grad(seed: int = 2, count: int = 50, tol: float = 1e-5) -> CheckResult:
    rng = np.random.default_rng(seed)
    passed = 0
    worst = 0.0
    for _ in range(count):
        v = int(rng.integers(2, 8))
        z = rng.normal(0.0, 2.0, v)
        target = int(rng.integers(0, v))
        _, g = kernel.cross_entropy_grad(z, target)
        fd = central_difference(lambda x: kernel.cross_entropy(x, target), z)
        err = relative_error(g, fd)
        worst = max(worst, err)
        passed += err < tol
    return CheckResult("cross_entropy gradient vs finite differences", passed, count, worst)


def check_normalization(seed: int = 3, max_t: int = 4) -> CheckResult:
    """Probabilities of all label sequences reachable in T frames sum to 1."""
    rng = np.random.default_rng(seed)
    passed = total = 0
    worst = 0.0
    for t_len in range(1, max_t + 1):
        for v in (2, 3):
            lattice = random_lattice(rng, t_len, v)
            seqs = {collapse(p) for p in itertools.product(range(v), repeat=t_len)}
            mass = sum(math.exp(-kernel.ctc_loss(lattice, list(s))) for s in seqs)
            err = abs(mass - 1.0)
            worst = max(worst, err)
            total += 1
            passed += err < 1e-10
    return CheckResult("ctc probabilities sum to one", passed, total, worst)


def run_all() -> List[CheckResult]:
    return [check_ctc_oracle(), check_normalization(), check_ctc_grad(), check_ce_grad()]
