"""Word error rate with substitution / deletion / insertion breakdown."""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Mapping, Optional, Sequence, Tuple

from .tokenize import graphemes

MATCH, SUB, DEL, INS = "=", "S", "D", "I"


class ScoreError(ValueError):
    pass


def align_edit(ref: Sequence[str], hyp: Sequence[str]) -> Tuple[int, int, int, List[Tuple[str, Optional[str], Optional[str]]]]:
    """Minimum-cost Levenshtein alignment with unit costs.

    Among equal-cost paths the one with the fewest insertions plus
    deletions wins, which makes (S, D, I) symmetric under swapping ref
    and hyp.  Remaining ties are broken walking from the start of both
    sequences, preferring match, then substitution, deletion, insertion.
    Returns (S, D, I, path) with path entries (op, ref_token, hyp_token).
    """
    n, m = len(ref), len(hyp)
    # cost[i][j]: (errors, indels) of the cheapest way to finish from ref[i:], hyp[j:]
    cost = [[(0, 0)] * (m + 1) for _ in range(n + 1)]
    for i in range(n, -1, -1):
        for j in range(m, -1, -1):
            if i == n:
                cost[i][j] = (m - j, m - j)
            elif j == m:
                cost[i][j] = (n - i, n - i)
            else:
                e, g = cost[i + 1][j + 1]
                diag = (e + (ref[i] != hyp[j]), g)
                cost[i][j] = min(diag, _step(cost[i + 1][j]), _step(cost[i][j + 1]))

    s = d = ins = 0
    path = []
    i = j = 0
    while i < n or j < m:
        here = cost[i][j]
        if i < n and j < m and ref[i] == hyp[j] and cost[i + 1][j + 1] == here:
            path.append((MATCH, ref[i], hyp[j]))
            i, j = i + 1, j + 1
        elif i < n and j < m and ref[i] != hyp[j] and _sub(cost[i + 1][j + 1]) == here:
            path.append((SUB, ref[i], hyp[j]))
            s += 1
            i, j = i + 1, j + 1
        elif i < n and _step(cost[i + 1][j]) == here:
            path.append((DEL, ref[i], None))
            d += 1
            i += 1
        else:
            path.append((INS, None, hyp[j]))
            ins += 1
            j += 1
    return s, d, ins, path


def _step(c: Tuple[int, int]) -> Tuple[int, int]:
    return c[0] + 1, c[1] + 1


def _sub(c: Tuple[int, int]) -> Tuple[int, int]:
    return c[0] + 1, c[1]


@dataclass
class UttScore:
    utt_id: str
    n: int
    s: int
    d: int
    i: int
    missing_hyp: bool = False

    @property
    def errors(self) -> int:
        return self.s + self.d + self.i


@dataclass
class ScoreReport:
    n: int = 0
    s: int = 0
    d: int = 0
    i: int = 0
    utterances: List[UttScore] = field(default_factory=list)

    @property
    def matches(self) -> int:
        return self.n - self.s - self.d

    def rate(self, count: int) -> Fraction:
        """Exact percentage of ``count`` over reference tokens."""
        return Fraction(100 * count, self.n)

    @property
    def wer_percent(self) -> float:
        return float(self.rate(self.s + self.d + self.i))

    @property
    def sub_rate(self) -> float:
        return float(self.rate(self.s))

    @property
    def del_rate(self) -> float:
        return float(self.rate(self.d))

    @property
    def ins_rate(self) -> float:
        return float(self.rate(self.i))

    def table_row(self, name: str = "") -> str:
        head = f"{name}\t" if name else ""
        return (f"{head}WER {self.wer_percent:.1f}\tSUB {self.sub_rate:.1f}\t"
                f"DEL {self.del_rate:.1f}\tINS {self.ins_rate:.1f}")

    def detail_tsv(self) -> str:
        lines = ["utt_id\tN\tS\tD\tI\tWER\tflag"]
        for u in self.utterances:
            flag = "missing_hyp" if u.missing_hyp else ""
            lines.append(f"{u.utt_id}\t{u.n}\t{u.s}\t{u.d}\t{u.i}\t{100 * u.errors / u.n:.2f}\t{flag}")
        return "\n".join(lines) + "\n"


def _units(tokens: Sequence[str], unit: str) -> List[str]:
    if unit == "word":
        return list(tokens)
    if unit == "char":
        return [g for tok in tokens for g in graphemes(tok)]
    raise ScoreError(f"unknown scoring unit {unit!r}")


def score_corpus(refs: Mapping[str, Sequence[str]], hyps: Mapping[str, Sequence[str]],
                 unit: str = "word") -> ScoreReport:
    """Score every reference utterance; a missing hypothesis counts as all deletions."""
    extra = [u for u in hyps if u not in refs]
    if extra:
        raise ScoreError(f"hypotheses without reference: {' '.join(extra)}")
    report = ScoreReport()
    for utt, ref_tokens in refs.items():
        ref = _units(ref_tokens, unit)
        if not ref:
            raise ScoreError(f"{utt}: empty reference")
        missing = utt not in hyps
        hyp = [] if missing else _units(hyps[utt], unit)
        s, d, i, _ = align_edit(ref, hyp)
        report.utterances.append(UttScore(utt, len(ref), s, d, i, missing))
        report.n += len(ref)
        report.s += s
        report.d += d
        report.i += i
    return report
