import random
from fractions import Fraction
from functools import lru_cache

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from redmask.score import ScoreError, align_edit, score_corpus

tokens = st.lists(st.sampled_from("abcd"), max_size=8)


def oracle_distance(ref, hyp):
    """Plain top-down edit distance with memoization."""
    ref, hyp = tuple(ref), tuple(hyp)

    @lru_cache(maxsize=None)
    def go(i, j):
        if i == len(ref):
            return len(hyp) - j
        if j == len(hyp):
            return len(ref) - i
        return min(go(i + 1, j + 1) + (ref[i] != hyp[j]), go(i + 1, j) + 1, go(i, j + 1) + 1)

    return go(0, 0)


def test_examples():
    assert align_edit(list("abc"), list("axc"))[:3] == (1, 0, 0)
    assert align_edit(list("ab"), [])[:3] == (0, 2, 0)
    assert align_edit([], list("ab"))[:3] == (0, 0, 2)
    assert align_edit([], [])[:3] == (0, 0, 0)


def test_path_prefers_match_then_sub():
    _, _, _, path = align_edit(["a", "b"], ["b"])
    assert [op for op, _, _ in path] == ["D", "="]
    _, _, _, path = align_edit(["a"], ["b"])
    assert [op for op, _, _ in path] == ["S"]


@settings(max_examples=500, deadline=None)
@given(tokens, tokens)
def test_cost_matches_oracle(ref, hyp):
    s, d, i, path = align_edit(ref, hyp)
    assert s + d + i == oracle_distance(ref, hyp)
    assert d - i == len(ref) - len(hyp)
    assert [r for _, r, _ in path if r is not None] == ref
    assert [h for _, _, h in path if h is not None] == hyp


@settings(max_examples=500, deadline=None)
@given(tokens, tokens)
def test_swap_exchanges_deletions_and_insertions(ref, hyp):
    s, d, i, _ = align_edit(ref, hyp)
    assert align_edit(hyp, ref)[:3] == (s, i, d)


@settings(max_examples=300, deadline=None)
@given(st.integers(1, 8), st.data())
def test_triangle_on_equal_length(n, data):
    a, b, c = (data.draw(st.lists(st.sampled_from("abc"), min_size=n, max_size=n)) for _ in range(3))

    def errors(x, y):
        return sum(align_edit(x, y)[:3])

    assert errors(a, c) <= errors(a, b) + errors(b, c)


def _corpus_with_counts(n_tokens, s, d, i, per_utt=10):
    """Reference/hypothesis dicts with exactly the requested error counts.

    Each utterance carries a single error type so that no deletion and
    insertion pair can merge into a substitution.
    """
    chunks = []
    for op, count in (("S", s), ("D", d), ("I", i)):
        while count > 0:
            chunks.append((op, min(count, per_utt)))
            count -= per_utt
    refs, hyps = {}, {}
    for u in range(n_tokens // per_utt):
        ref = [f"w{u}_{j}" for j in range(per_utt)]
        op, count = chunks[u] if u < len(chunks) else ("=", 0)
        hyp = []
        for j, tok in enumerate(ref):
            if j >= count:
                hyp.append(tok)
            elif op == "S":
                hyp.append(tok + "x")
            elif op == "I":
                hyp.extend([tok, "extra"])
        refs[f"u{u:04d}"], hyps[f"u{u:04d}"] = ref, hyp
    return refs, hyps


@pytest.mark.parametrize("counts, rates, wer", [
    ((104, 14, 7), (10.4, 1.4, 0.7), 12.5),
    ((83, 12, 5), (8.3, 1.2, 0.5), 10.0),
])
def test_rates_from_counts(counts, rates, wer):
    refs, hyps = _corpus_with_counts(1000, *counts)
    rep = score_corpus(refs, hyps)
    assert (rep.n, rep.s, rep.d, rep.i) == (1000, *counts)
    assert (rep.sub_rate, rep.del_rate, rep.ins_rate) == rates
    assert rep.wer_percent == wer
    assert rep.rate(rep.s) + rep.rate(rep.d) + rep.rate(rep.i) == rep.rate(rep.s + rep.d + rep.i)
    assert rep.table_row("x") == f"x\tWER {wer:.1f}\tSUB {rates[0]:.1f}\tDEL {rates[1]:.1f}\tINS {rates[2]:.1f}"


def test_perfect_hypothesis():
    refs = {"a": ["x", "y"], "b": ["z"]}
    rep = score_corpus(refs, dict(refs))
    assert rep.wer_percent == 0.0
    assert rep.matches == 3


def test_corpus_is_sum_of_utterances():
    r = random.Random(3)
    refs = {f"u{k}": [r.choice("abcd") for _ in range(r.randint(1, 9))] for k in range(50)}
    hyps = {u: [r.choice("abcd") for _ in range(r.randint(0, 9))] for u in refs}
    rep = score_corpus(refs, hyps)
    assert rep.s == sum(u.s for u in rep.utterances)
    assert rep.n == sum(len(v) for v in refs.values())
    assert rep.s + rep.matches + rep.d == rep.n
    assert rep.rate(rep.s + rep.d + rep.i) == Fraction(100 * (rep.s + rep.d + rep.i), rep.n)


def test_missing_hypothesis_is_all_deletions():
    rep = score_corpus({"a": ["x", "y"], "b": ["z"]}, {"a": ["x", "y"]})
    (ua, ub) = rep.utterances
    assert ub.missing_hyp and (ub.s, ub.d, ub.i) == (0, 1, 0)
    assert "missing_hyp" in rep.detail_tsv()


def test_errors():
    with pytest.raises(ScoreError, match="empty reference"):
        score_corpus({"a": []}, {"a": ["x"]})
    with pytest.raises(ScoreError, match="without reference"):
        score_corpus({"a": ["x"]}, {"a": ["x"], "b": ["y"]})


def test_char_unit():
    rep = score_corpus({"a": ["ab", "c"]}, {"a": ["abc"]}, unit="char")
    assert (rep.n, rep.s + rep.d + rep.i) == (3, 0)
    with pytest.raises(ScoreError):
        score_corpus({"a": ["x"]}, {"a": ["x"]}, unit="phone")
