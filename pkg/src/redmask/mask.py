"""Alignment-aware masking: phone mask, word-piece mask, word mask, SpecAugment.

A mask is planned first (which frames and dims, with what fill) and then
applied.  Planning needs only the alignment and a seeded generator; fill
vectors are computed from the unmasked features so the plan log can be
audited independently of the output archive.

Selection is exact-count: ``k = round(p * N)`` units (at least one when
``p > 0``), drawn without replacement by a partial Fisher-Yates shuffle.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .align import UttAlignment, validate_alignment
from .frontend import FeatureMatrix
from .io import WordPieceVocab
from .tokenize import PieceSpan, piece_frame_spans, segment_word_pieces

MASK64 = (1 << 64) - 1

PM, WPM, STM, SPEC_AUGMENT = "PM", "WPM", "STM", "SpecAugment"
METHODS = (PM, WPM, STM, SPEC_AUGMENT)
UTT_MEAN, WORD_MEAN = "UtteranceMean", "WordMean"
FILLS = (UTT_MEAN, WORD_MEAN)


class MaskError(ValueError):
    pass


# ---------------------------------------------------------------- randomness

def _mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def fnv1a_64(data: bytes) -> int:
    h = 0xCBF29CE484222325
    for b in data:
        h = ((h ^ b) * 0x100000001B3) & MASK64
    return h


def derive_utt_seed(global_seed: int, utt_id: str) -> int:
    """Per-utterance seed: FNV-1a(utt_id) xor global seed, then a splitmix64 mix."""
    return _mix64(fnv1a_64(utt_id.encode("utf-8")) ^ (global_seed & MASK64))


class SplitMix64:
    """Counter-based splitmix64 stream.

    Kept in pure Python so draws are identical on every platform and do not
    depend on numpy's generator versions.
    """

    GAMMA = 0x9E3779B97F4A7C15

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + self.GAMMA) & MASK64
        return _mix64(self.state)

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection, no modulo bias."""
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            r = self.next_u64()
            if r < limit:
                return r % n

    def randint(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi], both ends included."""
        return lo + self.randbelow(hi - lo + 1)

    def sample(self, n: int, k: int) -> List[int]:
        """First k entries of a Fisher-Yates shuffle of range(n)."""
        idx = list(range(n))
        for i in range(k):
            j = i + self.randbelow(n - i)
            idx[i], idx[j] = idx[j], idx[i]
        return idx[:k]


# ---------------------------------------------------------------- config / plan

@dataclass(frozen=True)
class SpecAugmentParams:
    max_freq_width: int = 8     # F
    num_freq_masks: int = 2     # mF
    max_time_width: int = 40    # Tmax
    num_time_masks: int = 2     # mT


@dataclass(frozen=True)
class MaskConfig:
    method: str = PM
    ratio: float = 0.15
    fill: str = UTT_MEAN
    spec: SpecAugmentParams = field(default_factory=SpecAugmentParams)
    seed: int = 0

    def __post_init__(self):
        if self.method not in METHODS:
            raise MaskError(f"unknown method {self.method!r}; choose from {METHODS}")
        if not (0.0 <= self.ratio <= 1.0):
            raise MaskError(f"ratio {self.ratio} outside [0, 1]")
        if self.fill not in FILLS:
            raise MaskError(f"unknown fill {self.fill!r}; choose from {FILLS}")
        s = self.spec
        if min(s.max_freq_width, s.num_freq_masks, s.max_time_width, s.num_time_masks) < 0:
            raise MaskError("SpecAugment widths and counts must be >= 0")


# named configurations from the ablation table
PRESETS: Dict[str, MaskConfig] = {
    "specaugment": MaskConfig(method=SPEC_AUGMENT),
    "stm": MaskConfig(method=STM, ratio=0.15),
    "wpm": MaskConfig(method=WPM, ratio=0.15),
    "wpm20": MaskConfig(method=WPM, ratio=0.20),
    "pm": MaskConfig(method=PM, ratio=0.15),
    "pm20": MaskConfig(method=PM, ratio=0.20),
    "pm20-fw": MaskConfig(method=PM, ratio=0.20, fill=WORD_MEAN),
}


@dataclass(frozen=True)
class MaskRegion:
    start: int
    end: int
    d0: int
    d1: int
    fill_kind: str               # "utt", "word" or "zero"
    word_index: Optional[int] = None
    fill: Optional[np.ndarray] = field(default=None, compare=False)

    @property
    def num_frames(self) -> int:
        return self.end - self.start


@dataclass
class MaskPlan:
    utt_id: str
    regions: List[MaskRegion]
    config: MaskConfig
    seed: int
    num_units: int = 0  # size of the selection universe (phones, pieces or words)

    def to_tsv_rows(self) -> List[str]:
        return [f"{self.utt_id}\t{self.config.method}\t{r.start}\t{r.end}\t{r.d0}\t{r.d1}\t{r.fill_kind}"
                for r in self.regions]


PLAN_LOG_HEADER = "#utt_id\tmethod\tstart_frame\tend_frame\td0\td1\tfill_kind"


def num_to_mask(ratio: float, n: int) -> int:
    """round(ratio * n) with halves rounded up, at least 1 when ratio > 0."""
    if n == 0 or ratio <= 0:
        return 0
    return min(n, max(1, int(math.floor(ratio * n + 0.5))))


def _fill_kind(config: MaskConfig) -> str:
    return "word" if config.fill == WORD_MEAN else "utt"


def _segment_regions(spans, dim: int, config: MaskConfig, num_frames: Optional[int]):
    regions = []
    for start, end, word_index in spans:
        if num_frames is not None:
            end = min(end, num_frames)
            start = min(start, end)
        regions.append(MaskRegion(start, end, 0, dim, _fill_kind(config), word_index))
    return regions


def plan_phone_mask(alignment: UttAlignment, config: MaskConfig, prng: SplitMix64,
                    dim: int = 40, num_frames: Optional[int] = None) -> MaskPlan:
    """Mask round(p*N) randomly chosen non-silence phones, full band."""
    seed = prng.state
    eligible = alignment.eligible_phones()
    k = num_to_mask(config.ratio, len(eligible))
    chosen = [alignment.phones[eligible[i]] for i in prng.sample(len(eligible), k)]
    spans = [(p.start_frame, p.end_frame, p.word_index) for p in chosen]
    return MaskPlan(alignment.utt_id, _segment_regions(spans, dim, config, num_frames),
                    config, seed, len(eligible))


def plan_word_mask(alignment: UttAlignment, config: MaskConfig, prng: SplitMix64,
                   dim: int = 40, num_frames: Optional[int] = None) -> MaskPlan:
    seed = prng.state
    words = alignment.words
    k = num_to_mask(config.ratio, len(words))
    chosen = [words[i] for i in prng.sample(len(words), k)]
    spans = [(w.start_frame, w.end_frame, w.word_index) for w in chosen]
    return MaskPlan(alignment.utt_id, _segment_regions(spans, dim, config, num_frames),
                    config, seed, len(words))


def word_piece_spans(alignment: UttAlignment, vocab: WordPieceVocab,
                     word_texts: Optional[Sequence[str]] = None) -> List[PieceSpan]:
    """Piece spans of every word in the utterance.

    Without ``word_texts`` a word's spelling is the concatenation of its
    phone labels (one grapheme per phone).
    """
    if word_texts is not None and len(word_texts) != len(alignment.words):
        raise MaskError(f"{alignment.utt_id}: {len(word_texts)} word texts for "
                        f"{len(alignment.words)} aligned words")
    spans: List[PieceSpan] = []
    for n, w in enumerate(alignment.words):
        phones = alignment.phones[w.phone_start:w.phone_end]
        text = word_texts[n] if word_texts is not None else "".join(p.phone for p in phones)
        pieces = segment_word_pieces(text, vocab)
        spans.extend(s for s in piece_frame_spans(w, phones, pieces, text) if s.num_frames > 0)
    return spans


def plan_word_piece_mask(alignment: UttAlignment, vocab: WordPieceVocab, config: MaskConfig,
                         prng: SplitMix64, dim: int = 40, num_frames: Optional[int] = None,
                         word_texts: Optional[Sequence[str]] = None) -> MaskPlan:
    seed = prng.state
    pieces = word_piece_spans(alignment, vocab, word_texts)
    k = num_to_mask(config.ratio, len(pieces))
    chosen = [pieces[i] for i in prng.sample(len(pieces), k)]
    spans = [(s.start_frame, s.end_frame, s.word_index) for s in chosen]
    return MaskPlan(alignment.utt_id, _segment_regions(spans, dim, config, num_frames),
                    config, seed, len(pieces))


def plan_spec_augment(num_frames: int, dim: int, config: MaskConfig, prng: SplitMix64,
                      utt_id: str = "") -> MaskPlan:
    """Time masks first, then frequency masks; fills are zero.

    Widths are capped at the matrix size so a short utterance still gets
    valid (possibly full-length) masks.
    """
    s = config.spec
    seed = prng.state
    regions: List[MaskRegion] = []
    if num_frames == 0:
        return MaskPlan(utt_id, regions, config, seed)
    for _ in range(s.num_time_masks):
        w = prng.randint(0, min(s.max_time_width, num_frames))
        t0 = prng.randint(0, num_frames - w)
        regions.append(MaskRegion(t0, t0 + w, 0, dim, "zero", fill=np.zeros(dim)))
    for _ in range(s.num_freq_masks):
        w = prng.randint(0, min(s.max_freq_width, dim))
        f0 = prng.randint(0, dim - w)
        regions.append(MaskRegion(0, num_frames, f0, f0 + w, "zero", fill=np.zeros(w)))
    return MaskPlan(utt_id, regions, config, seed)


def plan_mask(alignment: Optional[UttAlignment], features: FeatureMatrix, config: MaskConfig,
              vocab: Optional[WordPieceVocab] = None,
              word_texts: Optional[Sequence[str]] = None) -> MaskPlan:
    """Plan one utterance with its derived seed and attach fill vectors."""
    seed = derive_utt_seed(config.seed, features.utt_id)
    prng = SplitMix64(seed)
    t, d = features.num_frames, features.dim
    if config.method == SPEC_AUGMENT:
        plan = plan_spec_augment(t, d, config, prng, features.utt_id)
    elif config.method == PM:
        plan = plan_phone_mask(alignment, config, prng, d, t)
    elif config.method == STM:
        plan = plan_word_mask(alignment, config, prng, d, t)
    else:
        if vocab is None:
            raise MaskError("word-piece masking needs a vocabulary")
        plan = plan_word_piece_mask(alignment, vocab, config, prng, d, t, word_texts)
    return attach_fills(features, plan, alignment)


# ---------------------------------------------------------------- fill / apply

def _fill_source(features: FeatureMatrix, region: MaskRegion, strategy: str,
                 alignment: Optional[UttAlignment]) -> Tuple[int, int]:
    """Frame range whose mean fills ``region``."""
    t = features.data.shape[0]
    if t == 0:
        raise MaskError(f"{features.utt_id}: empty feature matrix")
    if strategy == WORD_MEAN and alignment is not None and region.word_index is not None:
        word = alignment.word_by_index(region.word_index)
        if word is not None and min(word.end_frame, t) > word.start_frame:
            return word.start_frame, min(word.end_frame, t)
    return 0, t


def compute_fill(features: FeatureMatrix, region: MaskRegion, strategy: str,
                 alignment: Optional[UttAlignment] = None) -> np.ndarray:
    """Fill vector for a segment region, from the unmasked features.

    WordMean averages over the frames of the word the region belongs to;
    a region with no word falls back to the utterance mean.
    """
    lo, hi = _fill_source(features, region, strategy, alignment)
    return _mean(features.data[lo:hi, region.d0:region.d1])


def _mean(block: np.ndarray) -> np.ndarray:
    # summation rounding can push the mean of a constant column one ulp off;
    # the true mean always lies within [min, max], so clip to that range
    return np.clip(block.mean(axis=0), block.min(axis=0), block.max(axis=0))


def attach_fills(features: FeatureMatrix, plan: MaskPlan,
                 alignment: Optional[UttAlignment] = None) -> MaskPlan:
    cache: Dict[Tuple[int, int, int, int], np.ndarray] = {}
    regions = []
    for r in plan.regions:
        if r.fill is None:
            strategy = WORD_MEAN if r.fill_kind == "word" else UTT_MEAN
            key = _fill_source(features, r, strategy, alignment) + (r.d0, r.d1)
            if key not in cache:
                cache[key] = _mean(features.data[key[0]:key[1], r.d0:r.d1])
            r = replace(r, fill=cache[key])
        regions.append(r)
    return replace(plan, regions=regions)


def apply_mask(features: FeatureMatrix, plan: MaskPlan) -> FeatureMatrix:
    """Copy ``features`` and overwrite each region with its fill, in plan order."""
    x = features.data
    out = x.copy()
    t = x.shape[0]
    d = x.shape[1] if x.ndim == 2 else 0
    for r in plan.regions:
        if not (0 <= r.start <= r.end <= t and 0 <= r.d0 <= r.d1 <= d):
            raise MaskError(f"{plan.utt_id}: region [{r.start},{r.end})x[{r.d0},{r.d1}) "
                            f"outside {t}x{d} matrix")
        if r.fill is None:
            raise MaskError(f"{plan.utt_id}: region without fill; call attach_fills first")
        out[r.start:r.end, r.d0:r.d1] = r.fill
    return features.with_data(out)


# ---------------------------------------------------------------- corpus

def augment_corpus(archive: Mapping[str, FeatureMatrix],
                   alignments: Optional[Mapping[str, UttAlignment]],
                   config: MaskConfig,
                   vocab: Optional[WordPieceVocab] = None,
                   word_texts: Optional[Mapping[str, Sequence[str]]] = None,
                   jobs: int = 1) -> Tuple[Dict[str, FeatureMatrix], List[MaskPlan]]:
    """Mask every utterance once; output order follows ``archive``.

    Each utterance draws from its own derived seed, so results do not
    depend on ``jobs``.
    """
    needs_ali = config.method != SPEC_AUGMENT
    if needs_ali:
        alignments = alignments or {}
        missing = [u for u in archive if u not in alignments]
        if missing:
            raise MaskError(f"missing alignment for {len(missing)} utterance(s): "
                            + " ".join(missing))
        for u, feats in archive.items():
            validate_alignment(alignments[u], feats.num_frames)
    if config.method == WPM and vocab is None:
        raise MaskError("word-piece masking needs a vocabulary")

    def one(utt_id: str):
        feats = archive[utt_id]
        ali = alignments[utt_id] if needs_ali else None
        texts = word_texts.get(utt_id) if word_texts else None
        plan = plan_mask(ali, feats, config, vocab, texts)
        return apply_mask(feats, plan), plan

    ids = list(archive)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, ids))
    else:
        results = [one(u) for u in ids]
    out = {u: r[0] for u, r in zip(ids, results)}
    return out, [r[1] for r in results]


def format_plan_log(plans: Sequence[MaskPlan]) -> str:
    rows = [PLAN_LOG_HEADER]
    for plan in plans:
        rows.extend(plan.to_tsv_rows())
    return "\n".join(rows) + "\n"
