"""In-memory forced-alignment model.

Phone segments come out of a forced aligner as (start, duration) pairs in
seconds.  Everything downstream (masking, statistics) works in frames, so
the quantization policy lives here and is shared by the CTM reader and the
speed-perturbation helpers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple


class AlignmentError(ValueError):
    """Alignment is inconsistent with itself or with its features."""


END_TOLERANCE_FRAMES = 2
SHORT_PHONE_FRAMES = 3


def _round_half_up(x: float) -> int:
    # tolerance absorbs binary noise such as 0.015 / 0.01 = 1.4999999999999998
    return int(math.floor(x + 0.5 + 1e-9))


def frames_from_seconds(start_sec: float, dur_sec: float,
                        frame_shift_ms: float = 10.0) -> Tuple[int, int]:
    """Quantize a (start, duration) span in seconds to (start_frame, num_frames).

    Both boundaries are rounded to the nearest frame (halves round up) and
    the span is floored at one frame so every segment stays maskable.
    """
    shift = frame_shift_ms / 1000.0
    start = _round_half_up(start_sec / shift)
    end = _round_half_up((start_sec + dur_sec) / shift)
    return start, max(1, end - start)


@dataclass(frozen=True)
class PhoneSegment:
    phone: str
    start_frame: int
    num_frames: int
    word_index: Optional[int] = None
    start_sec: Optional[float] = None
    dur_sec: Optional[float] = None

    def __post_init__(self):
        if self.num_frames < 1:
            raise AlignmentError(f"phone {self.phone!r}: num_frames={self.num_frames} < 1")
        if self.start_frame < 0:
            raise AlignmentError(f"phone {self.phone!r}: negative start_frame")

    @property
    def is_silence(self) -> bool:
        return self.word_index is None

    @property
    def end_frame(self) -> int:
        return self.start_frame + self.num_frames

    def seconds(self, frame_shift_ms: float = 10.0) -> Tuple[float, float]:
        """(start, duration) in seconds, preferring the unquantized CTM values."""
        if self.start_sec is not None and self.dur_sec is not None:
            return self.start_sec, self.dur_sec
        shift = frame_shift_ms / 1000.0
        return self.start_frame * shift, self.num_frames * shift


@dataclass(frozen=True)
class WordSegment:
    word_index: int
    phone_start: int
    phone_end: int
    start_frame: int
    num_frames: int

    @property
    def end_frame(self) -> int:
        return self.start_frame + self.num_frames

    @property
    def phone_range(self) -> range:
        return range(self.phone_start, self.phone_end)


@dataclass
class UttAlignment:
    utt_id: str
    phones: List[PhoneSegment]
    words: List[WordSegment] = field(default_factory=list)

    @classmethod
    def from_phones(cls, utt_id: str, phones: Sequence[PhoneSegment]) -> "UttAlignment":
        phones = list(phones)
        return cls(utt_id, phones, build_word_spans(phones))

    @property
    def end_frame(self) -> int:
        return self.phones[-1].end_frame if self.phones else 0

    def eligible_phones(self) -> List[int]:
        """Indices of non-silence phones, the only ones masking may touch."""
        return [i for i, p in enumerate(self.phones) if not p.is_silence]

    def word_of_phone(self, phone_idx: int) -> Optional[WordSegment]:
        wi = self.phones[phone_idx].word_index
        if wi is None:
            return None
        for w in self.words:
            if w.word_index == wi:
                return w
        return None

    def word_by_index(self, word_index: int) -> Optional[WordSegment]:
        for w in self.words:
            if w.word_index == word_index:
                return w
        return None


def build_word_spans(phones: Sequence[PhoneSegment]) -> List[WordSegment]:
    """Group consecutive phones sharing a word_index into word spans.

    Raises AlignmentError when one word's phones are split by other
    material (another word or silence).
    """
    words: List[WordSegment] = []
    seen = set()
    i = 0
    n = len(phones)
    while i < n:
        wi = phones[i].word_index
        if wi is None:
            i += 1
            continue
        if wi in seen:
            raise AlignmentError(f"word {wi} split by other material at phone {i}")
        j = i
        while j < n and phones[j].word_index == wi:
            j += 1
        start = min(p.start_frame for p in phones[i:j])
        end = max(p.end_frame for p in phones[i:j])
        words.append(WordSegment(wi, i, j, start, end - start))
        seen.add(wi)
        i = j
    return words


def validate_alignment(alignment: UttAlignment, num_feature_frames: int) -> None:
    """Check ordering, overlap and the end-of-utterance tolerance.

    Raises AlignmentError naming the first offending segment; returns None
    when the alignment is usable against ``num_feature_frames`` frames.
    """
    prev_end = 0
    for i, p in enumerate(alignment.phones):
        if i > 0 and p.start_frame < alignment.phones[i - 1].start_frame:
            raise AlignmentError(
                f"{alignment.utt_id}: segment {i} ({p.phone}) starts before its predecessor")
        if p.start_frame < prev_end:
            raise AlignmentError(
                f"{alignment.utt_id}: segment {i} ({p.phone}) overlaps previous segment "
                f"(starts at {p.start_frame} < {prev_end})")
        prev_end = p.end_frame
    excess = alignment.end_frame - num_feature_frames
    if excess > END_TOLERANCE_FRAMES:
        raise AlignmentError(
            f"{alignment.utt_id}: alignment exceeds features by {excess} > {END_TOLERANCE_FRAMES}")
    if alignment.words != build_word_spans(alignment.phones):
        raise AlignmentError(f"{alignment.utt_id}: word spans inconsistent with phones")


@dataclass(frozen=True)
class PhoneDuration:
    count: int
    mean_sec: float
    min_sec: float
    max_sec: float


@dataclass(frozen=True)
class DurationStats:
    per_phone: Dict[str, PhoneDuration]
    overall_mean_sec: float
    short_phone_ratio: float
    num_phones: int
    frame_shift_ms: float

    def to_tsv(self) -> str:
        lines = ["phone\tcount\tmean_sec\tmin_sec\tmax_sec"]
        for ph in sorted(self.per_phone):
            d = self.per_phone[ph]
            lines.append(f"{ph}\t{d.count}\t{d.mean_sec:.4f}\t{d.min_sec:.4f}\t{d.max_sec:.4f}")
        lines.append(f"*\t{self.num_phones}\t{self.overall_mean_sec:.4f}\t\t")
        lines.append(f"# short_phone_ratio\t{self.short_phone_ratio:.4f}")
        return "\n".join(lines) + "\n"


def duration_stats(alignments: Iterable[UttAlignment],
                   frame_shift_ms: float = 10.0) -> DurationStats:
    """Phone duration statistics over a corpus, silence excluded.

    ``short_phone_ratio`` is the fraction of phones lasting exactly three
    frames, the minimum a 3-state HMM aligner can emit; a high ratio means
    many phones were squeezed to that floor.
    """
    frames: Dict[str, List[int]] = {}
    for ali in alignments:
        for p in ali.phones:
            if not p.is_silence:
                frames.setdefault(p.phone, []).append(p.num_frames)
    total = sum(len(v) for v in frames.values())
    if total == 0:
        raise AlignmentError("no non-silence phones to compute statistics over")

    # one division per mean keeps e.g. 14 frames at 10 ms equal to the literal 0.14
    per_phone = {}
    for ph, fr in frames.items():
        per_phone[ph] = PhoneDuration(
            count=len(fr),
            mean_sec=sum(fr) * frame_shift_ms / (1000.0 * len(fr)),
            min_sec=min(fr) * frame_shift_ms / 1000.0,
            max_sec=max(fr) * frame_shift_ms / 1000.0,
        )
    all_frames = sum(sum(v) for v in frames.values())
    n_short = sum(1 for v in frames.values() for f in v if f == SHORT_PHONE_FRAMES)
    return DurationStats(
        per_phone=per_phone,
        overall_mean_sec=all_frames * frame_shift_ms / (1000.0 * total),
        short_phone_ratio=n_short / total,
        num_phones=total,
        frame_shift_ms=frame_shift_ms,
    )
