"""Grapheme splitting and word-piece segmentation.

Word pieces are localized in time through the word's phones: when a word
has as many graphemes as phones each grapheme takes its phone's frames;
otherwise the word's frames are shared out in proportion to grapheme
counts.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass
from typing import List, Sequence

from .align import PhoneSegment, WordSegment
from .io import WordPieceVocab


class TokenizeError(ValueError):
    pass


@dataclass(frozen=True)
class Piece:
    text: str
    num_graphemes: int
    unknown: bool = False


@dataclass(frozen=True)
class PieceSpan:
    piece: str
    word_index: int
    phone_start: int  # phone range relative to the word
    phone_end: int
    start_frame: int
    num_frames: int

    @property
    def end_frame(self) -> int:
        return self.start_frame + self.num_frames


def graphemes(word: str) -> List[str]:
    """Split into scalar values, keeping combining marks on their base."""
    if not word:
        raise TokenizeError("empty word")
    out: List[str] = []
    for ch in word:
        if out and unicodedata.category(ch).startswith("M"):
            out[-1] += ch
        else:
            out.append(ch)
    return out


def segment_word_pieces(word: str, vocab: WordPieceVocab) -> List[Piece]:
    """Greedy longest match, left to right, over graphemes.

    A grapheme no vocabulary piece can start with becomes its own piece
    flagged ``unknown``.
    """
    gs = graphemes(word)
    max_len = vocab.max_piece_len
    pieces: List[Piece] = []
    i = 0
    while i < len(gs):
        best = 0
        text = ""
        for j in range(i + 1, len(gs) + 1):
            text += gs[j - 1]
            if len(text) > max_len:
                break
            if text in vocab:
                best = j
        if best:
            pieces.append(Piece("".join(gs[i:best]), best - i))
            i = best
        else:
            pieces.append(Piece(gs[i], 1, unknown=True))
            i += 1
    return pieces


def _largest_remainder(total: int, weights: Sequence[int]) -> List[int]:
    wsum = sum(weights)
    quotas = [total * w / wsum for w in weights]
    alloc = [int(q) for q in quotas]
    short = total - sum(alloc)
    # ties go to the earlier piece
    order = sorted(range(len(weights)), key=lambda i: (-(quotas[i] - alloc[i]), i))
    for i in order[:short]:
        alloc[i] += 1
    return alloc


def piece_frame_spans(word: WordSegment, phones_of_word: Sequence[PhoneSegment],
                      pieces: Sequence[Piece], word_text: str = None) -> List[PieceSpan]:
    """Assign each piece of a word a contiguous frame span.

    The spans partition the word's frames.  ``word_text``, when given, is
    checked against the concatenated pieces.
    """
    if not pieces:
        raise TokenizeError(f"word {word.word_index}: no pieces")
    if word_text is not None and "".join(p.text for p in pieces) != word_text:
        raise TokenizeError(f"pieces {[p.text for p in pieces]} do not concatenate to {word_text!r}")
    counts = [p.num_graphemes for p in pieces]
    n_phones = len(phones_of_word)
    spans: List[PieceSpan] = []

    if sum(counts) == n_phones:
        g = 0
        for p, c in zip(pieces, counts):
            first, last = phones_of_word[g], phones_of_word[g + c - 1]
            spans.append(PieceSpan(p.text, word.word_index, g, g + c, first.start_frame,
                                   last.end_frame - first.start_frame))
            g += c
        # phones may leave gaps; stretch spans so they tile the word
        fixed = []
        for k, s in enumerate(spans):
            start = word.start_frame if k == 0 else fixed[-1].end_frame
            end = word.end_frame if k == len(spans) - 1 else spans[k + 1].start_frame
            fixed.append(PieceSpan(s.piece, s.word_index, s.phone_start, s.phone_end,
                                   start, end - start))
        return fixed

    sizes = _largest_remainder(word.num_frames, counts)
    start = word.start_frame
    for p, size in zip(pieces, sizes):
        end = start + size
        inside = [k for k, ph in enumerate(phones_of_word)
                  if ph.start_frame < end and ph.end_frame > start]
        lo, hi = (inside[0], inside[-1] + 1) if inside else (0, 0)
        spans.append(PieceSpan(p.text, word.word_index, lo, hi, start, size))
        start = end
    return spans
