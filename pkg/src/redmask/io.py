"""Readers and writers for the on-disk formats the toolkit exchanges.

* WAV: RIFF/WAVE, 16-bit PCM, mono.
* Feature archive: Kaldi-like text, ``utt_id  [`` then one frame per row,
  the last row closed by ``]``.  Values are printed with 17 significant
  digits so float64 round-trips exactly.
* CTM: ``utt_id channel start_sec dur_sec phone [word_index]`` where the
  optional word index groups phones into words and ``-`` marks silence.
* Vocabulary: one word piece per line.
* Transcripts (trn): ``utt_id<TAB>token token ...``.
"""

from __future__ import annotations

import os
import struct
import tempfile
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Dict, Iterable, Iterator, List, Sequence

import numpy as np

from .align import AlignmentError, PhoneSegment, UttAlignment, build_word_spans, frames_from_seconds
from .frontend import FeatureMatrix, Waveform


class FormatError(ValueError):
    """A file does not follow its declared format."""


class ParseError(FormatError):
    """A text file failed to parse; carries the 1-based line number."""

    def __init__(self, message: str, line: int, path=None):
        self.line = line
        self.path = path
        where = f"{path}:" if path else ""
        super().__init__(f"{where}line {line}: {message}")


FeatureArchive = Dict[str, FeatureMatrix]


@contextmanager
def atomic_write(path, mode: str = "w"):
    """Write to a temp file next to ``path`` and rename it into place."""
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        kwargs = {} if "b" in mode else {"encoding": "utf-8", "newline": "\n"}
        with os.fdopen(fd, mode, **kwargs) as f:
            yield f
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------- WAV

def _riff_chunks(data: bytes) -> Iterator[tuple]:
    pos = 12
    while pos + 8 <= len(data):
        cid, size = struct.unpack("<4sI", data[pos:pos + 8])
        body = data[pos + 8:pos + 8 + size]
        if len(body) < size:
            raise FormatError(f"truncated file: chunk {cid!r} declares size={size}, "
                              f"only {len(body)} bytes present")
        yield cid, body
        pos += 8 + size + (size & 1)


def read_wav(path) -> Waveform:
    """Read a 16-bit PCM mono WAV file; samples are int16 / 32768."""
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise FormatError(f"{path}: not a RIFF/WAVE file")
    fmt = None
    pcm = None
    for cid, body in _riff_chunks(data):
        if cid == b"fmt ":
            if len(body) < 16:
                raise FormatError(f"{path}: truncated fmt chunk (size={len(body)})")
            fmt = struct.unpack("<HHIIHH", body[:16])
        elif cid == b"data":
            pcm = body
    if fmt is None:
        raise FormatError(f"{path}: missing fmt chunk")
    audio_format, channels, sample_rate, _, _, bits = fmt
    if audio_format != 1:
        raise FormatError(f"{path}: audio_format={audio_format} unsupported (PCM only)")
    if channels != 1:
        raise FormatError(f"{path}: channels={channels} unsupported")
    if bits != 16:
        raise FormatError(f"{path}: bits_per_sample={bits} unsupported")
    if sample_rate <= 0:
        raise FormatError(f"{path}: sample_rate={sample_rate} invalid")
    if pcm is None:
        raise FormatError(f"{path}: missing data chunk")
    if len(pcm) % 2:
        raise FormatError(f"{path}: truncated file: data size={len(pcm)} is not a whole number of samples")
    samples = np.frombuffer(pcm, dtype="<i2").astype(np.float64) / 32768.0
    return Waveform(samples, sample_rate)


def write_wav(waveform: Waveform, path) -> None:
    """Write 16-bit PCM mono.  Amplitudes are scaled by 32768, rounded and clipped."""
    ints = np.clip(np.round(np.asarray(waveform.samples) * 32768.0), -32768, 32767).astype("<i2")
    pcm = ints.tobytes()
    header = struct.pack("<4sI4s", b"RIFF", 36 + len(pcm), b"WAVE")
    fmt = struct.pack("<4sIHHIIHH", b"fmt ", 16, 1, 1, waveform.sample_rate,
                      waveform.sample_rate * 2, 2, 16)
    with atomic_write(path, "wb") as f:
        f.write(header + fmt + struct.pack("<4sI", b"data", len(pcm)) + pcm)


# ---------------------------------------------------------------- feature archive

def format_feature_archive(archive: FeatureArchive) -> str:
    out: List[str] = []
    for utt_id, feats in archive.items():
        _check_utt_id(utt_id)
        data = np.asarray(feats.data, dtype=np.float64)
        if data.ndim != 2 or (data.shape[0] > 0 and data.shape[1] < 1):
            raise FormatError(f"{utt_id}: feature matrix must be 2-D with D >= 1, got {data.shape}")
        if data.shape[0] == 0:
            out.append(f"{utt_id}  [ ]\n")
            continue
        out.append(f"{utt_id}  [\n")
        rows = ["  " + " ".join("%.17g" % v for v in row) for row in data]
        rows[-1] += " ]"
        out.append("\n".join(rows) + "\n")
    return "".join(out)


def write_feature_archive(archive: FeatureArchive, path) -> None:
    text = format_feature_archive(archive)
    with atomic_write(path) as f:
        f.write(text)


def _check_utt_id(utt_id: str) -> None:
    if not utt_id or any(c.isspace() for c in utt_id):
        raise FormatError(f"invalid utt_id {utt_id!r}")


def parse_feature_archive(text: str, path=None) -> FeatureArchive:
    archive: FeatureArchive = {}
    utt = None
    rows: List[List[float]] = []
    width = None
    start_line = 0

    def finish():
        if width is None:
            data = np.zeros((0, 0))
        else:
            data = np.array(rows, dtype=np.float64)
        archive[utt] = FeatureMatrix(utt, data)

    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if utt is None:
            parts = line.split()
            if len(parts) < 2 or parts[1] != "[":
                raise ParseError(f"expected 'utt_id  [' header, got {raw!r}", lineno, path)
            utt = parts[0]
            if utt in archive:
                raise ParseError(f"duplicate utt_id {utt!r}", lineno, path)
            rows, width, start_line = [], None, lineno
            rest = parts[2:]
            if rest == ["]"]:
                finish()
                utt = None
            elif rest:
                raise ParseError("values must start on the line after '['", lineno, path)
            continue

        closed = line.endswith("]")
        if closed:
            line = line[:-1].strip()
        if "[" in line or "]" in line:
            raise ParseError("unexpected bracket", lineno, path)
        if line:
            try:
                row = [float(tok) for tok in line.split()]
            except ValueError as exc:
                raise ParseError(f"bad value ({exc})", lineno, path) from None
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise ParseError(f"ragged row: {len(row)} values, expected {width}", lineno, path)
            rows.append(row)
        if closed:
            finish()
            utt = None
    if utt is not None:
        raise ParseError(f"matrix for {utt!r} opened here is never closed", start_line, path)
    return archive


def read_feature_archive(path) -> FeatureArchive:
    with open(path, encoding="utf-8") as f:
        return parse_feature_archive(f.read(), path)


# ---------------------------------------------------------------- CTM

def parse_ctm(lines: Iterable[str], frame_shift_ms: float = 10.0, path=None) -> List[UttAlignment]:
    """Parse CTM lines into per-utterance alignments (first-appearance order).

    A 5-column line carries no word index and is read as silence, the
    same as an explicit ``-``.
    """
    groups: Dict[str, List[PhoneSegment]] = {}
    first_line: Dict[str, int] = {}
    last_start: Dict[str, float] = {}
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        cols = line.split()
        if len(cols) not in (5, 6):
            raise ParseError(f"expected 5 or 6 columns, got {len(cols)}", lineno, path)
        utt, _channel, start_s, dur_s, phone = cols[:5]
        try:
            start = float(start_s)
            dur = float(dur_s)
        except ValueError:
            raise ParseError(f"unparseable time field in {line!r}", lineno, path) from None
        if not (np.isfinite(start) and np.isfinite(dur)):
            raise ParseError("non-finite time field", lineno, path)
        if start < 0:
            raise ParseError("negative start time", lineno, path)
        if dur < 0:
            raise ParseError(f"negative duration, line {lineno}", lineno, path)
        if dur == 0:
            raise ParseError(f"zero duration, line {lineno}", lineno, path)
        word = None
        if len(cols) == 6 and cols[5] != "-":
            tok = cols[5]
            if not tok.isdigit():
                raise ParseError(f"word_index must be a non-negative integer or '-', got {tok!r}",
                                 lineno, path)
            word = int(tok)
        if utt in last_start and start < last_start[utt]:
            raise ParseError(f"non-monotonic start {start} < {last_start[utt]} in {utt}", lineno, path)
        last_start[utt] = start
        try:
            sf, nf = frames_from_seconds(start, dur, frame_shift_ms)
        except OverflowError:
            raise ParseError("time field out of range", lineno, path) from None
        groups.setdefault(utt, []).append(PhoneSegment(phone, sf, nf, word, start, dur))
        first_line.setdefault(utt, lineno)

    out = []
    for utt, phones in groups.items():
        try:
            out.append(UttAlignment(utt, phones, build_word_spans(phones)))
        except AlignmentError as exc:
            raise ParseError(f"{utt}: {exc}", first_line[utt], path) from None
    return out


def read_ctm(path, frame_shift_ms: float = 10.0) -> List[UttAlignment]:
    with open(path, encoding="utf-8") as f:
        return parse_ctm(f, frame_shift_ms, path)


def format_ctm(alignments: Sequence[UttAlignment], frame_shift_ms: float = 10.0) -> str:
    out = []
    for ali in alignments:
        for p in ali.phones:
            start, dur = p.seconds(frame_shift_ms)
            word = "-" if p.word_index is None else str(p.word_index)
            out.append(f"{ali.utt_id} 1 {start:.4f} {dur:.4f} {p.phone} {word}\n")
    return "".join(out)


def write_ctm(alignments: Sequence[UttAlignment], path, frame_shift_ms: float = 10.0) -> None:
    with atomic_write(path) as f:
        f.write(format_ctm(alignments, frame_shift_ms))


# ---------------------------------------------------------------- vocab

@dataclass(frozen=True)
class WordPieceVocab:
    pieces: frozenset

    def __len__(self):
        return len(self.pieces)

    def __contains__(self, piece):
        return piece in self.pieces

    @property
    def max_piece_len(self) -> int:
        return max((len(p) for p in self.pieces), default=0)


def read_vocab(path) -> WordPieceVocab:
    seen = set()
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, 1):
            piece = raw.rstrip("\r\n")
            if not piece:
                continue
            if piece in seen:
                raise ParseError(f"duplicate piece {piece!r}", lineno, path)
            seen.add(piece)
    return WordPieceVocab(frozenset(seen))


# ---------------------------------------------------------------- transcripts

def read_trn(path) -> Dict[str, List[str]]:
    """Read ``utt_id<TAB>tokens`` lines; an id with no tokens maps to []."""
    out: Dict[str, List[str]] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, 1):
            line = raw.rstrip("\r\n")
            if not line.strip():
                continue
            utt, _, text = line.partition("\t")
            utt = utt.strip()
            if not utt or any(c.isspace() for c in utt):
                raise ParseError(f"bad utt_id {utt!r}", lineno, path)
            if utt in out:
                raise ParseError(f"duplicate utt_id {utt!r}", lineno, path)
            out[utt] = text.split()
    return out
