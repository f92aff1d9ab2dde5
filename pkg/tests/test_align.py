import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from redmask.align import (AlignmentError, PhoneSegment, UttAlignment, build_word_spans,
                           duration_stats, frames_from_seconds, validate_alignment)

from conftest import make_alignment


def test_frames_from_seconds_examples():
    assert frames_from_seconds(0.00, 0.08, 10) == (0, 8)
    assert frames_from_seconds(0.005, 0.011, 10) == (1, 1)


@settings(max_examples=300, deadline=None)
@given(st.floats(0, 100), st.floats(0.01, 2.0), st.floats(0.01, 2.0))
def test_adjacent_segments_stay_adjacent(start, d1, d2):
    # segments of at least one frame shift never collide after quantization
    s1, n1 = frames_from_seconds(start, d1, 10)
    s2, n2 = frames_from_seconds(start + d1, d2, 10)
    assert n1 >= 1 and n2 >= 1
    assert s1 + n1 == s2


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0.01, 0.3), min_size=1, max_size=30))
def test_quantization_error_bounded_by_segment_count(durs):
    t, total = 0.0, 0
    for d in durs:
        total += frames_from_seconds(t, d, 10)[1]
        t += d
    assert abs(total - round(t * 100)) <= len(durs)


def test_build_word_spans(small_alignment):
    words = small_alignment.words
    assert [(w.word_index, w.phone_start, w.phone_end) for w in words] == [(0, 1, 3), (1, 3, 4)]
    assert (words[0].start_frame, words[0].num_frames) == (2, 7)
    assert (words[1].start_frame, words[1].num_frames) == (9, 5)


def test_build_word_spans_all_silence():
    assert build_word_spans([PhoneSegment("SIL", 0, 10)]) == []


def test_build_word_spans_split_word():
    phones = [PhoneSegment("a", 0, 3, 0), PhoneSegment("SIL", 3, 3), PhoneSegment("b", 6, 3, 0)]
    with pytest.raises(AlignmentError, match="word 0 split by other material"):
        build_word_spans(phones)


def test_word_spans_flatten_round_trip(rng):
    for _ in range(50):
        words = [[("p", int(rng.integers(1, 6))) for _ in range(int(rng.integers(1, 5)))]
                 for _ in range(int(rng.integers(1, 8)))]
        ali = make_alignment("u", words, sil_frames=int(rng.integers(0, 3)))
        flat = [p.word_index for w in ali.words for p in ali.phones[w.phone_start:w.phone_end]]
        assert flat == [p.word_index for p in ali.phones if not p.is_silence]
        for w in ali.words:
            covered = set()
            for p in ali.phones[w.phone_start:w.phone_end]:
                covered |= set(range(p.start_frame, p.end_frame))
            assert covered == set(range(w.start_frame, w.end_frame))


def test_validate_ok_and_tolerance():
    ali = make_alignment("u", [[("a", 88)]], sil_frames=5)  # ends at frame 98
    validate_alignment(ali, 98)
    validate_alignment(ali, 96)
    long = make_alignment("u", [[("a", 91)]], sil_frames=5)  # ends at 101
    with pytest.raises(AlignmentError, match="alignment exceeds features by 3 > 2"):
        validate_alignment(long, 98)


def test_validate_overlap_names_second_segment():
    ali = UttAlignment.from_phones("u", [PhoneSegment("a", 0, 5, 0), PhoneSegment("b", 3, 5, 1)])
    with pytest.raises(AlignmentError, match=r"segment 1 \(b\)"):
        validate_alignment(ali, 100)


def test_duration_stats_single_phone():
    s = duration_stats([make_alignment("u", [[("a", 8)]])], 10)
    assert s.overall_mean_sec == 0.08


@pytest.mark.parametrize("frames, mean", [(14, 0.14), (10, 0.10), (8, 0.08)])
def test_duration_stats_reference_means(frames, mean):
    # whole-frame means at a 10 ms shift must come out as the exact decimals
    corpus = [make_alignment(f"u{i}", [[("x", frames), ("y", frames)]]) for i in range(3)]
    s = duration_stats(corpus, 10)
    assert s.overall_mean_sec == mean
    assert s.per_phone["x"].mean_sec == mean


def test_duration_stats_mixed_corpus_per_phone_means():
    corpus = [make_alignment("u", [[("zh", 14), ("en", 10), ("ug", 8)]])]
    s = duration_stats(corpus, 10)
    assert (s.per_phone["zh"].mean_sec, s.per_phone["en"].mean_sec, s.per_phone["ug"].mean_sec) \
        == (0.14, 0.10, 0.08)
    assert "SIL" not in s.per_phone


def test_short_phone_ratio():
    ali = make_alignment("u", [[("a", 3), ("b", 3)], [("c", 4), ("d", 5)]])
    assert duration_stats([ali]).short_phone_ratio == 0.5


def test_duration_stats_needs_speech():
    with pytest.raises(AlignmentError):
        duration_stats([UttAlignment.from_phones("u", [PhoneSegment("SIL", 0, 4)])])


def test_duration_stats_matches_naive_mean(rng):
    corpus = []
    for i in range(30):
        words = [[("abc"[int(rng.integers(3))], int(rng.integers(1, 20)))
                  for _ in range(int(rng.integers(1, 5)))] for _ in range(int(rng.integers(1, 6)))]
        corpus.append(make_alignment(f"u{i}", words))
    s = duration_stats(corpus, 10)
    durations = [p.num_frames * 10 for a in corpus for p in a.phones if p.word_index is not None]
    assert s.overall_mean_sec == sum(durations) / (1000.0 * len(durations))
    assert s.num_phones == len(durations)
