"""Alignment-aware masking augmentation for speech features.

Phone, word-piece and word masks driven by forced alignments, SpecAugment,
an MFCC/CMVN front end, small-scale Conformer/CTC numerics and a WER scorer.
"""

from .align import (AlignmentError, DurationStats, PhoneSegment, UttAlignment, WordSegment,
                    build_word_spans, duration_stats, frames_from_seconds, validate_alignment)
from .frontend import (FeatureMatrix, MfccConfig, Waveform, apply_cmvn, compute_fbank,
                       compute_mfcc, scale_alignment, speed_perturb)
from .io import (FormatError, ParseError, WordPieceVocab, parse_ctm, parse_feature_archive,
                 read_ctm, read_feature_archive, read_trn, read_vocab, read_wav, write_ctm,
                 write_feature_archive, write_wav)
from .kernel import (KernelError, KernelParams, conformer_block, cross_entropy, ctc_loss,
                     ctc_loss_grad, greedy_ctc_decode, joint_decode, joint_decode_score,
                     joint_loss, layer_norm)
from .mask import (PRESETS, MaskConfig, MaskPlan, MaskRegion, SpecAugmentParams, SplitMix64,
                   apply_mask, augment_corpus, compute_fill, derive_utt_seed, plan_mask,
                   plan_phone_mask, plan_spec_augment, plan_word_mask, plan_word_piece_mask)
from .score import ScoreReport, align_edit, score_corpus
from .tokenize import graphemes, piece_frame_spans, segment_word_pieces

__version__ = "0.1.0"

__all__ = [
    "AlignmentError",
    "DurationStats",
    "PhoneSegment",
    "UttAlignment",
    "WordSegment",
    "build_word_spans",
    "duration_stats",
    "frames_from_seconds",
    "validate_alignment",
    "FeatureMatrix",
    "MfccConfig",
    "Waveform",
    "apply_cmvn",
    "compute_fbank",
    "compute_mfcc",
    "scale_alignment",
    "speed_perturb",
    "FormatError",
    "ParseError",
    "WordPieceVocab",
    "parse_ctm",
    "parse_feature_archive",
    "read_ctm",
    "read_feature_archive",
    "read_trn",
    "read_vocab",
    "read_wav",
    "write_ctm",
    "write_feature_archive",
    "write_wav",
    "KernelError",
    "KernelParams",
    "conformer_block",
    "cross_entropy",
    "ctc_loss",
    "ctc_loss_grad",
    "greedy_ctc_decode",
    "joint_decode",
    "joint_decode_score",
    "joint_loss",
    "layer_norm",
    "PRESETS",
    "MaskConfig",
    "MaskPlan",
    "MaskRegion",
    "SpecAugmentParams",
    "SplitMix64",
    "apply_mask",
    "augment_corpus",
    "compute_fill",
    "derive_utt_seed",
    "plan_mask",
    "plan_phone_mask",
    "plan_spec_augment",
    "plan_word_mask",
    "plan_word_piece_mask",
    "ScoreReport",
    "align_edit",
    "score_corpus",
    "graphemes",
    "piece_frame_spans",
    "segment_word_pieces",
]
