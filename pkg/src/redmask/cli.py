"""Command-line entry point: ``redmask <subcommand> ...``.

Exit status is 0 on success, 1 on data errors and 2 on usage errors.
A ``--config`` file (YAML or JSON) supplies defaults per subcommand;
command-line flags override it.  Every output file is written to a
temporary name and renamed into place.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import yaml

from . import io as rio
from .align import duration_stats
from .frontend import MfccConfig, apply_cmvn, compute_mfcc, scale_alignment, speed_perturb
from .kernel import ALPHA, LAMBDA, joint_decode_score, joint_loss
from .mask import (FILLS, PM, PRESETS, SPEC_AUGMENT, STM, WPM, MaskConfig, SpecAugmentParams,
                   augment_corpus, format_plan_log)
from .score import score_corpus
from .selftest import run_all

log = logging.getLogger("redmask")

SEED_ENV = "REDMASK_SEED"
METHOD_FLAGS = {"pm": PM, "wpm": WPM, "stm": STM, "specaugment": SPEC_AUGMENT}
FILL_FLAGS = {"utt": FILLS[0], "word": FILLS[1]}

# subcommand -> {option: default}; None means "required or optional without default"
DEFAULTS = {
    "featize": {"wav_dir": None, "out": None, "cmvn": False, "speed": "1.0", "jobs": 1},
    "stats": {"ctm": None, "shift_ms": 10.0},
    "augment": {"feats": None, "ctm": None, "method": "pm", "ratio": 0.15, "fill": "utt",
                "seed": None, "out": None, "plan_log": None, "vocab": None, "text": None,
                "preset": None, "shift_ms": 10.0, "jobs": 1, "freq_width": 8, "freq_masks": 2,
                "time_width": 40, "time_masks": 2},
    "perturb": {"wav_dir": None, "out_dir": None, "factor": None, "ctm": None, "ctm_out": None,
                "shift_ms": 10.0},
    "score": {"ref": None, "hyp": None, "detail": False, "unit": "word"},
    "kernel-selftest": {},
}


class UsageError(Exception):
    pass


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="redmask", description=__doc__.splitlines()[0])
    p.add_argument("--config", help="YAML/JSON file with per-subcommand defaults")
    p.add_argument("-q", "--quiet", action="store_true", help="only log warnings and errors")
    sub = p.add_subparsers(dest="command", required=True)

    # defaults are applied after merging with --config, so every option defaults to None here
    f = sub.add_parser("featize", help="WAV directory -> MFCC feature archive")
    f.add_argument("--wav-dir")
    f.add_argument("--out")
    f.add_argument("--cmvn", action="store_const", const=True)
    f.add_argument("--speed", help="comma-separated speed factors, e.g. 0.9,1.0,1.1")
    f.add_argument("--jobs", type=int)

    s = sub.add_parser("stats", help="phone duration statistics from a CTM")
    s.add_argument("--ctm")
    s.add_argument("--shift-ms", type=float)

    a = sub.add_parser("augment", help="mask a feature archive")
    a.add_argument("--feats")
    a.add_argument("--ctm")
    a.add_argument("--preset", choices=sorted(PRESETS))
    a.add_argument("--method", choices=sorted(METHOD_FLAGS))
    a.add_argument("--ratio", type=float)
    a.add_argument("--fill", choices=sorted(FILL_FLAGS))
    a.add_argument("--seed", type=int)
    a.add_argument("--out")
    a.add_argument("--plan-log")
    a.add_argument("--vocab")
    a.add_argument("--text", help="trn file with word spellings for word-piece masking")
    a.add_argument("--shift-ms", type=float)
    a.add_argument("--jobs", type=int)
    a.add_argument("--freq-width", type=int)
    a.add_argument("--freq-masks", type=int)
    a.add_argument("--time-width", type=int)
    a.add_argument("--time-masks", type=int)

    sp = sub.add_parser("perturb", help="speed-perturb WAVs (and re-time a CTM)")
    sp.add_argument("--wav-dir")
    sp.add_argument("--out-dir")
    sp.add_argument("--factor", type=float)
    sp.add_argument("--ctm")
    sp.add_argument("--ctm-out")
    sp.add_argument("--shift-ms", type=float)

    sc = sub.add_parser("score", help="WER with SUB/DEL/INS breakdown")
    sc.add_argument("--ref")
    sc.add_argument("--hyp")
    sc.add_argument("--detail", action="store_const", const=True)
    sc.add_argument("--unit", choices=["word", "char"])

    sub.add_parser("kernel-selftest", help="compare kernel numerics against brute-force oracles")
    return p


def load_config(path) -> dict:
    text = Path(path).read_text(encoding="utf-8")
    data = json.loads(text) if str(path).endswith(".json") else yaml.safe_load(text)
    data = data or {}
    if not isinstance(data, dict):
        raise UsageError(f"{path}: top level must be a mapping")
    for key, section in data.items():
        if key == "seed":
            continue
        if key not in DEFAULTS:
            raise UsageError(f"{path}: unknown section {key!r}")
        if not isinstance(section, dict):
            raise UsageError(f"{path}: section {key!r} must be a mapping")
        for opt in section:
            if opt.replace("-", "_") not in DEFAULTS[key]:
                raise UsageError(f"{path}: unknown key {key}.{opt}")
    return data


def resolve(args: argparse.Namespace) -> dict:
    """Merge flags over config over built-in defaults for the chosen subcommand."""
    config = load_config(args.config) if args.config else {}
    section = {k.replace("-", "_"): v for k, v in config.get(args.command, {}).items()}
    resolved = {}
    for key, default in DEFAULTS[args.command].items():
        flag = getattr(args, key, None)
        if flag is not None:
            resolved[key] = flag
        elif key in section:
            resolved[key] = section[key]
        else:
            resolved[key] = default
    if "seed" in resolved and resolved["seed"] is None:
        if "seed" in config:
            resolved["seed"] = int(config["seed"])
        elif os.environ.get(SEED_ENV):
            resolved["seed"] = int(os.environ[SEED_ENV])
        else:
            resolved["seed"] = 0
    return resolved


def _require(opts: dict, *names: str, why: str = "") -> None:
    for name in names:
        if opts.get(name) in (None, ""):
            flag = "--" + name.replace("_", "-")
            raise UsageError(f"missing required flag {flag}{' ' + why if why else ''}")


def _speed_id(utt: str, factor: float) -> str:
    return utt if factor == 1.0 else f"sp{factor:g}-{utt}"


def _parse_speeds(text) -> list:
    if isinstance(text, (int, float)):
        return [float(text)]
    if isinstance(text, list):
        return [float(x) for x in text]
    try:
        return [float(x) for x in str(text).split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad --speed value {text!r}") from None


def cmd_featize(o: dict) -> int:
    _require(o, "wav_dir", "out")
    speeds = _parse_speeds(o["speed"])
    wavs = sorted(Path(o["wav_dir"]).glob("*.wav"))
    if not wavs:
        raise ValueError(f"no .wav files in {o['wav_dir']}")
    cfg = MfccConfig()
    jobs = [(w, f) for w in wavs for f in speeds]

    def one(item):
        path, factor = item
        wave = rio.read_wav(path)
        if factor != 1.0:
            wave = speed_perturb(wave, factor)
        feats = compute_mfcc(wave, cfg, _speed_id(path.stem, factor))
        return apply_cmvn(feats) if o["cmvn"] else feats

    with ThreadPoolExecutor(max_workers=max(1, o["jobs"])) as pool:
        results = list(pool.map(one, jobs))
    rio.write_feature_archive({m.utt_id: m for m in results}, o["out"])
    log.info("wrote %d utterances to %s", len(results), o["out"])
    return 0


def cmd_stats(o: dict) -> int:
    _require(o, "ctm")
    alignments = rio.read_ctm(o["ctm"], o["shift_ms"])
    sys.stdout.write(duration_stats(alignments, o["shift_ms"]).to_tsv())
    return 0


def mask_config(o: dict) -> MaskConfig:
    base = PRESETS[o["preset"]] if o.get("preset") else None
    explicit = o.get("_explicit", set())

    def pick(key, from_preset, convert):
        if base is not None and key not in explicit:
            return from_preset
        return convert(o[key])

    def lookup(table, what):
        def get(v):
            if v not in table:
                raise UsageError(f"unknown {what} {v!r}; choose from {', '.join(table)}")
            return table[v]
        return get

    return MaskConfig(
        method=pick("method", base.method if base else None, lookup(METHOD_FLAGS, "method")),
        ratio=pick("ratio", base.ratio if base else None, float),
        fill=pick("fill", base.fill if base else None, lookup(FILL_FLAGS, "fill")),
        spec=SpecAugmentParams(o["freq_width"], o["freq_masks"], o["time_width"], o["time_masks"]),
        seed=int(o["seed"]),
    )


def cmd_augment(o: dict) -> int:
    _require(o, "feats", "out")
    cfg = mask_config(o)
    if cfg.method != SPEC_AUGMENT:
        _require(o, "ctm", why=f"(method {cfg.method} needs an alignment)")
    if cfg.method == WPM:
        _require(o, "vocab", why="(word-piece masking needs a vocabulary)")
    log.info("mask config: %s", cfg)
    archive = rio.read_feature_archive(o["feats"])
    alignments = None
    if o.get("ctm") and cfg.method != SPEC_AUGMENT:
        alignments = {a.utt_id: a for a in rio.read_ctm(o["ctm"], o["shift_ms"])}
    vocab = rio.read_vocab(o["vocab"]) if o.get("vocab") else None
    texts = rio.read_trn(o["text"]) if o.get("text") else None
    out, plans = augment_corpus(archive, alignments, cfg, vocab, texts, jobs=max(1, o["jobs"]))
    rio.write_feature_archive(out, o["out"])
    if o.get("plan_log"):
        with rio.atomic_write(o["plan_log"]) as f:
            f.write(format_plan_log(plans))
    log.info("masked %d utterances, %d regions", len(plans), sum(len(p.regions) for p in plans))
    return 0


def cmd_perturb(o: dict) -> int:
    _require(o, "wav_dir", "out_dir", "factor")
    factor = float(o["factor"])
    out_dir = Path(o["out_dir"])
    out_dir.mkdir(parents=True, exist_ok=True)
    for path in sorted(Path(o["wav_dir"]).glob("*.wav")):
        wave = speed_perturb(rio.read_wav(path), factor)
        rio.write_wav(wave, out_dir / f"{_speed_id(path.stem, factor)}.wav")
    if o.get("ctm"):
        _require(o, "ctm_out", why="(where to write the re-timed CTM)")
        scaled = []
        for ali in rio.read_ctm(o["ctm"], o["shift_ms"]):
            s = scale_alignment(ali, factor, o["shift_ms"])
            s.utt_id = _speed_id(ali.utt_id, factor)
            scaled.append(s)
        rio.write_ctm(scaled, o["ctm_out"], o["shift_ms"])
    return 0


def cmd_score(o: dict) -> int:
    _require(o, "ref", "hyp")
    report = score_corpus(rio.read_trn(o["ref"]), rio.read_trn(o["hyp"]), unit=o["unit"])
    print(report.table_row())
    missing = [u.utt_id for u in report.utterances if u.missing_hyp]
    if missing:
        log.warning("no hypothesis for %d utterance(s), scored as deletions: %s",
                    len(missing), " ".join(missing))
    if o["detail"]:
        sys.stdout.write(report.detail_tsv())
    return 0


def cmd_kernel_selftest(o: dict) -> int:
    results = run_all()
    for r in results:
        print(r.line())
    arith = [
        ("joint_loss(1, 2) with alpha=0.7 == 1.3", joint_loss(1.0, 2.0, ALPHA) == 1.3),
        ("joint_decode_score(-1, -3) with lambda=0.5 == -2", joint_decode_score(-1.0, -3.0, LAMBDA) == -2.0),
    ]
    for name, ok in arith:
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    ok = all(r.ok for r in results) and all(x for _, x in arith)
    print(f"{sum(r.passed for r in results)}/{sum(r.total for r in results)} oracle comparisons passed")
    return 0 if ok else 1


COMMANDS = {
    "featize": cmd_featize,
    "stats": cmd_stats,
    "augment": cmd_augment,
    "perturb": cmd_perturb,
    "score": cmd_score,
    "kernel-selftest": cmd_kernel_selftest,
}


def _setup_logging(quiet: bool) -> None:
    # a fresh handler per run so repeated in-process calls log to the current stderr
    for h in list(log.handlers):
        log.removeHandler(h)
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(name)s: %(levelname)s: %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.WARNING if quiet else logging.INFO)
    log.propagate = False


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging(args.quiet)
    try:
        opts = resolve(args)
        opts["_explicit"] = {k for k in DEFAULTS[args.command] if getattr(args, k, None) is not None}
        # config-file values count as explicit too, so they override a preset
        if args.config:
            section = load_config(args.config).get(args.command, {})
            opts["_explicit"] |= {k.replace("-", "_") for k in section}
        log.info("resolved %s options: %s", args.command,
                 {k: v for k, v in opts.items() if not k.startswith("_")})
        return COMMANDS[args.command](opts)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"redmask {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"redmask {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
