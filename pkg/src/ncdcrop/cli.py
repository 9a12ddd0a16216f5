"""Command line: evaluate, fewshot, sweep-alphabet, sweep-compressor, synth."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from pathlib import Path

from .compressors import BACKENDS, Compressor
from .dataset import (
    DatasetError, Split, load_dataset, sample_few_shot, save_dataset,
    split_stratified, subsample_protocol,
)
from .metrics import aggregate_trials
from .pipeline import (
    DEFAULT_SHOTS, DEFAULT_SWEEP_LENGTHS, TRIAL_SEEDS, RunConfig, StageError,
    report_means, run_split,
)
from .symbolic import MAX_ALPHABET, MIN_ALPHABET

logger = logging.getLogger("ncdcrop")


class UsageError(Exception):
    pass


def _shared(p: argparse.ArgumentParser) -> None:
    p.add_argument("--data", required=True, help="PTS-CSV dataset file")
    p.add_argument("--manifest", help="JSON manifest with t, c and class names")
    p.add_argument("--alphabet-len", type=int, default=22)
    p.add_argument("-k", type=int, default=2)
    p.add_argument("--compressor", choices=BACKENDS, default="gzip")
    p.add_argument("--level", type=int, help="compression level (backend default if omitted)")
    p.add_argument("--distance", choices=("multiscale", "whole"), default="multiscale")
    p.add_argument("--seed", type=int, default=32)
    p.add_argument("--train-fraction", type=float, default=0.2)
    p.add_argument("--extrema", choices=("all", "train"), default="all")
    p.add_argument("--min-class-size", type=int, default=5,
                   help="drop classes with fewer samples (0 disables)")
    p.add_argument("--workers", type=int, help="distance workers (default: all CPUs)")
    p.add_argument("--no-cache", action="store_true", help="disable the compressed-length cache")
    p.add_argument("--out", help="write the JSON report here instead of stdout")
    p.add_argument("--save-distances", help="write the distance matrix (binary) here")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ncdcrop",
        description="Training-free time-series classification with multi-scale NCD and kNN.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    ev = sub.add_parser("evaluate", help="split, classify and score one run")
    _shared(ev)
    ev.add_argument("--split", help="JSON split file {train: [...], test: [...]}")

    fs = sub.add_parser("fewshot", help="n-shot trials aggregated over seeds")
    _shared(fs)
    fs.add_argument("--shots", type=int, nargs="+", default=list(DEFAULT_SHOTS))
    fs.add_argument("--seeds", type=int, nargs="+", default=list(TRIAL_SEEDS))

    for name, helptext in (("sweep-alphabet", "vary the alphabet length"),
                           ("sweep-compressor", "vary the compression backend")):
        sw = sub.add_parser(name, help=helptext)
        _shared(sw)
        sw.add_argument("--seeds", type=int, nargs="+", default=list(TRIAL_SEEDS))
        sw.add_argument("--subsample-fraction", type=float, default=0.2)
        sw.add_argument("--csv", help="also write the table as CSV (default: --out with .csv)")
        if name == "sweep-alphabet":
            sw.add_argument("--lengths", type=int, nargs="+", default=list(DEFAULT_SWEEP_LENGTHS))
        else:
            sw.add_argument("--compressors", nargs="+", default=list(BACKENDS))

    sy = sub.add_parser("synth", help="write a synthetic PTS-CSV dataset")
    sy.add_argument("--out", required=True)
    sy.add_argument("--manifest")
    sy.add_argument("--n-per-class", type=int, default=100)
    sy.add_argument("--classes", type=int, default=3)
    sy.add_argument("-t", type=int, default=24)
    sy.add_argument("-c", type=int, default=6)
    sy.add_argument("--noise", type=float, default=None)
    sy.add_argument("--seed", type=int, default=0)
    return parser


def config_from_args(args) -> RunConfig:
    return RunConfig(
        data=args.data, manifest=args.manifest,
        split=getattr(args, "split", None),
        train_fraction=args.train_fraction, alphabet_len=args.alphabet_len,
        compressor=args.compressor, level=args.level, distance=args.distance,
        k=args.k, seed=args.seed, workers=args.workers, extrema=args.extrema,
        min_class_size=args.min_class_size, out=args.out,
        save_distances=args.save_distances, cache=not args.no_cache,
    )


def _load(cfg: RunConfig):
    try:
        return load_dataset(cfg.data, cfg.manifest, cfg.min_class_size or None)
    except (OSError, DatasetError) as exc:
        raise StageError("load", exc) from exc


def _check_alphabet(length: int) -> None:
    if not MIN_ALPHABET <= length <= MAX_ALPHABET:
        raise UsageError(f"alphabet length {length} outside [{MIN_ALPHABET}, {MAX_ALPHABET}]")


def _check_common(cfg: RunConfig) -> None:
    _check_alphabet(cfg.alphabet_len)
    if cfg.k < 1:
        raise UsageError(f"-k must be >= 1, got {cfg.k}")
    if not 0.0 < cfg.train_fraction < 1.0:
        raise UsageError(f"--train-fraction must lie in (0, 1), got {cfg.train_fraction}")
    try:
        Compressor(cfg.compressor, cfg.level)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _emit(text: str, path: str | None) -> None:
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_evaluate(cfg: RunConfig) -> dict:
    _check_common(cfg)
    start = time.perf_counter()
    ds = _load(cfg)
    if cfg.split:
        try:
            split = Split.from_json(Path(cfg.split).read_text())
        except (OSError, ValueError, KeyError) as exc:
            raise StageError("split", exc) from exc
        bad = [i for i in split.train_indices + split.test_indices if not 0 <= i < len(ds)]
        if bad:
            raise StageError("split", f"indices out of range: {bad[:5]}")
    else:
        try:
            split = split_stratified(ds, cfg.train_fraction, cfg.seed)
        except (ValueError, DatasetError) as exc:
            raise StageError("split", exc) from exc
    report = run_split(ds, split.train_indices, split.test_indices, cfg)
    out = report.to_dict()
    out["runtime_seconds"] = time.perf_counter() - start
    _emit(_dump(out), cfg.out)
    return out


def cmd_fewshot(cfg: RunConfig, shots, seeds) -> dict:
    _check_common(cfg)
    if not shots:
        raise UsageError("--shots needs at least one value")
    if any(n < 1 for n in shots):
        raise UsageError("shot counts must be >= 1")
    if len(seeds) < 2:
        raise UsageError("a confidence interval needs at least 2 seeds")
    start = time.perf_counter()
    ds = _load(cfg)
    try:
        base = split_stratified(ds, cfg.train_fraction, cfg.seed)
    except (ValueError, DatasetError) as exc:
        raise StageError("split", exc) from exc

    levels = []
    for n in shots:
        trials = []
        for s in seeds:
            try:
                train = sample_few_shot(ds, base.train_indices, n, s)
            except (ValueError, DatasetError) as exc:
                raise StageError("sample", exc) from exc
            rep = run_split(ds, train, base.test_indices, cfg)
            trials.append({"seed": s, "n_train": len(train), "train_indices": train,
                           "oa": rep.oa, "aa": rep.aa, "miou": rep.miou,
                           "per_class_iou": {str(k): v for k, v in rep.per_class_iou.items()}})
        levels.append({
            "shots": n,
            "trials": trials,
            **{m: aggregate_trials([t[m] for t in trials], seeds).to_dict()
               for m in ("oa", "aa", "miou")},
        })
    config = cfg.resolved()
    config.update(shots=list(shots), seeds=list(seeds), n_test=len(base.test_indices))
    out = {"command": "fewshot", "config": config, "levels": levels,
           "runtime_seconds": time.perf_counter() - start}
    _emit(_dump(out), cfg.out)
    return out


SWEEP_COLUMNS = ("alphabet_len", "compressor", "level", "mean_oa", "mean_aa", "mean_miou",
                 "miou_per_seed")


def _sweep(cfg: RunConfig, variants, seeds, fraction, csv_path, command) -> dict:
    if not variants:
        raise UsageError("nothing to sweep")
    if not seeds:
        raise UsageError("--seeds needs at least one value")
    if not 0.0 < fraction < 1.0:
        raise UsageError(f"--subsample-fraction must lie in (0, 1), got {fraction}")
    start = time.perf_counter()
    ds = _load(cfg)
    splits = []
    for s in seeds:
        try:
            splits.append(subsample_protocol(ds, fraction, s))
        except (ValueError, DatasetError) as exc:
            raise StageError("split", exc) from exc

    rows = []
    for variant in variants:
        run_cfg = RunConfig(**{**cfg.__dict__, **variant, "save_distances": None})
        reports = [run_split(ds, sp.train_indices, sp.test_indices, run_cfg) for sp in splits]
        comp = Compressor(run_cfg.compressor, run_cfg.level)
        means = report_means(reports)
        rows.append({
            "alphabet_len": run_cfg.alphabet_len,
            "compressor": comp.backend,
            "level": comp.level,
            "library": comp.describe()["library"],
            "mean_oa": means["oa"], "mean_aa": means["aa"], "mean_miou": means["miou"],
            "trials": [{"seed": s, "oa": r.oa, "aa": r.aa, "miou": r.miou}
                       for s, r in zip(seeds, reports)],
        })
    config = cfg.resolved()
    config.update(seeds=list(seeds), subsample_fraction=fraction,
                  protocol="subsample fraction per class, then 50/50 per-class train/test")
    out = {"command": command, "config": config, "rows": rows,
           "runtime_seconds": time.perf_counter() - start}
    _emit(_dump(out), cfg.out)
    if csv_path is None and cfg.out:
        csv_path = str(Path(cfg.out).with_suffix(".csv"))
    if csv_path:
        Path(csv_path).write_text(sweep_csv(rows))
    return out


def sweep_csv(rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for r in rows:
        w.writerow([r["alphabet_len"], r["compressor"], r["level"],
                    f"{r['mean_oa']:.4f}", f"{r['mean_aa']:.4f}", f"{r['mean_miou']:.4f}",
                    ";".join(f"{t['miou']:.4f}" for t in r["trials"])])
    return buf.getvalue()


def cmd_sweep_alphabet(cfg: RunConfig, lengths, seeds=TRIAL_SEEDS, fraction=0.2,
                       csv_path=None) -> dict:
    _check_common(cfg)
    for length in lengths:
        _check_alphabet(length)
    return _sweep(cfg, [{"alphabet_len": length} for length in lengths], seeds, fraction,
                  csv_path, "sweep-alphabet")


def cmd_sweep_compressor(cfg: RunConfig, backends, seeds=TRIAL_SEEDS, fraction=0.2,
                         csv_path=None) -> dict:
    _check_common(cfg)
    unknown = [b for b in backends if b not in BACKENDS]
    if unknown:
        raise UsageError(f"unknown compressor(s) {unknown}; supported: {', '.join(BACKENDS)}")
    # An explicit --level only applies when a single backend is swept.
    level = cfg.level if len(backends) == 1 else None
    return _sweep(cfg, [{"compressor": b, "level": level} for b in backends], seeds, fraction,
                  csv_path, "sweep-compressor")


def cmd_synth(args) -> None:
    from .synthetic import make_synthetic

    kwargs = {} if args.noise is None else {"noise": args.noise}
    ds = make_synthetic(args.n_per_class, args.classes, args.t, args.c, seed=args.seed, **kwargs)
    save_dataset(ds, args.out, args.manifest)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "synth":
            cmd_synth(args)
            return 0
        cfg = config_from_args(args)
        if args.command == "evaluate":
            cmd_evaluate(cfg)
        elif args.command == "fewshot":
            cmd_fewshot(cfg, args.shots, args.seeds)
        elif args.command == "sweep-alphabet":
            cmd_sweep_alphabet(cfg, args.lengths, args.seeds, args.subsample_fraction, args.csv)
        else:
            cmd_sweep_compressor(cfg, args.compressors, args.seeds, args.subsample_fraction,
                                 args.csv)
    except UsageError as exc:
        print(f"error [arguments]: {exc}", file=sys.stderr)
        return 2
    except StageError as exc:
        print(f"error [{exc.stage}]: {exc.__cause__ or exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error [output]: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
