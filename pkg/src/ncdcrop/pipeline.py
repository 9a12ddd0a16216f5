"""End-to-end runs: symbolize, embed, measure distances, classify, score."""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .classifier import DEFAULT_K, classify_rows
from .compressors import Compressor, LengthCache
from .dataset import Dataset, global_extrema
from .distance import DistanceMatrix, distance_matrix, iter_distance_rows, save_distances
from .embedding import embed_all
from .metrics import EvaluationReport, evaluate
from .symbolic import Alphabet, build_breakpoints, symbolize_dataset

logger = logging.getLogger(__name__)

TRIAL_SEEDS = (2024, 21, 32, 400, 47)
DEFAULT_SHOTS = (50, 20, 10, 5)
DEFAULT_SWEEP_LENGTHS = tuple(range(2, 53, 5))
PRNG = "numpy.random.Generator(PCG64(seed))"

# Above this many matrix cells, rows are classified as they stream in.
STREAM_THRESHOLD = 25_000_000


class StageError(RuntimeError):
    """A pipeline stage failed; ``stage`` names it."""

    def __init__(self, stage: str, cause: BaseException | str):
        self.stage = stage
        super().__init__(f"[{stage}] {cause}")


@dataclass
class RunConfig:
    data: str | None = None
    manifest: str | None = None
    split: str | None = None
    train_fraction: float = 0.2
    alphabet_len: int = 22
    compressor: str = "gzip"
    level: int | None = None
    distance: str = "multiscale"
    k: int = DEFAULT_K
    seed: int = 32
    workers: int | None = None
    extrema: str = "all"
    min_class_size: int = 5
    out: str | None = None
    save_distances: str | None = None
    cache: bool = True
    extra: dict = field(default_factory=dict)

    def resolved(self) -> dict:
        """Config echo for reports; excludes knobs that cannot change the numbers."""
        d = asdict(self)
        for key in ("out", "workers", "cache", "extra"):
            d.pop(key)
        d["compressor"] = Compressor(self.compressor, self.level).describe()
        d.pop("level")
        d["prng"] = PRNG
        d.update(self.extra)
        return d


def _stage(name):
    def wrap(fn):
        def inner(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except StageError:
                raise
            except Exception as exc:
                raise StageError(name, exc) from exc
        inner.__name__ = fn.__name__
        inner.__doc__ = fn.__doc__
        return inner
    return wrap


@_stage("symbolize")
def _symbolize(dataset, extrema_idx, idx_list, alphabet_len):
    source = dataset if extrema_idx is None else dataset.subset(extrema_idx)
    lo, hi = global_extrema(source)
    alphabet = Alphabet(alphabet_len)
    bps = build_breakpoints(lo, hi, alphabet_len)
    return [symbolize_dataset(dataset, bps, alphabet, idx) for idx in idx_list], (lo, hi)


@_stage("embed")
def _embed(symbolic_sets):
    return [embed_all(s) for s in symbolic_sets]


@_stage("distance")
def _distances(comp, test_emb, train_emb, cfg: RunConfig, cache):
    if cfg.save_distances or len(test_emb) * len(train_emb) <= STREAM_THRESHOLD:
        dm = distance_matrix(comp, test_emb, train_emb, cfg.distance, cfg.workers, cache, cfg.cache)
        if cfg.save_distances:
            save_distances(cfg.save_distances, dm.values)
        return dm
    return iter_distance_rows(comp, test_emb, train_emb, cfg.distance, cfg.workers, cache, cfg.cache)


@_stage("classify")
def _classify(rows, train_labels, k):
    if isinstance(rows, DistanceMatrix):
        rows = rows.values
    return classify_rows(rows, train_labels, k)


@_stage("metrics")
def _score(truth, preds, classes, config):
    return evaluate(truth, [p.label for p in preds], classes, config)


def run_split(dataset: Dataset, train_idx: Sequence[int], test_idx: Sequence[int],
              cfg: RunConfig, cache: LengthCache | None = None,
              config_extra: dict | None = None) -> EvaluationReport:
    """Evaluate one train/test partition of ``dataset`` under ``cfg``."""
    start = time.perf_counter()
    train_idx = list(train_idx)
    test_idx = list(test_idx)
    if not train_idx or not test_idx:
        raise StageError("split", "train and test sets must both be non-empty")
    if cfg.extrema not in ("all", "train"):
        raise StageError("config", f"extrema must be 'all' or 'train', got {cfg.extrema!r}")
    try:
        comp = Compressor(cfg.compressor, cfg.level)
    except ValueError as exc:
        raise StageError("config", exc) from exc

    extrema_idx = train_idx if cfg.extrema == "train" else None
    (sym_train, sym_test), (lo, hi) = _symbolize(
        dataset, extrema_idx, [train_idx, test_idx], cfg.alphabet_len)
    emb_train, emb_test = _embed([sym_train, sym_test])
    train_labels = [int(dataset.labels[i]) for i in train_idx]
    rows = _distances(comp, emb_test, emb_train, cfg, cache)
    preds = _classify(rows, train_labels, cfg.k)
    truth = [int(dataset.labels[i]) for i in test_idx]
    config = cfg.resolved()
    config.update(
        n_train=len(train_idx), n_test=len(test_idx),
        extrema_values=[lo, hi],
    )
    config.update(config_extra or {})
    report = _score(truth, preds, dataset.classes, config)
    report.runtime_seconds = time.perf_counter() - start
    return report


def predictions_for(dataset: Dataset, train_idx, test_idx, cfg: RunConfig) -> list[int]:
    """Predicted labels for ``test_idx``; handy for inspection and tests."""
    extrema_idx = list(train_idx) if cfg.extrema == "train" else None
    (sym_train, sym_test), _ = _symbolize(
        dataset, extrema_idx, [list(train_idx), list(test_idx)], cfg.alphabet_len)
    emb_train, emb_test = _embed([sym_train, sym_test])
    dm = distance_matrix(Compressor(cfg.compressor, cfg.level), emb_test, emb_train,
                         cfg.distance, cfg.workers, None, cfg.cache)
    return [p.label for p in classify_rows(dm.values, dm.train_labels, cfg.k)]


def report_means(reports: Sequence[EvaluationReport]) -> dict:
    return {
        "oa": float(np.mean([r.oa for r in reports])),
        "aa": float(np.mean([r.aa for r in reports])),
        "miou": float(np.mean([r.miou for r in reports])),
    }
