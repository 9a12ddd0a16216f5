"""NCD, multi-scale NCD and the test-by-train distance matrix.

Concatenation order is always test sequence first, train sequence second.
Distances are not symmetrized and not clamped to 1.
"""

from __future__ import annotations

import logging
import os
import struct
import zlib
from collections import deque
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Iterator, Sequence

import numpy as np

from .compressors import Compressor, LengthCache, compressed_length, joint_compressed_length
from .embedding import SymbolicEmbedding, flatten

logger = logging.getLogger(__name__)

MODES = ("multiscale", "whole")
SOFT_UPPER_BOUND = 1.25

MATRIX_MAGIC = b"NCDMAT01"
_HEADER = struct.Struct("<8sQQ")


@dataclass(frozen=True)
class DistanceMatrix:
    values: np.ndarray  # (n_test, n_train) float64
    train_labels: tuple[int, ...]
    mode: str

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def _ncd(cmn: int, cm: int, cn: int) -> float:
    return (cmn - min(cm, cn)) / max(cm, cn)


def ncd(comp: Compressor, m, n, cache: LengthCache | None = None) -> float:
    cm = compressed_length(comp, m, cache)
    cn = compressed_length(comp, n, cache)
    return _ncd(joint_compressed_length(comp, m, n), cm, cn)


def _check_dims(sp: SymbolicEmbedding, sq: SymbolicEmbedding) -> None:
    if (sp.t, sp.c) != (sq.t, sq.c):
        raise ValueError(
            f"embedding shapes differ: t={sp.t},c={sp.c} vs t={sq.t},c={sq.c}"
        )


def mncd(comp: Compressor, sp: SymbolicEmbedding, sq: SymbolicEmbedding,
         cache: LengthCache | None = None) -> float:
    """Mean of the per-component NCDs over all ``c + t`` components."""
    _check_dims(sp, sq)
    parts = [ncd(comp, m, n, cache) for m, n in zip(sp.components, sq.components)]
    return sum(parts) / len(parts)


def whole_ncd(comp: Compressor, sp: SymbolicEmbedding, sq: SymbolicEmbedding,
              cache: LengthCache | None = None) -> float:
    _check_dims(sp, sq)
    return ncd(comp, flatten(sp), flatten(sq), cache)


def _length_fn(comp: Compressor):
    if comp.backend == "gzip":
        level = comp.level
        return lambda data: len(zlib.compress(data, level)) + 12
    return comp.length


def _units(emb: SymbolicEmbedding, mode: str) -> tuple[bytes, ...]:
    return emb.components if mode == "multiscale" else (flatten(emb),)


def _lengths(comp: Compressor, units, cache: LengthCache | None) -> tuple[int, ...]:
    return tuple(compressed_length(comp, u, cache) for u in units)


def _compute_row(comp, test_units, test_lengths, train_units, train_lengths) -> np.ndarray:
    length = _length_fn(comp)
    row = np.empty(len(train_units), dtype=np.float64)
    k = len(test_units)
    for q, (units_q, lengths_q) in enumerate(zip(train_units, train_lengths)):
        total = 0.0
        for m, n, cm, cn in zip(test_units, units_q, test_lengths, lengths_q):
            total += (length(m + n) - min(cm, cn)) / max(cm, cn)
        row[q] = total / k
    return row


# Per-process state for pool workers, set once by _init_worker.
_worker: dict = {}


def _init_worker(comp, train_units, train_lengths, mode, use_cache):
    _worker.update(
        comp=comp, train_units=train_units, train_lengths=train_lengths,
        mode=mode, cache=LengthCache() if use_cache else None,
    )


def _rows_task(test_chunk: list[SymbolicEmbedding]) -> list[np.ndarray]:
    w = _worker
    out = []
    for emb in test_chunk:
        units = _units(emb, w["mode"])
        out.append(_compute_row(w["comp"], units, _lengths(w["comp"], units, w["cache"]),
                                w["train_units"], w["train_lengths"]))
    return out


def _validate(test, train, mode) -> None:
    if mode not in MODES:
        raise ValueError(f"unknown distance mode {mode!r}; choose from {MODES}")
    if not test or not train:
        raise ValueError("distance matrix needs non-empty test and train lists")
    dims = {(e.t, e.c) for e in test} | {(e.t, e.c) for e in train}
    if len(dims) != 1:
        raise ValueError(f"embeddings have mixed (t, c) shapes: {sorted(dims)}")


def default_workers() -> int:
    return os.cpu_count() or 1


def iter_distance_rows(comp: Compressor, test: Sequence[SymbolicEmbedding],
                       train: Sequence[SymbolicEmbedding], mode: str = "multiscale",
                       workers: int | None = 1, cache: LengthCache | None = None,
                       use_cache: bool = True, chunk_size: int | None = None,
                       ) -> Iterator[np.ndarray]:
    """Yield distance rows in test order without materializing the matrix.

    Train-side compressed lengths are computed once up front. With
    ``workers > 1`` rows are computed in a process pool; the values do not
    depend on the worker count.
    """
    _validate(test, train, mode)
    workers = default_workers() if workers is None else max(1, int(workers))
    if use_cache and cache is None:
        cache = LengthCache()
    elif not use_cache:
        cache = None

    train_units = [_units(e, mode) for e in train]
    train_lengths = [_lengths(comp, u, cache) for u in train_units]

    def checked(row, p):
        if not np.all(np.isfinite(row)):
            raise ArithmeticError(f"non-finite distance in row {p}")
        if np.any(row < 0):
            logger.warning("row %d has a negative distance %.4f", p, float(row.min()))
        worst = float(row.max())
        if worst > SOFT_UPPER_BOUND:
            logger.warning("row %d has distance %.4f above %.2f", p, worst, SOFT_UPPER_BOUND)
        return row

    if workers == 1 or len(test) == 1:
        for p, emb in enumerate(test):
            units = _units(emb, mode)
            row = _compute_row(comp, units, _lengths(comp, units, cache),
                               train_units, train_lengths)
            yield checked(row, p)
        return

    if chunk_size is None:
        chunk_size = max(1, min(32, len(test) // (workers * 4) or 1))
    chunks = [list(test[i:i + chunk_size]) for i in range(0, len(test), chunk_size)]
    with ProcessPoolExecutor(
        max_workers=workers, initializer=_init_worker,
        initargs=(comp, train_units, train_lengths, mode, use_cache),
    ) as pool:
        pending: deque = deque()
        it = iter(chunks)
        p = 0
        for chunk in it:
            pending.append(pool.submit(_rows_task, chunk))
            if len(pending) >= 2 * workers:
                break
        while pending:
            for row in pending.popleft().result():
                yield checked(row, p)
                p += 1
            nxt = next(it, None)
            if nxt is not None:
                pending.append(pool.submit(_rows_task, nxt))


def distance_matrix(comp: Compressor, test: Sequence[SymbolicEmbedding],
                    train: Sequence[SymbolicEmbedding], mode: str = "multiscale",
                    workers: int | None = 1, cache: LengthCache | None = None,
                    use_cache: bool = True) -> DistanceMatrix:
    rows = list(iter_distance_rows(comp, test, train, mode, workers, cache, use_cache))
    values = np.vstack(rows)
    return DistanceMatrix(values, tuple(int(e.label) for e in train), mode)


def save_distances(path, values: np.ndarray) -> None:
    """Write ``values`` as: 8-byte magic, uint64 rows, uint64 cols, float64 row-major.

    All integers and floats are little-endian.
    """
    values = np.ascontiguousarray(values, dtype="<f8")
    rows, cols = values.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MATRIX_MAGIC, rows, cols))
        fh.write(values.tobytes(order="C"))


def load_distances(path) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(_HEADER.size)
        if len(head) != _HEADER.size:
            raise ValueError(f"{path}: truncated header")
        magic, rows, cols = _HEADER.unpack(head)
        if magic != MATRIX_MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        data = fh.read()
    if len(data) != rows * cols * 8:
        raise ValueError(f"{path}: expected {rows * cols * 8} data bytes, got {len(data)}")
    return np.frombuffer(data, dtype="<f8").reshape(rows, cols).astype(np.float64)
