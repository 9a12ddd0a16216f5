"""Pixel time-series datasets: PTS-CSV ingestion, extrema and seeded splits.

A PTS-CSV file looks like::

    # t=2 c=2
    label,v1,v2,v3,v4
    0,0.1,0.2,0.3,0.4

Each row holds an integer label followed by ``t*c`` reals in time-major order,
so the value at timestep ``i`` and channel ``j`` (both 0-based) sits in column
``1 + i*c + j``. The ``# t= c=`` line is optional when a JSON manifest
``{"t": int, "c": int, "classes": {"<id>": "<name>"}}`` is supplied.

All random selection goes through :func:`make_rng`, a numpy ``Generator`` on
the PCG64 bit generator seeded with the integer seed.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

logger = logging.getLogger(__name__)

_DIMS_RE = re.compile(r"^#\s*t\s*=\s*(\d+)\s+c\s*=\s*(\d+)\s*$")

# Guards ceil() against products like 0.7 * 10 == 7.000000000000001.
_CEIL_EPS = 1e-9


class DatasetError(ValueError):
    """Base class for ingestion and sampling errors."""


class ParseError(DatasetError):
    """A row of a PTS-CSV file could not be parsed."""

    def __init__(self, message: str, line: int, row: int | None = None):
        self.line = line
        self.row = row
        where = f"line {line}" if row is None else f"line {line} (data row {row})"
        super().__init__(f"{where}: {message}")


class DimensionError(ParseError):
    """A row does not carry exactly ``t*c`` values, or dims are inconsistent."""


class ValidationError(DatasetError):
    """A value is non-finite or a label is invalid."""


@dataclass(frozen=True)
class Pixel:
    values: np.ndarray  # (t, c)
    label: int

    @property
    def t(self) -> int:
        return self.values.shape[0]

    @property
    def c(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class Dataset:
    """Immutable collection of pixels sharing one ``(t, c)`` shape.

    ``values`` has shape ``(n, t, c)``; ``labels`` has shape ``(n,)``.
    """

    values: np.ndarray
    labels: np.ndarray
    class_names: Mapping[int, str] = field(default_factory=dict)

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64)
        labels = np.array(self.labels, dtype=np.int64).reshape(-1)
        if values.ndim != 3:
            raise DimensionError("values must have shape (n, t, c)", line=0)
        if values.shape[0] != labels.shape[0]:
            raise DatasetError(
                f"{values.shape[0]} pixels but {labels.shape[0]} labels"
            )
        if values.shape[1] < 1 or values.shape[2] < 1:
            raise DimensionError("t and c must both be >= 1", line=0)
        if not np.all(np.isfinite(values)):
            raise ValidationError("dataset contains non-finite values")
        if np.any(labels < 0):
            raise ValidationError("labels must be non-negative integers")
        values.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "class_names", dict(self.class_names))

    @classmethod
    def from_pixels(cls, pixels: Iterable[Pixel], class_names=None) -> "Dataset":
        pixels = list(pixels)
        if not pixels:
            raise DatasetError("no pixels given")
        shapes = {p.values.shape for p in pixels}
        if len(shapes) != 1:
            raise DimensionError(f"pixels have mixed shapes {sorted(shapes)}", line=0)
        return cls(
            np.stack([np.asarray(p.values, dtype=np.float64) for p in pixels]),
            np.array([p.label for p in pixels]),
            class_names or {},
        )

    def __len__(self) -> int:
        return self.values.shape[0]

    def __getitem__(self, i: int) -> Pixel:
        return Pixel(self.values[i], int(self.labels[i]))

    def __iter__(self):
        for i in range(len(self)):
            yield self[i]

    @property
    def t(self) -> int:
        return self.values.shape[1]

    @property
    def c(self) -> int:
        return self.values.shape[2]

    @property
    def classes(self) -> list[int]:
        return sorted(int(x) for x in np.unique(self.labels))

    def class_counts(self) -> dict[int, int]:
        ids, counts = np.unique(self.labels, return_counts=True)
        return {int(i): int(n) for i, n in zip(ids, counts)}

    def subset(self, indices: Sequence[int]) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(self.values[idx], self.labels[idx], self.class_names)

    def filter_small_classes(self, min_size: int) -> "Dataset":
        """Drop every class with fewer than ``min_size`` pixels."""
        counts = self.class_counts()
        small = sorted(k for k, n in counts.items() if n < min_size)
        if not small:
            return self
        logger.warning(
            "dropping %d class(es) with fewer than %d samples: %s",
            len(small), min_size, small,
        )
        keep = np.flatnonzero(~np.isin(self.labels, small))
        if keep.size == 0:
            raise DatasetError(f"every class has fewer than {min_size} samples")
        return self.subset(keep)


@dataclass(frozen=True)
class Split:
    train_indices: tuple[int, ...]
    test_indices: tuple[int, ...]
    seed: int

    def __post_init__(self):
        if set(self.train_indices) & set(self.test_indices):
            raise DatasetError("train and test indices overlap")

    def to_json(self) -> str:
        return json.dumps(
            {"seed": self.seed, "train": list(self.train_indices),
             "test": list(self.test_indices)},
            sort_keys=True,
        )

    @classmethod
    def from_json(cls, text: str) -> "Split":
        obj = json.loads(text)
        return cls(tuple(obj["train"]), tuple(obj["test"]), int(obj.get("seed", -1)))


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _read_manifest(path) -> tuple[int, int, dict[int, str]]:
    with open(path) as fh:
        obj = json.load(fh)
    try:
        t, c = int(obj["t"]), int(obj["c"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetError(f"manifest {path} needs integer 't' and 'c'") from exc
    names = {int(k): str(v) for k, v in (obj.get("classes") or {}).items()}
    return t, c, names


def load_dataset(path, manifest_path=None, min_class_size: int | None = None) -> Dataset:
    """Read a PTS-CSV file (and optional JSON manifest) into a :class:`Dataset`.

    ``min_class_size`` drops classes with fewer pixels than that, when given.
    """
    path = Path(path)
    t = c = None
    class_names: dict[int, str] = {}
    if manifest_path is not None:
        t, c, class_names = _read_manifest(manifest_path)

    labels: list[int] = []
    rows: list[list[float]] = []
    with open(path, newline="") as fh:
        lines = enumerate(fh, start=1)
        header_seen = False
        for lineno, raw in lines:
            text = raw.strip()
            if not text:
                continue
            if text.startswith("#"):
                m = _DIMS_RE.match(text)
                if m and lineno == 1:
                    ht, hc = int(m.group(1)), int(m.group(2))
                    if t is not None and (ht, hc) != (t, c):
                        raise DimensionError(
                            f"header declares t={ht} c={hc} but manifest says t={t} c={c}",
                            line=lineno,
                        )
                    t, c = ht, hc
                continue
            if not header_seen and text.split(",", 1)[0].strip().lower() == "label":
                header_seen = True
                ncols = len(next(csv.reader([text])))
                if t is None:
                    raise DimensionError(
                        "t and c unknown: give a manifest or a '# t=<int> c=<int>' first line",
                        line=lineno,
                    )
                if ncols != 1 + t * c:
                    raise DimensionError(
                        f"header has {ncols - 1} value columns, expected t*c={t * c}",
                        line=lineno,
                    )
                continue
            if t is None:
                raise DimensionError(
                    "t and c unknown: give a manifest or a '# t=<int> c=<int>' first line",
                    line=lineno,
                )
            rowno = len(rows) + 1
            cells = next(csv.reader([text]))
            if len(cells) != 1 + t * c:
                raise DimensionError(
                    f"expected {1 + t * c} columns (label + t*c={t * c}), got {len(cells)}",
                    line=lineno, row=rowno,
                )
            try:
                label = int(cells[0])
            except ValueError:
                raise ParseError(f"label {cells[0]!r} is not an integer", lineno, rowno)
            if label < 0:
                raise ValidationError(f"line {lineno}: negative label {label}")
            try:
                vals = [float(x) for x in cells[1:]]
            except ValueError as exc:
                raise ParseError(str(exc), lineno, rowno)
            if not all(math.isfinite(v) for v in vals):
                raise ValidationError(f"line {lineno} (data row {rowno}): non-finite value")
            labels.append(label)
            rows.append(vals)

    if not rows:
        raise DatasetError(f"{path} contains no data rows")
    values = np.asarray(rows, dtype=np.float64).reshape(len(rows), t, c)
    ds = Dataset(values, np.asarray(labels), class_names)
    if min_class_size:
        ds = ds.filter_small_classes(min_class_size)
    return ds


def save_dataset(dataset: Dataset, path, manifest_path=None) -> None:
    """Write ``dataset`` as PTS-CSV with a ``# t= c=`` first line."""
    t, c = dataset.t, dataset.c
    with open(path, "w", newline="") as fh:
        fh.write(f"# t={t} c={c}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["label"] + [f"v{i}" for i in range(1, t * c + 1)])
        flat = dataset.values.reshape(len(dataset), t * c)
        for label, row in zip(dataset.labels, flat):
            writer.writerow([int(label)] + [repr(float(v)) for v in row])
    if manifest_path is not None:
        with open(manifest_path, "w") as fh:
            json.dump(
                {"t": t, "c": c,
                 "classes": {str(k): v for k, v in sorted(dataset.class_names.items())}},
                fh, indent=2, sort_keys=True,
            )


def global_extrema(dataset: Dataset) -> tuple[float, float]:
    if len(dataset) == 0:
        raise DatasetError("cannot take extrema of an empty dataset")
    return float(dataset.values.min()), float(dataset.values.max())


def _check_fraction(fraction: float, name: str = "fraction") -> None:
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"{name} must lie in the open interval (0, 1), got {fraction}")


def _n_train(count: int, fraction: float) -> int:
    """Per-class train size: ceil, at least 1, leaving >= 1 for test when possible."""
    n = max(1, math.ceil(fraction * count - _CEIL_EPS))
    if count >= 2:
        n = min(n, count - 1)
    return min(n, count)


def _class_indices(labels: np.ndarray, pool=None) -> dict[int, np.ndarray]:
    idx = np.arange(labels.shape[0]) if pool is None else np.asarray(pool, dtype=np.int64)
    return {
        int(k): idx[labels[idx] == k]
        for k in np.unique(labels[idx])
    }


def split_stratified(dataset: Dataset, train_fraction: float, seed: int) -> Split:
    """Seeded per-class split; each class sends ``ceil(fraction*count)`` pixels to train."""
    _check_fraction(train_fraction, "train_fraction")
    rng = make_rng(seed)
    train: list[int] = []
    test: list[int] = []
    for _, members in sorted(_class_indices(dataset.labels).items()):
        perm = rng.permutation(members)
        n = _n_train(len(perm), train_fraction)
        train.extend(int(i) for i in perm[:n])
        test.extend(int(i) for i in perm[n:])
    return Split(tuple(sorted(train)), tuple(sorted(test)), seed)


def sample_few_shot(dataset: Dataset, train_pool: Sequence[int], n: int, seed: int) -> list[int]:
    """Draw ``min(n, available)`` pool indices per class, without replacement."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if len(train_pool) == 0:
        raise DatasetError("train_pool is empty")
    rng = make_rng(seed)
    chosen: list[int] = []
    for label, members in sorted(_class_indices(dataset.labels, train_pool).items()):
        if len(members) < n:
            logger.warning(
                "class %d has only %d samples in the pool; using all of them for %d-shot",
                label, len(members), n,
            )
            chosen.extend(int(i) for i in members)
            continue
        picked = rng.choice(members, size=n, replace=False)
        chosen.extend(int(i) for i in picked)
    return sorted(chosen)


def subsample_protocol(dataset: Dataset, fraction: float, seed: int) -> Split:
    """Sample ``fraction`` of each class, then split that subset 50/50 per class."""
    _check_fraction(fraction)
    rng = make_rng(seed)
    train: list[int] = []
    test: list[int] = []
    for _, members in sorted(_class_indices(dataset.labels).items()):
        count = len(members)
        m = min(count, max(min(2, count), math.ceil(fraction * count - _CEIL_EPS)))
        subset = rng.permutation(members)[:m]
        n = _n_train(m, 0.5)
        train.extend(int(i) for i in subset[:n])
        test.extend(int(i) for i in subset[n:])
    return Split(tuple(sorted(train)), tuple(sorted(test)), seed)
