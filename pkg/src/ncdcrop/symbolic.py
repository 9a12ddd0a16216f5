"""Equal-width symbolic quantization of reflectivity values.

The range ``[min, max]`` is cut into ``l`` equal intervals and every value is
replaced by the letter of the interval it falls into, using the alphabet
``a..z`` followed by ``A..Z``. Symbols are kept as ASCII codes (``uint8``) so a
symbol grid converts to bytes without copying through ``str``.
"""

from __future__ import annotations

import logging
import string
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset, Pixel

logger = logging.getLogger(__name__)

LETTERS = string.ascii_lowercase + string.ascii_uppercase
MIN_ALPHABET = 2
MAX_ALPHABET = len(LETTERS)


@dataclass(frozen=True)
class Alphabet:
    length: int

    def __post_init__(self):
        if not MIN_ALPHABET <= self.length <= MAX_ALPHABET:
            raise ValueError(
                f"alphabet length must be in [{MIN_ALPHABET}, {MAX_ALPHABET}], got {self.length}"
            )

    @property
    def symbols(self) -> str:
        return LETTERS[: self.length]

    @property
    def codes(self) -> np.ndarray:
        return np.frombuffer(self.symbols.encode("ascii"), dtype=np.uint8)

    def __len__(self) -> int:
        return self.length

    def __getitem__(self, k: int) -> str:
        return self.symbols[k]


@dataclass(frozen=True)
class Breakpoints:
    betas: np.ndarray  # l + 1 values

    @property
    def min(self) -> float:
        return float(self.betas[0])

    @property
    def max(self) -> float:
        return float(self.betas[-1])

    @property
    def length(self) -> int:
        return len(self.betas) - 1

    @property
    def degenerate(self) -> bool:
        return self.betas[0] == self.betas[-1]


@dataclass(frozen=True)
class SymbolicPixel:
    grid: np.ndarray  # (t, c) uint8 ASCII codes
    label: int

    @property
    def t(self) -> int:
        return self.grid.shape[0]

    @property
    def c(self) -> int:
        return self.grid.shape[1]

    def rows(self) -> list[str]:
        return [r.tobytes().decode("ascii") for r in self.grid]


def build_breakpoints(min_value: float, max_value: float, length: int) -> Breakpoints:
    Alphabet(length)
    if min_value > max_value:
        raise ValueError(f"min ({min_value}) exceeds max ({max_value})")
    if min_value == max_value:
        logger.warning(
            "degenerate extrema min == max == %r; every value maps to 'a'", min_value
        )
    step = (max_value - min_value) / length
    betas = min_value + np.arange(length + 1, dtype=np.float64) * step
    betas[-1] = max_value
    betas.setflags(write=False)
    return Breakpoints(betas)


def quantize_indices(values, breakpoints: Breakpoints) -> np.ndarray:
    """0-based interval index of every value, clamped to ``[0, l-1]``.

    Index ``k`` satisfies ``betas[k] <= x < betas[k+1]``; ``x == max`` maps to
    the last interval, and values outside the range clamp to the end symbols.
    """
    x = np.asarray(values, dtype=np.float64)
    l = breakpoints.length
    # searchsorted on the inner breakpoints is the binary search for the interval.
    idx = np.searchsorted(breakpoints.betas[1:-1], x, side="right")
    if breakpoints.degenerate:
        idx = np.zeros_like(idx)
    below = x < breakpoints.betas[0]
    above = x > breakpoints.betas[-1]
    n_out = int(np.count_nonzero(below) + np.count_nonzero(above))
    if n_out:
        logger.warning(
            "%d value(s) outside [%r, %r] clamped to the end symbols",
            n_out, breakpoints.min, breakpoints.max,
        )
    return np.clip(idx, 0, l - 1)


def quantize_value(x: float, breakpoints: Breakpoints, alphabet: Alphabet) -> str:
    _check_lengths(breakpoints, alphabet)
    return alphabet[int(quantize_indices(x, breakpoints))]


def quantize_array(values, breakpoints: Breakpoints, alphabet: Alphabet) -> np.ndarray:
    """Map an array of values to ASCII symbol codes of the same shape."""
    _check_lengths(breakpoints, alphabet)
    return alphabet.codes[quantize_indices(values, breakpoints)]


def symbolize_pixel(pixel: Pixel, breakpoints: Breakpoints, alphabet: Alphabet) -> SymbolicPixel:
    return SymbolicPixel(quantize_array(pixel.values, breakpoints, alphabet), pixel.label)


def symbolize_dataset(dataset: Dataset, breakpoints: Breakpoints, alphabet: Alphabet,
                      indices=None) -> list[SymbolicPixel]:
    if indices is None:
        indices = range(len(dataset))
    indices = np.asarray(list(indices), dtype=np.int64)
    grids = quantize_array(dataset.values[indices], breakpoints, alphabet)
    return [SymbolicPixel(g, int(dataset.labels[i])) for g, i in zip(grids, indices)]


def _check_lengths(breakpoints: Breakpoints, alphabet: Alphabet) -> None:
    if breakpoints.length != alphabet.length:
        raise ValueError(
            f"breakpoints define {breakpoints.length} intervals "
            f"but the alphabet has {alphabet.length} symbols"
        )
