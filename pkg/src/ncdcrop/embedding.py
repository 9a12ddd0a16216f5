"""Cross-transformation of a symbol grid into channel and time-slice sequences."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .symbolic import SymbolicPixel


@dataclass(frozen=True)
class SymbolicEmbedding:
    """The ``c + t`` component sequences of one symbolic pixel.

    The first ``c`` components are the per-channel series (length ``t``), the
    remaining ``t`` are the per-timestep slices across channels (length ``c``).
    Each component is the raw ASCII bytes of its symbols, no separators.
    """

    components: tuple[bytes, ...]
    t: int
    c: int
    label: int = -1

    def __post_init__(self):
        if len(self.components) != self.c + self.t:
            raise ValueError(
                f"expected c+t={self.c + self.t} components, got {len(self.components)}"
            )

    def flatten(self) -> bytes:
        return flatten(self)

    def to_grid(self) -> np.ndarray:
        """Recover the ``(t, c)`` grid from the channel components."""
        cols = [np.frombuffer(s, dtype=np.uint8) for s in self.components[: self.c]]
        return np.stack(cols, axis=1)

    def to_grid_from_slices(self) -> np.ndarray:
        """Recover the ``(t, c)`` grid from the time-slice components."""
        rows = [np.frombuffer(s, dtype=np.uint8) for s in self.components[self.c:]]
        return np.stack(rows, axis=0)


def cross_transform(sp: SymbolicPixel) -> SymbolicEmbedding:
    grid = np.ascontiguousarray(sp.grid, dtype=np.uint8)
    t, c = grid.shape
    channels = [grid[:, j].tobytes() for j in range(c)]
    slices = [grid[i, :].tobytes() for i in range(t)]
    return SymbolicEmbedding(tuple(channels + slices), t, c, sp.label)


def flatten(se: SymbolicEmbedding) -> bytes:
    return b"".join(se.components)


def embed_all(pixels) -> list[SymbolicEmbedding]:
    return [cross_transform(sp) for sp in pixels]
