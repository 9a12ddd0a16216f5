"""Lossless compression backends used as the length function of NCD.

``compressed_length`` counts the whole container (gzip header and trailer,
bzip2 stream header, zstd frame header), not just the entropy-coded payload.
"""

from __future__ import annotations

import bz2
import gzip
import hashlib
import threading
import zlib
from dataclasses import dataclass

import zstandard

# gzip container = 10-byte header (mtime zeroed, no name) + raw deflate + 8-byte
# CRC32/ISIZE trailer; zlib container = 2-byte header + raw deflate + 4-byte Adler32.
GZIP_OVERHEAD = 18
_GZIP_MINUS_ZLIB = 12

BACKENDS = ("gzip", "bz2", "zstd")
DEFAULT_LEVELS = {"gzip": 9, "bz2": 9, "zstd": 3}
_LEVEL_RANGES = {"gzip": (0, 9), "bz2": (1, 9), "zstd": (-7, 22)}

_local = threading.local()


def _zstd_compressor(level: int) -> zstandard.ZstdCompressor:
    # ZstdCompressor instances must not be shared between threads.
    cache = getattr(_local, "zstd", None)
    if cache is None:
        cache = _local.zstd = {}
    comp = cache.get(level)
    if comp is None:
        comp = cache[level] = zstandard.ZstdCompressor(
            level=level, write_checksum=False, write_content_size=True
        )
    return comp


@dataclass(frozen=True)
class Compressor:
    """A backend id plus compression level; stateless and safe to share."""

    backend: str = "gzip"
    level: int | None = None

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ValueError(
                f"unknown compressor {self.backend!r}; supported: {', '.join(BACKENDS)}"
            )
        if self.level is None:
            object.__setattr__(self, "level", DEFAULT_LEVELS[self.backend])
        lo, hi = _LEVEL_RANGES[self.backend]
        if not lo <= self.level <= hi:
            raise ValueError(f"{self.backend} level must be in [{lo}, {hi}], got {self.level}")

    @property
    def config(self) -> str:
        return f"{self.backend}:{self.level}"

    def describe(self) -> dict:
        info = {"backend": self.backend, "level": self.level}
        if self.backend == "gzip":
            info["library"] = f"zlib {zlib.ZLIB_RUNTIME_VERSION}"
        elif self.backend == "zstd":
            info["library"] = f"zstandard {zstandard.__version__} (libzstd {zstandard.ZSTD_VERSION})"
        else:
            info["library"] = "bz2 (libbzip2)"
        return info

    def compress(self, data: bytes) -> bytes:
        if self.backend == "gzip":
            return gzip.compress(data, compresslevel=self.level, mtime=0)
        if self.backend == "bz2":
            return bz2.compress(data, self.level)
        return _zstd_compressor(self.level).compress(data)

    def decompress(self, blob: bytes) -> bytes:
        if self.backend == "gzip":
            return gzip.decompress(blob)
        if self.backend == "bz2":
            return bz2.decompress(blob)
        return zstandard.ZstdDecompressor().decompress(blob)

    def length(self, data: bytes) -> int:
        """Compressed size of ``data`` in bytes, uncached."""
        if self.backend == "gzip":
            # Same deflate stream as gzip.compress, without the Python-level framing.
            return len(zlib.compress(data, self.level)) + _GZIP_MINUS_ZLIB
        return len(self.compress(data))


class LengthCache:
    """Memo of compressed lengths keyed by compressor config and content hash.

    Reads take no lock; writes are serialized, and an entry is visible only
    once fully stored.
    """

    def __init__(self):
        self._data: dict[tuple[str, bytes], int] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    @staticmethod
    def key(comp: Compressor, seq: bytes) -> tuple[str, bytes]:
        return comp.config, hashlib.blake2b(seq, digest_size=16).digest()

    def get(self, comp: Compressor, seq: bytes) -> int | None:
        return self._data.get(self.key(comp, seq))

    def put(self, comp: Compressor, seq: bytes, length: int) -> None:
        k = self.key(comp, seq)
        with self._lock:
            self._data.setdefault(k, length)

    def __len__(self) -> int:
        return len(self._data)

    def clear(self) -> None:
        with self._lock:
            self._data.clear()


def _as_bytes(seq) -> bytes:
    if isinstance(seq, str):
        return seq.encode("ascii")
    return bytes(seq)


def compressed_length(comp: Compressor, seq, cache: LengthCache | None = None) -> int:
    data = _as_bytes(seq)
    if not data:
        raise ValueError("cannot measure the compressed length of an empty sequence")
    if cache is None:
        return comp.length(data)
    n = cache.get(comp, data)
    if n is None:
        cache.misses += 1
        n = comp.length(data)
        cache.put(comp, data, n)
    else:
        cache.hits += 1
    return n


def joint_compressed_length(comp: Compressor, m, n, cache: LengthCache | None = None) -> int:
    """Compressed length of ``m`` followed directly by ``n``."""
    m, n = _as_bytes(m), _as_bytes(n)
    if not m or not n:
        raise ValueError("joint compression needs two non-empty sequences")
    return compressed_length(comp, m + n, cache)
