"""Monte-Carlo null tables for the two-sample statistic under standard normal data.

A table is the sorted sample of B realizations of the statistic computed
on standard normal groups of the target sizes. Replicates are generated in
fixed-size chunks (``CHUNK_SIZE`` replicates each); chunk ``c`` draws from
the stream id derived from ``(stream_tag, n1, n2, d, c)``, so the table
content depends only on (n1, n2, d, b, master_seed, stream_tag) and not on
the worker-thread count. Changing ``CHUNK_SIZE`` would change tables; it is
part of the reproducibility contract.
"""

from __future__ import annotations

import json
import math
import os
import struct
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvalidInput, SingularScale, TailTooThin
from .hotelling import t2_batch
from .randdist import SeededStream, stream_id_for

__all__ = [
    "NullTable",
    "build_null_table",
    "null_sf",
    "upper_quantile",
    "y_alpha",
    "g_threshold",
    "save_table",
    "load_table",
    "table_cache_path",
    "get_or_build",
]

CHUNK_SIZE = 8192
DEFAULT_B = 2_000_000

# Require at least ~100 expected exceedances beyond the target tail point so
# the calibrated threshold has relative standard error below ~10%.
MIN_EXPECTED_EXCEEDANCES = 100

_MAGIC = b"T2NT"
_VERSION = 1
_HEADER = struct.Struct("<4sHIIHQQ")


@dataclass(frozen=True)
class NullTable:
    """Sorted Monte-Carlo draws of the null statistic for one (n1, n2, d)."""

    n1: int
    n2: int
    d: int
    b: int
    draws: np.ndarray
    master_seed: int
    stream_tag: str = "null"

    def __post_init__(self):
        draws = np.asarray(self.draws, dtype=np.float64)
        if draws.ndim != 1 or draws.shape[0] != self.b:
            raise InvalidInput(f"draws must be a 1-d array of length b={self.b}")
        object.__setattr__(self, "draws", draws)


def _validate_sizes(n1: int, n2: int, d: int) -> None:
    if n1 < 2 or n2 < 2 or d < 1 or n1 + n2 < d + 2:
        raise InvalidInput(
            f"need n1, n2 >= 2, d >= 1, and n1 + n2 >= d + 2; got ({n1}, {n2}, {d})"
        )


def _chunk_draws(n1, n2, d, size, master_seed, stream_tag, chunk_index):
    stream = SeededStream(
        master_seed, stream_id_for("nulltable", stream_tag, n1, n2, d, chunk_index)
    )
    data = stream.generator().standard_normal((size, n1 + n2, d))
    t2 = t2_batch(data[:, :n1, :], data[:, n1:, :])
    if np.isnan(t2).any():
        bad = int(np.flatnonzero(np.isnan(t2))[0])
        raise SingularScale(
            f"replicate {chunk_index * CHUNK_SIZE + bad} produced a singular pooled scale"
        )
    return t2


def build_null_table(
    n1: int,
    n2: int,
    d: int,
    b: int = DEFAULT_B,
    master_seed: int = 0,
    stream_tag: str = "null",
    threads: int = 1,
) -> NullTable:
    """Simulate b replicates of the null statistic and return the sorted table."""
    _validate_sizes(n1, n2, d)
    if b < 1_000:
        raise InvalidInput(f"replicate count b must be at least 1000, got {b}")
    if threads < 1:
        raise InvalidInput("threads must be >= 1")
    nchunks = (b + CHUNK_SIZE - 1) // CHUNK_SIZE
    sizes = [min(CHUNK_SIZE, b - c * CHUNK_SIZE) for c in range(nchunks)]

    def run(chunk_index: int) -> np.ndarray:
        return _chunk_draws(
            n1, n2, d, sizes[chunk_index], master_seed, stream_tag, chunk_index
        )

    if threads == 1:
        parts = [run(c) for c in range(nchunks)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, range(nchunks)))
    draws = np.concatenate(parts)
    draws.sort()
    return NullTable(n1, n2, d, b, draws, master_seed, stream_tag)


def null_sf(table: NullTable, y: float) -> float:
    """Empirical tail (# draws >= y) / b; a nonincreasing step function of y."""
    idx = int(np.searchsorted(table.draws, y, side="left"))
    return (table.b - idx) / table.b


def null_sf_many(table: NullTable, ys) -> np.ndarray:
    idx = np.searchsorted(table.draws, np.asarray(ys, dtype=np.float64), side="left")
    return (table.b - idx) / table.b


def upper_quantile(table: NullTable, p: float) -> float:
    """The k-th largest draw with k = ceil(p * b); requires 1/b <= p <= 1.

    This convention guarantees null_sf(result) >= p, erring on the
    conservative side (realized size at most nominal).
    """
    p = float(p)
    if not 0.0 < p <= 1.0 or math.isnan(p):
        raise DomainError(f"quantile level must be in (0, 1], got {p!r}")
    if p < 1.0 / table.b:
        raise TailTooThin(
            f"tail level p={p:.3e} is below 1/b={1.0 / table.b:.3e}; rebuild with larger b"
        )
    k = int(math.ceil(p * table.b - 1e-9))
    k = min(max(k, 1), table.b)
    return float(table.draws[table.b - k])


def y_alpha(table: NullTable, m: int, alpha: float) -> float:
    """Calibrated threshold: the upper p* quantile with p* = -log(1 - alpha) / m.

    With this threshold, exp(-m * null_sf(y)) >= 1 - alpha up to one
    order-statistic step, so the max of m independent statistics is
    rejected at level (at most) alpha.
    """
    if not isinstance(m, (int, np.integer)) or m < 1:
        raise InvalidInput(f"m must be a positive integer, got {m!r}")
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must be in (0, 1), got {alpha!r}")
    floor = MIN_EXPECTED_EXCEEDANCES * m / alpha
    if table.b < floor:
        raise TailTooThin(
            f"table b={table.b} cannot calibrate m={m} at alpha={alpha}; "
            f"need b >= {int(math.ceil(floor))}"
        )
    p_star = -math.log1p(-alpha) / m
    return upper_quantile(table, p_star)


def g_threshold(m: int, alpha: float) -> float:
    """Per-block tail-probability threshold 1 + log(1 - alpha) / m (always < 1)."""
    if not isinstance(m, (int, np.integer)) or m < 1:
        raise InvalidInput(f"m must be a positive integer, got {m!r}")
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must be in (0, 1), got {alpha!r}")
    return 1.0 + math.log1p(-alpha) / m


# ---------------------------------------------------------------------------
# disk cache
#
# Binary layout (little endian): magic "T2NT", version u16, n1 u32, n2 u32,
# d u16, b u64, master_seed u64, then b sorted float64 draws. A JSON sidecar
# duplicates the header for human inspection.
# ---------------------------------------------------------------------------


def table_cache_path(cache_dir: str, n1: int, n2: int, d: int, b: int, master_seed: int) -> str:
    name = f"t2nt_n{n1}x{n2}_d{d}_b{b}_s{master_seed}.bin"
    return os.path.join(cache_dir, name)


def save_table(table: NullTable, path: str) -> None:
    """Write the binary table and its JSON sidecar via temp-file-then-rename."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    header = _HEADER.pack(
        _MAGIC, _VERSION, table.n1, table.n2, table.d, table.b, table.master_seed
    )
    payload = np.ascontiguousarray(table.draws, dtype="<f8").tobytes()
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(header)
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    sidecar = {
        "magic": _MAGIC.decode("ascii"),
        "version": _VERSION,
        "n1": table.n1,
        "n2": table.n2,
        "d": table.d,
        "b": table.b,
        "master_seed": table.master_seed,
        "stream_tag": table.stream_tag,
        "min": float(table.draws[0]),
        "median": float(table.draws[table.b // 2]),
        "max": float(table.draws[-1]),
    }
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            json.dump(sidecar, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path + ".json")
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_table(path: str, stream_tag: str = "null") -> NullTable:
    with open(path, "rb") as fh:
        raw = fh.read(_HEADER.size)
        if len(raw) != _HEADER.size:
            raise InvalidInput(f"{path}: truncated table header")
        magic, version, n1, n2, d, b, master_seed = _HEADER.unpack(raw)
        if magic != _MAGIC:
            raise InvalidInput(f"{path}: not a null-table file (bad magic {magic!r})")
        if version != _VERSION:
            raise InvalidInput(f"{path}: unsupported table version {version}")
        draws = np.frombuffer(fh.read(), dtype="<f8")
    if draws.shape[0] != b:
        raise InvalidInput(f"{path}: expected {b} draws, found {draws.shape[0]}")
    return NullTable(n1, n2, d, b, draws.astype(np.float64), master_seed, stream_tag)


def get_or_build(
    n1: int,
    n2: int,
    d: int,
    b: int,
    master_seed: int,
    cache_dir: str | None,
    threads: int = 1,
    on_build=None,
) -> NullTable:
    """Load the table from the cache when present, otherwise build and persist it.

    ``on_build`` is called with a human-readable message before a build starts.
    """
    if cache_dir:
        path = table_cache_path(cache_dir, n1, n2, d, b, master_seed)
        if os.path.exists(path):
            return load_table(path)
    if on_build is not None:
        cost = b * (n1 + n2) * d
        on_build(
            f"building null table (n1={n1}, n2={n2}, d={d}, b={b}); "
            f"~{cost / 1e6:.0f}M normal draws"
        )
    table = build_null_table(n1, n2, d, b, master_seed, threads=threads)
    if cache_dir:
        save_table(table, table_cache_path(cache_dir, n1, n2, d, b, master_seed))
    return table
