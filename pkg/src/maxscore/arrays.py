"""Index grids, keyed latent uniforms, and materialization of separately
exchangeable data arrays.

Every latent uniform is a pure function of ``(seed, pattern, projected index,
channel)``; nothing is ever stored, so evaluation order, parallelism, and grid
growth cannot change already-observed values.
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterator, Sequence

import numpy as np

__all__ = [
    "MultiIndexGrid",
    "PatternKey",
    "LatentStore",
    "Dataset",
    "latent",
    "materialize",
]

_U64 = np.uint64
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)


def _mix64(h: np.ndarray | np.uint64) -> np.ndarray | np.uint64:
    # splitmix64 finalizer; invertible, good avalanche; wrapping is intended
    with np.errstate(over="ignore"):
        h = _U64(h) if np.isscalar(h) else h.astype(_U64, copy=True)
        h ^= h >> _U64(30)
        h *= _U64(0xBF58476D1CE4E5B9)
        h ^= h >> _U64(27)
        h *= _U64(0x94D049BB133111EB)
        h ^= h >> _U64(31)
    return h


def _combine(h, v):
    """Fold one 64-bit field into the running hash."""
    with np.errstate(over="ignore"):
        v64 = _U64(v) + _GOLDEN if np.isscalar(v) else v.astype(_U64) + _GOLDEN
        return _mix64(h ^ v64)


@lru_cache(maxsize=None)
def _channel_id(channel: str) -> int:
    digest = hashlib.blake2b(channel.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def _hash_to_unit(h):
    """Map 64-bit hashes to the open interval (0, 1)."""
    return ((np.asarray(h, dtype=_U64) >> _U64(11)).astype(np.float64) + 0.5) * 2.0**-53


@dataclass(frozen=True)
class MultiIndexGrid:
    """K-dimensional index space with per-dimension sizes."""

    sizes: tuple[int, ...]

    def __post_init__(self):
        if len(self.sizes) < 1:
            raise ValueError("grid needs at least one dimension")
        if any(s < 1 for s in self.sizes):
            raise ValueError(f"all dimension sizes must be >= 1, got {self.sizes}")
        object.__setattr__(self, "sizes", tuple(int(s) for s in self.sizes))

    @property
    def k_dims(self) -> int:
        return len(self.sizes)

    @property
    def n(self) -> int:
        """Smallest dimension size; the rate index of the asymptotics."""
        return min(self.sizes)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.sizes))

    def cells(self) -> Iterator[tuple[int, ...]]:
        """Lexicographic enumeration of all 1-based multi-indices."""
        return itertools.product(*(range(1, s + 1) for s in self.sizes))

    def cell_array(self) -> np.ndarray:
        """All cells as an (n_cells, K) int array in lexicographic order."""
        grids = np.meshgrid(*(np.arange(1, s + 1) for s in self.sizes), indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)


@dataclass(frozen=True)
class PatternKey:
    """Address of one latent uniform: nonzero bit pattern, projected index,
    and a named channel multiplexing several shocks per level."""

    pattern: tuple[int, ...]
    projected_index: tuple[int, ...]
    channel: str

    def __post_init__(self):
        pat = tuple(int(b) for b in self.pattern)
        idx = tuple(int(i) for i in self.projected_index)
        if not any(pat):
            raise ValueError("pattern must have at least one nonzero bit")
        if any(b not in (0, 1) for b in pat):
            raise ValueError(f"pattern must be a 0/1 vector, got {pat}")
        if len(pat) != len(idx):
            raise ValueError("pattern and projected_index length mismatch")
        for b, i in zip(pat, idx):
            if b == 0 and i != 0:
                raise ValueError("projected index must be zero where pattern is zero")
            if b == 1 and i <= 0:
                raise ValueError("projected index must be positive where pattern is one")
        object.__setattr__(self, "pattern", pat)
        object.__setattr__(self, "projected_index", idx)


@dataclass
class LatentStore:
    """Stateless source of uniforms in (0,1), keyed by (seed, PatternKey).

    ``trace`` (when set) receives every key that is evaluated; used by tests to
    verify dissociation and own-index access.
    """

    seed: int
    trace: Callable[[PatternKey], None] | None = field(default=None, repr=False)

    def uniform(self, key: PatternKey) -> float:
        if self.trace is not None:
            self.trace(key)
        h = self._hash_fields(
            _pattern_bits(key.pattern), np.asarray(key.projected_index), key.channel
        )
        return float(_hash_to_unit(h))

    def uniform_array(
        self, pattern: Sequence[int], projected: np.ndarray, channel: str
    ) -> np.ndarray:
        """Vectorized uniforms for many projected indices sharing one pattern.

        ``projected`` is (m, K) with zeros where the pattern is zero.
        """
        projected = np.asarray(projected)
        h = self._hash_fields(_pattern_bits(pattern), projected.T, channel)
        return _hash_to_unit(h)

    def _hash_fields(self, pattern_bits: int, index_cols, channel: str):
        h = _combine(_U64(np.uint64(self.seed & 0xFFFFFFFFFFFFFFFF)), pattern_bits)
        for col in index_cols:
            h = _combine(h, col if np.isscalar(col) else np.asarray(col, dtype=_U64))
        h = _combine(h, _channel_id(channel))
        return h


def _pattern_bits(pattern: Sequence[int]) -> int:
    bits = 0
    for k, b in enumerate(pattern):
        if b:
            bits |= 1 << k
    return bits


def latent(store: LatentStore, key: PatternKey) -> float:
    """Uniform in (0,1) for one key; deterministic and order-independent."""
    return store.uniform(key)


@dataclass
class Dataset:
    """Per-cell binary-choice records over a multi-index grid.

    ``indices`` is (m, K) of 1-based cluster indices, ``y`` in {-1,+1},
    ``x`` is (m, d). Simulated datasets are balanced and lexicographically
    ordered, and carry the LatentStore and generating spec.
    """

    grid: MultiIndexGrid
    indices: np.ndarray
    y: np.ndarray
    x: np.ndarray
    store: LatentStore | None = None
    dgp: "object | None" = None

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64)
        self.y = np.asarray(self.y, dtype=np.int64)
        self.x = np.atleast_2d(np.asarray(self.x, dtype=np.float64))
        if self.indices.shape[0] != self.y.shape[0] or self.y.shape[0] != self.x.shape[0]:
            raise ValueError("indices, y, x must have the same number of records")
        if not np.all(np.isin(self.y, (-1, 1))):
            raise ValueError("y must take values in {-1, +1}")
        if not np.all(np.isfinite(self.x)):
            raise ValueError("x must be finite")

    @property
    def n_records(self) -> int:
        return self.y.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    def is_balanced(self) -> bool:
        return self.n_records == self.grid.n_cells


def materialize(dgp, grid: MultiIndexGrid, seed: int) -> Dataset:
    """Generate one balanced dataset from a DGP spec on the given grid.

    Records are pure functions of latents keyed from each cell's own index
    (AHK construction), in lexicographic cell order; reproduction from
    (dgp, grid, seed) is bit-exact.
    """
    from . import dgp as dgp_mod  # deferred to avoid import cycle

    if dgp.k_dims != grid.k_dims:
        raise ValueError(
            f"dgp expects {dgp.k_dims} clustering dimensions, grid has {grid.k_dims}"
        )
    store = LatentStore(seed=seed)
    cells = grid.cell_array()
    uniforms = {}
    for pattern, channels in dgp_mod.channel_map(dgp).items():
        projected = cells * np.asarray(pattern)
        for ch in channels:
            uniforms[(pattern, ch)] = store.uniform_array(pattern, projected, ch)
    y, x = dgp_mod.tau_from_uniforms(dgp, uniforms)
    return Dataset(grid=grid, indices=cells, y=y, x=x, store=store, dgp=dgp)
