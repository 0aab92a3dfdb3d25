"""Projections of array functionals onto latent-shock patterns.

For a centered functional ``f`` of one cell, the pattern-``e`` projection is
the conditional expectation given the latents indexed by sub-patterns of
``e``, recursively orthogonalized against all strict sub-patterns. Sample
aggregates of the projections telescope to the centered sample mean.

On the discrete test DGP every conditional expectation is a finite sum over
unfixed Bernoulli(1/2) bits, so the decomposition is exact; on the continuous
DGPs projections are estimated by Monte Carlo over the unfixed channels.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .arrays import Dataset, LatentStore, PatternKey
from . import dgp as dgp_mod

__all__ = [
    "ProjectionTable",
    "patterns",
    "project_exact",
    "expectation_exact",
    "project_mc",
    "expectation_mc",
    "decompose",
]

_BIT_PATTERNS = ((1, 0), (0, 1), (1, 1))


def patterns(k_dims: int = 2) -> list[tuple[int, ...]]:
    """All nonzero patterns, ordered by support size then lexicographically."""
    out = []
    for bits in range(1, 2**k_dims):
        p = tuple((bits >> k) & 1 for k in range(k_dims))
        out.append(p)
    out.sort(key=lambda p: (sum(p), p))
    return out


def _sub_patterns(e: tuple[int, ...]) -> list[tuple[int, ...]]:
    """Nonzero strict sub-patterns of e, smallest support first."""
    subs = [p for p in patterns(len(e)) if p != e and all(a <= b for a, b in zip(p, e))]
    return subs


# ---------------------------------------------------------------------------
# exact projections on the discrete test DGP (three Bernoulli(1/2) bits)

def expectation_exact(f) -> float:
    """Population mean of f(b_row, b_col, b_cell) under independent fair bits."""
    vals = [f(br, bc, bl) for br in (0, 1) for bc in (0, 1) for bl in (0, 1)]
    return float(np.mean(vals))


def _cond_expectation(f, fixed: dict) -> float:
    """Average of f over the bits not present in ``fixed``."""
    def get(pattern, free_iter):
        return fixed[pattern] if pattern in fixed else next(free_iter)

    free = [p for p in _BIT_PATTERNS if p not in fixed]
    total = 0.0
    for combo in np.ndindex(*(2,) * len(free)):
        assign = dict(fixed)
        assign.update(dict(zip(free, combo)))
        total += f(assign[(1, 0)], assign[(0, 1)], assign[(1, 1)])
    return total / 2 ** len(free)


def project_exact(f, e: tuple[int, ...], bits: dict) -> float:
    """Closed-form pattern projection of a centered bit functional.

    ``bits`` maps each nonzero pattern <= e to its fixed bit value; f is a
    scalar function of (b_row, b_col, b_cell) and is centered internally.
    """
    e = tuple(int(b) for b in e)
    if e not in _BIT_PATTERNS:
        raise ValueError(f"unsupported pattern {e} for the discrete test DGP")
    ef = expectation_exact(f)
    return _project_exact_centered(lambda *b: f(*b) - ef, e, bits)


def _project_exact_centered(fc, e, bits) -> float:
    fixed = {p: bits[p] for p in _BIT_PATTERNS if p != e and all(a <= b for a, b in zip(p, e))}
    if e in bits:
        fixed[e] = bits[e]
    elif e == (1, 1):
        raise ValueError("full-pattern projection needs all bits fixed")
    else:
        fixed[e] = bits[e]  # KeyError surfaces missing bit
    value = _cond_expectation(fc, fixed)
    for sub in _sub_patterns(e):
        value -= _project_exact_centered(fc, sub, bits)
    return value


# ---------------------------------------------------------------------------
# Monte Carlo projections for the continuous DGPs

def _draw_uniforms(spec, fixed, draws: int, seed: int):
    """Uniforms for every channel the DGP reads: fixed ones broadcast, the
    rest drawn with per-draw keyed seeds."""
    store = LatentStore(seed=seed)
    u = {}
    t = np.arange(1, draws + 1)
    for pattern, channels in dgp_mod.channel_map(spec).items():
        projected = np.stack([t * b for b in pattern], axis=1)
        for ch in channels:
            key = (pattern, ch)
            if key in fixed:
                u[key] = np.full(draws, float(fixed[key]))
            else:
                u[key] = store.uniform_array(pattern, projected, ch)
    return u


def expectation_mc(spec, f, draws: int = 10**6, seed: int = 0) -> float:
    """High-draw MC estimate of the population mean Ef for centering."""
    u = _draw_uniforms(spec, {}, draws, _mix_seed(seed, 0x45464D43))
    y, x = dgp_mod.tau_from_uniforms(spec, u)
    return float(np.mean(f(y, x)))


def _mix_seed(seed: int, salt: int) -> int:
    from .arrays import _combine  # reuse the keyed hash

    return int(_combine(np.uint64(seed & 0xFFFFFFFFFFFFFFFF), salt))


def _conditional_mean_mc(spec, f, e, fixed, draws, seed):
    """MC estimate of E[f | latents of patterns <= e] with standard error."""
    cond = {
        key: val
        for key, val in fixed.items()
        if all(a <= b for a, b in zip(key[0], e))
    }
    all_fixed = all(
        (pattern, ch) in cond
        for pattern, channels in dgp_mod.channel_map(spec).items()
        for ch in channels
    )
    if all_fixed:
        u = {k: np.asarray([v]) for k, v in cond.items()}
        y, x = dgp_mod.tau_from_uniforms(spec, u)
        return float(np.asarray(f(y, x))[0]), 0.0
    u = _draw_uniforms(spec, cond, draws, seed)
    y, x = dgp_mod.tau_from_uniforms(spec, u)
    vals = np.asarray(f(y, x), dtype=np.float64)
    se = float(np.std(vals, ddof=1) / np.sqrt(draws)) if draws > 1 else float("inf")
    return float(np.mean(vals)), se


def project_mc(spec, f, e, fixed, draws: int = 1000, seed: int = 0, ef: float | None = None):
    """Pattern projection of a centered observation functional by MC.

    ``f(y, x)`` must be vectorized over records; ``fixed`` maps
    ``(pattern, channel)`` to the conditioning uniforms for all patterns <= e.
    Returns (value, standard_error).
    """
    if draws < 100:
        raise ValueError("need at least 100 MC draws")
    if spec.variant == "discrete-test":
        raise ValueError("use project_exact for the discrete test DGP")
    e = tuple(int(b) for b in e)
    if ef is None:
        ef = expectation_mc(spec, f)
    fc = lambda y, x: np.asarray(f(y, x), dtype=np.float64) - ef
    value, se = _conditional_mean_mc(spec, fc, e, fixed, draws, _mix_seed(seed, _pat_salt(e)))
    var = se**2
    for sub in _sub_patterns(e):
        v_sub, se_sub = project_mc(spec, f, sub, fixed, draws, seed, ef=ef)
        value -= v_sub
        var += se_sub**2
    return value, float(np.sqrt(var))


def _pat_salt(e) -> int:
    return 0x50524F00 + sum(b << k for k, b in enumerate(e))


# ---------------------------------------------------------------------------
# sample aggregates

@dataclass
class ProjectionTable:
    """Aggregate projections per pattern, with the centering constants and
    the decomposition-identity residual."""

    mode: str
    h: dict = field(default_factory=dict)
    se: dict = field(default_factory=dict)
    sample_mean: float = 0.0
    population_mean: float = 0.0
    residual: float = 0.0


def _bits_from_store(store: LatentStore, grid):
    n1, n2 = grid.sizes
    rows = np.arange(1, n1 + 1)
    cols = np.arange(1, n2 + 1)
    b_r = store.uniform_array((1, 0), np.stack([rows, 0 * rows], axis=1), "bit") < 0.5
    b_c = store.uniform_array((0, 1), np.stack([0 * cols, cols], axis=1), "bit") < 0.5
    cells = grid.cell_array()
    b_cell = store.uniform_array((1, 1), cells, "bit") < 0.5
    return b_r.astype(int), b_c.astype(int), b_cell.astype(int).reshape(n1, n2)


def decompose(data: Dataset, spec, f, mode: str = "exact",
              draws: int = 1000, seed: int = 0) -> ProjectionTable:
    """Full Hoeffding-type table of aggregates H^e(f) for a dataset.

    Exact mode (discrete test DGP only): ``f(b_row, b_col, b_cell)``; the
    identity ``E_N f - Ef = sum_e H^e`` holds to rounding. MC mode: ``f(y, x)``
    vectorized; aggregates carry MC standard errors.
    """
    if data.store is None:
        raise ValueError("dataset must carry its latent store")
    if mode == "exact":
        if spec.variant != "discrete-test":
            raise ValueError("exact projections require the discrete test DGP")
        return _decompose_exact(data, f)
    if mode != "mc":
        raise ValueError(f"unknown mode {mode!r}")
    if spec.variant == "discrete-test":
        raise ValueError("mc mode applies to the continuous DGPs")
    return _decompose_mc(data, spec, f, draws, seed)


def _decompose_exact(data: Dataset, f) -> ProjectionTable:
    b_r, b_c, b_cell = _bits_from_store(data.store, data.grid)
    n1, n2 = data.grid.sizes
    ef = expectation_exact(f)
    fc = lambda *b: f(*b) - ef
    sample = float(
        np.mean([f(b_r[i], b_c[j], b_cell[i, j]) for i in range(n1) for j in range(n2)])
    )
    h = {}
    h[(1, 0)] = float(np.mean([
        _project_exact_centered(fc, (1, 0), {(1, 0): b_r[i]}) for i in range(n1)
    ]))
    h[(0, 1)] = float(np.mean([
        _project_exact_centered(fc, (0, 1), {(0, 1): b_c[j]}) for j in range(n2)
    ]))
    h[(1, 1)] = float(np.mean([
        _project_exact_centered(
            fc, (1, 1),
            {(1, 0): b_r[i], (0, 1): b_c[j], (1, 1): b_cell[i, j]},
        )
        for i in range(n1)
        for j in range(n2)
    ]))
    residual = sample - ef - sum(h.values())
    return ProjectionTable(
        mode="exact", h=h, se={p: 0.0 for p in h}, sample_mean=sample,
        population_mean=ef, residual=residual,
    )


def _row_latents(store, spec, pattern, index):
    projected = tuple(i * b for i, b in zip(index, pattern))
    return {
        (pattern, ch): store.uniform(PatternKey(pattern, projected, ch))
        for ch in dgp_mod.channel_map(spec)[pattern]
    }


def _decompose_mc(data: Dataset, spec, f, draws: int, seed: int) -> ProjectionTable:
    store = data.store
    n1, n2 = data.grid.sizes
    ef = expectation_mc(spec, f, seed=seed)
    sample = float(np.mean(f(data.y, data.x)))
    h, se = {}, {}
    for e in patterns(2):
        vals, variances = [], []
        members = _pattern_indices(e, n1, n2)
        for idx in members:
            fixed = {}
            for sub in [p for p in patterns(2) if all(a <= b for a, b in zip(p, e))]:
                fixed.update(_row_latents(store, spec, sub, idx))
            v, s = project_mc(spec, f, e, fixed, draws=draws,
                              seed=_mix_seed(seed, hash(idx) & 0xFFFFFFFF), ef=ef)
            vals.append(v)
            variances.append(s**2)
        h[e] = float(np.mean(vals))
        se[e] = float(np.sqrt(np.sum(variances)) / len(vals))
    residual = sample - ef - sum(h.values())
    return ProjectionTable(mode="mc", h=h, se=se, sample_mean=sample,
                           population_mean=ef, residual=residual)


def _pattern_indices(e, n1, n2):
    if e == (1, 0):
        return [(i, 0) for i in range(1, n1 + 1)]
    if e == (0, 1):
        return [(0, j) for j in range(1, n2 + 1)]
    return [(i, j) for i in range(1, n1 + 1) for j in range(1, n2 + 1)]
