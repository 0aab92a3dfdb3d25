"""Built-in binary-choice data-generating processes on two-way grids.

Three continuous designs share the covariate construction
``x_l = z(row) + z(col) + z(cell)`` and differ in the error:

* ``mult-scale``: heteroskedastic error with a row/col scale factor; the
  conditional median of the error is zero given any shock subset, which makes
  the first-order influence terms vanish (degenerate Gaussian limit).
* ``add-shock``: additive row + col + cell error, independent of the
  covariates; row and column shocks shift the conditional error median, which
  produces a nondegenerate Gaussian limit at the parametric rate.
* ``iid``: all shocks cell-level, the classical cube-root regime.

``discrete-test`` emits the sum of three Bernoulli(1/2) bits and exists so the
Hoeffding projections can be computed in closed form.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.special import ndtri

__all__ = ["DgpSpec", "Observation", "VARIANTS", "channel_map", "tau_from_uniforms", "evaluate_tau"]

VARIANTS = ("mult-scale", "add-shock", "iid", "discrete-test")

_ROW = (1, 0)
_COL = (0, 1)
_CELL = (1, 1)


def _default_beta0() -> np.ndarray:
    return np.array([1.0, 1.0]) / np.sqrt(2.0)


@dataclass(frozen=True)
class DgpSpec:
    variant: str
    d: int = 2
    beta0: np.ndarray = field(default_factory=_default_beta0)
    k_dims: int = 2

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.k_dims != 2:
            raise ValueError("only K = 2 designs are shipped")
        beta0 = np.asarray(self.beta0, dtype=np.float64)
        if self.variant != "discrete-test":
            if beta0.shape != (self.d,):
                raise ValueError(f"beta0 must have shape ({self.d},)")
            if abs(np.linalg.norm(beta0) - 1.0) > 1e-10:
                raise ValueError("beta0 must be a unit vector")
        object.__setattr__(self, "beta0", beta0)


@dataclass(frozen=True)
class Observation:
    y: int
    x: np.ndarray

    def __post_init__(self):
        if self.y * self.y != 1:
            raise ValueError("y must be -1 or +1")
        x = np.asarray(self.x, dtype=np.float64)
        if not np.all(np.isfinite(x)):
            raise ValueError("x must be finite")
        object.__setattr__(self, "x", x)


def _x_channels(d: int) -> tuple[str, ...]:
    return tuple(f"x{l}" for l in range(1, d + 1))


def channel_map(spec: DgpSpec) -> Mapping[tuple[int, ...], tuple[str, ...]]:
    """Which (pattern, channel) uniforms each variant reads."""
    xs = _x_channels(spec.d)
    if spec.variant == "mult-scale":
        return {_ROW: xs + ("scale",), _COL: xs + ("scale",), _CELL: xs + ("eps",)}
    if spec.variant == "add-shock":
        return {_ROW: xs + ("eps",), _COL: xs + ("eps",), _CELL: xs + ("eps",)}
    if spec.variant == "iid":
        return {_CELL: xs + ("eps",)}
    return {_ROW: ("bit",), _COL: ("bit",), _CELL: ("bit",)}


def tau_from_uniforms(spec: DgpSpec, u: Mapping[tuple, np.ndarray]):
    """Map latent uniforms to (y, x). Accepts scalars or aligned arrays.

    Keys of ``u`` are ``(pattern, channel)`` pairs as listed by
    :func:`channel_map`.
    """
    if spec.variant == "discrete-test":
        bits = [np.asarray(u[(p, "bit")]) < 0.5 for p in (_ROW, _COL, _CELL)]
        v = sum(b.astype(np.float64) for b in bits)
        y = np.ones_like(v, dtype=np.int64)
        return y, np.stack([v], axis=-1)

    xs = _x_channels(spec.d)
    if spec.variant == "iid":
        x = np.stack([ndtri(np.asarray(u[(_CELL, ch)])) for ch in xs], axis=-1)
        eps = ndtri(np.asarray(u[(_CELL, "eps")]))
    else:
        x = np.stack(
            [
                ndtri(np.asarray(u[(_ROW, ch)]))
                + ndtri(np.asarray(u[(_COL, ch)]))
                + ndtri(np.asarray(u[(_CELL, ch)]))
                for ch in xs
            ],
            axis=-1,
        )
        if spec.variant == "mult-scale":
            z_r = ndtri(np.asarray(u[(_ROW, "scale")]))
            z_c = ndtri(np.asarray(u[(_COL, "scale")]))
            scale = 1.0 + 0.5 * z_r**2 + 0.5 * z_c**2
            eps = scale * ndtri(np.asarray(u[(_CELL, "eps")]))
        else:
            eps = (
                ndtri(np.asarray(u[(_ROW, "eps")]))
                + ndtri(np.asarray(u[(_COL, "eps")]))
                + ndtri(np.asarray(u[(_CELL, "eps")]))
            )
    index = x @ spec.beta0 - eps
    y = np.where(index >= 0.0, 1, -1).astype(np.int64)
    return y, x


def evaluate_tau(spec: DgpSpec, accessor) -> Observation:
    """Evaluate the DGP at one cell given a latent accessor.

    ``accessor(pattern, channel)`` must return the uniform for that key; the
    variant reads only the channels listed by :func:`channel_map`.
    """
    u = {
        (pattern, ch): accessor(pattern, ch)
        for pattern, channels in channel_map(spec).items()
        for ch in channels
    }
    y, x = tau_from_uniforms(spec, u)
    return Observation(y=int(y), x=np.asarray(x, dtype=np.float64).reshape(-1))


def cell_accessor(store, cell: tuple[int, ...]):
    """Accessor bound to one cell of a grid: projects the cell's own index."""
    from .arrays import PatternKey

    def access(pattern, channel):
        projected = tuple(i * b for i, b in zip(cell, pattern))
        return store.uniform(PatternKey(pattern, projected, channel))

    return access
