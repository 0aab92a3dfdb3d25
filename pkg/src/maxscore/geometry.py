"""Unit-sphere parametrisation around a reference direction.

The half-sphere ``{b : b'b0 >= 0}`` is charted by the unit ball of R^{d-1}
via ``beta(theta) = B0 theta + sqrt(1 - |theta|^2) b0``, where the columns of
``B0`` span the orthogonal complement of ``b0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "Direction",
    "ComplementBasis",
    "basis_complement",
    "beta_of_theta",
    "theta_of_beta",
    "reflect_to_hemisphere",
]

_UNIT_TOL = 1e-12


@dataclass(frozen=True)
class Direction:
    b: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.b, dtype=np.float64).reshape(-1)
        nrm = np.linalg.norm(b)
        if nrm == 0.0:
            raise ValueError("zero vector is not a direction")
        if abs(nrm - 1.0) > 1e-9:
            raise ValueError(f"direction must be unit length, |b| = {nrm!r}")
        object.__setattr__(self, "b", b)

    @property
    def d(self) -> int:
        return self.b.shape[0]


@dataclass(frozen=True)
class ComplementBasis:
    """Reference direction b0 and a d x (d-1) orthonormal complement B0."""

    b0: Direction
    B0: np.ndarray

    def __post_init__(self):
        B0 = np.asarray(self.B0, dtype=np.float64)
        d = self.b0.d
        if B0.shape != (d, d - 1):
            raise ValueError(f"B0 must be {d} x {d - 1}")
        if np.max(np.abs(B0.T @ B0 - np.eye(d - 1))) > 1e-10:
            raise ValueError("B0 columns must be orthonormal")
        if np.max(np.abs(B0.T @ self.b0.b)) > 1e-10:
            raise ValueError("B0 must be orthogonal to b0")
        object.__setattr__(self, "B0", B0)


def basis_complement(b0: Direction | np.ndarray) -> ComplementBasis:
    """Deterministic orthonormal complement of a unit vector.

    Built from the Householder reflector mapping b0 to e1 (columns 2..d of its
    transpose); falls back to the canonical coordinate complement when
    b0 = +/- e1.
    """
    if not isinstance(b0, Direction):
        b0 = Direction(np.asarray(b0))
    d = b0.d
    if d < 2:
        raise ValueError("need d >= 2 for a nontrivial complement")
    e1 = np.zeros(d)
    e1[0] = 1.0
    v = b0.b - e1
    vnorm2 = v @ v
    if vnorm2 < 1e-24:
        B0 = np.eye(d)[:, 1:]
    else:
        H = np.eye(d) - 2.0 * np.outer(v, v) / vnorm2
        B0 = H[:, 1:]
        # one Gram-Schmidt pass against b0 scrubs the residual float error
        B0 = B0 - np.outer(b0.b, b0.b @ B0)
        B0 /= np.linalg.norm(B0, axis=0, keepdims=True)
    return ComplementBasis(b0=b0, B0=B0)


def beta_of_theta(basis: ComplementBasis, theta: np.ndarray) -> Direction:
    """Chart map: local coordinates on the unit ball to the half-sphere."""
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    nrm2 = theta @ theta
    if nrm2 > 1.0 + _UNIT_TOL:
        raise ValueError(f"|theta| must be <= 1, got {np.sqrt(nrm2)}")
    nrm2 = min(nrm2, 1.0)
    b = basis.B0 @ theta + np.sqrt(1.0 - nrm2) * basis.b0.b
    b = b / np.linalg.norm(b)
    return Direction(b)


def theta_of_beta(basis: ComplementBasis, beta: Direction | np.ndarray) -> np.ndarray:
    """Inverse chart on the hemisphere: theta = B0' beta.

    Directions on the far hemisphere are reflected through the origin first.
    """
    if not isinstance(beta, Direction):
        beta = Direction(np.asarray(beta))
    b = beta.b
    if b @ basis.b0.b < 0.0:
        b = -b
    return basis.B0.T @ b


def reflect_to_hemisphere(beta: np.ndarray, reference: np.ndarray) -> np.ndarray:
    """Flip beta so that beta' reference >= 0."""
    beta = np.asarray(beta, dtype=np.float64)
    return -beta if beta @ np.asarray(reference) < 0.0 else beta
