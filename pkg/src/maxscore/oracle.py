"""Numerical asymptotic-variance oracle for the shipped two-way designs.

With d = 2 the decision boundary of the limit objective is the line
``{t v : t in R}`` with ``v`` orthogonal to the true direction, so the
influence function of each clustering dimension and the curvature constant
reduce to one-dimensional integrals with closed-form Gaussian integrands.
These are evaluated by trapezoid quadrature on a truncated range; the
variance matrix is assembled as ``V = H^-1 Omega H^-1``.

This module is a verification oracle for the shipped d = 2, K = 2 designs,
not a general-purpose variance estimator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtr, ndtri

from .arrays import LatentStore
from .dgp import DgpSpec, channel_map
from .geometry import basis_complement

__all__ = [
    "QuadratureSpec",
    "AsymptoticOracle",
    "oracle_delta",
    "oracle_hessian",
    "oracle_variance",
]

_ROW = (1, 0)
_COL = (0, 1)

_trapezoid = getattr(np, "trapezoid", None) or np.trapz
_PHI0 = 1.0 / np.sqrt(2.0 * np.pi)


@dataclass(frozen=True)
class QuadratureSpec:
    """Trapezoid rule on a symmetric range of +-radius_sd standard
    deviations around the integrand's Gaussian center."""

    nodes: int = 512
    radius_sd: float = 8.0

    def __post_init__(self):
        if self.nodes < 8:
            raise ValueError("need at least 8 quadrature nodes")
        if self.radius_sd <= 0:
            raise ValueError("truncation radius must be positive")


@dataclass
class AsymptoticOracle:
    """Limit-distribution constants for one design.

    All matrices are (d-1) x (d-1); with d = 2 they are scalars stored as
    1 x 1 arrays. ``omega_se``/``v_se`` are the MC standard errors of the
    outer integration over the conditioning shocks.
    """

    hessian: np.ndarray
    omega: np.ndarray
    v: np.ndarray
    lam: tuple
    omega_se: float = 0.0
    v_se: float = 0.0
    quadrature: QuadratureSpec = field(default_factory=QuadratureSpec)
    u_draws: int = 0
    seed: int = 0

    def __post_init__(self):
        for name in ("hessian", "omega", "v"):
            m = np.atleast_2d(np.asarray(getattr(self, name), dtype=np.float64))
            if not np.allclose(m, m.T):
                raise ValueError(f"{name} must be symmetric")
            setattr(self, name, m)
        if np.any(np.linalg.eigvalsh(self.omega) < -1e-12):
            raise ValueError("omega must be positive semi-definite")
        resid = self.v - np.linalg.solve(self.hessian, self.omega) @ np.linalg.inv(self.hessian)
        scale = max(np.max(np.abs(self.v)), 1e-300)
        if np.max(np.abs(resid)) / scale > 1e-8:
            raise ValueError("v must equal hessian^-1 omega hessian^-1")


def _check_supported(spec: DgpSpec, allowed: tuple) -> None:
    if spec.d != 2:
        raise ValueError("oracle supports d = 2 only")
    if spec.variant not in allowed:
        raise ValueError(f"unsupported variant {spec.variant!r}; expected one of {allowed}")


def _boundary_frame(spec: DgpSpec):
    """Unit v spanning the boundary line, chosen as the complement column so
    the chart coordinate of t v is exactly t."""
    basis = basis_complement(spec.beta0)
    return basis.B0[:, 0]


def _z(u_val: float) -> float:
    if not 0.0 < u_val < 1.0:
        raise ValueError("latent uniforms must lie in (0, 1)")
    return float(ndtri(u_val))


def _line_integral(g, center: float, sd: float, quad: QuadratureSpec) -> tuple:
    """Trapezoid value plus a half-resolution refinement error estimate."""
    def at(nodes: int) -> float:
        t = np.linspace(center - quad.radius_sd * sd, center + quad.radius_sd * sd, nodes)
        return float(_trapezoid(g(t), t))

    value = at(quad.nodes)
    return value, abs(value - at(max(quad.nodes // 2, 8)))


def oracle_delta(spec: DgpSpec, k: int, u: dict, quad: QuadratureSpec | None = None):
    """Influence derivative of one clustering dimension at fixed shocks.

    ``u`` maps the dimension's channel names to their latent uniforms (the
    channels listed by the DGP for pattern e_k). Returns the (d-1,) vector
    and a quadrature refinement error estimate.
    """
    _check_supported(spec, ("mult-scale", "add-shock"))
    if k not in (1, 2):
        raise ValueError("k must be 1 or 2")
    quad = quad or QuadratureSpec()
    v = _boundary_frame(spec)

    if spec.variant == "mult-scale":
        # error is symmetric about zero given any shock subset, so the
        # conditional choice probability vanishes on the whole boundary
        return np.zeros(1), 0.0

    a = np.array([_z(u["x1"]), _z(u["x2"])])
    alpha = _z(u["eps"])
    t0 = float(v @ a)
    s0 = float(spec.beta0 @ a)
    # X | shock ~ N(a, 2 I), eps | shock = alpha + N(0, 2)
    m_boundary = 2.0 * ndtr((0.0 - alpha) / np.sqrt(2.0)) - 1.0

    def integrand(t):
        dens = np.exp(-((t - t0) ** 2 + s0**2) / 4.0) / (4.0 * np.pi)
        return m_boundary * dens * t

    value, err = _line_integral(integrand, t0, np.sqrt(2.0), quad)
    return np.array([value]), err


def _mean_inverse_scale(order: int = 64) -> float:
    """E[1 / (1 + z1^2/2 + z2^2/2)] for independent standard normal z's."""
    nodes, weights = np.polynomial.hermite_e.hermegauss(order)
    w = weights / np.sqrt(2.0 * np.pi)
    z1, z2 = np.meshgrid(nodes, nodes, indexing="ij")
    ww = np.outer(w, w)
    return float(np.sum(ww / (1.0 + 0.5 * z1**2 + 0.5 * z2**2)))


def oracle_hessian(spec: DgpSpec, quad: QuadratureSpec | None = None,
                   covariate_var: float | None = None):
    """Curvature of the limit objective at the true direction (scalar, d = 2).

    ``covariate_var`` overrides the per-coordinate covariate variance, which
    defaults to the variant's own law (3 for the two-way designs, 1 for iid).
    """
    _check_supported(spec, ("mult-scale", "add-shock", "iid"))
    quad = quad or QuadratureSpec()

    if covariate_var is None:
        covariate_var = 1.0 if spec.variant == "iid" else 3.0
    sx = np.sqrt(covariate_var)

    # slope of the conditional choice probability along beta0 on the boundary
    if spec.variant == "add-shock":
        mdot = 2.0 * _PHI0 / np.sqrt(3.0)
    elif spec.variant == "iid":
        mdot = 2.0 * _PHI0
    else:
        mdot = 2.0 * _PHI0 * _mean_inverse_scale()

    def integrand(t):
        dens = np.exp(-(t**2) / (2.0 * covariate_var)) / (2.0 * np.pi * covariate_var)
        return mdot * dens * t**2

    value, err = _line_integral(integrand, 0.0, sx, quad)
    return np.array([[value]]), err


def _draw_channel_uniforms(spec: DgpSpec, pattern, draws: int, seed: int) -> dict:
    store = LatentStore(seed=seed)
    t = np.arange(1, draws + 1)
    projected = np.stack([t * b for b in pattern], axis=1)
    return {ch: store.uniform_array(pattern, projected, ch)
            for ch in channel_map(spec)[pattern]}


def oracle_variance(spec: DgpSpec, lam=(1.0, 1.0), u_draws: int = 10**4,
                    seed: int = 0, quad: QuadratureSpec | None = None) -> AsymptoticOracle:
    """Assemble H, Omega and V = H^-1 Omega H^-1 by MC over the shocks."""
    _check_supported(spec, ("mult-scale", "add-shock"))
    lam = tuple(float(l) for l in lam)
    if len(lam) != 2 or any(l < 0 for l in lam):
        raise ValueError("lambda must be two nonnegative weights")
    quad = quad or QuadratureSpec()

    h, _ = oracle_hessian(spec, quad)
    omega = 0.0
    var_of_mean = 0.0
    for k, pattern in ((1, _ROW), (2, _COL)):
        if lam[k - 1] == 0.0:
            continue
        if spec.variant == "mult-scale":
            continue  # delta vanishes identically
        u = _draw_channel_uniforms(spec, pattern, u_draws, seed)
        sq = np.empty(u_draws)
        for j in range(u_draws):
            d_kj, _ = oracle_delta(spec, k, {ch: u[ch][j] for ch in u}, quad)
            sq[j] = d_kj[0] ** 2
        omega += lam[k - 1] * float(np.mean(sq))
        var_of_mean += (lam[k - 1] ** 2) * float(np.var(sq, ddof=1)) / u_draws

    omega_se = float(np.sqrt(var_of_mean))
    h_scalar = float(h[0, 0])
    v = omega / h_scalar**2
    return AsymptoticOracle(
        hessian=h,
        omega=np.array([[omega]]),
        v=np.array([[v]]),
        lam=lam,
        omega_se=omega_se,
        v_se=omega_se / h_scalar**2,
        quadrature=quad,
        u_draws=u_draws,
        seed=seed,
    )
