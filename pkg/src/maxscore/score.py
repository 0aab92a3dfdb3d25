"""Sample score objective and its exact maximizers.

The objective ``mean_i w_i y_i 1{x_i' b >= 0}`` is piecewise constant on the
sphere; the indicator is 1 at exact equality (weak inequality). In d = 2 the
global maximum is found by an angular sweep over the arrangement of critical
angles; for 2 <= d <= 4 by enumerating unit normals of (d-1)-subsets of
observations together with cell-representative perturbations.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .arrays import Dataset
from .geometry import basis_complement, theta_of_beta

__all__ = [
    "ConstraintSet",
    "DirectionEstimate",
    "objective",
    "argmax_sweep_2d",
    "argmax_enumerate",
]

_TWO_PI = 2.0 * np.pi
# candidates whose incremental sweep value is within this of the running max
# are re-scored with the exact fixed-order objective
_SHORTLIST_TOL = 1e-8


@dataclass(frozen=True)
class ConstraintSet:
    """Estimation set on the sphere.

    kind: "full", "hemisphere" (requires ``reference``), or
    "component-bound" (requires ``component`` 0-based and ``bound`` in (0,1)).
    """

    kind: str = "full"
    reference: np.ndarray | None = None
    component: int | None = None
    bound: float | None = None

    def __post_init__(self):
        if self.kind not in ("full", "hemisphere", "component-bound"):
            raise ValueError(f"unknown constraint kind {self.kind!r}")
        if self.kind == "hemisphere":
            if self.reference is None:
                raise ValueError("hemisphere constraint needs a reference direction")
            ref = np.asarray(self.reference, dtype=np.float64).reshape(-1)
            if not abs(np.linalg.norm(ref) - 1.0) <= 1e-9:
                raise ValueError("hemisphere reference must be a unit vector")
            object.__setattr__(self, "reference", ref)
        if self.kind == "component-bound":
            if self.component is None or self.bound is None:
                raise ValueError("component-bound needs component and bound")
            if not 0.0 < self.bound < 1.0:
                raise ValueError("bound must lie in (0, 1)")

    def feasible(self, b: np.ndarray) -> bool:
        if self.kind == "full":
            return True
        if self.kind == "hemisphere":
            return float(b @ self.reference) >= 0.0
        return abs(float(b[self.component])) >= self.bound

    def boundary_angles(self) -> list[float]:
        """Constraint-boundary angles in [0, 2pi), d = 2 only."""
        if self.kind == "full":
            return []
        if self.kind == "hemisphere":
            psi = float(np.arctan2(self.reference[1], self.reference[0]))
            return [(psi - np.pi / 2.0) % _TWO_PI, (psi + np.pi / 2.0) % _TWO_PI]
        phi = float(np.arccos(self.bound))
        base = 0.0 if self.component == 0 else np.pi / 2.0
        return sorted(
            {(base + s * phi + k * np.pi) % _TWO_PI for s in (-1.0, 1.0) for k in (0, 1)}
        )


@dataclass
class DirectionEstimate:
    beta_hat: np.ndarray
    objective: float
    candidates_evaluated: int
    method: str
    theta_hat: np.ndarray | None = None
    angle: float | None = None
    skipped_subsets: int = 0


def objective(data: Dataset, b: np.ndarray, weights: np.ndarray | None = None) -> float:
    """Weighted score objective at a direction; fixed index-lexicographic
    summation order so repeated evaluation is bit-identical."""
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if b.shape[0] != data.d:
        raise ValueError(f"direction has dimension {b.shape[0]}, data has {data.d}")
    ind = (data.x @ b) >= 0.0
    contrib = data.y.astype(np.float64)
    if weights is not None:
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape[0] != data.n_records:
            raise ValueError("weights must align with the dataset records")
        contrib = contrib * weights
    return float(np.sum(contrib * ind) / data.n_records)


class SweepPlan:
    """Precomputed angular arrangement of a d = 2 dataset.

    Sorting the 2m critical angles is done once; each weighted objective is
    then a cumulative-sum walk, so bootstrap replicates on fixed data reuse
    the plan.
    """

    def __init__(self, x: np.ndarray):
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != 2:
            raise ValueError("sweep requires d = 2 data")
        self.x = x
        norms = np.hypot(x[:, 0], x[:, 1])
        self.active = norms > 0.0  # zero covariates are counted everywhere
        xa = x[self.active]
        gamma = np.arctan2(xa[:, 1], xa[:, 0])
        on = (gamma - np.pi / 2.0) % _TWO_PI
        off = (gamma + np.pi / 2.0) % _TWO_PI
        m = xa.shape[0]
        angles = np.concatenate([on, off])
        # exact normals: x'b = 0 holds in floating point by construction
        nrm = norms[self.active]
        b_on = np.stack([xa[:, 1] / nrm, -xa[:, 0] / nrm], axis=1)
        b_off = -b_on
        self.event_b = np.concatenate([b_on, b_off], axis=0)
        self.event_obs = np.concatenate([np.arange(m), np.arange(m)])
        self.event_is_on = np.concatenate([np.ones(m, bool), np.zeros(m, bool)])
        order = np.argsort(angles, kind="stable")
        self.order = order
        self.angles = angles[order]
        self.n_events = angles.shape[0]
        if self.n_events:
            # group events sharing an exactly equal angle
            starts = np.ones(self.n_events, bool)
            starts[1:] = self.angles[1:] != self.angles[:-1]
            self.group_start = np.flatnonzero(starts)
            self.group_angle = self.angles[self.group_start]
            wrap_mid = ((self.angles[-1] + self.angles[0] + _TWO_PI) / 2.0) % _TWO_PI
            g = self.group_angle
            self.mid_angle = np.empty_like(g)
            if len(g) > 1:
                self.mid_angle[:-1] = (g[:-1] + g[1:]) / 2.0
            self.mid_angle[-1] = wrap_mid
            self.probe = wrap_mid
        else:
            self.group_start = np.empty(0, np.int64)
            self.group_angle = np.empty(0)
            self.mid_angle = np.array([0.0])
            self.probe = 0.0

    def run(self, contrib: np.ndarray):
        """Walk the arrangement for per-record contributions ``w*y/m``.

        Returns (cand_angles, cand_b, cand_values) covering every critical
        angle and every open-arc midpoint; values at critical angles include
        the boundary (weak inequality) convention.
        """
        contrib = np.asarray(contrib, dtype=np.float64)
        base = float(np.sum(contrib[~self.active])) if not self.active.all() else 0.0
        ca = contrib[self.active]
        bp = np.array([np.cos(self.probe), np.sin(self.probe)])
        xa = self.x[self.active]
        s_start = base + float(np.sum(ca[(xa @ bp) > 0.0]))
        if self.n_events == 0:
            b = np.stack([np.cos(self.mid_angle), np.sin(self.mid_angle)], axis=1)
            return self.mid_angle, b, np.array([s_start])
        ev_c = ca[self.event_obs][self.order]
        ev_on = self.event_is_on[self.order]
        delta = np.where(ev_on, ev_c, -ev_c)
        on_c = np.where(ev_on, ev_c, 0.0)
        s_after_all = s_start + np.cumsum(delta)
        gs = self.group_start
        s_before = np.empty(len(gs))
        s_before[0] = s_start
        s_before[1:] = s_after_all[gs[1:] - 1]
        on_sum = np.add.reduceat(on_c, gs)
        val_at = s_before + on_sum
        ends = np.append(gs[1:], self.n_events) - 1
        s_after = s_after_all[ends]
        cand_angles = np.concatenate([self.group_angle, self.mid_angle])
        mid_b = np.stack([np.cos(self.mid_angle), np.sin(self.mid_angle)], axis=1)
        first_of_group = self.order[gs]
        cand_b = np.concatenate([self.event_b[first_of_group], mid_b], axis=0)
        cand_values = np.concatenate([val_at, s_after])
        return cand_angles, cand_b, cand_values


def _finalize_2d(data, weights, constraint, cand_angles, cand_b, cand_values, method):
    feas = np.array([constraint.feasible(b) for b in cand_b])
    extra_b, extra_angles = [], []
    for ang in constraint.boundary_angles():
        extra_angles.append(ang)
        extra_b.append(np.array([np.cos(ang), np.sin(ang)]))
    if extra_b:
        for ang, b in zip(extra_angles, extra_b):
            if constraint.feasible(b):
                cand_angles = np.append(cand_angles, ang)
                cand_b = np.concatenate([cand_b, b[None, :]], axis=0)
                cand_values = np.append(cand_values, -np.inf)  # force exact scoring
                feas = np.append(feas, True)
    if not feas.any():
        raise ValueError("constraint set contains no candidate direction")
    cand_angles = cand_angles[feas]
    cand_b = cand_b[feas]
    cand_values = cand_values[feas]
    boundary = ~np.isfinite(cand_values)
    if boundary.any():
        cand_values = cand_values.copy()
        for j in np.flatnonzero(boundary):
            cand_values[j] = objective(data, cand_b[j], weights)
    vmax = float(np.max(cand_values))
    shortlist = np.flatnonzero(cand_values >= vmax - _SHORTLIST_TOL)
    exact = np.array([objective(data, cand_b[j], weights) for j in shortlist])
    best_val = float(np.max(exact))
    at_max = shortlist[exact >= best_val]
    ang = cand_angles[at_max] % _TWO_PI
    pick = at_max[np.argmin(ang)]
    best_b = cand_b[pick]
    return DirectionEstimate(
        beta_hat=best_b,
        objective=objective(data, best_b, weights),
        candidates_evaluated=int(len(cand_values)),
        method=method,
        angle=float(cand_angles[pick] % _TWO_PI),
    )


def argmax_sweep_2d(
    data: Dataset,
    constraint: ConstraintSet = ConstraintSet(),
    weights: np.ndarray | None = None,
    plan: SweepPlan | None = None,
    reference: np.ndarray | None = None,
) -> DirectionEstimate:
    """Exact global maximizer of the d = 2 score objective.

    Evaluates every critical angle and every open-arc midpoint (plus any
    constraint-boundary angles); ties broken by the smallest angle in
    [0, 2pi). Zero optimization error by construction.
    """
    if data.n_records == 0:
        raise ValueError("empty dataset")
    if data.d != 2:
        raise ValueError("argmax_sweep_2d requires d = 2")
    if weights is not None:
        weights = np.asarray(weights, dtype=np.float64)
        if weights.shape[0] != data.n_records:
            raise ValueError("weights must align with the dataset records")
    if weights is not None and np.any(weights == 0.0):
        # zero-weight records carry nothing; excluding them keeps the
        # candidate set (and hence the tie-break) identical to estimation on
        # the surviving sub-dataset
        keep = weights != 0.0
        if not keep.any():
            raise ValueError("all weights are zero")
        est = _sweep_core(_subset(data, keep), constraint, weights[keep], None)
        est.objective = objective(data, est.beta_hat, weights)
    else:
        est = _sweep_core(data, constraint, weights, plan)
    if reference is not None:
        _attach_theta(est, reference)
    return est


def _sweep_core(data, constraint, weights, plan):
    contrib = data.y.astype(np.float64)
    if weights is not None:
        contrib = contrib * weights
    if plan is None:
        plan = SweepPlan(data.x)
    cand_angles, cand_b, cand_values = plan.run(contrib / data.n_records)
    return _finalize_2d(data, weights, constraint, cand_angles, cand_b, cand_values, "sweep")


def _subset(data: Dataset, keep: np.ndarray) -> Dataset:
    return Dataset(
        grid=data.grid,
        indices=data.indices[keep],
        y=data.y[keep],
        x=data.x[keep],
        store=data.store,
        dgp=data.dgp,
    )


def _attach_theta(est: DirectionEstimate, reference: np.ndarray) -> None:
    from .geometry import reflect_to_hemisphere

    basis = basis_complement(np.asarray(reference, dtype=np.float64))
    est.theta_hat = theta_of_beta(basis, reflect_to_hemisphere(est.beta_hat, reference))


def argmax_enumerate(
    data: Dataset,
    constraint: ConstraintSet = ConstraintSet(),
    weights: np.ndarray | None = None,
    reference: np.ndarray | None = None,
    delta_scale: float = 1e-9,
) -> DirectionEstimate:
    """Exact maximizer for 2 <= d <= 4 via hyperplane-arrangement vertices.

    Candidates are the two unit normals of every (d-1)-subset of observation
    hyperplanes, each perturbed by +/- delta along the orthogonal directions
    to reach the adjacent full-dimensional cells. Degenerate subsets are
    skipped and counted. Ties broken lexicographically on the vector.
    """
    if data.n_records == 0:
        raise ValueError("empty dataset")
    d = data.d
    if not 2 <= d <= 4:
        raise ValueError("argmax_enumerate supports 2 <= d <= 4")
    x = data.x
    m = data.n_records
    norms = np.linalg.norm(x, axis=1)
    med = float(np.median(norms[norms > 0.0])) if np.any(norms > 0.0) else 1.0
    delta = delta_scale * med
    skipped = 0
    bases: list[np.ndarray] = []
    # always-present fallbacks: coordinate axes and own-observation directions
    for l in range(d):
        e = np.zeros(d)
        e[l] = 1.0
        bases.append(e)
        bases.append(-e)
    for i in range(m):
        if norms[i] > 0.0:
            bases.append(x[i] / norms[i])
            bases.append(-x[i] / norms[i])
    for subset in itertools.combinations(range(m), d - 1):
        A = x[list(subset)]
        if d == 2:
            xi = A[0]
            nrm = np.hypot(xi[0], xi[1])
            if nrm == 0.0:
                skipped += 1
                continue
            v = np.array([-xi[1], xi[0]]) / nrm  # x'v = 0 exactly
        else:
            _, s, vt = np.linalg.svd(A)
            if np.sum(s > 1e-10 * max(1.0, s[0] if s.size else 1.0)) < d - 1:
                skipped += 1
                continue
            v = vt[-1]
        bases.append(v)
        bases.append(-v)
    cand: list[np.ndarray] = []
    signs = [
        np.array(sv, dtype=np.float64)
        for sv in itertools.product((-1.0, 0.0, 1.0), repeat=d - 1)
    ]
    for b in bases:
        # orthonormal complement of b for the cell-representative offsets
        Mb = np.eye(d) - np.outer(b, b)
        q, _ = np.linalg.qr(Mb)
        W = q[:, : d - 1]
        for sv in signs:
            if not sv.any():
                cand.append(b)
            else:
                p = b + delta * (W @ sv)
                cand.append(p / np.linalg.norm(p))
    feas = [b for b in cand if constraint.feasible(b)]
    if not feas:
        raise ValueError("constraint set contains no candidate direction")
    values = np.array([objective(data, b, weights) for b in feas])
    vmax = float(np.max(values))
    at_max = [feas[j] for j in np.flatnonzero(values >= vmax)]
    best_b = min(at_max, key=lambda b: tuple(b))
    est = DirectionEstimate(
        beta_hat=best_b,
        objective=objective(data, best_b, weights),
        candidates_evaluated=len(feas),
        method="enumerate",
        skipped_subsets=skipped,
        angle=float(np.arctan2(best_b[1], best_b[0]) % _TWO_PI) if d == 2 else None,
    )
    if reference is not None:
        _attach_theta(est, reference)
    return est
