"""Scikit-learn compatible front end for the maximum score estimator."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .arrays import Dataset, MultiIndexGrid
from .score import ConstraintSet, argmax_enumerate, argmax_sweep_2d

__all__ = ["MaximumScoreEstimator"]


class MaximumScoreEstimator(BaseEstimator, ClassifierMixin):
    """Distribution-free binary choice slope estimator.

    Maximizes the sample average of ``y * 1{x'b >= 0}`` exactly over unit
    directions. Labels may be {-1, +1} or {0, 1}; predictions use the sign
    convention with the boundary classified as +1.

    Parameters
    ----------
    method : "sweep" (d = 2 angular sweep) or "enumerate" (2 <= d <= 4).
    constraint : ConstraintSet restricting the estimation set.
    reference : optional unit vector; when given, ``theta_hat_`` holds the
        local coordinates of the estimate relative to it.
    """

    def __init__(self, method: str = "sweep", constraint: ConstraintSet | None = None,
                 reference=None):
        self.method = method
        self.constraint = constraint
        self.reference = reference

    def fit(self, X, y, sample_weight=None):
        X, y = check_X_y(X, y, dtype=np.float64)
        classes = np.unique(y)
        if np.all(np.isin(classes, (0, 1))):
            y = np.where(y > 0, 1, -1)
        elif not np.all(np.isin(classes, (-1, 1))):
            raise ValueError("y must be coded {-1,+1} or {0,1}")
        m = X.shape[0]
        data = Dataset(
            grid=MultiIndexGrid((m, 1)),
            indices=np.stack([np.arange(1, m + 1), np.ones(m, dtype=np.int64)], axis=1),
            y=y.astype(np.int64),
            x=X,
        )
        constraint = self.constraint if self.constraint is not None else ConstraintSet()
        if self.method == "sweep":
            est = argmax_sweep_2d(data, constraint, weights=sample_weight,
                                  reference=self.reference)
        elif self.method == "enumerate":
            est = argmax_enumerate(data, constraint, weights=sample_weight,
                                   reference=self.reference)
        else:
            raise ValueError(f"unknown method {self.method!r}")
        self.beta_hat_ = est.beta_hat
        self.theta_hat_ = est.theta_hat
        self.objective_ = est.objective
        self.candidates_evaluated_ = est.candidates_evaluated
        self.n_features_in_ = X.shape[1]
        return self

    def decision_function(self, X):
        check_is_fitted(self, "beta_hat_")
        X = check_array(X, dtype=np.float64)
        return X @ self.beta_hat_

    def predict(self, X):
        return np.where(self.decision_function(X) >= 0.0, 1, -1)
