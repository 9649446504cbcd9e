"""Scikit-learn estimator wrappers around the functional core.

``SpectralTrimmer`` is a stateless-parameter transformer that learns the
singular-value cap of the training matrix and applies it to any matrix with
the same columns, so it drops into Pipelines and cross-validation splitters.
``DECS`` wraps the full constrained solver behind fit/predict/get_params.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from .linalg import trim_transform
from .model import is_acyclic, skeleton_of
from .solver import (
    ScoreConfig,
    cross_validate_lambda,
    default_lambda_grid,
    solve_decs,
)
from .validation import check_data


class SpectralTrimmer(TransformerMixin, BaseEstimator):
    """Cap the singular values of a data matrix at their lower median.

    ``fit`` computes the thin SVD of the training matrix; ``transform``
    rescales the component of each row along the fitted right-singular
    directions and leaves the orthogonal remainder untouched. On the training
    matrix itself this equals the exact trim.
    """

    def fit(self, X, y=None):
        X = check_data(X, "X")
        _, transform = trim_transform(X)
        self.basis_ = transform.basis
        self.row_basis_ = transform.row_basis
        self.singular_values_ = transform.singular_values
        self.cap_ = transform.cap
        self.scale_factors_ = transform.scale_factors
        self._transform = transform
        return self

    def transform(self, X):
        if not hasattr(self, "_transform"):
            raise NotFittedError("SpectralTrimmer must be fitted before transform")
        return self._transform.apply_rows(check_data(X, "X"))


class DECS(BaseEstimator):
    """Sparse weighted-DAG learner with spectral confounding adjustment.

    Parameters mirror the solver configuration; ``lambda_=None`` uses the
    plug-in penalty, and ``cv`` (a fold count) selects it by cross-validated
    prediction loss on the adjusted data instead.

    Attributes after ``fit``: ``adjacency_`` (p x p weights), ``order_``
    (a topological order of the estimate), ``lambda_used_``, ``report_``.
    """

    def __init__(
        self,
        lambda_=None,
        trim=True,
        edge_threshold=0.3,
        cv=None,
        cv_grid=None,
        rho_init=1.0,
        rho_max=1e16,
        alpha_init=0.0,
        h_tol=1e-8,
        progress_ratio=0.25,
        max_outer=100,
        inner_tol=1e-6,
        inner_max_iter=500,
    ):
        self.lambda_ = lambda_
        self.trim = trim
        self.edge_threshold = edge_threshold
        self.cv = cv
        self.cv_grid = cv_grid
        self.rho_init = rho_init
        self.rho_max = rho_max
        self.alpha_init = alpha_init
        self.h_tol = h_tol
        self.progress_ratio = progress_ratio
        self.max_outer = max_outer
        self.inner_tol = inner_tol
        self.inner_max_iter = inner_max_iter

    def _config(self, lambda_) -> ScoreConfig:
        return ScoreConfig(
            lambda_=lambda_,
            use_trim=self.trim,
            rho_init=self.rho_init,
            rho_max=self.rho_max,
            alpha_init=self.alpha_init,
            h_tol=self.h_tol,
            progress_ratio=self.progress_ratio,
            max_outer=self.max_outer,
            inner_tol=self.inner_tol,
            inner_max_iter=self.inner_max_iter,
            edge_threshold=self.edge_threshold,
        )

    def fit(self, X, y=None):
        X = check_data(X, "X", min_rows=2, min_cols=2)
        lam = self.lambda_
        if self.cv is not None:
            grid = self.cv_grid if self.cv_grid is not None else default_lambda_grid(X)
            lam, self.cv_losses_ = cross_validate_lambda(X, grid, self.cv, self._config(None))
        report = solve_decs(X, self._config(lam))
        self.report_ = report
        self.adjacency_ = report.w_hat.weights
        self.order_ = is_acyclic(report.w_hat, 0.0)
        self.lambda_used_ = report.lambda_used
        self.converged_ = report.converged
        self.n_features_in_ = X.shape[1]
        return self

    def _check_fitted(self):
        if not hasattr(self, "adjacency_"):
            raise NotFittedError("DECS must be fitted first")

    def predict(self, X):
        """Propagate each sample through the fitted edges: X @ W."""
        self._check_fitted()
        X = check_data(X, "X")
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"expected {self.n_features_in_} columns, got {X.shape[1]}")
        return X @ self.adjacency_

    def score(self, X, y=None):
        """Negative mean squared reconstruction error (higher is better)."""
        self._check_fitted()
        X = check_data(X, "X")
        residual = X - X @ self.adjacency_
        return -float(np.mean(residual * residual))

    def skeleton(self, threshold=0.0):
        self._check_fitted()
        return skeleton_of(self.adjacency_, threshold)
