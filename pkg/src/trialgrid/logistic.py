"""Logistic regression fitted by iteratively reweighted least squares.

Small estimator in the sklearn style (fit / predict_proba / get_params)
so the propensity step composes with the wider ecosystem. Probabilities
are clipped to survive perfect separation; separation shows up as a
non-convergence flag rather than an exception.
"""

from __future__ import annotations

import numpy as np

from .errors import SingularDesignError

PROB_CLIP = 1e-6


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class IrlsLogisticRegression:
    """Binary logistic regression maximizing the Bernoulli log-likelihood.

    Parameters
    ----------
    max_iter : Newton/IRLS iteration cap.
    tol : convergence threshold on the max absolute score component.
    """

    def __init__(self, max_iter=100, tol=1e-8):
        self.max_iter = max_iter
        self.tol = tol
        self.intercept_ = None
        self.coef_ = None
        self.converged_ = False
        self.n_iter_ = 0

    def get_params(self, deep=True):
        return {"max_iter": self.max_iter, "tol": self.tol}

    def set_params(self, **params):
        for key, value in params.items():
            setattr(self, key, value)
        return self

    def fit(self, X, y, column_names=None):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        n, p = X.shape
        names = list(column_names) if column_names else [f"x{j}" for j in range(p)]
        design = np.hstack([np.ones((n, 1)), X])
        rank = np.linalg.matrix_rank(design)
        if rank < design.shape[1]:
            raise SingularDesignError(_collinear_columns(design, ["intercept"] + names))

        beta = np.zeros(p + 1)
        self.converged_ = False
        for it in range(1, self.max_iter + 1):
            self.n_iter_ = it
            mu = _sigmoid(design @ beta)
            mu = np.clip(mu, PROB_CLIP, 1.0 - PROB_CLIP)
            score = design.T @ (y - mu)
            if np.max(np.abs(score)) < self.tol:
                self.converged_ = True
                break
            w = mu * (1.0 - mu)
            info = design.T @ (w[:, None] * design)
            try:
                step = np.linalg.solve(info, score)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(info, score, rcond=None)[0]
            beta = beta + step

        self.intercept_ = float(beta[0])
        self.coef_ = beta[1:]
        return self

    def decision_function(self, X):
        X = np.asarray(X, dtype=float)
        return self.intercept_ + X @ self.coef_

    def predict_proba(self, X):
        p1 = np.clip(_sigmoid(self.decision_function(X)), PROB_CLIP, 1.0 - PROB_CLIP)
        return np.column_stack([1.0 - p1, p1])


def _collinear_columns(design, names):
    """Name the columns involved in a rank deficiency via QR pivoting."""
    _, r = np.linalg.qr(design)
    diag = np.abs(np.diag(r))
    thresh = diag.max() * max(design.shape) * np.finfo(float).eps
    bad = [names[j] for j in range(len(names)) if diag[j] <= thresh]
    return bad or names
