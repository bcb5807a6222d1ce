"""Cox proportional-hazards fitting via the Breslow partial likelihood.

Newton-Raphson with step-halving from beta = 0; the baseline hazard is
never estimated. Standard errors come from the inverse observed
information; the treatment effect is reported as a hazard ratio with a
log-symmetric 95% Wald interval and a two-sided Wald p-value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import TrialGridError

BETA_CAP = 20.0
Z_95 = 1.96


class CoxError(TrialGridError):
    pass


def _risk_set_sums(times, x, beta):
    """Suffix sums S0, S1, S2 of exp(x beta) over risk sets, per subject.

    Inputs must already be sorted by ascending time. Tied times share one
    risk set (Breslow), which the left-searchsorted indexing enforces.
    """
    eta = x @ beta
    eta = np.clip(eta, -500, 500)
    w = np.exp(eta)
    s0 = np.cumsum(w[::-1])[::-1]
    s1 = np.cumsum((w[:, None] * x)[::-1], axis=0)[::-1]
    outer = np.einsum("i,ij,ik->ijk", w, x, x)
    s2 = np.cumsum(outer[::-1], axis=0)[::-1]
    first = np.searchsorted(times, times, side="left")
    return eta, s0[first], s1[first], s2[first]


def breslow_loglik(times, events, x, beta):
    """Breslow log partial likelihood at beta (inputs in any order)."""
    order = np.argsort(times, kind="stable")
    t, d, xs = times[order], events[order], x[order]
    eta, s0, _, _ = _risk_set_sums(t, xs, np.asarray(beta, dtype=float))
    ev = d.astype(bool)
    return float(eta[ev].sum() - np.log(s0[ev]).sum())


def breslow_score(times, events, x, beta):
    """Analytic gradient of the Breslow log partial likelihood."""
    order = np.argsort(times, kind="stable")
    t, d, xs = times[order], events[order], x[order]
    _, s0, s1, _ = _risk_set_sums(t, xs, np.asarray(beta, dtype=float))
    ev = d.astype(bool)
    return xs[ev].sum(axis=0) - (s1[ev] / s0[ev, None]).sum(axis=0)


def breslow_information(times, events, x, beta):
    """Observed information (negative Hessian) of the log partial likelihood."""
    order = np.argsort(times, kind="stable")
    t, d, xs = times[order], events[order], x[order]
    _, s0, s1, s2 = _risk_set_sums(t, xs, np.asarray(beta, dtype=float))
    ev = d.astype(bool)
    mean = s1[ev] / s0[ev, None]
    return (s2[ev] / s0[ev, None, None]).sum(axis=0) - np.einsum(
        "ij,ik->jk", mean, mean
    )


def _efron_terms(t, d, xs, beta):
    """Log-likelihood, score, and information under Efron tie handling.

    Inputs must be sorted by ascending time. For d tied events the risk-set
    sums are progressively depleted by l/d of the tied subjects' own
    contributions, l = 0..d-1.
    """
    eta = np.clip(xs @ beta, -500, 500)
    w = np.exp(eta)
    p = xs.shape[1]
    s0 = np.cumsum(w[::-1])[::-1]
    s1 = np.cumsum((w[:, None] * xs)[::-1], axis=0)[::-1]
    outer = np.einsum("i,ij,ik->ijk", w, xs, xs)
    s2 = np.cumsum(outer[::-1], axis=0)[::-1]

    ll = 0.0
    score = np.zeros(p)
    info = np.zeros((p, p))
    ev_idx = np.flatnonzero(d)
    for start in np.unique(np.searchsorted(t, t[ev_idx], side="left")):
        tied = ev_idx[t[ev_idx] == t[start]]
        k = len(tied)
        w_d = w[tied].sum()
        s1_d = (w[tied, None] * xs[tied]).sum(axis=0)
        s2_d = outer[tied].sum(axis=0)
        ll += eta[tied].sum()
        score += xs[tied].sum(axis=0)
        for l in range(k):
            frac = l / k
            d0 = s0[start] - frac * w_d
            d1 = s1[start] - frac * s1_d
            d2 = s2[start] - frac * s2_d
            ll -= math.log(d0)
            m = d1 / d0
            score -= m
            info += d2 / d0 - np.outer(m, m)
    return ll, score, info


def efron_loglik(times, events, x, beta):
    order = np.argsort(times, kind="stable")
    ll, _, _ = _efron_terms(
        times[order], events[order].astype(bool), x[order],
        np.asarray(beta, dtype=float),
    )
    return ll


def efron_score(times, events, x, beta):
    order = np.argsort(times, kind="stable")
    _, score, _ = _efron_terms(
        times[order], events[order].astype(bool), x[order],
        np.asarray(beta, dtype=float),
    )
    return score


def efron_information(times, events, x, beta):
    order = np.argsort(times, kind="stable")
    _, _, info = _efron_terms(
        times[order], events[order].astype(bool), x[order],
        np.asarray(beta, dtype=float),
    )
    return info


@dataclass(frozen=True)
class CoxFit:
    beta_T: float
    se: float
    hr: float
    ci95: tuple
    p_value: float
    converged: bool
    iterations: int
    covariate_betas: tuple
    n_events: int


class CoxPHModel:
    """Estimator-style wrapper: fit(times, events, X) with treatment last.

    Parameters
    ----------
    max_iter : Newton iteration cap.
    tol : convergence threshold on the max absolute score component.
    ties : "breslow" (default) or "efron".
    """

    def __init__(self, max_iter=100, tol=1e-9, ties="breslow"):
        if ties not in ("breslow", "efron"):
            raise ValueError(f"unknown tie handling {ties!r}")
        self.max_iter = max_iter
        self.tol = tol
        self.ties = ties
        self.coef_ = None
        self.information_ = None
        self.converged_ = False
        self.n_iter_ = 0

    def get_params(self, deep=True):
        return {"max_iter": self.max_iter, "tol": self.tol, "ties": self.ties}

    def set_params(self, **params):
        for key, value in params.items():
            setattr(self, key, value)
        return self

    def fit(self, times, events, X):
        times = np.asarray(times, dtype=float)
        events = np.asarray(events, dtype=bool)
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        n, p = X.shape
        if events.sum() == 0:
            raise CoxError("no events in the data")
        self.n_events_ = int(events.sum())

        order = np.argsort(times, kind="stable")
        t, d, xs = times[order], events[order], X[order]

        beta = np.zeros(p)
        ll = self._loglik_sorted(t, d, xs, beta)
        self.converged_ = False
        for it in range(1, self.max_iter + 1):
            self.n_iter_ = it
            _, score, info = self._terms_sorted(t, d, xs, beta)
            if np.max(np.abs(score)) < self.tol:
                self.converged_ = True
                break
            try:
                step = np.linalg.solve(info, score)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(info, score, rcond=None)[0]
            # step-halving: insist on a (numerically) non-decreasing
            # partial likelihood
            scale = 1.0
            for _ in range(30):
                candidate = beta + scale * step
                cand_ll = self._loglik_sorted(t, d, xs, candidate)
                if cand_ll >= ll - 1e-10:
                    break
                scale *= 0.5
            beta = beta + scale * step
            ll = self._loglik_sorted(t, d, xs, beta)
            if np.max(np.abs(scale * step)) < 1e-12:
                self.converged_ = True
                break
            if np.any(np.abs(beta) > BETA_CAP):
                # monotone likelihood / separation: cap and flag
                beta = np.clip(beta, -BETA_CAP, BETA_CAP)
                self.converged_ = False
                break

        self.coef_ = beta
        _, _, self.information_ = self._terms_sorted(t, d, xs, beta)
        return self

    def _terms_sorted(self, t, d, xs, beta):
        if self.ties == "efron":
            return _efron_terms(t, d, xs, beta)
        eta, s0, s1, s2 = _risk_set_sums(t, xs, beta)
        ll = float(eta[d].sum() - np.log(s0[d]).sum())
        mean = s1[d] / s0[d, None]
        score = xs[d].sum(axis=0) - mean.sum(axis=0)
        info = (s2[d] / s0[d, None, None]).sum(axis=0) - np.einsum(
            "ij,ik->jk", mean, mean
        )
        return ll, score, info

    def _loglik_sorted(self, t, d, xs, beta):
        if self.ties == "efron":
            ll, _, _ = _efron_terms(t, d, xs, beta)
            return ll
        eta, s0, _, _ = _risk_set_sums(t, xs, beta)
        return float(eta[d].sum() - np.log(s0[d]).sum())

    def summary(self, treatment_index=-1):
        """CoxFit for one coefficient (the treatment term by default)."""
        p = len(self.coef_)
        idx = treatment_index % p
        try:
            cov = np.linalg.inv(self.information_)
            var = float(cov[idx, idx])
        except np.linalg.LinAlgError:
            var = float(np.linalg.pinv(self.information_)[idx, idx])
        se = math.sqrt(max(var, 0.0)) if var > 0 else float("nan")
        beta_t = float(self.coef_[idx])
        hr = math.exp(beta_t)
        if math.isfinite(se) and se > 0:
            # clamp the exponent: near-separation can blow the se up
            lo = math.exp(max(min(beta_t - Z_95 * se, 700.0), -700.0))
            hi = math.exp(max(min(beta_t + Z_95 * se, 700.0), -700.0))
            z = beta_t / se
            p_value = math.erfc(abs(z) / math.sqrt(2.0))
        else:
            lo, hi, p_value = float("nan"), float("nan"), float("nan")
        others = tuple(float(b) for j, b in enumerate(self.coef_) if j != idx)
        return CoxFit(
            beta_T=beta_t,
            se=se,
            hr=hr,
            ci95=(lo, hi),
            p_value=p_value,
            converged=self.converged_,
            iterations=self.n_iter_,
            covariate_betas=others,
            n_events=self.n_events_,
        )
