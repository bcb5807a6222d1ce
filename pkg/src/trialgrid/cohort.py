"""Cohort construction for one concrete candidate: eligibility split,
propensity model over confounders, and greedy caliper matching.

The caliper is the (unscaled) median absolute deviation of all eligible
patients' propensity scores. Matching is 1:1 nearest-neighbor without
replacement, iterating treated patients in ascending id order; ties on
|score difference| go to the smaller control id. A treated patient whose
best remaining control is farther than the caliper is discarded and the
control stays available.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass

import numpy as np

from . import dsl
from .ehr import derived_attribute
from .errors import EmptyArmError
from .logistic import IrlsLogisticRegression


@dataclass(frozen=True)
class EligibleCohort:
    candidate_id: int
    treated_ids: tuple
    control_ids: tuple

    @property
    def all_ids(self):
        return self.treated_ids + self.control_ids


@dataclass(frozen=True)
class PropensityModel:
    intercept: float
    coefficients: dict  # design column name -> coefficient
    converged: bool
    iterations: int
    scores: dict  # patient_id -> propensity in (0, 1)


@dataclass(frozen=True)
class MatchedCohort:
    candidate_id: int
    pairs: tuple  # ((treated_id, control_id), ...)
    caliper: float
    discarded_treated: int

    @property
    def treated_ids(self):
        return tuple(t for t, _ in self.pairs)

    @property
    def control_ids(self):
        return tuple(c for _, c in self.pairs)

    @property
    def all_ids(self):
        return self.treated_ids + self.control_ids

    def to_dict(self, smd=None):
        out = {
            "candidate_id": self.candidate_id,
            "pairs": [list(p) for p in self.pairs],
            "caliper": self.caliper,
            "discarded_treated": self.discarded_treated,
        }
        if smd is not None:
            out["smd"] = smd
        return out


def select_eligible(store, spec, bindings, candidate_id=0):
    """Apply eligibility to every patient; id lists come back sorted."""
    treated, control = [], []
    for pid in store.ids():
        group = dsl.eligibility(store.patients[pid], spec, bindings)
        if group == dsl.TREATMENT:
            treated.append(pid)
        elif group == dsl.CONTROL:
            control.append(pid)
    return EligibleCohort(
        candidate_id=candidate_id,
        treated_ids=tuple(treated),
        control_ids=tuple(control),
    )


def build_design(store, patient_ids, confounders):
    """Numeric design matrix for the confounders, plus column names.

    Categorical race is one-hot encoded with the first (sorted) category
    dropped; missing numeric values are mean-imputed within the cohort.
    """
    columns, names = [], []
    patients = [store.patients[pid] for pid in patient_ids]
    for name in confounders:
        if name == "race":
            categories = sorted({p.race for p in patients})
            for cat in categories[1:]:
                columns.append([1.0 if p.race == cat else 0.0 for p in patients])
                names.append(f"race={cat}")
            continue
        raw = [derived_attribute(p, name) for p in patients]
        present = [v for v in raw if v is not None]
        fill = sum(present) / len(present) if present else 0.0
        columns.append([v if v is not None else fill for v in raw])
        names.append(name)
    if not columns:
        return np.zeros((len(patients), 0)), []
    return np.array(columns, dtype=float).T, names


def fit_propensity(store, cohort, confounders=None, max_iter=100, tol=1e-8):
    """Logistic propensity model P(treated | confounders) via IRLS."""
    if not cohort.treated_ids or not cohort.control_ids:
        raise EmptyArmError("propensity model needs both arms nonempty")
    confounders = tuple(confounders if confounders is not None
                        else store.confounder_names)
    ids = list(cohort.treated_ids) + list(cohort.control_ids)
    y = np.array([1.0] * len(cohort.treated_ids) + [0.0] * len(cohort.control_ids))
    X, names = build_design(store, ids, confounders)

    # constant columns carry no information and would alias the intercept
    keep = [j for j in range(X.shape[1]) if np.ptp(X[:, j]) > 0]
    X = X[:, keep]
    names = [names[j] for j in keep]

    model = IrlsLogisticRegression(max_iter=max_iter, tol=tol)
    model.fit(X, y, column_names=names)
    scores = model.predict_proba(X)[:, 1]
    return PropensityModel(
        intercept=model.intercept_,
        coefficients=dict(zip(names, (float(b) for b in model.coef_))),
        converged=model.converged_,
        iterations=model.n_iter_,
        scores=dict(zip(ids, (float(s) for s in scores))),
    )


def caliper_from_scores(scores):
    """Unscaled median absolute deviation of the propensity scores."""
    arr = np.asarray(sorted(scores), dtype=float)
    med = float(np.median(arr))
    return float(np.median(np.abs(arr - med)))


def match_cohort(cohort, scores):
    """Greedy 1:1 caliper matching without replacement (MAD caliper)."""
    if not cohort.treated_ids or not cohort.control_ids:
        raise EmptyArmError("matching needs both arms nonempty")
    caliper = caliper_from_scores([scores[pid] for pid in cohort.all_ids])
    return match_cohort_with_caliper(cohort, scores, caliper)


def match_cohort_with_caliper(cohort, scores, caliper):
    """Greedy 1:1 nearest-neighbor matching with an explicit caliper."""
    if not cohort.treated_ids or not cohort.control_ids:
        raise EmptyArmError("matching needs both arms nonempty")

    controls = sorted(cohort.control_ids, key=lambda pid: (scores[pid], pid))
    cs = [scores[pid] for pid in controls]
    m = len(controls)
    # doubly linked list over sorted positions; -1 / m are sentinels.
    # Removed nodes keep stale pointers, which still walk toward live ones.
    nxt = list(range(1, m + 1))
    prv = list(range(-1, m))
    dead = [False] * m

    def group_min(pos, direction):
        """Smallest control id among live controls tied at cs[pos]."""
        best_id, best_pos = controls[pos], pos
        score = cs[pos]
        j = prv[pos] if direction == "left" else nxt[pos]
        while 0 <= j < m and cs[j] == score:
            if controls[j] < best_id:
                best_id, best_pos = controls[j], j
            j = prv[j] if direction == "left" else nxt[j]
        return best_id, best_pos

    pairs = []
    discarded = 0
    alive = m
    for tid in sorted(cohort.treated_ids):
        if alive == 0:
            discarded += 1
            continue
        t_score = scores[tid]
        pos = bisect.bisect_left(cs, t_score)
        right = pos
        while right < m and dead[right]:
            right = nxt[right]
        left = pos - 1
        while left >= 0 and dead[left]:
            left = prv[left]

        d_left = t_score - cs[left] if left >= 0 else None
        d_right = cs[right] - t_score if right < m else None
        if d_left is None or (d_right is not None and d_right < d_left):
            delta = d_right
            chosen_id, chosen_pos = group_min(right, "right")
        elif d_right is None or d_left < d_right:
            delta = d_left
            chosen_id, chosen_pos = group_min(left, "left")
        else:  # equal distance on both sides: smallest id wins
            delta = d_left
            lid, lpos = group_min(left, "left")
            rid, rpos = group_min(right, "right")
            chosen_id, chosen_pos = (lid, lpos) if lid < rid else (rid, rpos)

        if delta <= caliper:
            pairs.append((tid, chosen_id))
            p, n = prv[chosen_pos], nxt[chosen_pos]
            if p >= 0:
                nxt[p] = n
            if n < m:
                prv[n] = p
            dead[chosen_pos] = True
            alive -= 1
        else:
            discarded += 1

    return MatchedCohort(
        candidate_id=cohort.candidate_id,
        pairs=tuple(pairs),
        caliper=caliper,
        discarded_treated=discarded,
    )


def balance_diagnostics(store, matched, confounders=None):
    """Standardized mean differences per design column on matched samples."""
    if len(matched.pairs) < 2:
        raise EmptyArmError("balance diagnostics need at least 2 pairs")
    confounders = tuple(confounders if confounders is not None
                        else store.confounder_names)
    nt = len(matched.pairs)
    x_all, names = build_design(
        store, list(matched.treated_ids) + list(matched.control_ids), confounders
    )
    xt, xc = x_all[:nt], x_all[nt:]
    out = {}
    for j, name in enumerate(names):
        mt, mc = float(np.mean(xt[:, j])), float(np.mean(xc[:, j]))
        vt = float(np.var(xt[:, j], ddof=1))
        vc = float(np.var(xc[:, j], ddof=1))
        pooled = ((vt + vc) / 2.0) ** 0.5
        if pooled == 0.0:
            out[name] = 0.0 if mt == mc else float("inf")
        else:
            out[name] = (mt - mc) / pooled
    return out
