"""Temporal detail profiles per candidate and group-level aggregates."""

from __future__ import annotations

from dataclasses import dataclass

from .ehr import HOURS_PER_DAY
from .metrics import (
    KIDNEY_INDICATOR,
    LIVER_INDICATOR,
    age_decade_bin,
    imputed_table,
)

N_AGE_BINS = 10
ARMS = ("treatment", "control")


@dataclass(frozen=True)
class TemporalProfile:
    candidate_id: int
    gender_dist: dict  # arm -> {"male": p, "female": p}
    age_hist: dict  # arm -> [p per decade bin]
    kidney_curve: dict  # arm -> [(day, abnormal_fraction or None)]
    liver_curve: dict
    hr: float | None
    hr_ci95: tuple | None

    def to_dict(self):
        return {
            "candidate_id": self.candidate_id,
            "gender_dist": self.gender_dist,
            "age_hist": self.age_hist,
            "kidney_curve": {a: [list(p) for p in c] for a, c in self.kidney_curve.items()},
            "liver_curve": {a: [list(p) for p in c] for a, c in self.liver_curve.items()},
            "hr": self.hr,
            "hr_ci95": list(self.hr_ci95) if self.hr_ci95 else None,
        }


def _demographics(store, ids):
    if not ids:
        return {"male": 0.0, "female": 0.0}, [0.0] * N_AGE_BINS
    genders = {"male": 0, "female": 0}
    bins = [0] * N_AGE_BINS
    for pid in ids:
        p = store.patients[pid]
        genders[p.gender] += 1
        bins[age_decade_bin(p.age)] += 1
    n = len(ids)
    return (
        {g: c / n for g, c in genders.items()},
        [c / n for c in bins],
    )


def _abnormal_curve(store, ids, indicator, horizon):
    """Per-day fraction of alive patients whose imputed value is abnormal."""
    ref = store.range_for(indicator)
    days = int(horizon // HOURS_PER_DAY)
    table = imputed_table(store, ids, indicator, horizon)
    curve = []
    for d in range(days):
        n = abnormal = 0
        for pid, values in table.items():
            p = store.patients[pid]
            if p.death_time is not None and p.death_time <= d * HOURS_PER_DAY:
                continue
            if values is None or values[d] is None:
                continue
            n += 1
            if not ref.contains(values[d]):
                abnormal += 1
        curve.append((d, abnormal / n if n else None))
    return curve


def profile_candidate(store, matched, coxfit, horizon):
    """Temporal detail profile for one matched candidate."""
    arm_ids = {"treatment": matched.treated_ids, "control": matched.control_ids}
    gender_dist, age_hist = {}, {}
    kidney, liver = {}, {}
    for arm, ids in arm_ids.items():
        gender_dist[arm], age_hist[arm] = _demographics(store, ids)
        if ids:
            kidney[arm] = _abnormal_curve(store, ids, KIDNEY_INDICATOR, horizon)
            liver[arm] = _abnormal_curve(store, ids, LIVER_INDICATOR, horizon)
        else:
            kidney[arm] = []
            liver[arm] = []
    return TemporalProfile(
        candidate_id=matched.candidate_id,
        gender_dist=gender_dist,
        age_hist=age_hist,
        kidney_curve=kidney,
        liver_curve=liver,
        hr=coxfit.hr if coxfit else None,
        hr_ci95=coxfit.ci95 if coxfit else None,
    )


@dataclass(frozen=True)
class GroupProfile:
    member_ids: tuple
    gender_dist: dict  # arm -> {gender -> (mean, sd)}
    age_hist: dict  # arm -> [(mean, sd) per bin]
    kidney_curve: dict  # arm -> [(day, mean, sd) ...], absent points excluded
    liver_curve: dict
    metric_means: dict  # metric name -> mean over non-degenerate members

    def to_dict(self):
        return {
            "member_ids": list(self.member_ids),
            "gender_dist": {
                a: {g: list(ms) for g, ms in d.items()}
                for a, d in self.gender_dist.items()
            },
            "age_hist": {a: [list(ms) for ms in h] for a, h in self.age_hist.items()},
            "kidney_curve": {a: [list(p) for p in c] for a, c in self.kidney_curve.items()},
            "liver_curve": {a: [list(p) for p in c] for a, c in self.liver_curve.items()},
            "metric_means": self.metric_means,
        }


def _mean_sd(values):
    n = len(values)
    mean = sum(values) / n
    var = sum((v - mean) ** 2 for v in values) / n  # population sd: 0 for n=1
    return mean, var ** 0.5


def _aggregate_curves(curves):
    """Pointwise mean/sd across members; absent points excluded pairwise."""
    by_day = {}
    for curve in curves:
        for day, value in curve:
            if value is not None:
                by_day.setdefault(day, []).append(value)
    return [(day, *_mean_sd(vals)) for day, vals in sorted(by_day.items())]


def aggregate_group(profiles, outcomes):
    """Group-level mean/sd over member profiles plus five-metric means."""
    if not profiles:
        raise ValueError("cannot aggregate an empty group")
    if len(profiles) != len(outcomes):
        raise ValueError("profiles and outcomes must align")

    gender_dist, age_hist, kidney, liver = {}, {}, {}, {}
    for arm in ARMS:
        gender_dist[arm] = {
            g: _mean_sd([p.gender_dist[arm][g] for p in profiles])
            for g in ("male", "female")
        }
        age_hist[arm] = [
            _mean_sd([p.age_hist[arm][b] for p in profiles]) for b in range(N_AGE_BINS)
        ]
        kidney[arm] = _aggregate_curves([p.kidney_curve[arm] for p in profiles])
        liver[arm] = _aggregate_curves([p.liver_curve[arm] for p in profiles])

    usable = [o for o in outcomes if o.status == "ok"]
    metric_means = {}
    for name, getter in (
        ("n", lambda o: o.n_patients),
        ("diversity", lambda o: o.diversity),
        ("hr", lambda o: o.hazard.hr if o.hazard else None),
        ("kidney_rr", lambda o: o.kidney_rr),
        ("liver_rr", lambda o: o.liver_rr),
    ):
        vals = [getter(o) for o in usable if getter(o) is not None]
        metric_means[name] = sum(vals) / len(vals) if vals else None

    return GroupProfile(
        member_ids=tuple(p.candidate_id for p in profiles),
        gender_dist=gender_dist,
        age_hist=age_hist,
        kidney_curve=kidney,
        liver_curve=liver,
        metric_means=metric_means,
    )
