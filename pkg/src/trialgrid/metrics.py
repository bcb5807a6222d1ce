"""Per-candidate outcome metrics: patient count, diversity entropy,
Cox hazard ratio with CI and p-value, and daily kidney/liver risk ratios
with discharge-aware imputation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import cohort as cohort_mod
from .cox import CoxError, CoxPHModel
from .ehr import HOURS_PER_DAY, derived_attribute
from .errors import EmptyArmError, TrialGridError

KIDNEY_INDICATOR = "SCr"
LIVER_INDICATOR = "AST"

MAX_MISSING_FRACTION = 0.5  # discard series with >50% missing pre-terminator days
MAX_GAP_DAYS = 3  # discard series with any longer run of missing days


@dataclass(frozen=True)
class EngineConfig:
    horizon_hours: float = 672.0  # 28 days
    cox_covariates: tuple = ()  # extra covariates beyond the treatment term
    confounders: tuple | None = None  # None = use the store's list
    ties: str = "breslow"
    logit_caliper: bool = False  # 0.2 * SD of logit(score) instead of MAD
    max_candidates: int = 100_000

    @property
    def horizon_days(self):
        return int(self.horizon_hours // HOURS_PER_DAY)

    def to_dict(self):
        return {
            "horizon_hours": self.horizon_hours,
            "cox_covariates": list(self.cox_covariates),
            "confounders": list(self.confounders) if self.confounders else None,
            "ties": self.ties,
            "logit_caliper": self.logit_caliper,
            "max_candidates": self.max_candidates,
        }


@dataclass(frozen=True)
class SurvivalRecord:
    patient_id: str
    time: float
    event: bool
    treated: bool
    covariates: tuple = ()


@dataclass(frozen=True)
class RiskSeries:
    organ: str
    daily_ratios: tuple  # ((day, ratio or None), ...)
    mean_ratio: float | None


@dataclass(frozen=True)
class OutcomeVector:
    candidate_id: int
    n_patients: int
    diversity: float | None
    hazard: object | None  # CoxFit
    kidney_rr: float | None
    liver_rr: float | None
    status: str  # "ok" | "degenerate"
    reason: str | None = None

    def to_record(self, bindings):
        hz = self.hazard
        return {
            "candidate_id": self.candidate_id,
            "bindings": dict(bindings),
            "n": self.n_patients,
            "diversity": self.diversity,
            "hr": hz.hr if hz else None,
            "hr_lo": hz.ci95[0] if hz else None,
            "hr_hi": hz.ci95[1] if hz else None,
            "p": hz.p_value if hz else None,
            "kidney_rr": self.kidney_rr,
            "liver_rr": self.liver_rr,
            "status": self.status,
            "reason": self.reason,
        }


def build_survival(store, matched, horizon, covariate_names=()):
    """One survival record per matched patient.

    Death within the horizon is the event; otherwise the patient is
    censored at discharge or administratively at the horizon.
    """
    records = []
    treated_set = set(matched.treated_ids)
    raw_covs = {}
    for pid in matched.all_ids:
        p = store.patients[pid]
        raw_covs[pid] = [derived_attribute(p, name) for name in covariate_names]
    # mean-impute missing covariate ingredients within the matched cohort
    fills = []
    for j in range(len(covariate_names)):
        vals = [raw_covs[pid][j] for pid in matched.all_ids if raw_covs[pid][j] is not None]
        fills.append(sum(vals) / len(vals) if vals else 0.0)

    for pid in matched.all_ids:
        p = store.patients[pid]
        if p.death_time is not None and p.death_time <= horizon:
            time, event = p.death_time, True
        else:
            time = horizon
            if p.discharge_time is not None:
                time = min(p.discharge_time, horizon)
            event = False
        covs = tuple(
            v if v is not None else fills[j] for j, v in enumerate(raw_covs[pid])
        )
        records.append(
            SurvivalRecord(
                patient_id=pid,
                time=float(time),
                event=event,
                treated=pid in treated_set,
                covariates=covs,
            )
        )
    return records


def fit_cox(records, covariate_names=(), ties="breslow", max_iter=100, tol=1e-9):
    """Fit the treatment-effect Cox model; treatment term enters last."""
    treated = {r.treated for r in records}
    if len(treated) < 2:
        raise CoxError("both treatment values must be present")
    times = np.array([r.time for r in records])
    events = np.array([r.event for r in records])
    x = np.array(
        [list(r.covariates) + [1.0 if r.treated else 0.0] for r in records]
    )
    model = CoxPHModel(max_iter=max_iter, tol=tol, ties=ties)
    model.fit(times, events, x)
    return model.summary(treatment_index=-1)


def age_decade_bin(age):
    """Decade bins 0-9 ... 80-89, with 90+ pooled into the last bin."""
    return min(int(age) // 10, 9)


def diversity_entropy(patients):
    """Shannon entropy (natural log) of the joint gender x age-decade mix."""
    if not patients:
        raise ValueError("diversity of an empty patient list is undefined")
    counts = {}
    for p in patients:
        key = (p.gender, age_decade_bin(p.age))
        counts[key] = counts.get(key, 0) + 1
    n = len(patients)
    return -sum((c / n) * math.log(c / n) for c in counts.values()) + 0.0


def impute_series(series, patient, horizon, ref_range):
    """Daily imputed values over the horizon, or None when unusable.

    Per-day value is the mean of that day's observations. Interior gaps
    are linearly interpolated; leading/trailing gaps before the stay end
    carry the nearest observation. Post-discharge days are filled with
    the reference-range midpoint (assumed recovery); post-death days are
    absent. Series missing more than half their pre-terminator days, or
    containing a gap longer than MAX_GAP_DAYS, are discarded.
    """
    days = int(horizon // HOURS_PER_DAY)
    if days <= 0:
        return None

    term = patient.terminator
    term_day = days - 1
    if term is not None:
        term_day = min(int(term // HOURS_PER_DAY), days - 1)

    sums = [0.0] * days
    counts = [0] * days
    if series is not None:
        for t, v in series.points:
            d = int(t // HOURS_PER_DAY)
            if 0 <= d < days:
                sums[d] += v
                counts[d] += 1
    observed = [sums[d] / counts[d] if counts[d] else None for d in range(days)]

    region = observed[: term_day + 1]
    missing = sum(1 for v in region if v is None)
    if missing > MAX_MISSING_FRACTION * len(region):
        return None
    run = longest = 0
    for v in region:
        run = run + 1 if v is None else 0
        longest = max(longest, run)
    if longest > MAX_GAP_DAYS:
        return None

    filled = _fill_gaps(region)
    out = [None] * days
    out[: term_day + 1] = filled
    if patient.died:
        death_day = int(patient.death_time // HOURS_PER_DAY)
        for d in range(death_day + 1, days):
            out[d] = None
    elif patient.discharged:
        for d in range(term_day + 1, days):
            out[d] = ref_range.midpoint
    return out


def _fill_gaps(values):
    """Linear interpolation of interior gaps; edges carry nearest value."""
    known = [i for i, v in enumerate(values) if v is not None]
    if not known:
        return list(values)
    out = list(values)
    first, last = known[0], known[-1]
    for i in range(first):
        out[i] = values[first]
    for i in range(last + 1, len(values)):
        out[i] = values[last]
    for a, b in zip(known, known[1:]):
        for i in range(a + 1, b):
            frac = (i - a) / (b - a)
            out[i] = values[a] + frac * (values[b] - values[a])
    return out


def imputed_table(store, patient_ids, indicator, horizon):
    """Imputed daily values per patient; unusable series map to None."""
    ref = store.range_for(indicator)
    table = {}
    for pid in patient_ids:
        p = store.patients[pid]
        table[pid] = impute_series(p.labs.get(indicator), p, horizon, ref)
    return table


def organ_risk_ratio(store, matched, indicator, horizon, organ=None):
    """Daily abnormal-proportion ratios (treatment / control), averaged.

    Proportions use the Haldane-Anscombe 0.5/1 continuity correction so a
    zero-abnormal control arm still yields a finite ratio. A day with no
    usable patients in either arm is absent.
    """
    if not matched.pairs:
        raise EmptyArmError("risk ratio needs matched pairs")
    ref = store.range_for(indicator)
    days = int(horizon // HOURS_PER_DAY)
    arms = {
        "t": imputed_table(store, matched.treated_ids, indicator, horizon),
        "c": imputed_table(store, matched.control_ids, indicator, horizon),
    }
    ratios = []
    for d in range(days):
        props = {}
        for arm, table in arms.items():
            n = a = 0
            for pid, values in table.items():
                p = store.patients[pid]
                if p.death_time is not None and p.death_time <= d * HOURS_PER_DAY:
                    continue  # not alive at day d
                if values is None or values[d] is None:
                    continue
                n += 1
                if not ref.contains(values[d]):
                    a += 1
            props[arm] = (a, n)
        (at, nt), (ac, nc) = props["t"], props["c"]
        if nt == 0 or nc == 0:
            ratios.append((d, None))
        else:
            ratios.append(
                (d, ((at + 0.5) / (nt + 1.0)) / ((ac + 0.5) / (nc + 1.0)))
            )
    present = [r for _, r in ratios if r is not None]
    mean = sum(present) / len(present) if present else None
    return RiskSeries(
        organ=organ or ("kidney" if indicator == KIDNEY_INDICATOR else "liver"),
        daily_ratios=tuple(ratios),
        mean_ratio=mean,
    )


@dataclass
class CandidateResult:
    """Everything one candidate evaluation yields."""

    assignment: object
    outcome: OutcomeVector
    eligible: object = None
    matched: object = None
    smd: dict | None = None
    kidney: RiskSeries | None = None
    liver: RiskSeries | None = None
    profile: object = None


def evaluate_candidate(store, spec, assignment, config=None):
    """Full per-candidate pipeline; failures degrade to a degenerate
    OutcomeVector, never an exception."""
    from . import profiles  # local import to avoid a cycle

    config = config or EngineConfig()
    cid = assignment.candidate_id
    eligible = cohort_mod.select_eligible(store, spec, assignment.bindings, cid)
    n = len(eligible.treated_ids) + len(eligible.control_ids)
    all_eligible = [
        store.patients[pid] for pid in eligible.treated_ids + eligible.control_ids
    ]
    diversity = diversity_entropy(all_eligible) if all_eligible else None

    def degenerate(reason, hazard=None, kidney=None, liver=None, **extra):
        outcome = OutcomeVector(
            candidate_id=cid,
            n_patients=n,
            diversity=diversity,
            hazard=hazard,
            kidney_rr=kidney.mean_ratio if kidney else None,
            liver_rr=liver.mean_ratio if liver else None,
            status="degenerate",
            reason=reason,
        )
        return CandidateResult(
            assignment=assignment, outcome=outcome, eligible=eligible,
            kidney=kidney, liver=liver, **extra,
        )

    if not eligible.treated_ids or not eligible.control_ids:
        return degenerate("empty_arm")

    confounders = (config.confounders if config.confounders is not None
                   else store.confounder_names)
    propensity = cohort_mod.fit_propensity(store, eligible, confounders)
    scores = propensity.scores
    if config.logit_caliper:
        logits = {pid: math.log(s / (1.0 - s)) for pid, s in scores.items()}
        sd = float(np.std(list(logits.values()), ddof=0))
        matched = cohort_mod.match_cohort_with_caliper(eligible, logits, 0.2 * sd)
    else:
        matched = cohort_mod.match_cohort(eligible, scores)

    if not matched.pairs:
        return degenerate("no_matched_pairs", matched=matched)

    smd = None
    if len(matched.pairs) >= 2:
        smd = cohort_mod.balance_diagnostics(store, matched, confounders)

    records = build_survival(store, matched, config.horizon_hours,
                             config.cox_covariates)
    try:
        hazard = fit_cox(records, config.cox_covariates, ties=config.ties)
    except CoxError:
        return degenerate("cox_failed", matched=matched, smd=smd)

    kidney = organ_risk_ratio(store, matched, KIDNEY_INDICATOR, config.horizon_hours)
    liver = organ_risk_ratio(store, matched, LIVER_INDICATOR, config.horizon_hours)
    profile = profiles.profile_candidate(store, matched, hazard,
                                         config.horizon_hours)

    status, reason = "ok", None
    if not hazard.converged:
        status, reason = "degenerate", "cox_non_convergence"
    elif kidney.mean_ratio is None or liver.mean_ratio is None:
        status, reason = "degenerate", "no_risk_days"

    outcome = OutcomeVector(
        candidate_id=cid,
        n_patients=n,
        diversity=diversity,
        hazard=hazard,
        kidney_rr=kidney.mean_ratio,
        liver_rr=liver.mean_ratio,
        status=status,
        reason=reason,
    )
    return CandidateResult(
        assignment=assignment,
        outcome=outcome,
        eligible=eligible,
        matched=matched,
        smd=smd,
        kidney=kidney,
        liver=liver,
        profile=profile,
    )
