"""Seeded synthetic EHR generator with plantable treatment effects.

Death times are exponential with a per-patient rate of
base_rate * exp(confounder effects + true_log_hr * treated), so the
planted hazard ratio between arms, conditional on confounders, is
exp(true_log_hr). Lab series are daily with configurable per-arm
abnormality rates and a missing-data rate.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, asdict

import numpy as np

from .ehr import (
    HOURS_PER_DAY,
    ClinicalEvent,
    LabSeries,
    PatientRecord,
    PatientStore,
    ReferenceRange,
)

RACES = ("asian", "black", "hispanic", "other", "white")
RACE_PROBS = (0.10, 0.15, 0.10, 0.05, 0.60)

DEFAULT_RANGES = {"SCr": (0.6, 1.3), "AST": (8.0, 40.0)}
DEFAULT_CONFOUNDERS = ("age", "gender_code", "race")


@dataclass(frozen=True)
class SyntheticConfig:
    n_patients: int = 1000
    treated_fraction: float = 0.5
    # effect on the treatment-assignment logit, per SD of the confounder
    confounder_effects: dict = field(
        default_factory=lambda: {"age": 0.4, "gender_code": 0.3}
    )
    # effect on the log hazard, per SD of the confounder
    survival_effects: dict = field(default_factory=lambda: {"age": 0.3})
    true_log_hr: float = 0.0
    base_death_rate_per_day: float = 0.02
    mean_stay_days: float = 14.0
    horizon_days: int = 28
    # indicator -> (treated abnormal rate, control abnormal rate)
    lab_abnormal_rates: dict = field(
        default_factory=lambda: {"SCr": (0.30, 0.20), "AST": (0.25, 0.20)}
    )
    missing_rate: float = 0.1
    demographic_missing_rate: float = 0.0
    intervention_code: str = "study_drug"
    ventilation_rate: float = 0.4
    prior_surgery_rate: float = 0.2
    ranges: dict = field(default_factory=lambda: dict(DEFAULT_RANGES))
    confounders: tuple = DEFAULT_CONFOUNDERS

    def validate(self):
        if self.n_patients <= 0:
            raise ValueError("n_patients must be positive")
        if not 0.0 < self.treated_fraction < 1.0:
            raise ValueError("treated_fraction must lie in (0, 1)")
        if not 0.0 <= self.missing_rate < 1.0:
            raise ValueError("missing_rate must lie in [0, 1)")

    @classmethod
    def from_dict(cls, doc):
        kwargs = dict(doc)
        if "confounders" in kwargs:
            kwargs["confounders"] = tuple(kwargs["confounders"])
        if "lab_abnormal_rates" in kwargs:
            kwargs["lab_abnormal_rates"] = {
                k: tuple(v) for k, v in kwargs["lab_abnormal_rates"].items()
            }
        return cls(**kwargs)

    def to_dict(self):
        doc = asdict(self)
        doc["confounders"] = list(self.confounders)
        doc["lab_abnormal_rates"] = {
            k: list(v) for k, v in self.lab_abnormal_rates.items()
        }
        return doc


def _z(config, name, patient_values):
    """Rough standardization for the generator's confounder effects."""
    if name == "age":
        return (patient_values["age"] - 54.0) / 21.0
    if name == "gender_code":
        return patient_values["gender_code"] - 0.5
    return 0.0


def generate_synthetic(config, seed):
    """Deterministic synthetic PatientStore for (config, seed)."""
    config.validate()
    rng = np.random.default_rng(seed)
    horizon_h = config.horizon_days * HOURS_PER_DAY
    intercept = math.log(config.treated_fraction / (1.0 - config.treated_fraction))

    patients = {}
    width = len(str(config.n_patients))
    for i in range(config.n_patients):
        pid = f"p{i:0{width}d}"
        age = int(rng.integers(18, 91))
        gender = "male" if rng.random() < 0.5 else "female"
        race = RACES[rng.choice(len(RACES), p=RACE_PROBS)]
        height = float(np.clip(rng.normal(1.70, 0.10), 1.40, 2.10))
        weight = float(np.clip(rng.normal(78.0, 18.0), 40.0, 200.0))
        if config.demographic_missing_rate > 0:
            if rng.random() < config.demographic_missing_rate:
                height = None
            if rng.random() < config.demographic_missing_rate:
                weight = None
        values = {"age": age, "gender_code": 1.0 if gender == "male" else 0.0}

        logit = intercept + sum(
            eff * _z(config, name, values)
            for name, eff in config.confounder_effects.items()
        )
        treated = rng.random() < 1.0 / (1.0 + math.exp(-logit))

        log_rate = math.log(config.base_death_rate_per_day / HOURS_PER_DAY)
        log_rate += sum(
            eff * _z(config, name, values)
            for name, eff in config.survival_effects.items()
        )
        if treated:
            log_rate += config.true_log_hr
        death_draw = float(rng.exponential(1.0 / math.exp(log_rate)))
        stay = max(HOURS_PER_DAY, float(rng.exponential(config.mean_stay_days * HOURS_PER_DAY)))
        if death_draw <= stay:
            death_time, discharge_time = death_draw, None
            terminator = death_draw
        else:
            death_time, discharge_time = None, stay
            terminator = stay

        events = []
        if treated:
            events.append(ClinicalEvent("medication", config.intervention_code, 0.0))
        if rng.random() < config.ventilation_rate:
            start = float(rng.uniform(0.0, min(terminator, 72.0)))
            events.append(ClinicalEvent("device", "mechanical_ventilation", start))
        if rng.random() < config.prior_surgery_rate:
            start = -float(rng.uniform(1.0, 365.0 * HOURS_PER_DAY))
            events.append(ClinicalEvent("procedure", "cardiac_surgery", start))

        labs = {}
        lab_end = min(terminator, horizon_h)
        arm_idx = 0 if treated else 1
        for indicator, rates in sorted(config.lab_abnormal_rates.items()):
            lo, hi = config.ranges[indicator]
            rate = rates[arm_idx]
            points = []
            day = 0
            while day * HOURS_PER_DAY + 12.0 <= lab_end:
                t = day * HOURS_PER_DAY + 12.0
                abnormal = rng.random() < rate
                if abnormal:
                    value = float(rng.uniform(hi * 1.05, hi * 1.60))
                else:
                    value = float(rng.uniform(lo, hi))
                keep = rng.random() >= config.missing_rate
                if keep:
                    points.append((t, value))
                day += 1
            if points:
                labs[indicator] = LabSeries(indicator, tuple(points))

        # severity-style series for criteria authoring (SOFA, GCS, AKI stage)
        sofa0 = int(np.clip(rng.poisson(6), 0, 24))
        gcs0 = int(rng.integers(3, 16))
        aki = int(rng.integers(0, 4))
        for indicator, base, lo_b, hi_b in (
            ("SOFA", sofa0, 0, 24),
            ("GCS", gcs0, 3, 15),
            ("AKI_stage", aki, 0, 3),
        ):
            points = []
            day = 0
            while day * HOURS_PER_DAY + 12.0 <= lab_end:
                t = day * HOURS_PER_DAY + 12.0
                drift = int(rng.integers(-1, 2)) if indicator != "AKI_stage" else 0
                value = float(np.clip(base + drift, lo_b, hi_b))
                if rng.random() >= config.missing_rate:
                    points.append((t, value))
                day += 1
            if points:
                labs[indicator] = LabSeries(indicator, tuple(points))

        patients[pid] = PatientRecord(
            patient_id=pid,
            age=age,
            gender=gender,
            race=race,
            height=height,
            weight=weight,
            discharge_time=discharge_time,
            death_time=death_time,
            events=tuple(events),
            labs=labs,
        )

    ranges = {
        name: ReferenceRange(name, lo, hi)
        for name, (lo, hi) in config.ranges.items()
    }
    return PatientStore(
        patients=patients,
        dictionary=ranges,
        confounder_names=tuple(config.confounders),
    )


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_store(store, outdir):
    """Write a store to the four-file CSV/JSON layout load_store reads."""
    import os

    os.makedirs(outdir, exist_ok=True)
    paths = {
        name: os.path.join(outdir, name)
        for name in ("patients.csv", "events.csv", "labs.csv", "dictionary.json")
    }
    with open(paths["patients.csv"], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["patient_id", "age", "gender", "race", "height_m", "weight_kg",
                    "discharge_h", "death_h"])
        for pid in store.ids():
            p = store.patients[pid]
            w.writerow([p.patient_id, p.age, p.gender, p.race, _fmt(p.height),
                        _fmt(p.weight), _fmt(p.discharge_time), _fmt(p.death_time)])
    with open(paths["events.csv"], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["patient_id", "kind", "code", "start_h", "end_h"])
        for pid in store.ids():
            for ev in store.patients[pid].events:
                w.writerow([pid, ev.kind, ev.code, _fmt(ev.start_time),
                            _fmt(ev.end_time)])
    with open(paths["labs.csv"], "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["patient_id", "indicator", "time_h", "value"])
        for pid in store.ids():
            for indicator in sorted(store.patients[pid].labs):
                for t, v in store.patients[pid].labs[indicator].points:
                    w.writerow([pid, indicator, _fmt(t), _fmt(v)])
    with open(paths["dictionary.json"], "w") as fh:
        json.dump(
            {
                "ranges": {
                    name: [r.lower, r.upper]
                    for name, r in sorted(store.dictionary.items())
                },
                "confounders": list(store.confounder_names),
            },
            fh,
            indent=2,
        )
        fh.write("\n")
    return paths
