"""Patient data model and CSV/JSON ingestion.

Times are hours since admission (admit = 0). Events may carry negative
start times for pre-admission history. Days, where needed downstream,
are floor(time / 24).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

from .errors import IngestError

HOURS_PER_DAY = 24.0
HOURS_PER_MONTH = 30 * HOURS_PER_DAY  # 1 month = 30 days by convention

EVENT_KINDS = ("diagnosis", "procedure", "medication", "device")
GENDERS = ("male", "female")


@dataclass(frozen=True)
class ClinicalEvent:
    kind: str
    code: str
    start_time: float
    end_time: float | None = None  # absent => point event

    def __post_init__(self):
        if self.kind not in EVENT_KINDS:
            raise IngestError(f"unknown event kind {self.kind!r}")
        if self.end_time is not None and self.end_time < self.start_time:
            raise IngestError(f"event {self.code!r}: end_time before start_time")


@dataclass(frozen=True)
class LabSeries:
    indicator: str
    points: tuple  # ((time_h, value), ...) with strictly increasing times

    def __post_init__(self):
        last = None
        for t, v in self.points:
            if not (math.isfinite(t) and math.isfinite(v)):
                raise IngestError(f"lab {self.indicator!r}: non-finite point")
            if last is not None and t <= last:
                raise IngestError(f"lab {self.indicator!r}: non-monotone times")
            last = t


@dataclass(frozen=True)
class ReferenceRange:
    indicator: str
    lower: float
    upper: float

    def __post_init__(self):
        if not self.lower < self.upper:
            raise IngestError(f"range for {self.indicator!r}: lower must be < upper")

    @property
    def midpoint(self):
        return (self.lower + self.upper) / 2.0

    def contains(self, value):
        return self.lower <= value <= self.upper


@dataclass(frozen=True)
class PatientRecord:
    patient_id: str
    age: int
    gender: str
    race: str
    height: float | None = None  # meters
    weight: float | None = None  # kilograms
    discharge_time: float | None = None
    death_time: float | None = None
    events: tuple = ()
    labs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.age < 0:
            raise IngestError(f"patient {self.patient_id}: negative age")
        if self.gender not in GENDERS:
            raise IngestError(f"patient {self.patient_id}: gender must be male/female")
        if self.height is not None and self.height <= 0:
            raise IngestError(f"patient {self.patient_id}: non-positive height")
        if self.weight is not None and self.weight <= 0:
            raise IngestError(f"patient {self.patient_id}: non-positive weight")
        if self.death_time is not None and self.discharge_time is not None:
            if self.death_time > self.discharge_time:
                raise IngestError(
                    f"patient {self.patient_id}: death_time after discharge_time"
                )
        term = self.terminator
        for ev in self.events:
            if term is not None and ev.start_time > term:
                raise IngestError(
                    f"patient {self.patient_id}: event {ev.code!r} after stay end"
                )
        for series in self.labs.values():
            for t, _ in series.points:
                if t < 0 or (term is not None and t > term):
                    raise IngestError(
                        f"patient {self.patient_id}: lab {series.indicator!r} "
                        f"timestamp outside stay"
                    )

    @property
    def terminator(self):
        """Stay end in hours; death governs when both are present."""
        if self.death_time is not None:
            return self.death_time
        return self.discharge_time

    @property
    def died(self):
        return self.death_time is not None

    @property
    def discharged(self):
        return self.discharge_time is not None and self.death_time is None

    @property
    def gender_code(self):
        return 1.0 if self.gender == "male" else 0.0

    @property
    def bmi(self):
        if self.height is None or self.weight is None:
            return None
        return self.weight / (self.height * self.height)


@dataclass(frozen=True)
class PatientStore:
    patients: dict  # patient_id -> PatientRecord
    dictionary: dict  # indicator -> ReferenceRange
    confounder_names: tuple

    def __post_init__(self):
        for required in ("SCr", "AST"):
            if required not in self.dictionary:
                raise IngestError(f"missing reference range for {required!r}")

    def __len__(self):
        return len(self.patients)

    def ids(self):
        return sorted(self.patients)

    def range_for(self, indicator):
        try:
            return self.dictionary[indicator]
        except KeyError:
            raise IngestError(f"no reference range for {indicator!r}") from None


BASE_ATTRIBUTES = ("age", "bmi", "gender_code", "height", "weight")


def derived_attribute(patient, name):
    """Resolve a scalar attribute by name; None when an ingredient is missing.

    Lab aggregates (min/max/count/mean over a full series) are exposed to
    the DSL separately; this handles the demographic scalars.
    """
    if name == "age":
        return float(patient.age)
    if name == "bmi":
        return patient.bmi
    if name == "gender_code":
        return patient.gender_code
    if name == "height":
        return patient.height
    if name == "weight":
        return patient.weight
    raise KeyError(f"unknown attribute {name!r}")


def _parse_float(text, *, file, line, column, optional=False):
    text = text.strip()
    if text == "":
        if optional:
            return None
        raise IngestError(f"missing required value for {column}", file=file, line=line)
    try:
        return float(text)
    except ValueError:
        raise IngestError(
            f"bad numeric value {text!r} for {column}", file=file, line=line
        ) from None


def load_store(patients_file, events_file, labs_file, dictionary_file):
    """Load and cross-validate the four input files into a PatientStore."""
    with open(dictionary_file) as fh:
        try:
            dict_doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise IngestError(f"invalid JSON: {exc}", file=str(dictionary_file)) from None
    ranges = {
        name: ReferenceRange(name, float(lo), float(hi))
        for name, (lo, hi) in dict_doc.get("ranges", {}).items()
    }
    confounders = tuple(dict_doc.get("confounders", []))

    rows = {}
    with open(patients_file, newline="") as fh:
        reader = csv.DictReader(fh)
        for lineno, row in enumerate(reader, start=2):
            pid = row["patient_id"].strip()
            if pid in rows:
                raise IngestError(
                    f"duplicate patient_id {pid!r}", file=str(patients_file), line=lineno
                )
            rows[pid] = (lineno, row)

    events = {pid: [] for pid in rows}
    with open(events_file, newline="") as fh:
        reader = csv.DictReader(fh)
        for lineno, row in enumerate(reader, start=2):
            pid = row["patient_id"].strip()
            if pid not in rows:
                raise IngestError(
                    f"event references unknown patient {pid!r}",
                    file=str(events_file),
                    line=lineno,
                )
            events[pid].append(
                ClinicalEvent(
                    kind=row["kind"].strip(),
                    code=row["code"].strip(),
                    start_time=_parse_float(
                        row["start_h"], file=str(events_file), line=lineno,
                        column="start_h",
                    ),
                    end_time=_parse_float(
                        row.get("end_h", ""), file=str(events_file), line=lineno,
                        column="end_h", optional=True,
                    ),
                )
            )

    lab_points = {pid: {} for pid in rows}
    with open(labs_file, newline="") as fh:
        reader = csv.DictReader(fh)
        for lineno, row in enumerate(reader, start=2):
            pid = row["patient_id"].strip()
            if pid not in rows:
                raise IngestError(
                    f"lab references unknown patient {pid!r}",
                    file=str(labs_file),
                    line=lineno,
                )
            indicator = row["indicator"].strip()
            t = _parse_float(row["time_h"], file=str(labs_file), line=lineno,
                             column="time_h")
            v = _parse_float(row["value"], file=str(labs_file), line=lineno,
                             column="value")
            series = lab_points[pid].setdefault(indicator, [])
            if series and t <= series[-1][0]:
                raise IngestError(
                    f"non-monotone lab times for {pid!r}/{indicator!r}",
                    file=str(labs_file),
                    line=lineno,
                )
            series.append((t, v))

    patients = {}
    for pid, (lineno, row) in rows.items():
        try:
            patients[pid] = PatientRecord(
                patient_id=pid,
                age=int(row["age"]),
                gender=row["gender"].strip(),
                race=row["race"].strip(),
                height=_parse_float(row.get("height_m", ""), file=str(patients_file),
                                    line=lineno, column="height_m", optional=True),
                weight=_parse_float(row.get("weight_kg", ""), file=str(patients_file),
                                    line=lineno, column="weight_kg", optional=True),
                discharge_time=_parse_float(row.get("discharge_h", ""),
                                            file=str(patients_file), line=lineno,
                                            column="discharge_h", optional=True),
                death_time=_parse_float(row.get("death_h", ""),
                                        file=str(patients_file), line=lineno,
                                        column="death_h", optional=True),
                events=tuple(events[pid]),
                labs={
                    ind: LabSeries(ind, tuple(pts))
                    for ind, pts in sorted(lab_points[pid].items())
                },
            )
        except IngestError as exc:
            if exc.file is None:
                raise IngestError(str(exc), file=str(patients_file), line=lineno) from None
            raise

    return PatientStore(patients=patients, dictionary=ranges,
                        confounder_names=confounders)
