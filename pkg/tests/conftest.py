import os

import pytest

from trialgrid.ehr import ClinicalEvent, LabSeries, PatientRecord, PatientStore, ReferenceRange
from trialgrid.synth import SyntheticConfig, generate_synthetic

SPEC_DIR = os.path.join(os.path.dirname(__file__), "..", "specs")

DEFAULT_RANGES = {
    "SCr": ReferenceRange("SCr", 0.6, 1.3),
    "AST": ReferenceRange("AST", 8.0, 40.0),
}


def lab(indicator, day_values):
    """LabSeries with one midday point per (day, value) pair."""
    points = tuple((day * 24.0 + 12.0, float(v)) for day, v in sorted(day_values))
    return LabSeries(indicator, points)


def make_patient(pid, age=50, gender="male", race="white", height=1.75,
                 weight=70.0, discharge=None, death=None, events=(), labs=None):
    return PatientRecord(
        patient_id=pid,
        age=age,
        gender=gender,
        race=race,
        height=height,
        weight=weight,
        discharge_time=discharge,
        death_time=death,
        events=tuple(events),
        labs=labs or {},
    )


def make_store(patients, confounders=("age", "gender_code"), ranges=None):
    return PatientStore(
        patients={p.patient_id: p for p in patients},
        dictionary=dict(ranges or DEFAULT_RANGES),
        confounder_names=tuple(confounders),
    )


def event(code, start, kind="medication", end=None):
    return ClinicalEvent(kind, code, start, end)


def pytest_terminal_summary(terminalreporter):
    """Echo the acceptance checklist after the normal test summary."""
    try:
        from test_acceptance import CRITERION_LINES
    except ImportError:
        return
    if CRITERION_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERION_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def case1_text():
    with open(os.path.join(SPEC_DIR, "case1.tcl")) as fh:
        return fh.read()


@pytest.fixture(scope="session")
def case2_text():
    with open(os.path.join(SPEC_DIR, "case2.tcl")) as fh:
        return fh.read()


@pytest.fixture(scope="session")
def synth_store():
    """Moderate synthetic store shared by pipeline-level tests."""
    config = SyntheticConfig(
        n_patients=600,
        true_log_hr=-0.4,
        intervention_code="hydrocortisone",
        missing_rate=0.05,
    )
    return generate_synthetic(config, 42)
