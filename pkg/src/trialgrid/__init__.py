"""Data-driven exploration of clinical-trial eligibility criteria.

Enumerates criterion candidates from adjustable criteria text, builds
propensity-matched cohorts per candidate, and scores each candidate on
five outcome metrics (patient count, diversity entropy, hazard ratio
with CI and p-value, kidney and liver risk ratios) plus temporal detail
profiles.
"""

from .cohort import (
    EligibleCohort,
    MatchedCohort,
    PropensityModel,
    balance_diagnostics,
    fit_propensity,
    match_cohort,
    select_eligible,
)
from .cox import CoxFit, CoxPHModel
from .dsl import CriterionSpec, eligibility, evaluate_predicate, parse_spec, serialize_spec
from .ehr import (
    ClinicalEvent,
    LabSeries,
    PatientRecord,
    PatientStore,
    ReferenceRange,
    derived_attribute,
    load_store,
)
from .grid import CandidateGrid, enumerate_candidates, filter_by_binding
from .logistic import IrlsLogisticRegression
from .metrics import (
    EngineConfig,
    OutcomeVector,
    RiskSeries,
    SurvivalRecord,
    build_survival,
    diversity_entropy,
    evaluate_candidate,
    fit_cox,
    impute_series,
    organ_risk_ratio,
)
from .profiles import GroupProfile, TemporalProfile, aggregate_group, profile_candidate
from .session import Session, Stage, create_stage, append_record, load_session, save_session
from .synth import SyntheticConfig, generate_synthetic, write_store
from .sweep import evaluate_grid, results_csv, results_json, spec_hash

__version__ = "0.1.0"
