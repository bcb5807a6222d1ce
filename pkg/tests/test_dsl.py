import pytest
from hypothesis import given, settings, strategies as st

from trialgrid import dsl
from trialgrid.dsl import (
    And, AtLeastK, Compare, HasEvent, Not, Or, ParamRef,
    eligibility, evaluate_predicate, parse_spec, serialize_spec, spec_to_dict,
)
from trialgrid.errors import DslError, EvaluationError

from conftest import event, lab, make_patient


class TestParse:
    def test_single_inclusion_with_adjustable(self):
        spec = parse_spec(
            "INCLUDE age: age >= $age_min\nADJUST $age_min IN {18, 60, 65}"
        )
        assert len(spec.inclusions) == 1
        assert spec.adjustables[0].values == (18, 60, 65)

    def test_parameterized_event_window(self):
        spec = parse_spec(
            'EXCLUDE surg: has_event("cardiac_surgery") within_last $m months\n'
            "ADJUST $m IN {0, 3, 6, 12}"
        )
        assert spec.exclusions[0].label == "surg"
        assert spec.adjustables[0].values == (0, 3, 6, 12)

    def test_unbound_param_named_in_error(self):
        with pytest.raises(DslError, match=r"\$x"):
            parse_spec("INCLUDE a: age >= $x")

    def test_unreferenced_adjustable(self):
        with pytest.raises(DslError, match=r"\$unused"):
            parse_spec("INCLUDE a: age >= 18\nADJUST $unused IN {1, 2}")

    def test_duplicate_labels(self):
        with pytest.raises(DslError, match="duplicate criterion labels"):
            parse_spec("INCLUDE a: age >= 18\nEXCLUDE a: age < 10")

    def test_syntax_error_has_position(self):
        with pytest.raises(DslError) as exc:
            parse_spec("INCLUDE a: age >= 18\nINCLUDE b: >= 5")
        assert exc.value.line == 2

    def test_empty_value_set_is_syntax_error(self):
        with pytest.raises(DslError):
            parse_spec("INCLUDE a: age >= $x\nADJUST $x IN {}")

    def test_duplicate_values_rejected(self):
        with pytest.raises(DslError, match="duplicate values"):
            parse_spec("INCLUDE a: age >= $x\nADJUST $x IN {18, 18}")

    def test_precedence_not_and_or(self):
        spec = parse_spec("INCLUDE a: not age < 10 and age < 90 or bmi > 40")
        pred = spec.inclusions[0].predicate
        assert isinstance(pred, Or)
        assert isinstance(pred.children[0], And)
        assert isinstance(pred.children[0].children[0], Not)

    def test_at_least_k_bounds(self):
        with pytest.raises(DslError, match="exceeds"):
            parse_spec("INCLUDE a: at_least 3 of [age >= 18, bmi < 30]")

    def test_comments_ignored(self):
        spec = parse_spec("# comment line\nINCLUDE a: age >= 18  # trailing\n")
        assert len(spec.inclusions) == 1


class TestSerialize:
    def test_case1_roundtrip(self, case1_text):
        spec = parse_spec(case1_text)
        assert parse_spec(serialize_spec(spec)) == spec

    def test_case2_roundtrip(self, case2_text):
        spec = parse_spec(case2_text)
        assert parse_spec(serialize_spec(spec)) == spec

    def test_empty_spec_roundtrip(self):
        spec = parse_spec("")
        assert spec.inclusions == ()
        assert parse_spec(serialize_spec(spec)) == spec

    def test_spec_to_dict_stable_fields(self, case1_text):
        doc = spec_to_dict(parse_spec(case1_text))
        assert {"intervention", "inclusions", "exclusions", "adjustables"} <= set(doc)
        assert doc["adjustables"][0]["name"] == "age_min"


# ---------------------------------------------------------------------------
# Generated-spec round-trip property

_attrs = st.sampled_from(["age", "bmi", "weight", "height"])
_ops = st.sampled_from(["<", "<=", ">", ">=", "=", "!="])
_numbers = st.integers(min_value=0, max_value=200)


def _leaf(param_names):
    options = [
        st.builds(
            lambda a, o, v: f"{a} {o} {v}", _attrs, _ops, _numbers
        ),
        st.builds(
            lambda fn, ind, o, v: f"{fn}({ind}) {o} {v}",
            st.sampled_from(["min", "max", "count", "mean"]),
            st.sampled_from(["SCr", "AST", "SOFA"]),
            _ops, _numbers,
        ),
        st.builds(lambda c: f'has_event("{c}")', st.sampled_from(["a", "b", "c"])),
        st.builds(
            lambda c, n: f'has_event("{c}") within_last {n} days',
            st.sampled_from(["a", "b"]), st.integers(1, 400),
        ),
    ]
    if param_names:
        options.append(
            st.builds(
                lambda a, o, p: f"{a} {o} ${p}",
                _attrs, _ops, st.sampled_from(param_names),
            )
        )
    return st.one_of(options)


def _pred(param_names):
    return st.recursive(
        _leaf(param_names),
        lambda children: st.one_of(
            st.builds(lambda a, b: f"({a} and {b})", children, children),
            st.builds(lambda a, b: f"({a} or {b})", children, children),
            st.builds(lambda a: f"not ({a})", children),
            st.builds(
                lambda xs: f"at_least {min(2, len(xs))} of [{', '.join(xs)}]",
                st.lists(children, min_size=1, max_size=3),
            ),
        ),
        max_leaves=6,
    )


@st.composite
def spec_texts(draw):
    n_params = draw(st.integers(0, 2))
    param_names = [f"p{i}" for i in range(n_params)]
    lines = []
    n_inc = draw(st.integers(1, 3))
    n_exc = draw(st.integers(0, 2))
    for i in range(n_inc):
        lines.append(f"INCLUDE inc{i}: " + draw(_pred(param_names)))
    for i in range(n_exc):
        lines.append(f"EXCLUDE exc{i}: " + draw(_pred(param_names)))
    if draw(st.booleans()):
        lines.append("INTERVENTION: " + draw(_pred(param_names)))
    for name in param_names:
        values = draw(
            st.lists(st.integers(0, 99), min_size=1, max_size=4, unique=True)
        )
        lines.append(f"ADJUST ${name} IN {{{', '.join(map(str, values))}}}")
        # guarantee the adjustable is referenced at least once
        lines.insert(0, f"INCLUDE ref_{name}: age >= ${name}")
    return "\n".join(lines)


@given(spec_texts())
@settings(max_examples=60, deadline=None)
def test_roundtrip_property(text):
    spec = parse_spec(text)
    assert parse_spec(serialize_spec(spec)) == spec


# ---------------------------------------------------------------------------
# Evaluation


class TestEvaluate:
    def test_age_comparison(self):
        pred = parse_spec("INCLUDE a: age >= 18").inclusions[0].predicate
        assert evaluate_predicate(pred, make_patient("p", age=17), {}) is False
        assert evaluate_predicate(pred, make_patient("p", age=18), {}) is True

    def test_at_least_two_of_three(self):
        pred = parse_spec(
            "INCLUDE a: at_least 2 of [age >= 18, bmi < 50, weight > 500]"
        ).inclusions[0].predicate
        assert evaluate_predicate(pred, make_patient("p", age=30), {}) is True

    def test_aggregate_max(self):
        pred = parse_spec("INCLUDE a: max(SOFA) <= 15").inclusions[0].predicate
        p = make_patient("p", labs={"SOFA": lab("SOFA", [(0, 10), (1, 16), (2, 12)])})
        assert evaluate_predicate(pred, p, {}) is False

    def test_absent_attribute_is_false(self):
        inc = parse_spec("INCLUDE a: bmi < 30").inclusions[0].predicate
        p = make_patient("p", height=None)
        assert evaluate_predicate(inc, p, {}) is False
        # and the negation is then true: the absence rule is per-comparison
        assert evaluate_predicate(Not(inc), p, {}) is True

    def test_unbound_binding_raises(self):
        pred = parse_spec(
            "INCLUDE a: age >= $x\nADJUST $x IN {18}"
        ).inclusions[0].predicate
        with pytest.raises(EvaluationError, match=r"\$x"):
            evaluate_predicate(pred, make_patient("p"), {})

    def test_boolean_sugar_for_events(self):
        pred = parse_spec("INCLUDE a: mechanical_ventilation = $v\nADJUST $v IN {true, false}").inclusions[0].predicate
        vented = make_patient("p", events=[event("mechanical_ventilation", 5.0, kind="device")])
        plain = make_patient("q")
        assert evaluate_predicate(pred, vented, {"v": True}) is True
        assert evaluate_predicate(pred, plain, {"v": True}) is False
        assert evaluate_predicate(pred, plain, {"v": False}) is True

    def test_boolean_type_mismatch(self):
        pred = Compare(dsl.Attr("age"), "<", ParamRef("v"))
        with pytest.raises(EvaluationError, match="boolean"):
            evaluate_predicate(pred, make_patient("p"), {"v": True})

    def test_event_window_months(self):
        text = ('EXCLUDE s: has_event("cardiac_surgery") within_last $m months\n'
                "ADJUST $m IN {3, 6}")
        pred = parse_spec(text).exclusions[0].predicate
        recent = make_patient("p", events=[event("cardiac_surgery", -80 * 24.0, kind="procedure")])
        old = make_patient("q", events=[event("cardiac_surgery", -200 * 24.0, kind="procedure")])
        assert evaluate_predicate(pred, recent, {"m": 3}) is True
        assert evaluate_predicate(pred, old, {"m": 3}) is False
        assert evaluate_predicate(pred, old, {"m": 6}) is False  # 6 months = 180 days
        assert evaluate_predicate(pred, old, {"m": 12}) is True

    def test_evaluation_pure(self):
        pred = parse_spec("INCLUDE a: age >= 18").inclusions[0].predicate
        p = make_patient("p", age=20)
        assert all(evaluate_predicate(pred, p, {}) for _ in range(5))


class TestEligibility:
    SPEC = parse_spec(
        'INTERVENTION: has_event("hydrocortisone")\n'
        "INCLUDE adult: age >= 18\n"
        "EXCLUDE obese: bmi > 35\n"
    )

    def test_exclusion_wins(self):
        p = make_patient("p", age=40, weight=150.0, height=1.6)
        assert eligibility(p, self.SPEC, {}) == dsl.INELIGIBLE

    def test_treatment_assignment(self):
        p = make_patient("p", age=40, events=[event("hydrocortisone", 2.0)])
        assert eligibility(p, self.SPEC, {}) == dsl.TREATMENT

    def test_control_assignment(self):
        p = make_patient("p", age=40)
        assert eligibility(p, self.SPEC, {}) == dsl.CONTROL

    def test_failed_inclusion(self):
        p = make_patient("p", age=10)
        assert eligibility(p, self.SPEC, {}) == dsl.INELIGIBLE


# equivalence laws on fully-present attributes -----------------------------

_law_patients = [
    make_patient(f"p{i}", age=a, weight=w, height=1.7)
    for i, (a, w) in enumerate([(10, 50), (30, 70), (60, 90), (85, 120)])
]
_A = Compare(dsl.Attr("age"), ">=", 18)
_B = Compare(dsl.Attr("weight"), "<", 80)
_C = Compare(dsl.Attr("bmi"), ">", 20)


@pytest.mark.parametrize("patient", _law_patients, ids=lambda p: p.patient_id)
def test_de_morgan(patient):
    lhs = Not(And((_A, _B)))
    rhs = Or((Not(_A), Not(_B)))
    assert evaluate_predicate(lhs, patient, {}) == evaluate_predicate(rhs, patient, {})


@pytest.mark.parametrize("patient", _law_patients, ids=lambda p: p.patient_id)
def test_at_least_k_degenerate_forms(patient):
    preds = (_A, _B, _C)
    assert evaluate_predicate(AtLeastK(3, preds), patient, {}) == evaluate_predicate(
        And(preds), patient, {}
    )
    assert evaluate_predicate(AtLeastK(1, preds), patient, {}) == evaluate_predicate(
        Or(preds), patient, {}
    )
