"""Criteria language: parsing, serialization, and evaluation.

Grammar (statements, one per criterion or adjustable):

    spec   := stmt*
    stmt   := "INTERVENTION:" pred
            | ("INCLUDE" | "EXCLUDE") label ":" pred
            | "ADJUST" "$" name "IN" "{" literal ("," literal)* "}" [unit]
    pred   := or_expr                      # precedence: not > and > or
    atom   := "(" pred ")"
            | "not" atom
            | "at_least" int "of" "[" pred ("," pred)* "]"
            | "has_event" "(" string ")" [window]
            | comparison
    window := "within_last" value ("hours" | "days" | "months") | "during_stay"
    comparison := attr_expr op value
    attr_expr  := name | ("min"|"max"|"count"|"mean") "(" name ")"
    value      := number | "true" | "false" | "$" name
    op         := < | <= | > | >= | = | !=

Comparisons over an absent attribute evaluate to false, for inclusion
and exclusion predicates alike: a patient with an unknown BMI is neither
admitted by a BMI inclusion nor removed by a BMI exclusion.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .ehr import HOURS_PER_DAY, HOURS_PER_MONTH, BASE_ATTRIBUTES, derived_attribute
from .errors import DslError, EvaluationError

AGGREGATES = ("min", "max", "count", "mean")
COMPARE_OPS = ("<", "<=", ">", ">=", "=", "!=")


# ---------------------------------------------------------------------------
# AST


@dataclass(frozen=True)
class ParamRef:
    name: str


@dataclass(frozen=True)
class Attr:
    name: str


@dataclass(frozen=True)
class Aggregate:
    fn: str
    indicator: str


@dataclass(frozen=True)
class Compare:
    attr: object  # Attr | Aggregate
    op: str
    value: object  # float | bool | ParamRef


@dataclass(frozen=True)
class And:
    children: tuple


@dataclass(frozen=True)
class Or:
    children: tuple


@dataclass(frozen=True)
class Not:
    child: object


@dataclass(frozen=True)
class AtLeastK:
    k: int
    children: tuple


@dataclass(frozen=True)
class HasEvent:
    code: str
    within_last: float | None = None  # hours before admission, inclusive
    during_stay: bool = False


@dataclass(frozen=True)
class Criterion:
    label: str
    predicate: object
    polarity: str  # "inclusion" | "exclusion"


@dataclass(frozen=True)
class AdjustableParam:
    name: str
    values: tuple  # ordered, distinct literals
    unit: str | None = None
    role: str = ""


@dataclass(frozen=True)
class CriterionSpec:
    intervention: object | None
    inclusions: tuple
    exclusions: tuple
    adjustables: tuple

    def adjustable(self, name):
        for a in self.adjustables:
            if a.name == name:
                return a
        raise KeyError(name)

    @property
    def criteria(self):
        return self.inclusions + self.exclusions


def param_refs(pred):
    """All ParamRef names appearing anywhere in a predicate."""
    names = set()

    def walk(node):
        if isinstance(node, Compare):
            if isinstance(node.value, ParamRef):
                names.add(node.value.name)
        elif isinstance(node, (And, Or, AtLeastK)):
            for c in node.children:
                walk(c)
        elif isinstance(node, Not):
            walk(node.child)
        elif isinstance(node, HasEvent):
            if hasattr(node.within_last, "name"):  # parameterized window
                names.add(node.within_last.name)

    walk(pred)
    return names


# ---------------------------------------------------------------------------
# Tokenizer

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+|\#[^\n]*)
  | (?P<string>"[^"\n]*")
  | (?P<number>-?\d+(\.\d+)?([eE][+-]?\d+)?)
  | (?P<op><=|>=|!=|<|>|=)
  | (?P<punct>[(){}\[\],:$])
  | (?P<word>[A-Za-z_][A-Za-z_0-9]*)
    """,
    re.VERBOSE,
)


@dataclass
class Token:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text):
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise DslError(
                f"unexpected character {text[pos]!r}", line=line, col=pos - line_start + 1
            )
        kind = m.lastgroup
        raw = m.group()
        if kind != "ws":
            tokens.append(Token(kind, raw, line, m.start() - line_start + 1))
        nl = raw.count("\n")
        if nl:
            line += nl
            line_start = m.start() + raw.rfind("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


# ---------------------------------------------------------------------------
# Parser

_KEYWORDS = {"and", "or", "not", "at_least", "of", "has_event", "within_last",
             "during_stay", "true", "false", "in"}
_WINDOW_UNITS = {"hours": 1.0, "days": HOURS_PER_DAY, "months": HOURS_PER_MONTH}


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def fail(self, message, tok=None):
        tok = tok or self.peek()
        raise DslError(message, line=tok.line, col=tok.col)

    def expect(self, kind, text=None):
        tok = self.peek()
        if tok.kind != kind or (text is not None and tok.text != text):
            want = text or kind
            got = tok.text or "end of input"
            self.fail(f"expected {want!r}, got {got!r}")
        return self.next()

    def accept_word(self, word):
        tok = self.peek()
        if tok.kind == "word" and tok.text.lower() == word:
            self.next()
            return True
        return False

    # statements -----------------------------------------------------------

    def parse_spec(self):
        intervention = None
        inclusions, exclusions, adjustables = [], [], []
        while self.peek().kind != "eof":
            tok = self.peek()
            if tok.kind != "word":
                self.fail(f"expected a statement keyword, got {tok.text!r}")
            kw = tok.text.upper()
            if kw == "INTERVENTION":
                self.next()
                self.expect("punct", ":")
                if intervention is not None:
                    self.fail("duplicate INTERVENTION statement", tok)
                intervention = self.parse_pred()
            elif kw in ("INCLUDE", "EXCLUDE"):
                self.next()
                label_tok = self.expect("word")
                self.expect("punct", ":")
                pred = self.parse_pred()
                crit = Criterion(
                    label=label_tok.text,
                    predicate=pred,
                    polarity="inclusion" if kw == "INCLUDE" else "exclusion",
                )
                (inclusions if kw == "INCLUDE" else exclusions).append(crit)
            elif kw == "ADJUST":
                self.next()
                adjustables.append(self.parse_adjust())
            else:
                self.fail(f"unknown statement {tok.text!r}", tok)
        return self._validate(intervention, inclusions, exclusions, adjustables)

    def parse_adjust(self):
        self.expect("punct", "$")
        name = self.expect("word").text
        in_tok = self.expect("word")
        if in_tok.text.lower() != "in":
            self.fail("expected 'IN'", in_tok)
        self.expect("punct", "{")
        values = [self.parse_literal()]
        while self.peek().text == ",":
            self.next()
            values.append(self.parse_literal())
        close = self.expect("punct", "}")
        if len(set(values)) != len(values):
            self.fail(f"duplicate values in adjustable ${name}", close)
        unit = None
        tok = self.peek()
        if tok.kind == "word" and tok.text.lower() not in (
            "intervention", "include", "exclude", "adjust"
        ):
            unit = self.next().text
        return AdjustableParam(name=name, values=tuple(values), unit=unit)

    def parse_literal(self):
        tok = self.peek()
        if tok.kind == "number":
            self.next()
            return _as_number(tok.text)
        if tok.kind == "word" and tok.text.lower() in ("true", "false"):
            self.next()
            return tok.text.lower() == "true"
        self.fail(f"expected a number or boolean, got {tok.text!r}")

    # predicates -----------------------------------------------------------

    def parse_pred(self):
        return self.parse_or()

    def parse_or(self):
        children = [self.parse_and()]
        while self.accept_word("or"):
            children.append(self.parse_and())
        return children[0] if len(children) == 1 else Or(tuple(children))

    def parse_and(self):
        children = [self.parse_not()]
        while self.accept_word("and"):
            children.append(self.parse_not())
        return children[0] if len(children) == 1 else And(tuple(children))

    def parse_not(self):
        if self.accept_word("not"):
            return Not(self.parse_not())
        return self.parse_atom()

    def parse_atom(self):
        tok = self.peek()
        if tok.text == "(":
            self.next()
            pred = self.parse_pred()
            self.expect("punct", ")")
            return pred
        if tok.kind == "word" and tok.text.lower() == "at_least":
            self.next()
            k_tok = self.expect("number")
            k = _as_number(k_tok.text)
            if k != int(k) or k < 1:
                self.fail("at_least count must be a positive integer", k_tok)
            of_tok = self.expect("word")
            if of_tok.text.lower() != "of":
                self.fail("expected 'of'", of_tok)
            self.expect("punct", "[")
            children = [self.parse_pred()]
            while self.peek().text == ",":
                self.next()
                children.append(self.parse_pred())
            close = self.expect("punct", "]")
            if int(k) > len(children):
                self.fail("at_least count exceeds the number of predicates", close)
            return AtLeastK(int(k), tuple(children))
        if tok.kind == "word" and tok.text.lower() == "has_event":
            self.next()
            self.expect("punct", "(")
            code_tok = self.expect("string")
            self.expect("punct", ")")
            code = code_tok.text[1:-1]
            if self.accept_word("within_last"):
                amount = self.parse_value()
                unit_tok = self.expect("word")
                unit = unit_tok.text.lower()
                if unit not in _WINDOW_UNITS:
                    self.fail("window unit must be hours, days, or months", unit_tok)
                factor = _WINDOW_UNITS[unit]
                if isinstance(amount, ParamRef):
                    return HasEvent(code, within_last=_WindowParam(amount.name, factor))
                return HasEvent(code, within_last=float(amount) * factor)
            if self.accept_word("during_stay"):
                return HasEvent(code, during_stay=True)
            return HasEvent(code)
        return self.parse_comparison()

    def parse_comparison(self):
        attr = self.parse_attr_expr()
        op_tok = self.peek()
        if op_tok.kind != "op":
            self.fail(f"expected a comparison operator, got {op_tok.text!r}")
        self.next()
        value = self.parse_value()
        return Compare(attr, op_tok.text, value)

    def parse_attr_expr(self):
        tok = self.expect("word")
        name = tok.text
        if name.lower() in AGGREGATES and self.peek().text == "(":
            self.next()
            ind = self.expect("word").text
            self.expect("punct", ")")
            return Aggregate(name.lower(), ind)
        return Attr(name)

    def parse_value(self):
        tok = self.peek()
        if tok.text == "$":
            self.next()
            return ParamRef(self.expect("word").text)
        return self.parse_literal()

    # validation -----------------------------------------------------------

    def _validate(self, intervention, inclusions, exclusions, adjustables):
        labels = [c.label for c in inclusions + exclusions]
        dupes = {l for l in labels if labels.count(l) > 1}
        if dupes:
            raise DslError(f"duplicate criterion labels: {', '.join(sorted(dupes))}")
        declared = {a.name for a in adjustables}
        if len(declared) != len(adjustables):
            raise DslError("duplicate adjustable names")
        referenced = set()
        preds = [c.predicate for c in inclusions + exclusions]
        if intervention is not None:
            preds.append(intervention)
        for pred in preds:
            referenced |= param_refs(pred)
        unbound = referenced - declared
        if unbound:
            raise DslError(
                "unbound parameter(s): " + ", ".join(f"${n}" for n in sorted(unbound))
            )
        unused = declared - referenced
        if unused:
            raise DslError(
                "unreferenced adjustable(s): " + ", ".join(f"${n}" for n in sorted(unused))
            )
        return CriterionSpec(
            intervention=intervention,
            inclusions=tuple(inclusions),
            exclusions=tuple(exclusions),
            adjustables=tuple(adjustables),
        )


@dataclass(frozen=True)
class _WindowParam:
    """Parameterized event window: hours = bound value * unit factor."""

    name: str
    factor: float


def _as_number(text):
    value = float(text)
    return int(value) if value.is_integer() else value


def parse_spec(text):
    """Parse criteria text into a validated CriterionSpec."""
    return _Parser(text).parse_spec()


# ---------------------------------------------------------------------------
# Serialization (round-trips through parse_spec)


def _fmt_literal(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float) and value.is_integer():
        return str(int(value))
    return repr(value)


def _fmt_value(value):
    if isinstance(value, ParamRef):
        return f"${value.name}"
    return _fmt_literal(value)


def _fmt_pred(pred, parent=None):
    if isinstance(pred, Or):
        body = " or ".join(_fmt_pred(c, "or") for c in pred.children)
        return f"({body})" if parent in ("and", "or", "not") else body
    if isinstance(pred, And):
        body = " and ".join(_fmt_pred(c, "and") for c in pred.children)
        return f"({body})" if parent in ("and", "not") else body
    if isinstance(pred, Not):
        return "not " + _fmt_pred(pred.child, "not")
    if isinstance(pred, AtLeastK):
        inner = ", ".join(_fmt_pred(c) for c in pred.children)
        return f"at_least {pred.k} of [{inner}]"
    if isinstance(pred, HasEvent):
        base = f'has_event("{pred.code}")'
        if isinstance(pred.within_last, _WindowParam):
            unit = {1.0: "hours", HOURS_PER_DAY: "days", HOURS_PER_MONTH: "months"}[
                pred.within_last.factor
            ]
            return f"{base} within_last ${pred.within_last.name} {unit}"
        if pred.within_last is not None:
            return f"{base} within_last {_fmt_literal(pred.within_last)} hours"
        if pred.during_stay:
            return f"{base} during_stay"
        return base
    if isinstance(pred, Compare):
        if isinstance(pred.attr, Aggregate):
            lhs = f"{pred.attr.fn}({pred.attr.indicator})"
        else:
            lhs = pred.attr.name
        return f"{lhs} {pred.op} {_fmt_value(pred.value)}"
    raise TypeError(f"not a predicate node: {pred!r}")


def serialize_spec(spec):
    """Render a spec back to criteria text; parse(serialize(s)) == parse-normal form."""
    lines = []
    if spec.intervention is not None:
        lines.append(f"INTERVENTION: {_fmt_pred(spec.intervention)}")
    for crit in spec.inclusions:
        lines.append(f"INCLUDE {crit.label}: {_fmt_pred(crit.predicate)}")
    for crit in spec.exclusions:
        lines.append(f"EXCLUDE {crit.label}: {_fmt_pred(crit.predicate)}")
    for adj in spec.adjustables:
        vals = ", ".join(_fmt_literal(v) for v in adj.values)
        line = f"ADJUST ${adj.name} IN {{{vals}}}"
        if adj.unit:
            line += f" {adj.unit}"
        lines.append(line)
    return "\n".join(lines) + "\n"


def spec_to_dict(spec):
    """Structural JSON-ready dump of the AST (stable field names)."""

    def pred(node):
        if isinstance(node, Or):
            return {"type": "or", "children": [pred(c) for c in node.children]}
        if isinstance(node, And):
            return {"type": "and", "children": [pred(c) for c in node.children]}
        if isinstance(node, Not):
            return {"type": "not", "child": pred(node.child)}
        if isinstance(node, AtLeastK):
            return {"type": "at_least", "k": node.k,
                    "children": [pred(c) for c in node.children]}
        if isinstance(node, HasEvent):
            out = {"type": "has_event", "code": node.code}
            if isinstance(node.within_last, _WindowParam):
                out["within_last"] = {"param": node.within_last.name,
                                      "unit_hours": node.within_last.factor}
            elif node.within_last is not None:
                out["within_last"] = {"hours": node.within_last}
            if node.during_stay:
                out["during_stay"] = True
            return out
        if isinstance(node, Compare):
            if isinstance(node.attr, Aggregate):
                attr = {"aggregate": node.attr.fn, "indicator": node.attr.indicator}
            else:
                attr = {"attribute": node.attr.name}
            value = ({"param": node.value.name} if isinstance(node.value, ParamRef)
                     else {"literal": node.value})
            return {"type": "compare", "attr": attr, "op": node.op, "value": value}
        raise TypeError(repr(node))

    return {
        "intervention": pred(spec.intervention) if spec.intervention else None,
        "inclusions": [
            {"label": c.label, "predicate": pred(c.predicate)} for c in spec.inclusions
        ],
        "exclusions": [
            {"label": c.label, "predicate": pred(c.predicate)} for c in spec.exclusions
        ],
        "adjustables": [
            {"name": a.name, "values": list(a.values), "unit": a.unit}
            for a in spec.adjustables
        ],
    }


# ---------------------------------------------------------------------------
# Evaluation


def _resolve(value, bindings):
    if isinstance(value, ParamRef):
        try:
            return bindings[value.name]
        except KeyError:
            raise EvaluationError(f"unbound parameter ${value.name}") from None
    return value


def _attr_value(attr, patient):
    """Scalar value of an attribute expression, or None when absent."""
    if isinstance(attr, Aggregate):
        series = patient.labs.get(attr.indicator)
        if attr.fn == "count":
            return float(len(series.points)) if series else 0.0
        if series is None or not series.points:
            return None
        values = [v for _, v in series.points]
        if attr.fn == "min":
            return min(values)
        if attr.fn == "max":
            return max(values)
        return sum(values) / len(values)
    name = attr.name
    if name in BASE_ATTRIBUTES:
        return derived_attribute(patient, name)
    # bare lab indicator name: boolean "has any observation" is not meaningful
    # for comparisons; fall back to the latest observed value
    series = patient.labs.get(name)
    if series and series.points:
        return series.points[-1][1]
    return None


def _compare(op, left, right):
    if isinstance(left, bool) != isinstance(right, bool):
        raise EvaluationError(
            f"type mismatch: cannot compare {left!r} with {right!r}"
        )
    if op == "<":
        return left < right
    if op == "<=":
        return left <= right
    if op == ">":
        return left > right
    if op == ">=":
        return left >= right
    if op == "=":
        return left == right
    if op == "!=":
        return left != right
    raise EvaluationError(f"unknown operator {op!r}")


def evaluate_predicate(pred, patient, bindings):
    """Evaluate a predicate; absent attributes collapse comparisons to False."""
    if isinstance(pred, Or):
        return any(evaluate_predicate(c, patient, bindings) for c in pred.children)
    if isinstance(pred, And):
        return all(evaluate_predicate(c, patient, bindings) for c in pred.children)
    if isinstance(pred, Not):
        return not evaluate_predicate(pred.child, patient, bindings)
    if isinstance(pred, AtLeastK):
        hits = sum(
            1 for c in pred.children if evaluate_predicate(c, patient, bindings)
        )
        return hits >= pred.k
    if isinstance(pred, HasEvent):
        window = pred.within_last
        if isinstance(window, _WindowParam):
            bound = _resolve(ParamRef(window.name), bindings)
            if isinstance(bound, bool) or not isinstance(bound, (int, float)):
                raise EvaluationError(
                    f"window parameter ${window.name} must be numeric"
                )
            window = float(bound) * window.factor
        for ev in patient.events:
            if ev.code != pred.code:
                continue
            if window is not None:
                if -window <= ev.start_time <= 0:
                    return True
            elif pred.during_stay:
                if ev.start_time >= 0:
                    return True
            else:
                return True
        return False
    if isinstance(pred, Compare):
        right = _resolve(pred.value, bindings)
        if isinstance(right, bool):
            # boolean attribute sugar: `ventilated = true` means
            # has_event("ventilated") during the stay
            if isinstance(pred.attr, Aggregate) or pred.op not in ("=", "!="):
                raise EvaluationError(
                    "type mismatch: boolean values only combine with = or != "
                    "on a plain event-code attribute"
                )
            present = any(
                ev.code == pred.attr.name and ev.start_time >= 0
                for ev in patient.events
            )
            return _compare(pred.op, present, right)
        left = _attr_value(pred.attr, patient)
        if left is None:
            return False
        return _compare(pred.op, left, float(right))
    raise TypeError(f"not a predicate node: {pred!r}")


INELIGIBLE = "ineligible"
TREATMENT = "treatment"
CONTROL = "control"


def eligibility(patient, spec, bindings):
    """Classify a patient: ineligible, treatment, or control."""
    for crit in spec.inclusions:
        if not evaluate_predicate(crit.predicate, patient, bindings):
            return INELIGIBLE
    for crit in spec.exclusions:
        if evaluate_predicate(crit.predicate, patient, bindings):
            return INELIGIBLE
    if spec.intervention is not None and evaluate_predicate(
        spec.intervention, patient, bindings
    ):
        return TREATMENT
    return CONTROL
