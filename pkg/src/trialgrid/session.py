"""Staged exploration history: stages, records, matrix data, persistence.

A session is a single JSON document (schema_version-ed) holding ordered
stages; each stage holds ordered exploration records. Metric means in a
record are always recomputed server-side from the results table.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

from .errors import SessionError
from .sweep import mean_metrics

SCHEMA_VERSION = 1
RECORD_KINDS = ("criterion_adjust", "lasso_select", "axis_change")


@dataclass
class ExplorationRecord:
    record_id: int
    kind: str
    bindings_constraints: dict  # adjustable name -> list of selected values
    selected_candidates: list
    axes: tuple  # (x metric, y metric)
    metric_means: dict | None
    timestamp: float
    viewport: dict | None = None  # thumbnail re-render metadata

    def to_dict(self):
        return {
            "record_id": self.record_id,
            "kind": self.kind,
            "bindings_constraints": self.bindings_constraints,
            "selected_candidates": list(self.selected_candidates),
            "axes": list(self.axes),
            "metric_means": self.metric_means,
            "timestamp": self.timestamp,
            "viewport": self.viewport,
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(
            record_id=doc["record_id"],
            kind=doc["kind"],
            bindings_constraints=doc["bindings_constraints"],
            selected_candidates=list(doc["selected_candidates"]),
            axes=tuple(doc["axes"]),
            metric_means=doc["metric_means"],
            timestamp=doc["timestamp"],
            viewport=doc.get("viewport"),
        )


@dataclass
class Stage:
    stage_id: int
    importance: int
    keywords: list
    description: str
    records: list = field(default_factory=list)

    def to_dict(self):
        return {
            "stage_id": self.stage_id,
            "importance": self.importance,
            "keywords": list(self.keywords),
            "description": self.description,
            "records": [r.to_dict() for r in self.records],
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(
            stage_id=doc["stage_id"],
            importance=doc["importance"],
            keywords=list(doc["keywords"]),
            description=doc["description"],
            records=[ExplorationRecord.from_dict(r) for r in doc["records"]],
        )


@dataclass
class Session:
    session_id: str
    spec_hash: str
    stages: list = field(default_factory=list)
    current_stage_id: int | None = None

    def stage(self, stage_id):
        for stage in self.stages:
            if stage.stage_id == stage_id:
                return stage
        raise SessionError(f"unknown stage {stage_id}")

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "session_id": self.session_id,
            "spec_hash": self.spec_hash,
            "stages": [s.to_dict() for s in self.stages],
            "current_stage_id": self.current_stage_id,
        }

    @classmethod
    def from_dict(cls, doc):
        version = doc.get("schema_version")
        if version != SCHEMA_VERSION:
            raise SessionError(
                f"unsupported session schema version {version!r} "
                f"(expected {SCHEMA_VERSION})"
            )
        return cls(
            session_id=doc["session_id"],
            spec_hash=doc["spec_hash"],
            stages=[Stage.from_dict(s) for s in doc["stages"]],
            current_stage_id=doc.get("current_stage_id"),
        )


def create_stage(session, importance=3, keywords=(), description=""):
    """Append a new stage and make it current; returns the stage id."""
    if not isinstance(importance, int) or not 1 <= importance <= 5:
        raise SessionError("importance must be an integer in 1..5")
    stage_id = max((s.stage_id for s in session.stages), default=0) + 1
    session.stages.append(
        Stage(
            stage_id=stage_id,
            importance=importance,
            keywords=list(keywords),
            description=description,
        )
    )
    session.current_stage_id = stage_id
    return stage_id


def update_stage(session, stage_id, importance=None, keywords=None, description=None):
    stage = session.stage(stage_id)
    if importance is not None:
        if not isinstance(importance, int) or not 1 <= importance <= 5:
            raise SessionError("importance must be an integer in 1..5")
        stage.importance = importance
    if keywords is not None:
        stage.keywords = list(keywords)
    if description is not None:
        stage.description = description
    return stage


def append_record(session, stage_id, kind, results_rows, grid_size,
                  bindings_constraints=None, selected_candidates=(),
                  axes=("n", "hr"), viewport=None, timestamp=None):
    """Append one exploration record; metric means are recomputed here."""
    stage = session.stage(stage_id)
    if kind not in RECORD_KINDS:
        raise SessionError(f"unknown record kind {kind!r}")
    selected = list(selected_candidates)
    bad = [cid for cid in selected if not 0 <= cid < grid_size]
    if bad:
        raise SessionError(f"candidate ids outside the grid: {bad}")
    record_id = max(
        (r.record_id for s in session.stages for r in s.records), default=0
    ) + 1
    record = ExplorationRecord(
        record_id=record_id,
        kind=kind,
        bindings_constraints=dict(bindings_constraints or {}),
        selected_candidates=selected,
        axes=tuple(axes),
        metric_means=mean_metrics(results_rows, selected) if selected else None,
        timestamp=float(timestamp) if timestamp is not None else time.time(),
        viewport=viewport,
    )
    stage.records.append(record)
    return record


def matrix_data(stage, adjustables):
    """Criterion matrix: rows are adjustables, columns are stage records.

    Each cell is the representative value for that adjustable under the
    record's constraints: the mean of the permitted values (the full
    value set when unconstrained). Boolean values average as 0/1.
    """
    rows = {}
    for adj in adjustables:
        cells = []
        for record in stage.records:
            allowed = record.bindings_constraints.get(adj.name)
            values = list(allowed) if allowed else list(adj.values)
            numeric = [float(v) for v in values]
            cells.append(sum(numeric) / len(numeric))
        rows[adj.name] = cells
    return rows


def save_session(session, path):
    with open(path, "w") as fh:
        json.dump(session.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_session(path):
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise SessionError(f"corrupt session file: {exc}") from None
    except OSError as exc:
        raise SessionError(f"cannot read session file: {exc}") from None
    try:
        return Session.from_dict(doc)
    except (KeyError, TypeError) as exc:
        raise SessionError(f"corrupt session file: missing field {exc}") from None


def stage_report(session, results_rows, adjustables):
    """Markdown export of the exploration history with metric trends."""
    lines = ["# Exploration report", "", f"Session: {session.session_id}",
             f"Spec hash: {session.spec_hash}", ""]
    for stage in session.stages:
        lines.append(f"## Stage {stage.stage_id} (importance {stage.importance})")
        if stage.keywords:
            lines.append(f"Keywords: {', '.join(stage.keywords)}")
        if stage.description:
            lines.append("")
            lines.append(stage.description)
        lines.append("")
        if stage.records:
            lines.append("| record | kind | selected | n | diversity | hr | kidney_rr | liver_rr |")
            lines.append("|---|---|---|---|---|---|---|---|")
            for record in stage.records:
                means = record.metric_means or {}

                def cell(key):
                    value = means.get(key)
                    return f"{value:.4g}" if value is not None else "-"

                lines.append(
                    f"| {record.record_id} | {record.kind} "
                    f"| {len(record.selected_candidates)} "
                    f"| {cell('n')} | {cell('diversity')} | {cell('hr')} "
                    f"| {cell('kidney_rr')} | {cell('liver_rr')} |"
                )
            lines.append("")
            matrix = matrix_data(stage, adjustables)
            if matrix:
                lines.append("Criterion matrix (representative values):")
                lines.append("")
                for name, cells in matrix.items():
                    rendered = ", ".join(f"{c:.4g}" for c in cells)
                    lines.append(f"- {name}: {rendered}")
                lines.append("")
    return "\n".join(lines) + "\n"
