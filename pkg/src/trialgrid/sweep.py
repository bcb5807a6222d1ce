"""Parallel candidate sweep and the results-table file formats.

Each candidate evaluation is a pure function of the immutable store, so
results are identical regardless of worker count; workers are forked
processes sharing the store copy-on-write.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import multiprocessing as mp
from concurrent.futures import ProcessPoolExecutor

from . import dsl
from .grid import enumerate_candidates
from .metrics import EngineConfig, evaluate_candidate

RESULT_COLUMNS = ("candidate_id", "bindings", "n", "diversity", "hr", "hr_lo",
                  "hr_hi", "p", "kidney_rr", "liver_rr", "status", "reason")


def spec_hash(spec_text, config=None):
    """Cache key: hash of the criteria text plus the engine configuration."""
    h = hashlib.sha256()
    h.update(spec_text.encode())
    if config is not None:
        h.update(json.dumps(config.to_dict(), sort_keys=True).encode())
    return h.hexdigest()[:16]


_WORKER = {}


def _init_worker(store, spec_text, config):
    _WORKER["store"] = store
    _WORKER["spec"] = dsl.parse_spec(spec_text)
    _WORKER["config"] = config


def _run_one(assignment):
    result = evaluate_candidate(
        _WORKER["store"], _WORKER["spec"], assignment, _WORKER["config"]
    )
    return result


def evaluate_grid(store, spec, config=None, threads=1, progress=None):
    """Evaluate every candidate; returns CandidateResults in id order."""
    config = config or EngineConfig()
    grid = enumerate_candidates(spec, max_candidates=config.max_candidates)
    total = len(grid)
    results = []
    if threads <= 1:
        for assignment in grid.assignments:
            results.append(evaluate_candidate(store, spec, assignment, config))
            if progress:
                progress(len(results), total)
        return grid, results

    ctx = mp.get_context("fork")
    spec_text = dsl.serialize_spec(spec)
    with ProcessPoolExecutor(
        max_workers=threads,
        mp_context=ctx,
        initializer=_init_worker,
        initargs=(store, spec_text, config),
    ) as pool:
        for result in pool.map(_run_one, grid.assignments, chunksize=1):
            results.append(result)
            if progress:
                progress(len(results), total)
    return grid, results


def results_table(results):
    """Plain-dict rows in candidate-id order."""
    return [r.outcome.to_record(r.assignment.bindings) for r in results]


def _round_trip_floats(row):
    # json round-trip normalizes floats so files are byte-stable
    return json.loads(json.dumps(row))


def results_json(grid, results, config=None):
    doc = {
        "manifest": grid.manifest(),
        "config": config.to_dict() if config else None,
        "results": [_round_trip_floats(row) for row in results_table(results)],
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def results_csv(results):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RESULT_COLUMNS)
    for row in results_table(results):
        writer.writerow([
            row["candidate_id"],
            json.dumps(row["bindings"], sort_keys=True),
            row["n"],
            _csv_num(row["diversity"]),
            _csv_num(row["hr"]),
            _csv_num(row["hr_lo"]),
            _csv_num(row["hr_hi"]),
            _csv_num(row["p"]),
            _csv_num(row["kidney_rr"]),
            _csv_num(row["liver_rr"]),
            row["status"],
            row["reason"] or "",
        ])
    return buf.getvalue()


def _csv_num(value):
    return "" if value is None else repr(float(value))


def load_results_json(path):
    with open(path) as fh:
        return json.load(fh)


# ---------------------------------------------------------------------------
# Query helpers shared by the API and the UI contract tests

METRIC_KEYS = ("n", "diversity", "hr", "kidney_rr", "liver_rr")


def filter_rows(rows, constraints=None, region=None):
    """Results-table rows passing binding constraints and a metric region.

    ``constraints`` maps adjustable name -> allowed value list. ``region``
    selects on two metric axes, either with rectangular bounds
    {"x_metric", "y_metric", "x": [lo, hi], "y": [lo, hi]} or a polygon
    {"x_metric", "y_metric", "polygon": [[x, y], ...]} (even-odd rule).
    Degenerate candidates never match a region query.
    """
    out = []
    for row in rows:
        if constraints:
            ok = all(
                row["bindings"].get(name) in set(allowed)
                for name, allowed in constraints.items()
            )
            if not ok:
                continue
        if region is not None:
            if row["status"] != "ok":
                continue
            x = row.get(region["x_metric"])
            y = row.get(region["y_metric"])
            if x is None or y is None:
                continue
            if "polygon" in region:
                if not point_in_polygon(x, y, region["polygon"]):
                    continue
            else:
                (xlo, xhi), (ylo, yhi) = region["x"], region["y"]
                if not (xlo <= x <= xhi and ylo <= y <= yhi):
                    continue
        out.append(row)
    return out


def point_in_polygon(x, y, polygon):
    """Even-odd ray casting; points on an edge count as inside."""
    inside = False
    n = len(polygon)
    for i in range(n):
        x1, y1 = polygon[i]
        x2, y2 = polygon[(i + 1) % n]
        if (x1, y1) == (x, y):
            return True
        if (y1 > y) != (y2 > y):
            t = (y - y1) / (y2 - y1)
            xi = x1 + t * (x2 - x1)
            if abs(xi - x) < 1e-12:
                return True
            if x < xi:
                inside = not inside
    return inside


def mean_metrics(rows, candidate_ids):
    """Five-metric means over the selected, non-degenerate candidates."""
    chosen = [r for r in rows if r["candidate_id"] in set(candidate_ids)
              and r["status"] == "ok"]
    if not chosen:
        return None
    means = {}
    for key in METRIC_KEYS:
        vals = [r[key] for r in chosen if r[key] is not None]
        means[key] = sum(vals) / len(vals) if vals else None
    return means
