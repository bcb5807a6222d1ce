"""Candidate enumeration: Cartesian product over adjustable value sets.

Candidate ids are mixed-radix integers with the first-declared
adjustable as the most significant digit, so ids are stable across runs
and usable as cache keys.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import TrialGridError

DEFAULT_MAX_CANDIDATES = 100_000


class GridTooLargeError(TrialGridError):
    def __init__(self, size, limit):
        self.size = size
        self.limit = limit
        super().__init__(f"candidate grid has {size} candidates (limit {limit})")


@dataclass(frozen=True)
class CandidateAssignment:
    candidate_id: int
    bindings: dict  # adjustable name -> literal


@dataclass(frozen=True)
class CandidateGrid:
    spec: object
    assignments: tuple

    def __len__(self):
        return len(self.assignments)

    def __getitem__(self, candidate_id):
        return self.assignments[candidate_id]

    def manifest(self):
        return {
            "adjustables": [
                {"name": a.name, "values": list(a.values), "unit": a.unit}
                for a in self.spec.adjustables
            ],
            "count": len(self.assignments),
        }


def grid_size(spec):
    size = 1
    for adj in spec.adjustables:
        size *= len(adj.values)
    return size


def decode_candidate(spec, candidate_id):
    """Mixed-radix decode of a candidate id back into bindings."""
    bindings = {}
    rem = candidate_id
    for adj in reversed(spec.adjustables):
        rem, digit = divmod(rem, len(adj.values))
        bindings[adj.name] = adj.values[digit]
    return {a.name: bindings[a.name] for a in spec.adjustables}


def enumerate_candidates(spec, max_candidates=DEFAULT_MAX_CANDIDATES):
    """Build the full candidate grid in candidate-id order."""
    size = grid_size(spec)
    if size > max_candidates:
        raise GridTooLargeError(size, max_candidates)
    assignments = tuple(
        CandidateAssignment(cid, decode_candidate(spec, cid)) for cid in range(size)
    )
    return CandidateGrid(spec=spec, assignments=assignments)


def filter_by_binding(grid, constraints):
    """Candidate ids whose bindings fall inside every constraint set."""
    declared = {a.name: set(a.values) for a in grid.spec.adjustables}
    for name, allowed in constraints.items():
        if name not in declared:
            raise KeyError(f"unknown adjustable {name!r}")
        extra = set(allowed) - declared[name]
        if extra:
            raise ValueError(
                f"constraint for {name!r} contains undeclared values: {sorted(extra, key=repr)}"
            )
    out = []
    for a in grid.assignments:
        if all(a.bindings[name] in set(allowed) for name, allowed in constraints.items()):
            out.append(a.candidate_id)
    return out


def tick_counts(grid, name):
    """Per-value candidate counts for one adjustable (slider heatmap data)."""
    adj = grid.spec.adjustable(name)
    return {
        value: len(filter_by_binding(grid, {name: [value]})) for value in adj.values
    }
