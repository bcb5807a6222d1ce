"""HTTP API over the engine: spec parsing, evaluation jobs, candidate
queries, temporal profiles, group comparison, and session CRUD.

Evaluation runs as an asynchronous job (grids can take a while); the UI
polls GET /api/jobs/{id}. Results are cached in memory by spec hash, so
re-posting an identical spec completes instantly under a fresh job id.
"""

from __future__ import annotations

import json
import os
import threading
import uuid

from fastapi import Body, FastAPI, HTTPException, Query
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from . import dsl, profiles as profiles_mod, session as session_mod, sweep
from .errors import DslError, SessionError
from .grid import GridTooLargeError, grid_size
from .metrics import EngineConfig


def _error(status, code, message, location=None):
    body = {"code": code, "message": message}
    if location is not None:
        body["location"] = location
    return HTTPException(status_code=status, detail=body)


class Job:
    def __init__(self, job_id, grid_id, total):
        self.job_id = job_id
        self.grid_id = grid_id
        self.state = "queued"
        self.completed = 0
        self.total = total
        self.error = None

    def to_dict(self):
        return {
            "job_id": self.job_id,
            "grid_id": self.grid_id,
            "state": self.state,
            "completed": self.completed,
            "total": self.total,
            "error": self.error,
        }


class EngineState:
    """Shared immutable store plus per-grid results and sessions."""

    def __init__(self, store, config, default_threads=2, session_dir=None):
        self.store = store
        self.config = config or EngineConfig()
        self.default_threads = default_threads
        self.session_dir = session_dir
        self.jobs = {}
        self.grids = {}  # grid_id -> {"spec", "grid", "results", "rows"}
        self.sessions = {}
        self.lock = threading.Lock()
        if session_dir:
            os.makedirs(session_dir, exist_ok=True)
            for name in sorted(os.listdir(session_dir)):
                if name.endswith(".json"):
                    sess = session_mod.load_session(os.path.join(session_dir, name))
                    self.sessions[sess.session_id] = sess

    def persist_session(self, sess):
        if self.session_dir:
            session_mod.save_session(
                sess, os.path.join(self.session_dir, f"{sess.session_id}.json")
            )

    def grid_or_404(self, grid_id):
        entry = self.grids.get(grid_id)
        if entry is None or entry.get("results") is None:
            raise _error(404, "grid_not_found", f"no evaluated grid {grid_id!r}")
        return entry

    def session_or_404(self, session_id):
        sess = self.sessions.get(session_id)
        if sess is None:
            raise _error(404, "session_not_found", f"no session {session_id!r}")
        return sess


def _parse_or_422(text):
    try:
        return dsl.parse_spec(text)
    except DslError as exc:
        location = None
        if exc.line is not None:
            location = {"line": exc.line, "col": exc.col}
        raise _error(422, "spec_error", str(exc), location) from None


def _spec_summary(spec, text):
    return {
        "grid_size": grid_size(spec),
        "inclusions": [c.label for c in spec.inclusions],
        "exclusions": [c.label for c in spec.exclusions],
        "has_intervention": spec.intervention is not None,
        "adjustables": [
            {"name": a.name, "values": list(a.values), "unit": a.unit}
            for a in spec.adjustables
        ],
        "ast": dsl.spec_to_dict(spec),
        "normalized_text": dsl.serialize_spec(spec),
        "spec_hash": sweep.spec_hash(text),
    }


def create_app(store, config=None, default_threads=2, session_dir=None):
    state = EngineState(store, config, default_threads, session_dir)
    app = FastAPI(title="trialgrid")
    app.state.engine = state
    app.add_middleware(
        CORSMiddleware,
        allow_origins=["*"],
        allow_methods=["*"],
        allow_headers=["*"],
    )

    @app.exception_handler(HTTPException)
    async def handle_http(request, exc):
        detail = exc.detail
        if not isinstance(detail, dict):
            detail = {"code": "error", "message": str(detail)}
        return JSONResponse(status_code=exc.status_code, content=detail)

    @app.get("/api/health")
    def health():
        return {"status": "ok", "patients": len(state.store)}

    @app.post("/api/spec")
    def post_spec(payload: dict = Body(...)):
        text = payload.get("text", "")
        spec = _parse_or_422(text)
        return _spec_summary(spec, text)

    @app.post("/api/grid/evaluate")
    def post_evaluate(payload: dict = Body(...)):
        text = payload.get("text", "")
        threads = int(payload.get("threads", state.default_threads))
        spec = _parse_or_422(text)
        normalized = dsl.serialize_spec(spec)
        grid_id = sweep.spec_hash(normalized, state.config)
        size = grid_size(spec)
        if size > state.config.max_candidates:
            raise _error(
                413, "grid_too_large",
                f"grid has {size} candidates (limit {state.config.max_candidates})",
            )
        job = Job(str(uuid.uuid4()), grid_id, size)
        state.jobs[job.job_id] = job
        with state.lock:
            cached = state.grids.get(grid_id)
            if cached is not None and cached.get("results") is not None:
                job.state = "done"
                job.completed = size
                return {"job_id": job.job_id, "grid_id": grid_id, "cached": True}
            state.grids.setdefault(grid_id, {"spec": spec, "results": None})

        def run():
            job.state = "running"

            def progress(done, total):
                job.completed = done

            try:
                grid, results = sweep.evaluate_grid(
                    state.store, spec, state.config, threads=threads,
                    progress=progress,
                )
                rows = sweep.results_table(results)
                with state.lock:
                    state.grids[grid_id] = {
                        "spec": spec, "grid": grid, "results": results, "rows": rows,
                    }
                job.completed = job.total
                job.state = "done"
            except Exception as exc:  # surfaced via job state, not a crash
                job.error = str(exc)
                job.state = "failed"

        threading.Thread(target=run, daemon=True).start()
        return {"job_id": job.job_id, "grid_id": grid_id, "cached": False}

    @app.get("/api/jobs/{job_id}")
    def get_job(job_id: str):
        job = state.jobs.get(job_id)
        if job is None:
            raise _error(404, "job_not_found", f"no job {job_id!r}")
        return job.to_dict()

    @app.get("/api/grid/{grid_id}/manifest")
    def get_manifest(grid_id: str):
        entry = state.grid_or_404(grid_id)
        return entry["grid"].manifest()

    @app.get("/api/grid/{grid_id}/candidates")
    def get_candidates(grid_id: str, constraints: str = Query(default=None),
                       region: str = Query(default=None)):
        entry = state.grid_or_404(grid_id)
        try:
            cons = json.loads(constraints) if constraints else None
            reg = json.loads(region) if region else None
        except json.JSONDecodeError as exc:
            raise _error(400, "bad_query", f"invalid query JSON: {exc}") from None
        if cons:
            declared = {a.name for a in entry["spec"].adjustables}
            unknown = set(cons) - declared
            if unknown:
                raise _error(
                    400, "bad_query",
                    "unknown adjustable(s): " + ", ".join(sorted(unknown)),
                )
        return {"results": sweep.filter_rows(entry["rows"], cons, reg)}

    @app.get("/api/candidates/{grid_id}/{candidate_id}/profile")
    def get_profile(grid_id: str, candidate_id: int):
        entry = state.grid_or_404(grid_id)
        results = entry["results"]
        if not 0 <= candidate_id < len(results):
            raise _error(404, "candidate_not_found",
                         f"candidate {candidate_id} outside the grid")
        result = results[candidate_id]
        if result.profile is None:
            raise _error(409, "degenerate_candidate",
                         f"candidate {candidate_id} is degenerate "
                         f"({result.outcome.reason})")
        return result.profile.to_dict()

    @app.post("/api/groups/compare")
    def compare_groups(payload: dict = Body(...)):
        grid_id = payload.get("grid_id", "")
        entry = state.grid_or_404(grid_id)
        results = entry["results"]
        out = {}
        for key in ("group_a", "group_b"):
            ids = payload.get(key, [])
            members = [
                results[cid] for cid in ids
                if 0 <= cid < len(results) and results[cid].profile is not None
            ]
            if not members:
                raise _error(400, "empty_group",
                             f"{key} has no usable (non-degenerate) candidates")
            out[key] = profiles_mod.aggregate_group(
                [m.profile for m in members], [m.outcome for m in members]
            ).to_dict()
        return out

    # ------------------------------------------------------------------
    # Sessions

    @app.post("/api/sessions")
    def post_session(payload: dict = Body(default={})):
        sess = session_mod.Session(
            session_id=str(uuid.uuid4()),
            spec_hash=payload.get("spec_hash", ""),
        )
        with state.lock:
            state.sessions[sess.session_id] = sess
            state.persist_session(sess)
        return sess.to_dict()

    @app.get("/api/sessions/{session_id}")
    def get_session(session_id: str):
        return state.session_or_404(session_id).to_dict()

    @app.post("/api/sessions/{session_id}/stages")
    def post_stage(session_id: str, payload: dict = Body(default={})):
        sess = state.session_or_404(session_id)
        try:
            with state.lock:
                stage_id = session_mod.create_stage(
                    sess,
                    importance=payload.get("importance", 3),
                    keywords=payload.get("keywords", ()),
                    description=payload.get("description", ""),
                )
                state.persist_session(sess)
        except SessionError as exc:
            raise _error(422, "invalid_stage", str(exc)) from None
        return sess.stage(stage_id).to_dict()

    @app.patch("/api/sessions/{session_id}/stages/{stage_id}")
    def patch_stage(session_id: str, stage_id: int, payload: dict = Body(...)):
        sess = state.session_or_404(session_id)
        try:
            with state.lock:
                stage = session_mod.update_stage(
                    sess, stage_id,
                    importance=payload.get("importance"),
                    keywords=payload.get("keywords"),
                    description=payload.get("description"),
                )
                state.persist_session(sess)
        except SessionError as exc:
            raise _error(422, "invalid_stage", str(exc)) from None
        return stage.to_dict()

    @app.post("/api/sessions/{session_id}/stages/{stage_id}/records")
    def post_record(session_id: str, stage_id: int, payload: dict = Body(...)):
        sess = state.session_or_404(session_id)
        grid_id = payload.get("grid_id", "")
        entry = state.grid_or_404(grid_id)
        try:
            with state.lock:
                record = session_mod.append_record(
                    sess, stage_id,
                    kind=payload.get("kind", "criterion_adjust"),
                    results_rows=entry["rows"],
                    grid_size=len(entry["results"]),
                    bindings_constraints=payload.get("bindings_constraints"),
                    selected_candidates=payload.get("selected_candidates", ()),
                    axes=tuple(payload.get("axes", ("n", "hr"))),
                    viewport=payload.get("viewport"),
                )
                state.persist_session(sess)
        except SessionError as exc:
            raise _error(422, "invalid_record", str(exc)) from None
        return record.to_dict()

    @app.get("/api/sessions/{session_id}/stages/{stage_id}/matrix")
    def get_matrix(session_id: str, stage_id: int, grid_id: str):
        sess = state.session_or_404(session_id)
        entry = state.grid_or_404(grid_id)
        try:
            stage = sess.stage(stage_id)
        except SessionError as exc:
            raise _error(404, "stage_not_found", str(exc)) from None
        return {
            "matrix": session_mod.matrix_data(stage, entry["spec"].adjustables)
        }

    return app
