"""HTTP session service: the backend of the interactive explorer.

Sessions are in-memory and evicted after an idle timeout. Every mutation
(freeze, thaw) bumps the session revision; inference artifacts (ground model,
solution, graph) are cached per revision so repeated reads are coherent.
Atom ids are ``Predicate('arg1','arg2')`` strings, percent-encoded in paths.
"""

from __future__ import annotations

import threading
import time
import uuid
from contextlib import contextmanager
from dataclasses import dataclass, field

from fastapi import FastAPI, Query, Request
from fastapi.responses import JSONResponse, Response

from .atoms import AtomDatabase, AtomError, load_tsv, parse_atom_id
from .explain import explain_atom
from .grounding import ground_program
from .inference import SolverConfig, compile_model, solve_map
from .lang import has_errors, parse_program, validate_program
from .rag import build_rag, export_json


@dataclass
class ServiceConfig:
    session_timeout: float = 1800.0
    mutation_wait: float = 10.0
    solver: SolverConfig = field(default_factory=SolverConfig)


class ApiError(Exception):
    def __init__(self, status, message, diagnostics=None):
        super().__init__(message)
        self.status = status
        self.message = message
        self.diagnostics = diagnostics or []


@dataclass
class Session:
    id: str
    program: object
    db: AtomDatabase
    revision: int = 0
    model: object = None
    report: object = None
    problem: object = None
    solution: object = None
    graph: object = None
    artifacts_revision: int = -1
    lock: threading.Lock = field(default_factory=threading.Lock)
    last_access: float = field(default_factory=time.monotonic)

    @property
    def has_solution(self):
        return self.solution is not None and \
            self.artifacts_revision == self.revision


def _atom_payload(rec):
    return {
        "id": str(rec.atom),
        "predicate": rec.atom.predicate,
        "args": list(rec.atom.args),
        "belief": rec.belief,
        "status": rec.status,
    }


def _solution_summary(session):
    diag = session.solution.diagnostics
    payload = {
        "revision": session.revision,
        "objective": diag.objective,
        "iterations": diag.iterations,
        "max_violation": diag.max_violation,
        "feasible": diag.feasible,
        "beliefs": {str(a): b for a, b in sorted(
            session.solution.beliefs.items(), key=lambda kv: str(kv[0]))},
    }
    if not diag.feasible:
        payload["violated"] = [
            {"rule": f"g{gid}",
             "text": session.model.ground_rules[gid].render()}
            for gid in diag.violated
        ]
    return payload


def create_app(config: ServiceConfig | None = None) -> FastAPI:
    config = config or ServiceConfig()
    app = FastAPI(title="softlogic session service")
    sessions: dict[str, Session] = {}
    registry_lock = threading.Lock()

    def evict_idle():
        now = time.monotonic()
        with registry_lock:
            stale = [sid for sid, s in sessions.items()
                     if now - s.last_access > config.session_timeout]
            for sid in stale:
                del sessions[sid]

    def get_session(sid) -> Session:
        evict_idle()
        with registry_lock:
            session = sessions.get(sid)
        if session is None:
            raise ApiError(404, f"unknown session {sid}")
        session.last_access = time.monotonic()
        return session

    def run_inference(session):
        if session.has_solution:
            return
        model, report = ground_program(session.program, session.db)
        problem = compile_model(model, session.db)
        solution = solve_map(problem, config.solver, model, session.db)
        # store solved beliefs: they warm-start the next solve and keep
        # pattern freezes ("at current belief") meaningful
        for atom, belief in solution.beliefs.items():
            rec = session.db.get(atom)
            if rec.is_open:
                rec.belief = belief
        graph = build_rag(model, solution, session.db)
        session.model = model
        session.report = report
        session.problem = problem
        session.solution = solution
        session.graph = graph
        session.artifacts_revision = session.revision

    @contextmanager
    def mutate(session):
        locked = session.lock.acquire(timeout=config.mutation_wait)
        if not locked:
            raise ApiError(409, "session is busy with another request")
        try:
            yield
        finally:
            session.lock.release()

    @app.exception_handler(ApiError)
    async def api_error_handler(_request: Request, exc: ApiError):
        return JSONResponse(
            status_code=exc.status,
            content={"error": exc.message,
                     "diagnostics": [str(d) for d in exc.diagnostics]},
        )

    @app.post("/sessions", status_code=201)
    def create_session(payload: dict):
        program_text = payload.get("program", "")
        atoms_text = payload.get("atoms", "")
        result = parse_program(program_text)
        diagnostics = result.diagnostics + validate_program(result.program)
        if has_errors(diagnostics):
            raise ApiError(400, "program failed to parse or validate",
                           [d for d in diagnostics if d.severity == "error"])
        db = AtomDatabase()
        db.register_program_predicates(result.program)
        try:
            load_tsv(atoms_text, db)
        except AtomError as exc:
            raise ApiError(400, f"atoms failed to load: {exc}")
        session = Session(id=uuid.uuid4().hex, program=result.program, db=db)
        with registry_lock:
            sessions[session.id] = session
        return {"id": session.id, "revision": session.revision,
                "warnings": [str(d) for d in diagnostics]}

    @app.get("/sessions/{sid}/atoms")
    def list_atoms(sid: str, pattern: str | None = Query(default=None)):
        session = get_session(sid)
        if pattern:
            try:
                records = session.db.query_pattern(pattern)
            except AtomError as exc:
                raise ApiError(400, str(exc))
        else:
            records = session.db.records()
        return {"revision": session.revision,
                "atoms": [_atom_payload(r) for r in records]}

    @app.post("/sessions/{sid}/infer")
    def infer(sid: str):
        session = get_session(sid)
        with mutate(session):
            run_inference(session)
            return _solution_summary(session)

    @app.get("/sessions/{sid}/rag")
    def rag(sid: str):
        session = get_session(sid)
        if not session.has_solution:
            raise ApiError(409, "no inference result for the current revision")
        return Response(
            content='{"revision": %d, "graph": %s}'
                    % (session.revision, export_json(session.graph)),
            media_type="application/json")

    @app.get("/sessions/{sid}/atoms/{atom_id}/explanation")
    def explanation(sid: str, atom_id: str):
        session = get_session(sid)
        if not session.has_solution:
            raise ApiError(409, "no inference result for the current revision")
        parsed = parse_atom_id(atom_id)
        if parsed is None:
            raise ApiError(400, f"malformed atom id {atom_id!r}")
        records = session.db.query_atoms(parsed[0], parsed[1])
        if not records:
            raise ApiError(404, f"unknown atom {atom_id}")
        atom = records[0].atom
        try:
            result = explain_atom(atom, session.graph, session.solution,
                                  session.db)
        except KeyError:
            raise ApiError(404, f"atom {atom_id} is not part of the graph")
        return {
            "revision": session.revision,
            "atom": str(atom),
            "belief": result.belief,
            "focus": result.focus_text,
            "why": [_entry_payload(session, e) for e in result.why],
            "why_not": [_entry_payload(session, e) for e in result.why_not],
        }

    def _entry_payload(session, entry):
        return {
            "rule": entry.rule_id,
            "text": entry.text,
            "magnitude": entry.magnitude,
            "links": [
                {"atom": a,
                 "belief": session.graph.atom_nodes[a].belief}
                for a in entry.links
            ],
        }

    @app.post("/sessions/{sid}/freeze")
    def freeze(sid: str, payload: dict):
        session = get_session(sid)
        pins = payload.get("pins", [])
        with mutate(session):
            previous = dict(session.solution.beliefs) if session.solution \
                else {}
            atoms = []
            for pin in pins:
                parsed = parse_atom_id(str(pin.get("atom", "")))
                if parsed is None:
                    raise ApiError(400, f"malformed atom id {pin.get('atom')!r}")
                records = session.db.query_atoms(parsed[0], parsed[1])
                if not records:
                    raise ApiError(404, f"unknown atom {pin.get('atom')}")
                belief = pin.get("belief", records[0].belief)
                if not 0.0 <= float(belief) <= 1.0:
                    raise ApiError(400, f"belief {belief} out of range [0,1]")
                atoms.append((records[0].atom, float(belief)))
            for atom, belief in atoms:
                session.db.set_status([atom], "frozen", belief)
            session.revision += 1
            run_inference(session)
            summary = _solution_summary(session)
            summary["deltas"] = _deltas(session, previous)
            return summary

    @app.post("/sessions/{sid}/thaw")
    def thaw(sid: str, payload: dict | None = None):
        session = get_session(sid)
        with mutate(session):
            targets = (payload or {}).get("atoms")
            if targets:
                count = 0
                for atom_id in targets:
                    parsed = parse_atom_id(atom_id)
                    if parsed is None:
                        raise ApiError(400, f"malformed atom id {atom_id!r}")
                    records = session.db.query_atoms(parsed[0], parsed[1])
                    if not records:
                        raise ApiError(404, f"unknown atom {atom_id}")
                    count += session.db.set_status([records[0].atom], "open")
            else:
                count = session.db.thaw()
            session.revision += 1
            return {"revision": session.revision, "thawed": count}

    def _deltas(session, previous):
        deltas = {}
        for atom, belief in session.solution.beliefs.items():
            before = previous.get(atom)
            if before is not None:
                deltas[str(atom)] = belief - before
        for atom in previous:
            rec = session.db.get(atom)
            if rec is not None and not rec.is_open:
                deltas[str(atom)] = rec.belief - previous[atom]
        return deltas

    @app.delete("/sessions/{sid}", status_code=204)
    def delete_session(sid: str):
        get_session(sid)
        with registry_lock:
            sessions.pop(sid, None)
        return Response(status_code=204)

    return app
