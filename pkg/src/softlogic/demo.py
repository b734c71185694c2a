"""Shipped fixtures and the layered demo model.

Fixtures replace live NLP components: the atoms a tokenizer, tagger, parser,
or semantic parser would commit are checked in as TSV files, honoring the
atom-generator interface. Each fixture directory holds ``program.psl``,
``atoms.tsv`` and ``metadata.txt`` (key = value lines with hand-derived
expected counts and optima).
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field
from pathlib import Path

from .atoms import AtomDatabase, load_tsv
from .explain import Explanation, explain_atom
from .grounding import ground_program
from .inference import SolverConfig, compile_model, solve_map
from .lang import Program, has_errors, parse_program, validate_program
from .rag import build_rag

LAYER_PREFIXES = {
    "T": "tokenization",
    "F": "form variants (target hypotheses)",
    "P": "part-of-speech tagging",
    "L": "lemmatization and lexical properties",
    "M": "morphological features",
    "D": "dependency structures",
    "S": "semantic structures",
    "C": "context specification",
    "X": "helper predicates",
}


class FixtureError(Exception):
    pass


def fixtures_root() -> Path:
    return Path(importlib.resources.files("softlogic") / "fixtures")


def available_fixtures():
    root = fixtures_root()
    return sorted(p.name for p in root.iterdir()
                  if (p / "program.psl").exists())


@dataclass
class Fixture:
    name: str
    path: Path
    program: Program
    db: AtomDatabase
    metadata: dict[str, str] = field(default_factory=dict)


def _parse_metadata(text):
    out = {}
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            continue
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


def load_fixture(name_or_path) -> Fixture:
    """Load a shipped fixture by name, or any fixture directory by path."""
    path = Path(name_or_path)
    if not path.is_dir():
        path = fixtures_root() / str(name_or_path)
    program_path = path / "program.psl"
    atoms_path = path / "atoms.tsv"
    if not program_path.exists():
        raise FixtureError(f"missing program file: {program_path}")
    if not atoms_path.exists():
        raise FixtureError(f"missing atoms file: {atoms_path}")

    result = parse_program(program_path.read_text(encoding="utf-8"))
    diagnostics = result.diagnostics + validate_program(result.program)
    if has_errors(diagnostics):
        details = "; ".join(str(d) for d in diagnostics
                            if d.severity == "error")
        raise FixtureError(f"{program_path}: {details}")

    db = AtomDatabase()
    db.register_program_predicates(result.program)
    try:
        load_tsv(atoms_path.read_text(encoding="utf-8"), db)
    except Exception as exc:
        raise FixtureError(f"{atoms_path}: {exc}") from exc

    metadata = {}
    meta_path = path / "metadata.txt"
    if meta_path.exists():
        metadata = _parse_metadata(meta_path.read_text(encoding="utf-8"))
    return Fixture(path.name, path, result.program, db, metadata)


ARCHITECTURE_PROGRAM = """\
@predicate Tana/1
@predicate Fvar/1
@predicate Pana/2
@predicate Pcat/2
@predicate Dlnk/2
@predicate Sent/1
@predicate Srel/3
@predicate Cent/1
@predicate Crel/3
@predicate Xcat/3
@predicate Xent/2
@predicate Xrel/4
@predicate Xorig/1

Tana(+T) = 1 .
Fvar(+V) = 1 .
Pcat(T,C) = Pana(+PA,+TA) . {PA: Xcat(PA,T,C)}
Dlnk(H,D) & Pcat(H,'PNOUN') -> ~Pcat(D,'DET') .
Sent(C) = Fvar(+V) . {V: Xent(V,C)}
Srel(X,R,Y) = Fvar(+V) . {V: Xrel(V,X,R,Y)}
Cent(X) -> Sent(X) .
Crel(X,R,Y) -> Srel(X,R,Y) .
1.0: Xorig(V) -> Fvar(V)
"""


def build_architecture_program() -> Program:
    """The generic layered program: per-layer belief distributions, marginal
    linkage through helper atoms, one grammar rule, semantic decomposition,
    context matching, and a minimal-edit prior."""
    result = parse_program(ARCHITECTURE_PROGRAM)
    diagnostics = result.diagnostics + validate_program(result.program)
    if has_errors(diagnostics):
        raise FixtureError(
            "architecture program failed to validate: "
            + "; ".join(str(d) for d in diagnostics))
    return result.program


@dataclass
class DemoResult:
    fixture: Fixture
    model: object
    report: object
    problem: object
    solution: object
    graph: object
    ranking: list[tuple[str, float]]
    explanations: dict[str, Explanation]

    def summary(self):
        lines = [f"fixture: {self.fixture.name}"]
        lines.append(f"ground rules: {len(self.model.ground_rules)}")
        diag = self.solution.diagnostics
        lines.append(
            f"objective: {diag.objective:.6f}  "
            f"max violation: {diag.max_violation:.2e}  "
            f"feasible: {diag.feasible}")
        if self.ranking:
            lines.append("variants (by belief):")
            for name, belief in self.ranking:
                lines.append(f"  {name}: {belief:.4f}")
        return "\n".join(lines)


def strip_context(db: AtomDatabase) -> AtomDatabase:
    """Copy of the database without C-layer (context) atoms."""
    out = AtomDatabase()
    for decl in db.predicates.values():
        out.register_predicate(decl.name, decl.arity, decl.verbalization,
                               decl.declared)
    for rec in db.records():
        if rec.atom.predicate in ("Cent", "Crel"):
            continue
        out.commit_atom(rec.atom, rec.belief, rec.status)
    return out


def run_demo(fixture: Fixture, config: SolverConfig | None = None) -> DemoResult:
    """Ground, solve, rank form variants, and explain the extremes."""
    model, report = ground_program(fixture.program, fixture.db)
    problem = compile_model(model, fixture.db)
    solution = solve_map(problem, config, model, fixture.db)
    graph = build_rag(model, solution, fixture.db)

    variants = [
        (rec.atom.args[0], solution.beliefs.get(rec.atom, rec.belief))
        for rec in fixture.db.query_atoms("Fvar")
    ]
    ranking = sorted(variants, key=lambda pair: (-pair[1], pair[0]))

    explanations = {}
    if ranking:
        top = fixture.db.query_pattern(f"Fvar('{ranking[0][0]}')")[0].atom
        bottom = fixture.db.query_pattern(f"Fvar('{ranking[-1][0]}')")[0].atom
        explanations["top"] = explain_atom(top, graph, solution, fixture.db)
        explanations["bottom"] = explain_atom(bottom, graph, solution,
                                              fixture.db)
    return DemoResult(fixture, model, report, problem, solution, graph,
                      ranking, explanations)
