"""Shared helpers: fixture loading shortcuts, brute-force grounding oracles,
and seeded random generators for programs and compiled problems."""

from __future__ import annotations

import itertools
import random

import pytest

from softlogic.atoms import AtomDatabase, GroundAtom
from softlogic.grounding import ground_program
from softlogic.inference import compile_model, grid_search_oracle
from softlogic.lang import (
    CONSTANT, Comparison, Literal, parse_program, validate_program,
)
from softlogic.demo import load_fixture


def pytest_runtest_logreport(report):
    """One summary line per acceptance criterion."""
    if report.when == "call" and "test_acceptance" in report.nodeid:
        name = report.nodeid.split("::")[-1]
        outcome = "PASS" if report.passed else "FAIL"
        print(f"\nACCEPTANCE {name}: {outcome}")


@pytest.fixture
def weiss():
    return load_fixture("weiss")


@pytest.fixture
def weiss_priors():
    return load_fixture("weiss_priors")


@pytest.fixture
def das():
    return load_fixture("das")


@pytest.fixture
def holz():
    return load_fixture("holz")


def build_program(text):
    result = parse_program(text)
    assert not [d for d in result.diagnostics if d.severity == "error"], \
        [str(d) for d in result.diagnostics]
    validate_program(result.program)
    return result.program


def make_db(program, atoms):
    """atoms: iterable of (predicate, args, belief, status)."""
    db = AtomDatabase()
    db.register_program_predicates(program)
    for predicate, args, belief, status in atoms:
        db.commit_atom(GroundAtom(predicate, tuple(args)), belief, status)
    return db


# ---------------------------------------------------------------------------
# Brute-force grounding oracles (independent of the join in the grounder)
# ---------------------------------------------------------------------------

def _term_value(term, subst):
    return term.text if term.kind == CONSTANT else subst[term.text]


def _ground_template(tmpl, subst):
    return GroundAtom(tmpl.predicate,
                      tuple(_term_value(t, subst) for t in tmpl.args))


def _variable_domains(templates, db):
    domains = {}
    for tmpl in templates:
        for pos, term in enumerate(tmpl.args):
            if term.kind == CONSTANT:
                continue
            consts = {rec.atom.args[pos]
                      for rec in db.query_atoms(tmpl.predicate)}
            domains.setdefault(term.text, set()).update(consts)
    return domains


def brute_force_logical(rule, db):
    """Set of clauses from exhaustive substitution enumeration."""
    templates = rule.body.atom_templates()
    domains = _variable_domains(templates, db)
    names = sorted(domains)
    clauses = set()
    pools = [sorted(domains[v]) for v in names]
    for combo in itertools.product(*pools):
        subst = dict(zip(names, combo))
        ok = True
        for item in rule.body.body:
            if isinstance(item, Comparison):
                left = _term_value(item.left, subst)
                right = _term_value(item.right, subst)
                holds = (left != right) if item.op == "!=" else (left == right)
                if not holds:
                    ok = False
                    break
        if not ok:
            continue
        for tmpl in templates:
            if _ground_template(tmpl, subst) not in db:
                ok = False
                break
        if not ok:
            continue
        clause = tuple(
            (_ground_template(lit.atom, subst), lit.negated)
            for lit in rule.body.clause())
        clauses.add(clause)
    return clauses


def brute_force_arithmetic(rule, db):
    """Set of normal forms (terms, constant, comparator) by naive expansion."""
    body = rule.body
    templates = [t.atom for t in body.lhs.terms + body.rhs.terms]
    regular_templates = [t for t in templates if not t.summation_variables()]
    domains = {}
    for tmpl in templates:
        for pos, term in enumerate(tmpl.args):
            if term.kind != "variable":
                continue
            consts = {rec.atom.args[pos]
                      for rec in db.query_atoms(tmpl.predicate)}
            domains.setdefault(term.text, set()).update(consts)
    names = sorted(domains)
    pools = [sorted(domains[v]) for v in names]

    def expand(expr, subst):
        out = []
        for lterm in expr.terms:
            tmpl = lterm.atom
            svars = tmpl.summation_variables()
            if not svars:
                out.append((lterm.coefficient, _ground_template(tmpl, subst)))
                continue
            for rec in db.query_atoms(tmpl.predicate):
                bindings = {}
                match = True
                for t, const in zip(tmpl.args, rec.atom.args):
                    if t.kind == CONSTANT:
                        if t.text != const:
                            match = False
                            break
                    elif t.kind == "variable":
                        if subst[t.text] != const:
                            match = False
                            break
                    else:
                        if bindings.get(t.text, const) != const:
                            match = False
                            break
                        bindings[t.text] = const
                if not match:
                    continue
                local = dict(subst)
                local.update(bindings)
                passed = True
                for flt in body.filters:
                    if flt.variable not in bindings:
                        continue
                    for lit in flt.atoms:
                        atom = _ground_template(lit.atom, local)
                        rec2 = db.get(atom)
                        present = rec2 is not None and rec2.belief > 0
                        if lit.negated == present:
                            passed = False
                            break
                    if not passed:
                        break
                if passed:
                    out.append((lterm.coefficient, rec.atom))
        return out

    results = set()
    for combo in itertools.product(*pools):
        subst = dict(zip(names, combo))
        if any(_ground_template(t, subst) not in db
               for t in regular_templates):
            continue
        # summation templates whose regular positions match nothing only
        # qualify when their variables are bound by some other template
        only_binder = False
        for tmpl in templates:
            if not tmpl.summation_variables():
                continue
            regular_vars = [t.text for t in tmpl.args if t.kind == "variable"]
            if not regular_vars:
                continue
            others = [t for t in templates if t is not tmpl]
            other_vars = set()
            for o in others:
                other_vars.update(o.variables())
            if all(v in other_vars for v in regular_vars):
                continue
            # this template is the only binder for some variable: require a
            # database match for the substitution to exist at all
            hit = False
            for rec in db.query_atoms(tmpl.predicate):
                if all(subst[t.text] == c
                       for t, c in zip(tmpl.args, rec.atom.args)
                       if t.kind == "variable"):
                    hit = True
                    break
            if not hit:
                only_binder = True
                break
        if only_binder:
            continue
        merged = {}
        order = []
        for coef, atom in expand(body.lhs, subst):
            if atom not in merged:
                order.append(atom)
            merged[atom] = merged.get(atom, 0.0) + coef
        for coef, atom in expand(body.rhs, subst):
            if atom not in merged:
                order.append(atom)
            merged[atom] = merged.get(atom, 0.0) - coef
        terms = tuple(sorted(
            ((merged[a], a) for a in order if merged[a] != 0.0),
            key=lambda pair: pair[1]))
        results.add((terms, body.rhs.constant - body.lhs.constant,
                     body.comparator))
    return results


# ---------------------------------------------------------------------------
# Random generators
# ---------------------------------------------------------------------------

def random_logical_program(rng: random.Random):
    """Small random program + database for the grounding oracle."""
    arities = {"Pa": rng.choice([1, 2]), "Qb": rng.choice([1, 2]),
               "Rc": rng.choice([1, 2])}
    predicates = list(arities)
    constants = ["'c0'", "'c1'", "'c2'", "'c3'"]

    lines = [f"@predicate {p}/{a}" for p, a in arities.items()]
    variables = ["X", "Y", "Z", "W"]
    n_rules = rng.randint(1, 3)
    for _ in range(n_rules):
        n_atoms = rng.randint(2, 4)
        atoms = []
        used_vars = []
        for _ in range(n_atoms):
            pred = rng.choice(predicates)
            args = []
            for _ in range(arities[pred]):
                if rng.random() < 0.75:
                    var = rng.choice(variables)
                    args.append(var)
                    used_vars.append(var)
                else:
                    args.append(rng.choice(constants))
            atoms.append(f"{pred}({','.join(args)})")
        body = atoms[:-1]
        if len(set(used_vars)) >= 2 and rng.random() < 0.5:
            a, b = rng.sample(sorted(set(used_vars)), 2)
            body.append(f"{a} != {b}")
        head = ("~" if rng.random() < 0.4 else "") + atoms[-1]
        if body:
            lines.append(f"{' & '.join(body)} -> {head} .")
        else:
            lines.append(f"{head} .")

    program = build_program("\n".join(lines))
    db = AtomDatabase()
    db.register_program_predicates(program)
    for pred, arity in arities.items():
        pool = list(itertools.product(["c0", "c1", "c2", "c3"], repeat=arity))
        rng.shuffle(pool)
        for args in pool[:rng.randint(0, min(len(pool), 6))]:
            db.commit_atom(GroundAtom(pred, args), rng.random(), "open")
    return program, db


def random_compiled_problem(rng: random.Random, max_open=4):
    """Random PSL-style ground model compiled to a MapProblem.

    Clause constraints use +-1 coefficients and grid-aligned folded
    constants, so the 0.01-grid oracle sees the feasible vertices.
    """
    n_open = rng.randint(1, max_open)
    n_observed = rng.randint(0, 2)
    lines = ["@predicate V/1", "@predicate O/1"]
    opens = [f"'v{i}'" for i in range(n_open)]
    observed = [f"'o{i}'" for i in range(n_observed)]

    atoms = [("V", (f"v{i}",), 0.0, "open") for i in range(n_open)]
    atoms += [("O", (f"o{i}",), rng.choice([0.0, 0.25, 0.5, 0.75, 1.0]),
               "observed") for i in range(n_observed)]

    def literal(name, pred="V"):
        return ("~" if rng.random() < 0.4 else "") + f"{pred}({name})"

    # disjoint simplex constraint over a prefix of the open atoms
    if n_open >= 2 and rng.random() < 0.6:
        size = rng.randint(2, n_open)
        lines.append(" + ".join(f"V({v})" for v in opens[:size]) + " = 1 .")

    for _ in range(rng.randint(0, 2)):
        pool = opens + observed
        picks = rng.sample(pool, min(len(pool), rng.randint(1, 3)))
        lits = [literal(p, "O" if p.startswith("'o") else "V") for p in picks]
        lines.append(" | ".join(lits) + " .")

    for _ in range(rng.randint(1, 4)):
        pool = opens + observed
        picks = rng.sample(pool, min(len(pool), rng.randint(1, 3)))
        lits = [literal(p, "O" if p.startswith("'o") else "V") for p in picks]
        weight = rng.choice([0.5, 1.0, 1.5, 2.0])
        squared = " ^2" if rng.random() < 0.3 else ""
        lines.append(f"{weight}: {' | '.join(lits)}{squared}")

    if rng.random() < 0.4:
        v = rng.choice(opens)
        bound = rng.choice([0.25, 0.5, 0.75])
        op = rng.choice(["<=", ">="])
        if op == ">=" and bound > 0.5:
            bound = 0.5  # keep intersections with the simplex feasible
        lines.append(f"V({v}) {op} {bound} .")

    program = build_program("\n".join(lines))
    db = make_db(program, atoms)
    model, _ = ground_program(program, db)
    problem = compile_model(model, db)
    return program, db, model, problem


def random_feasible_problem(rng, max_open=4):
    """Keep drawing until the grid oracle finds a feasible point."""
    while True:
        program, db, model, problem = random_compiled_problem(rng, max_open)
        if problem.n == 0:
            continue
        oracle = grid_search_oracle(problem, 0.05)
        if oracle.assignment is not None:
            return program, db, model, problem
