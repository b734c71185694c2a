"""Command-line front end: validate, ground, infer, export graphs, explain,
run demos, and serve the session API.

Diagnostics go to stderr, data to stdout, so outputs are pipeable.
Exit codes: 0 success, 1 error diagnostics or infeasibility, 2 usage error.
"""

from __future__ import annotations

import argparse
import sys

from .atoms import AtomDatabase, dump_tsv, load_tsv, parse_atom_id
from .demo import available_fixtures, load_fixture, run_demo
from .explain import explain_atom
from .grounding import ground_program
from .inference import SolverConfig, compile_model, solve_map
from .lang import has_errors, parse_program, validate_program
from .rag import build_rag, export_dot, export_json


def _load_program(path):
    with open(path, encoding="utf-8") as handle:
        text = handle.read()
    result = parse_program(text)
    diagnostics = result.diagnostics + validate_program(result.program)
    for diag in diagnostics:
        print(f"{path}: {diag}", file=sys.stderr)
    return result.program, diagnostics


def _load_db(program, path):
    db = AtomDatabase()
    db.register_program_predicates(program)
    with open(path, encoding="utf-8") as handle:
        load_tsv(handle.read(), db)
    return db


def _solver_config(args):
    return SolverConfig(
        tolerance=args.tolerance,
        max_iterations=args.max_iters,
        seed=args.seed,
    )


def _add_solver_flags(parser):
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--tolerance", type=float, default=1e-6)
    parser.add_argument("--max-iters", type=int, default=10000)


def _solve(program, db, args):
    model, report = ground_program(program, db)
    for warning in report.warnings:
        print(warning, file=sys.stderr)
    problem = compile_model(model, db)
    solution = solve_map(problem, _solver_config(args), model, db)
    return model, problem, solution


def cmd_validate(args):
    _, diagnostics = _load_program(args.program)
    return 1 if has_errors(diagnostics) else 0


def cmd_ground(args):
    program, diagnostics = _load_program(args.program)
    if has_errors(diagnostics):
        return 1
    db = _load_db(program, args.atoms)
    model, report = ground_program(program, db)
    if args.dump:
        print(model.dump())
    else:
        for index, count in enumerate(report.rule_counts):
            rule = program.rules[index]
            label = rule.name or f"rule {index}"
            print(f"{label}: {count} groundings")
        print(f"total: {len(model.ground_rules)}")
    for warning in report.warnings:
        print(warning, file=sys.stderr)
    return 0


def cmd_infer(args):
    program, diagnostics = _load_program(args.program)
    if has_errors(diagnostics):
        return 1
    db = _load_db(program, args.atoms)
    model, problem, solution = _solve(program, db, args)
    for atom, belief in solution.beliefs.items():
        rec = db.get(atom)
        rec.belief = belief
    text = dump_tsv(db)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as handle:
            handle.write(text)
    else:
        sys.stdout.write(text)
    print(solution.diagnostics.as_text(), file=sys.stderr)
    if not solution.feasible:
        for gid in solution.diagnostics.violated:
            print(f"violated: {model.ground_rules[gid].render()}",
                  file=sys.stderr)
        return 1
    return 0


def cmd_rag(args):
    program, diagnostics = _load_program(args.program)
    if has_errors(diagnostics):
        return 1
    db = _load_db(program, args.atoms)
    model, problem, solution = _solve(program, db, args)
    graph = build_rag(model, solution, db)
    if args.dot:
        with open(args.dot, "w", encoding="utf-8") as handle:
            handle.write(export_dot(graph))
    if args.json:
        with open(args.json, "w", encoding="utf-8") as handle:
            handle.write(export_json(graph))
    if not args.dot and not args.json:
        sys.stdout.write(export_dot(graph))
    return 0 if solution.feasible else 1


def _print_explanation(explanation):
    print(f"focus: {explanation.atom_id}  belief={explanation.belief:.4f}")
    print(f"  {explanation.focus_text}")
    print("why (upward pressure):")
    if not explanation.why:
        print("  (none)")
    for entry in explanation.why:
        print(f"  [{entry.magnitude:.2f}] {entry.text}")
        for link in entry.links:
            print(f"         -> {link}")
    print("why not (downward pressure):")
    if not explanation.why_not:
        print("  (none)")
    for entry in explanation.why_not:
        print(f"  [{entry.magnitude:.2f}] {entry.text}")
        for link in entry.links:
            print(f"         -> {link}")


def cmd_explain(args):
    program, diagnostics = _load_program(args.program)
    if has_errors(diagnostics):
        return 1
    db = _load_db(program, args.atoms)
    parsed = parse_atom_id(args.atom)
    if parsed is None:
        print(f"malformed atom id: {args.atom}", file=sys.stderr)
        return 1
    model, problem, solution = _solve(program, db, args)
    graph = build_rag(model, solution, db)
    records = db.query_atoms(parsed[0], parsed[1])
    if not records:
        print(f"unknown atom: {args.atom}", file=sys.stderr)
        return 1
    try:
        explanation = explain_atom(records[0].atom, graph, solution, db)
    except KeyError as exc:
        print(exc.args[0], file=sys.stderr)
        return 1
    _print_explanation(explanation)
    return 0 if solution.feasible else 1


def cmd_demo(args):
    try:
        fixture = load_fixture(args.fixture)
    except Exception as exc:
        print(str(exc), file=sys.stderr)
        print(f"available fixtures: {', '.join(available_fixtures())}",
              file=sys.stderr)
        return 1
    result = run_demo(fixture, _solver_config(args))
    print(result.summary())
    for label in ("top", "bottom"):
        explanation = result.explanations.get(label)
        if explanation is None:
            continue
        print(f"--- {label} variant ---")
        _print_explanation(explanation)
    return 0 if result.solution.feasible else 1


def cmd_serve(args):
    import uvicorn

    from .service import ServiceConfig, create_app

    host, _, port = args.bind.rpartition(":")
    config = ServiceConfig(session_timeout=args.session_timeout,
                           solver=_solver_config(args))
    uvicorn.run(create_app(config), host=host or "127.0.0.1",
                port=int(port or 8000))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="softlogic",
        description="soft-logic rule engine: grounding, MAP inference, and "
                    "rule-atom-graph debugging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="parse and validate a program")
    p.add_argument("program")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("ground", help="ground a program against atoms")
    p.add_argument("program")
    p.add_argument("atoms")
    p.add_argument("--dump", action="store_true",
                   help="print every grounding in rule syntax")
    p.set_defaults(func=cmd_ground)

    p = sub.add_parser("infer", help="run MAP inference, print solution TSV")
    p.add_argument("program")
    p.add_argument("atoms")
    p.add_argument("--out", help="write the solution TSV to a file")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("rag", help="build the rule-atom graph and export it")
    p.add_argument("program")
    p.add_argument("atoms")
    p.add_argument("--dot", help="write DOT to a file")
    p.add_argument("--json", help="write explorer JSON to a file")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_rag)

    p = sub.add_parser("explain", help="explain one atom of the solution")
    p.add_argument("program")
    p.add_argument("atoms")
    p.add_argument("--atom", required=True,
                   help="atom id, e.g. \"Pcat('weiß','VERB')\"")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("demo", help="run a shipped fixture end to end")
    p.add_argument("fixture")
    _add_solver_flags(p)
    p.set_defaults(func=cmd_demo)

    p = sub.add_parser("serve", help="start the session service")
    p.add_argument("--bind", default="127.0.0.1:8000")
    p.add_argument("--session-timeout", type=float, default=1800.0)
    _add_solver_flags(p)
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        print(f"{exc.filename}: not found", file=sys.stderr)
        return 1
    except Exception as exc:  # diagnostics, never tracebacks, for CLI users
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
