#!/usr/bin/env python3
# Build a rule-atom graph over a solved model, export it, and read the
# why / why-not explanation for a focused atom. Freezing a belief shows how
# the explanation machinery doubles as a what-if debugger.

from softlogic import (
    SolverConfig, build_rag, compile_model, explain_atom, export_dot,
    ground_program, solve_map,
)
from softlogic.demo import load_fixture

fixture = load_fixture("weiss")
# pin the adjective reading, as an oracle tagger would
fixture.db.freeze("Pcat('weiß','ADJ')", 1.0)

model, _ = ground_program(fixture.program, fixture.db)
problem = compile_model(model, fixture.db)
solution = solve_map(problem, SolverConfig(), model, fixture.db)
graph = build_rag(model, solution, fixture.db)

print("== graph shape ==")
print("atom nodes:", len(graph.atom_nodes), " rule nodes:",
      len(graph.rule_nodes), " edges:", len(graph.edges))

print("\n== pressure edges ==")
for edge in graph.edges:
    print(f"  {edge.rule} --{edge.direction}({edge.magnitude:.2f})--> {edge.atom}")

print("\n== explanation for the verb reading ==")
verb = fixture.db.query_pattern("Pcat('weiß','VERB')")[0].atom
explanation = explain_atom(verb, graph, solution, fixture.db)
print("focus:", explanation.focus_text)
for entry in explanation.why_not:
    print("why not:", entry.text)
    for link in entry.links:
        print("  linked atom:", link)

print("\n== DOT export (render with graphviz) ==")
print(export_dot(graph))
