#!/usr/bin/env python3
# The layered demo model: semantic matching against the task context selects
# the corrected form variant of a learner sentence, even though a prior
# prefers the original wording. Removing the context flips the decision, and
# freezing lets you ask what-if questions against the hard constraints.

from softlogic import SolverConfig, compile_model, ground_program, solve_map
from softlogic.demo import load_fixture, run_demo, strip_context

print("== full model: context pulls belief to the corrected variant ==")
fixture = load_fixture("holz")
result = run_demo(fixture)
print(result.summary())
print("\nwhy is the original variant F1 down?")
for entry in result.explanations["bottom"].why_not[:3]:
    print("  -", entry.text)

print("\n== ablation: without context atoms the minimal-edit prior wins ==")
ablated = load_fixture("holz")
ablated.db = strip_context(ablated.db)
print(run_demo(ablated).summary())

print("\n== what-if: pin the corrected variant to zero ==")
pinned = load_fixture("holz")
pinned.db.freeze("Fvar('F2')", 0.0)
model, _ = ground_program(pinned.program, pinned.db)
problem = compile_model(model, pinned.db)
solution = solve_map(problem, SolverConfig(), model, pinned.db)
print("feasible:", solution.feasible)
print("constraints that cannot be met:")
for gid in solution.diagnostics.violated:
    print("  -", model.ground_rules[gid].render())
