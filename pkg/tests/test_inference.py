import random

import numpy as np
import pytest

from softlogic.atoms import GroundAtom
from softlogic.grounding import ground_program
from softlogic.inference import (
    InferenceError, SolverConfig, compile_model, distance_to_satisfaction,
    grid_search_oracle, max_violation, objective_value, solve_map,
)

from conftest import build_program, make_db, random_feasible_problem

WEISS_ATOMS = [
    ("Pcat", ("weiß", "ADJ"), 0.0, "open"),
    ("Pcat", ("weiß", "VERB"), 0.0, "open"),
]

WEISS_BASE = (
    "@predicate Pcat/2\n"
    "Pcat(T,C1) & C1 != C2 -> ~Pcat(T,C2) .\n"
    "Pcat(T,+C) = 1 .\n"
)

WEISS_PRIORS = WEISS_BASE + (
    "1.0: Pcat('weiß','ADJ')\n"
    "2.0: Pcat('weiß','VERB')\n"
)


def compiled(text, atoms):
    program = build_program(text)
    db = make_db(program, atoms)
    model, _ = ground_program(program, db)
    return model, db, compile_model(model, db)


class TestDistance:
    def setup_method(self):
        program = build_program("@predicate A/1\n@predicate B/1\n"
                                "A(X) -> B(X) .\n")
        db = make_db(program, [("A", ("x",), 0.0, "open"),
                               ("B", ("x",), 0.0, "open")])
        model, _ = ground_program(program, db)
        self.rule = model.ground_rules[0]
        self.a = GroundAtom("A", ("x",))
        self.b = GroundAtom("B", ("x",))

    def test_fully_violated_implication(self):
        assert distance_to_satisfaction(
            self.rule, {self.a: 1.0, self.b: 0.0}) == 1.0

    def test_partial_violation(self):
        d = distance_to_satisfaction(self.rule, {self.a: 0.7, self.b: 0.4})
        assert d == pytest.approx(0.3)

    def test_equality_residual(self):
        program = build_program("@predicate V/1\nV('x') + V('y') = 1 .\n")
        db = make_db(program, [("V", ("x",), 0.0, "open"),
                               ("V", ("y",), 0.0, "open")])
        model, _ = ground_program(program, db)
        d = distance_to_satisfaction(
            model.ground_rules[0],
            {GroundAtom("V", ("x",)): 0.6, GroundAtom("V", ("y",)): 0.6})
        assert d == pytest.approx(0.2)

    def test_clause_distance_bounded(self):
        rng = random.Random(17)
        for _ in range(100):
            a, b = rng.random(), rng.random()
            d = distance_to_satisfaction(self.rule, {self.a: a, self.b: b})
            assert 0.0 <= d <= 1.0

    def test_missing_atom_raises(self):
        with pytest.raises(InferenceError, match="missing"):
            distance_to_satisfaction(self.rule, {self.a: 1.0})


class TestCompile:
    def test_weiss_counts(self):
        _, _, problem = compiled(WEISS_BASE, WEISS_ATOMS)
        assert problem.n == 2
        assert len(problem.hinges) == 0
        kinds = sorted(c.kind for c in problem.constraints)
        assert kinds == ["arithmetic", "clause", "clause"]
        eq_ops = [c.op for c in problem.constraints if c.kind == "arithmetic"]
        assert eq_ops == ["eq"]

    def test_weiss_priors_adds_hinges(self):
        _, _, problem = compiled(WEISS_PRIORS, WEISS_ATOMS)
        assert len(problem.hinges) == 2
        assert sorted(h.weight for h in problem.hinges) == [1.0, 2.0]
        for hinge in problem.hinges:
            # prior clause {P}: e = 1 - x
            assert hinge.const == 1.0
            assert sorted(hinge.coefs) == [-1.0, 0.0]

    def test_fully_observed_model_has_no_variables(self):
        atoms = [("Pcat", ("weiß", "ADJ"), 1.0, "observed"),
                 ("Pcat", ("weiß", "VERB"), 0.0, "observed")]
        _, _, problem = compiled(WEISS_PRIORS, atoms)
        assert problem.n == 0
        assert problem.constant_objective == pytest.approx(2.0)

    def test_frozen_folds_like_observed(self):
        atoms = [("Pcat", ("weiß", "ADJ"), 1.0, "frozen"),
                 ("Pcat", ("weiß", "VERB"), 0.0, "open")]
        _, _, problem = compiled(WEISS_BASE, atoms)
        assert problem.n == 1


class TestSolve:
    def test_weiss_priors_analytic_optimum(self):
        model, db, problem = compiled(WEISS_PRIORS, WEISS_ATOMS)
        solution = solve_map(problem, SolverConfig(), model, db)
        beliefs = {str(a): b for a, b in solution.beliefs.items()}
        assert beliefs["Pcat('weiß','ADJ')"] == pytest.approx(0.0, abs=1e-3)
        assert beliefs["Pcat('weiß','VERB')"] == pytest.approx(1.0, abs=1e-3)
        assert solution.objective == pytest.approx(1.0, abs=1e-3)
        assert solution.diagnostics.max_violation <= 1e-4

    def test_single_hinge_pushes_to_bound(self):
        _, _, problem = compiled("@predicate V/1\n3.0: V('x')\n",
                                 [("V", ("x",), 0.0, "open")])
        solution = solve_map(problem)
        assert solution.beliefs[GroundAtom("V", ("x",))] \
            == pytest.approx(1.0, abs=1e-6)
        assert solution.objective == pytest.approx(0.0, abs=1e-6)

    def test_objective_matches_recomputation(self):
        model, db, problem = compiled(WEISS_PRIORS, WEISS_ATOMS)
        solution = solve_map(problem, SolverConfig(), model, db)
        assert solution.objective == pytest.approx(
            objective_value(problem, solution.beliefs), abs=1e-9)

    def test_deterministic(self):
        model, db, problem = compiled(WEISS_PRIORS, WEISS_ATOMS)
        first = solve_map(problem, SolverConfig(seed=1), model, db)
        second = solve_map(problem, SolverConfig(seed=1), model, db)
        assert first.beliefs == second.beliefs
        assert first.objective == second.objective

    def test_infeasible_names_violated_constraints(self):
        text = ("@predicate V/1\n"
                "V('x') >= 1 .\n"
                "V('x') <= 0 .\n")
        model, db, problem = compiled(text, [("V", ("x",), 0.0, "open")])
        solution = solve_map(problem, SolverConfig(), model, db)
        assert not solution.feasible
        assert solution.diagnostics.violated  # at least one named culprit

    def test_rule_distances_reported(self):
        model, db, problem = compiled(WEISS_PRIORS, WEISS_ATOMS)
        solution = solve_map(problem, SolverConfig(), model, db)
        assert set(solution.rule_distances) == \
            {r.gid for r in model.ground_rules}
        # the ADJ prior stays fully unsatisfied at the optimum
        adj_prior = model.ground_rules[3]
        assert solution.rule_distances[adj_prior.gid] \
            == pytest.approx(1.0, abs=1e-3)

    def test_empty_problem(self):
        program = build_program("")
        db = make_db(program, [])
        model, _ = ground_program(program, db)
        problem = compile_model(model, db)
        solution = solve_map(problem)
        assert solution.objective == 0.0 and solution.feasible


class TestObjectiveValue:
    def test_all_zero_assignment(self):
        _, _, problem = compiled(WEISS_PRIORS, WEISS_ATOMS)
        assert objective_value(problem, np.zeros(2)) == pytest.approx(3.0)

    def test_optimal_assignment(self):
        _, _, problem = compiled(WEISS_PRIORS, WEISS_ATOMS)
        x = problem.vector({GroundAtom("Pcat", ("weiß", "ADJ")): 0.0,
                            GroundAtom("Pcat", ("weiß", "VERB")): 1.0})
        assert objective_value(problem, x) == pytest.approx(1.0)

    def test_empty_problem_is_zero(self):
        program = build_program("")
        db = make_db(program, [])
        model, _ = ground_program(program, db)
        problem = compile_model(model, db)
        assert objective_value(problem, np.zeros(0)) == 0.0


class TestGridOracle:
    def test_weiss_priors_grid(self):
        _, _, problem = compiled(WEISS_PRIORS, WEISS_ATOMS)
        oracle = grid_search_oracle(problem, 0.01)
        assert oracle.objective == pytest.approx(1.0)
        beliefs = {str(a): b for a, b in oracle.assignment.items()}
        assert beliefs == {"Pcat('weiß','ADJ')": 0.0,
                           "Pcat('weiß','VERB')": 1.0}

    def test_infeasible_problem_reports_none(self):
        _, _, problem = compiled("@predicate V/1\nV('x') >= 2 .\n",
                                 [("V", ("x",), 0.0, "open")])
        oracle = grid_search_oracle(problem, 0.01)
        assert oracle.assignment is None
        assert oracle.objective == float("inf")

    def test_grid_size(self):
        _, _, problem = compiled("@predicate V/1\n1.0: V('x')\n",
                                 [("V", ("x",), 0.0, "open")])
        oracle = grid_search_oracle(problem, 0.5)
        assert oracle.points_evaluated == 3

    def test_too_many_variables(self):
        atoms = [("V", (f"x{i}",), 0.0, "open") for i in range(6)]
        _, _, problem = compiled(
            "@predicate V/1\n" + "\n".join(f"1.0: V('x{i}')" for i in range(6)),
            atoms)
        with pytest.raises(InferenceError, match="at most 5"):
            grid_search_oracle(problem, 0.5)


class TestSolverProperties:
    def test_oracle_dominance(self):
        rng = random.Random(505)
        for case in range(25):
            _, db, model, problem = random_feasible_problem(rng)
            solution = solve_map(problem, SolverConfig(), model, db)
            oracle = grid_search_oracle(problem, 0.01)
            assert solution.diagnostics.max_violation <= 1e-4, f"case {case}"
            assert all(0.0 <= b <= 1.0 for b in solution.beliefs.values())
            assert solution.objective <= oracle.objective + 1e-3, \
                (case, solution.objective, oracle.objective)

    def test_convexity(self):
        rng = random.Random(99)
        for _ in range(5):
            _, _, _, problem = random_feasible_problem(rng)
            n = problem.n
            for _ in range(100):
                x = np.array([rng.random() for _ in range(n)])
                y = np.array([rng.random() for _ in range(n)])
                lam = rng.random()
                mixed = objective_value(problem, lam * x + (1 - lam) * y)
                bound = lam * objective_value(problem, x) \
                    + (1 - lam) * objective_value(problem, y)
                assert mixed <= bound + 1e-9

    def test_box_respect(self):
        rng = random.Random(7)
        for _ in range(10):
            _, db, model, problem = random_feasible_problem(rng)
            solution = solve_map(problem, SolverConfig(), model, db)
            for belief in solution.beliefs.values():
                assert 0.0 <= belief <= 1.0

    def test_frozen_and_observed_are_untouched(self):
        atoms = [("Pcat", ("weiß", "ADJ"), 0.3, "frozen"),
                 ("Pcat", ("weiß", "VERB"), 0.0, "open")]
        model, db, problem = compiled(WEISS_BASE, atoms)
        before = {r.atom: (r.belief, r.status) for r in db.records()}
        solution = solve_map(problem, SolverConfig(), model, db)
        after = {r.atom: (r.belief, r.status) for r in db.records()}
        assert before == after
        assert GroundAtom("Pcat", ("weiß", "ADJ")) not in solution.beliefs
        assert solution.beliefs[GroundAtom("Pcat", ("weiß", "VERB"))] \
            == pytest.approx(0.7, abs=1e-4)

    def test_weight_scaling_argmin_invariance(self):
        base = compiled(WEISS_PRIORS, WEISS_ATOMS)
        scaled = compiled(
            WEISS_BASE + "3.0: Pcat('weiß','ADJ')\n6.0: Pcat('weiß','VERB')\n",
            WEISS_ATOMS)
        sol_base = solve_map(base[2], SolverConfig(), base[0], base[1])
        sol_scaled = solve_map(scaled[2], SolverConfig(), scaled[0], scaled[1])
        assert sol_scaled.objective == pytest.approx(3 * sol_base.objective,
                                                     abs=1e-6)
        oracle = grid_search_oracle(scaled[2], 0.01)
        assert sol_scaled.objective <= oracle.objective + 1e-3

    def test_violation_measures_agree(self):
        rng = random.Random(31)
        for _ in range(5):
            _, db, model, problem = random_feasible_problem(rng)
            solution = solve_map(problem, SolverConfig(), model, db)
            x = problem.vector(solution.beliefs)
            assert max_violation(problem, x) \
                == pytest.approx(solution.diagnostics.max_violation)
