"""MAP inference: compile a ground model into a convex objective and solve.

Weighted ground rules become hinge penalties ``w * max(0, e)^p`` over open-atom
beliefs; hard rules become linear constraints; observed and frozen beliefs are
folded into the constants. The solver is a consensus ADMM over the potential
terms with the [0,1] box enforced at the consensus step, followed by a Dykstra
projection polish onto the hard constraints.

Logical clauses use the Lukasiewicz relaxation: a clause {l1..ln} has distance
to satisfaction max(0, 1 - sum(value(li))) with value(l) = belief for positive
literals and 1 - belief for negated ones. That choice is isolated here so an
alternative t-norm stays a local swap.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grounding import GroundArithmeticRule, GroundLogicalRule

EQ = "eq"
LE = "le"


class InferenceError(Exception):
    pass


# ---------------------------------------------------------------------------
# Distance to satisfaction
# ---------------------------------------------------------------------------

def clause_expression(clause, assignment):
    """e such that the clause distance is max(0, e)."""
    e = 1.0
    for lit in clause:
        value = assignment[lit.atom]
        e -= (1.0 - value) if lit.negated else value
    return e


def distance_to_satisfaction(ground_rule, assignment) -> float:
    """How far a ground rule is from satisfied under a full assignment."""
    try:
        if isinstance(ground_rule, GroundLogicalRule):
            return max(0.0, clause_expression(ground_rule.clause, assignment))
        e = sum(c * assignment[a] for c, a in ground_rule.terms)
        k = ground_rule.constant
    except KeyError as exc:
        raise InferenceError(f"assignment is missing {exc.args[0]}")
    if ground_rule.comparator == "<=":
        return max(0.0, e - k)
    if ground_rule.comparator == ">=":
        return max(0.0, k - e)
    return abs(e - k)


# ---------------------------------------------------------------------------
# Compilation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Hinge:
    """Penalty weight * max(0, coefs @ x + const) ** exponent."""

    weight: float
    exponent: int
    coefs: np.ndarray
    const: float
    gid: int

    def expression(self, x):
        return float(self.coefs @ x) + self.const

    def penalty(self, x):
        return self.weight * max(0.0, self.expression(x)) ** self.exponent


@dataclass(frozen=True)
class HardConstraint:
    """coefs @ x + const == 0 (eq) or <= 0 (le)."""

    op: str
    coefs: np.ndarray
    const: float
    gid: int
    kind: str  # "clause" or "arithmetic", for reporting

    def violation(self, x):
        e = float(self.coefs @ x) + self.const
        return abs(e) if self.op == EQ else max(0.0, e)


@dataclass
class MapProblem:
    variables: list  # open GroundAtoms, sorted
    index: dict
    warm: np.ndarray
    hinges: list[Hinge] = field(default_factory=list)
    constraints: list[HardConstraint] = field(default_factory=list)
    constant_objective: float = 0.0
    constant_violations: list[tuple[int, float]] = field(default_factory=list)

    @property
    def n(self):
        return len(self.variables)

    def assignment(self, x):
        return {atom: float(x[i]) for i, atom in enumerate(self.variables)}

    def vector(self, beliefs):
        return np.array([beliefs[a] for a in self.variables], dtype=float)


def _clause_row(clause, index, db, n):
    """Coefficients/constant with e = 1 - sum(value(literal))."""
    coefs = np.zeros(n)
    const = 1.0
    for lit in clause:
        sign = 1.0 if lit.negated else -1.0
        i = index.get(lit.atom)
        if i is not None:
            coefs[i] += sign
        else:
            const += sign * db.get(lit.atom).belief
        if lit.negated:
            const -= 1.0
    return coefs, const


def _arithmetic_row(rule, index, db, n):
    """Coefficients/constant with e = sum(c*x) - k after folding."""
    coefs = np.zeros(n)
    const = -rule.constant
    for c, atom in rule.terms:
        i = index.get(atom)
        if i is not None:
            coefs[i] += c
        else:
            const += c * db.get(atom).belief
    return coefs, const


def compile_model(model, db) -> MapProblem:
    """Build the convex MAP problem for a ground model.

    Hard logical rules become linear satisfaction constraints (distance held
    at zero exactly), not large-weight hinges. Infeasibility is not detected
    here; the solver reports it.
    """
    variables = sorted(
        a for a in model.atom_rules
        if db.get(a) is not None and db.get(a).is_open)
    index = {a: i for i, a in enumerate(variables)}
    n = len(variables)
    warm = np.array([db.get(a).belief for a in variables], dtype=float)
    problem = MapProblem(variables, index, warm)

    for rule in model.ground_rules:
        weight = rule.origin.weight
        exponent = 2 if rule.origin.squared else 1
        if isinstance(rule, GroundLogicalRule):
            coefs, const = _clause_row(rule.clause, index, db, n)
            rows = [(coefs, const, LE)]
        else:
            coefs, const = _arithmetic_row(rule, index, db, n)
            if rule.comparator == "<=":
                rows = [(coefs, const, LE)]
            elif rule.comparator == ">=":
                rows = [(-coefs, -const, LE)]
            else:
                rows = [(coefs, const, EQ)]

        if rule.hard:
            for coefs, const, op in rows:
                if not coefs.any():
                    violation = abs(const) if op == EQ else max(0.0, const)
                    if violation > 1e-9:
                        problem.constant_violations.append((rule.gid, violation))
                    continue
                kind = "clause" if isinstance(rule, GroundLogicalRule) \
                    else "arithmetic"
                problem.constraints.append(
                    HardConstraint(op, coefs, const, rule.gid, kind))
        else:
            for coefs, const, op in rows:
                hinge_rows = [(coefs, const)]
                if op == EQ:
                    hinge_rows = [(coefs, const), (-coefs, -const)]
                for h_coefs, h_const in hinge_rows:
                    if not h_coefs.any():
                        problem.constant_objective += \
                            weight * max(0.0, h_const) ** exponent
                        continue
                    problem.hinges.append(
                        Hinge(weight, exponent, h_coefs, h_const, rule.gid))
    return problem


def objective_value(problem: MapProblem, x) -> float:
    """Sum of hinge penalties; hard constraints are excluded."""
    if isinstance(x, dict):
        x = problem.vector(x)
    x = np.asarray(x, dtype=float)
    total = problem.constant_objective
    for hinge in problem.hinges:
        total += hinge.penalty(x)
    return float(total)


def max_violation(problem: MapProblem, x) -> float:
    worst = max((v for _, v in problem.constant_violations), default=0.0)
    for constraint in problem.constraints:
        worst = max(worst, constraint.violation(x))
    return worst


# ---------------------------------------------------------------------------
# Solver
# ---------------------------------------------------------------------------

@dataclass
class SolverConfig:
    tolerance: float = 1e-6
    max_iterations: int = 10000
    seed: int = 0
    rho: float = 1.0
    objective_window: int = 50


@dataclass
class SolveDiagnostics:
    iterations: int
    objective: float
    max_violation: float
    converged: bool
    feasible: bool
    violated: list[int] = field(default_factory=list)

    def as_text(self):
        lines = [
            f"iterations = {self.iterations}",
            f"objective = {self.objective:.9f}",
            f"max_violation = {self.max_violation:.9f}",
            f"converged = {str(self.converged).lower()}",
            f"feasible = {str(self.feasible).lower()}",
        ]
        if self.violated:
            lines.append("violated = " + ", ".join(str(g) for g in self.violated))
        return "\n".join(lines)


@dataclass
class MapSolution:
    beliefs: dict
    objective: float
    rule_distances: dict[int, float]
    diagnostics: SolveDiagnostics

    @property
    def feasible(self):
        return self.diagnostics.feasible


def _project_constraint(constraint, v):
    e = float(constraint.coefs @ v) + constraint.const
    if constraint.op == LE and e <= 0.0:
        return v
    norm2 = float(constraint.coefs @ constraint.coefs)
    return v - (e / norm2) * constraint.coefs


def _dykstra_polish(problem, x, max_cycles=2000, tol=1e-11):
    """Project x onto the intersection of hard constraints and the box."""
    sets = list(problem.constraints)
    if not sets:
        return np.clip(x, 0.0, 1.0)
    corrections = [np.zeros_like(x) for _ in sets] + [np.zeros_like(x)]
    y = x.copy()
    for _ in range(max_cycles):
        previous = y.copy()
        for i, constraint in enumerate(sets):
            w = y + corrections[i]
            y = _project_constraint(constraint, w)
            corrections[i] = w - y
        w = y + corrections[-1]
        y = np.clip(w, 0.0, 1.0)
        corrections[-1] = w - y
        if max_violation(problem, y) <= tol and \
                float(np.max(np.abs(y - previous))) <= tol:
            break
    return np.clip(y, 0.0, 1.0)


_HINGE_LIN = 0
_HINGE_SQ = 1
_HARD_EQ = 2
_HARD_LE = 3


def _stack_factors(problem, rho):
    """Dense factor matrix plus per-row closed-form prox parameters.

    Every prox/projection moves v along the factor's own row:
    y = v + alpha * c with a scalar alpha depending on e = c@v + d.
    """
    factors = list(problem.hinges) + list(problem.constraints)
    m = len(factors)
    n = problem.n
    C = np.zeros((m, n))
    d = np.zeros(m)
    kinds = np.zeros(m, dtype=int)
    weights = np.zeros(m)
    for i, factor in enumerate(factors):
        C[i] = factor.coefs
        d[i] = factor.const
        if isinstance(factor, Hinge):
            kinds[i] = _HINGE_LIN if factor.exponent == 1 else _HINGE_SQ
            weights[i] = factor.weight
        else:
            kinds[i] = _HARD_EQ if factor.op == EQ else _HARD_LE
    norms = np.einsum("ij,ij->i", C, C)
    norms[norms == 0.0] = 1.0
    return C, d, kinds, weights, norms


def _prox_alphas(E, kinds, weights, norms, rho):
    """Vectorized step sizes for y = v + alpha * c, one per factor row."""
    alpha = np.zeros_like(E)
    project = -E / norms

    eq = kinds == _HARD_EQ
    alpha[eq] = project[eq]

    le = (kinds == _HARD_LE) & (E > 0.0)
    alpha[le] = project[le]

    lin = (kinds == _HINGE_LIN) & (E > 0.0)
    full_step = -weights / rho
    interior = lin & (E + full_step * norms >= 0.0)
    alpha[interior] = full_step[interior]
    clipped = lin & ~interior
    alpha[clipped] = project[clipped]

    sq = (kinds == _HINGE_SQ) & (E > 0.0)
    s = E[sq] / (1.0 + 2.0 * weights[sq] * norms[sq] / rho)
    alpha[sq] = -(E[sq] - s) / norms[sq]
    return alpha


def solve_map(problem: MapProblem, config: SolverConfig | None = None,
              model=None, db=None) -> MapSolution:
    """Minimize the weighted hinge objective subject to hard constraints.

    Deterministic for a fixed config. When the hard constraints cannot be
    met, returns a best-effort point with ``feasible`` False and the ground
    rule ids of the constraints still violated at convergence.
    """
    config = config or SolverConfig()
    n = problem.n
    m = len(problem.hinges) + len(problem.constraints)

    if n == 0 or m == 0:
        x = np.clip(problem.warm.copy(), 0.0, 1.0) if n else np.zeros(0)
        return _finish(problem, x, 0, True, config, model, db)

    rho = config.rho
    C, d, kinds, weights, norms = _stack_factors(problem, rho)
    z = np.clip(problem.warm.copy(), 0.0, 1.0)
    U = np.zeros((m, n))

    check_every = 10
    window = max(1, config.objective_window // check_every)
    objective_history = [objective_value(problem, z)]
    iterations = 0
    converged = False

    for iterations in range(1, config.max_iterations + 1):
        V = z[None, :] - U
        E = np.einsum("ij,ij->i", C, V) + d
        Y = V + _prox_alphas(E, kinds, weights, norms, rho)[:, None] * C
        z_prev = z
        z = np.clip(np.mean(Y + U, axis=0), 0.0, 1.0)
        U += Y - z[None, :]

        if iterations % check_every:
            continue
        primal = float(np.max(np.abs(Y - z[None, :])))
        dual = float(np.max(np.abs(z - z_prev)))
        objective_history.append(objective_value(problem, z))
        if len(objective_history) > window + 1:
            objective_history.pop(0)

        tight = primal <= 1e-10 and dual <= 1e-10
        windowed = (
            len(objective_history) > window
            and abs(objective_history[-1] - objective_history[0])
            <= config.tolerance
            and primal <= 1e-7 and dual <= 1e-8
        )
        if tight or windowed:
            if max_violation(problem, z) <= 1e-6 or not problem.constraints:
                converged = True
                break

    x = _dykstra_polish(problem, z)
    return _finish(problem, x, iterations, converged, config, model, db)


def _finish(problem, x, iterations, converged, config, model, db):
    x = np.clip(x, 0.0, 1.0)
    violation = max_violation(problem, x)
    violated = [gid for gid, v in problem.constant_violations if v > 1e-4]
    violated += [c.gid for c in problem.constraints if c.violation(x) > 1e-4]
    feasible = not violated
    beliefs = problem.assignment(x)

    rule_distances = {}
    if model is not None and db is not None:
        full = dict(beliefs)
        for rec in db.records():
            if rec.atom not in full:
                full[rec.atom] = rec.belief
        for rule in model.ground_rules:
            rule_distances[rule.gid] = distance_to_satisfaction(rule, full)

    diagnostics = SolveDiagnostics(
        iterations=iterations,
        objective=objective_value(problem, x),
        max_violation=violation,
        converged=converged,
        feasible=feasible,
        violated=sorted(set(violated)),
    )
    return MapSolution(beliefs, diagnostics.objective, rule_distances,
                       diagnostics)


# ---------------------------------------------------------------------------
# Independent oracle
# ---------------------------------------------------------------------------

@dataclass
class OracleResult:
    assignment: dict | None
    objective: float
    points_evaluated: int


def grid_search_oracle(problem: MapProblem, step: float) -> OracleResult:
    """Exhaustive search over the belief grid {0, step, ..., 1}^n.

    The feasibility slack sits strictly below the step: it absorbs the
    floating-point fuzz of grid points that are feasible in exact
    arithmetic without admitting genuinely violating neighbours (which
    would let the oracle undercut the constrained optimum). Only intended
    as a verification oracle for small problems (at most 5 open atoms).
    """
    n = problem.n
    if n > 5:
        raise InferenceError(
            f"grid search supports at most 5 open atoms, got {n}")
    if not 0.0 < step <= 1.0:
        raise InferenceError(f"bad step {step}")
    slack = step * (1.0 - 1e-3)
    if any(v >= slack for _, v in problem.constant_violations):
        return OracleResult(None, float("inf"), 0)

    points = np.linspace(0.0, 1.0, round(1.0 / step) + 1)
    if n == 0:
        return OracleResult({}, objective_value(problem, np.zeros(0)), 1)

    rows = []  # (coefs, const, weight, squared, is_constraint, is_eq)
    for h in problem.hinges:
        rows.append((h.coefs, h.const, h.weight, h.exponent == 2, False, False))
    for c in problem.constraints:
        rows.append((c.coefs, c.const, 0.0, False, True, c.op == EQ))

    # sweep the variable that appears in the fewest factor rows: every other
    # row's contribution is shared across the whole sweep
    touch = [sum(1 for r in rows if r[0][j] != 0.0) for j in range(n)]
    axis = int(np.argmin(touch)) if rows else 0
    order = [axis] + [j for j in range(n) if j != axis]

    f32 = np.float32
    grid = points.astype(f32)
    if n == 1:
        tail = np.zeros((1, 0), dtype=f32)
    else:
        mesh = np.meshgrid(*([grid] * (n - 1)), indexing="ij")
        tail = np.stack([g.ravel() for g in mesh], axis=1)
    R = len(tail)

    def tail_expr(coefs, const):
        return tail @ coefs[order[1:]].astype(f32) + f32(const)

    static_objective = np.zeros(R, dtype=f32)
    static_feasible = np.ones(R, dtype=bool)
    dynamic = []
    for coefs, const, weight, squared, is_constraint, is_eq in rows:
        expr = tail_expr(coefs, const)
        c0 = f32(coefs[axis])
        if c0 == 0.0:
            if is_constraint:
                violation = np.abs(expr) if is_eq else np.maximum(expr, 0.0)
                static_feasible &= violation < slack
            else:
                active = np.maximum(expr, 0.0)
                static_objective += f32(weight) * \
                    (active * active if squared else active)
        else:
            dynamic.append((expr, c0, weight, squared, is_constraint, is_eq))

    best = None
    best_objective = float("inf")
    scratch = np.empty(R, dtype=f32)
    objective = np.empty(R, dtype=f32)
    feasible = np.empty(R, dtype=bool)
    for v0 in grid:
        np.copyto(objective, static_objective)
        np.copyto(feasible, static_feasible)
        for expr, c0, weight, squared, is_constraint, is_eq in dynamic:
            np.add(expr, c0 * v0, out=scratch)
            if is_constraint:
                if is_eq:
                    np.abs(scratch, out=scratch)
                else:
                    np.maximum(scratch, 0.0, out=scratch)
                feasible &= scratch < slack
            else:
                np.maximum(scratch, 0.0, out=scratch)
                if squared:
                    np.multiply(scratch, scratch, out=scratch)
                objective += f32(weight) * scratch
        if not feasible.any():
            continue
        objective[~feasible] = np.inf
        i = int(np.argmin(objective))
        if objective[i] < best_objective:
            x = np.empty(n)
            x[axis] = v0
            for k, j in enumerate(order[1:]):
                x[j] = tail[i, k]
            value = objective_value(problem, x)
            if best is None or value < best_objective:
                best = x
                best_objective = value

    count = len(points) ** n
    if best is None:
        return OracleResult(None, float("inf"), count)
    return OracleResult(problem.assignment(best), best_objective, count)
