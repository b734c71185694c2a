"""softlogic: a soft-logic rule engine with a debugging stack.

Logical and arithmetic rule templates are grounded against a committed
universe of atoms; MAP inference minimizes the weighted distances to
satisfaction of the ground rules over [0,1] beliefs, subject to hard
constraints. Rule-atom graphs, belief freezing, and verbalized why/why-not
explanations make the resulting models inspectable.
"""

from .atoms import (
    FROZEN, OBSERVED, OPEN, AtomDatabase, AtomError, AtomRecord, GroundAtom,
    dump_tsv, load_tsv, parse_atom_id,
)
from .explain import (
    Explanation, ExplanationEntry, QualifierScale, belief_qualifier,
    explain_atom, verbalize_atom, verbalize_ground_rule,
)
from .grounding import (
    GroundArithmeticRule, GroundingReport, GroundLiteral, GroundLogicalRule,
    GroundModel, ground_arithmetic_rule, ground_logical_rule, ground_program,
)
from .inference import (
    MapProblem, MapSolution, OracleResult, SolverConfig, compile_model,
    distance_to_satisfaction, grid_search_oracle, max_violation,
    objective_value, solve_map,
)
from .lang import (
    ArithmeticRuleBody, AtomTemplate, Comparison, Diagnostic, Filter,
    LinearExpr, LinearTerm, Literal, LogicalRuleBody, ParseResult,
    PredicateDecl, Program, Rule, Term, format_rule, has_errors,
    parse_program, parse_rule, validate_program,
)
from .rag import (
    DOWNWARD, INACTIVE, UPWARD, PressureEdge, RagStyle, RuleAtomGraph,
    StaleSolutionError, build_rag, compute_pressure, export_dot, export_json,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
