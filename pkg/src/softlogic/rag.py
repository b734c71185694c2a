"""Rule-atom graphs: bipartite graphs over a ground model and a solution.

Atom nodes carry the solved belief and a layer prefix (first character of the
predicate name); rule nodes carry their stress (distance to satisfaction at
the solution). Each (rule, atom) incidence pair yields one pressure edge.

Pressure direction is descent-based: upward means raising the belief strictly
lowers the rule's penalty, downward means lowering it does, inactive means the
rule asks nothing of the atom. A satisfied hard equality resists motion both
ways; its edge keeps a directional label (upward when it is holding the belief
up, i.e. belief >= 0.5, downward otherwise) with the one-sided slope as
magnitude.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .grounding import GroundLogicalRule
from .inference import distance_to_satisfaction

UPWARD = "upward"
DOWNWARD = "downward"
INACTIVE = "inactive"

_KINK_TOL = 1e-12


class StaleSolutionError(Exception):
    """The solution does not cover exactly the model's open atoms."""


@dataclass(frozen=True)
class AtomNode:
    atom: object
    belief: float
    layer: str

    @property
    def id(self):
        return str(self.atom)


@dataclass(frozen=True)
class RuleNode:
    gid: int
    stress: float
    hard: bool
    text: str

    @property
    def id(self):
        return f"g{self.gid}"


@dataclass(frozen=True)
class PressureEdge:
    rule: str
    atom: str
    direction: str
    magnitude: float


@dataclass
class RuleAtomGraph:
    atom_nodes: dict[str, AtomNode] = field(default_factory=dict)
    rule_nodes: dict[str, RuleNode] = field(default_factory=dict)
    edges: list[PressureEdge] = field(default_factory=list)
    rules_of_atom: dict[str, list[str]] = field(default_factory=dict)
    atoms_of_rule: dict[str, list[str]] = field(default_factory=dict)
    ground_rules: dict[str, object] = field(default_factory=dict)

    @property
    def node_count(self):
        return len(self.atom_nodes) + len(self.rule_nodes)


def _rule_expression(rule, atom, assignment):
    """(e, net coefficient of atom, comparator-kind) for the rule's residual.

    Logical clauses and <=-normalized arithmetic rules have distance
    max(0, e); equalities have distance |e|.
    """
    if isinstance(rule, GroundLogicalRule):
        e = 1.0
        coef = 0.0
        for lit in rule.clause:
            value = assignment[lit.atom]
            e -= (1.0 - value) if lit.negated else value
            if lit.atom == atom:
                coef += 1.0 if lit.negated else -1.0
        return e, coef, "le"
    e = -rule.constant
    coef = 0.0
    for c, a in rule.terms:
        e += c * assignment[a]
        if a == atom:
            coef += c
    if rule.comparator == ">=":
        return -e, -coef, "le"
    if rule.comparator == "<=":
        return e, coef, "le"
    return e, coef, "eq"


def compute_pressure(rule, atom, assignment):
    """(direction, magnitude) the rule exerts on the atom at the assignment."""
    if atom not in rule.atoms():
        raise KeyError(f"{atom} does not occur in ground rule g{rule.gid}")
    e, coef, kind = _rule_expression(rule, atom, assignment)
    if coef == 0.0:
        return INACTIVE, 0.0

    weight = rule.origin.weight
    exponent = 2 if rule.origin.squared else 1

    def slope(distance):
        if rule.hard:
            return abs(coef)
        return weight * exponent * (distance ** (exponent - 1)) * abs(coef)

    if kind == "le":
        if e > _KINK_TOL:
            direction = DOWNWARD if coef > 0 else UPWARD
            return direction, slope(e)
        # satisfied, including the kink: no descent direction exists
        return INACTIVE, 0.0

    # equality: distance |e|
    if e > _KINK_TOL:
        return (DOWNWARD if coef > 0 else UPWARD), slope(e)
    if e < -_KINK_TOL:
        return (UPWARD if coef > 0 else DOWNWARD), slope(-e)
    # satisfied equality: both-sided resistance; label by which side it holds
    magnitude = slope(0.0)
    if magnitude == 0.0:
        return INACTIVE, 0.0
    direction = UPWARD if assignment[atom] >= 0.5 else DOWNWARD
    return direction, magnitude


def build_rag(model, solution, db) -> RuleAtomGraph:
    """One atom node per atom occurring in any ground rule, one rule node per
    ground rule, one annotated edge per incidence pair."""
    open_atoms = set(model.open_atoms(db))
    if open_atoms != set(solution.beliefs):
        raise StaleSolutionError(
            "solution does not match the model's open atoms")

    assignment = dict(solution.beliefs)
    for atom in model.atom_rules:
        if atom not in assignment:
            assignment[atom] = db.get(atom).belief

    graph = RuleAtomGraph()
    for atom in model.atoms():
        graph.atom_nodes[str(atom)] = AtomNode(
            atom, assignment[atom], atom.predicate[0])
    for rule in model.ground_rules:
        node = RuleNode(rule.gid, distance_to_satisfaction(rule, assignment),
                        rule.hard, rule.render())
        graph.rule_nodes[node.id] = node
        graph.ground_rules[node.id] = rule
        for atom in rule.atoms():
            direction, magnitude = compute_pressure(rule, atom, assignment)
            edge = PressureEdge(node.id, str(atom), direction, magnitude)
            graph.edges.append(edge)
            graph.rules_of_atom.setdefault(str(atom), []).append(node.id)
            graph.atoms_of_rule.setdefault(node.id, []).append(str(atom))
    return graph


# ---------------------------------------------------------------------------
# Exports
# ---------------------------------------------------------------------------

DEFAULT_PALETTE = {
    "T": "#bbbbbb",
    "F": "#ff9900",
    "P": "#ffff00",
    "L": "#66aaff",
    "M": "#cc99ff",
    "D": "#00cc44",
    "S": "#33cccc",
    "C": "#ff66cc",
    "X": "#eeeeee",
}


@dataclass
class RagStyle:
    palette: dict = field(default_factory=lambda: dict(DEFAULT_PALETTE))
    default_color: str = "#dddddd"


def _stress_color(stress):
    level = max(0.0, min(1.0, stress))
    return f"#{round(level * 255):02x}0000"


def _belief_alpha(belief):
    level = max(0.0, min(1.0, belief))
    return f"{round(level * 255):02x}"


def export_dot(graph: RuleAtomGraph, style: RagStyle | None = None) -> str:
    """Graphviz text. Rule nodes are black boxes with stress as font color;
    atom nodes are colored by layer with opacity proportional to belief."""
    style = style or RagStyle()
    lines = ["graph rag {", "  node [style=filled];"]
    for atom_id in sorted(graph.atom_nodes):
        node = graph.atom_nodes[atom_id]
        color = style.palette.get(node.layer, style.default_color)
        lines.append(
            f'  "{atom_id}" [shape=ellipse, fillcolor="{color}'
            f'{_belief_alpha(node.belief)}", label="{atom_id}'
            f'\\n{node.belief:.3f}"];')
    for rule_id in sorted(graph.rule_nodes, key=lambda r: int(r[1:])):
        node = graph.rule_nodes[rule_id]
        lines.append(
            f'  "{rule_id}" [shape=box, fillcolor="#000000", '
            f'fontcolor="{_stress_color(node.stress)}", '
            f'label="{rule_id} stress={node.stress:.3f}"];')
    for edge in sorted(graph.edges, key=lambda e: (int(e.rule[1:]), e.atom)):
        attrs = ""
        if edge.direction != INACTIVE:
            arrow = "up" if edge.direction == UPWARD else "down"
            attrs = f' [label="{arrow} {edge.magnitude:.2f}"]'
        lines.append(f'  "{edge.rule}" -- "{edge.atom}"{attrs};')
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_json(graph: RuleAtomGraph) -> str:
    """Explorer transport: stable key order, round-trips node/edge counts."""
    nodes = []
    for atom_id in sorted(graph.atom_nodes):
        node = graph.atom_nodes[atom_id]
        nodes.append({
            "id": atom_id,
            "kind": "atom",
            "predicate": node.atom.predicate,
            "args": list(node.atom.args),
            "belief": node.belief,
            "layer": node.layer,
        })
    for rule_id in sorted(graph.rule_nodes, key=lambda r: int(r[1:])):
        node = graph.rule_nodes[rule_id]
        nodes.append({
            "id": rule_id,
            "kind": "rule",
            "stress": node.stress,
            "hard": node.hard,
        })
    edges = [
        {"rule": e.rule, "atom": e.atom, "direction": e.direction,
         "magnitude": e.magnitude}
        for e in sorted(graph.edges, key=lambda e: (int(e.rule[1:]), e.atom))
    ]
    return json.dumps({"nodes": nodes, "edges": edges}, ensure_ascii=False,
                      indent=2)
