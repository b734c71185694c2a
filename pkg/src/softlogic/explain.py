"""Talking predicates and talking rules: verbalize atoms, ground rules, and
the why / why-not pressure blocks for a focused atom.

Verbalization templates are data: predicate templates use ``{argN}`` and
``{belief-qualifier}`` placeholders, rule templates use ``{Var}`` placeholders
filled from the grounding substitution.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .rag import DOWNWARD, UPWARD


@dataclass(frozen=True)
class QualifierScale:
    very_likely: float = 0.9   # belief >= this
    likely: float = 0.7        # belief >= this
    unlikely: float = 0.3      # belief <= this
    very_unlikely: float = 0.1  # belief <= this


DEFAULT_SCALE = QualifierScale()


def belief_qualifier(belief: float, scale: QualifierScale = DEFAULT_SCALE) -> str:
    if belief >= scale.very_likely:
        return "very likely"
    if belief >= scale.likely:
        return "likely"
    if belief <= scale.very_unlikely:
        return "very unlikely"
    if belief <= scale.unlikely:
        return "unlikely"
    return "uncertain whether"


def verbalize_atom(atom, belief, db, scale: QualifierScale = DEFAULT_SCALE) -> str:
    """Fill the predicate's template, or fall back to '<atom> holds'."""
    decl = db.predicates.get(atom.predicate)
    template = decl.verbalization if decl else None
    if not template:
        return f"{atom} holds"
    text = template.replace("{belief-qualifier}", belief_qualifier(belief, scale))
    for i, arg in enumerate(atom.args, start=1):
        text = text.replace(f"{{arg{i}}}", arg)
    return text


def verbalize_ground_rule(ground_rule) -> str:
    """Fill the rule's template from its substitution, else canonical text."""
    template = ground_rule.origin.verbalization
    if not template:
        return ground_rule.render()
    text = template
    for var, const in ground_rule.substitution.items():
        text = text.replace(f"{{{var}}}", const)
    return text


@dataclass(frozen=True)
class ExplanationEntry:
    rule_id: str
    text: str
    links: tuple[str, ...]  # ids of the other atoms of the ground rule
    magnitude: float


@dataclass
class Explanation:
    atom_id: str
    belief: float
    focus_text: str
    why: list[ExplanationEntry] = field(default_factory=list)
    why_not: list[ExplanationEntry] = field(default_factory=list)


def explain_atom(atom, graph, solution, db,
                 scale: QualifierScale = DEFAULT_SCALE) -> Explanation:
    """Why / why-not blocks for an atom node of a rule-atom graph.

    The why block lists rules currently exerting upward pressure, the
    why-not block downward pressure; inactive rules are excluded. Entries
    are ordered by descending magnitude and carry links to the other atoms
    of the rule for hypertext-style navigation.
    """
    atom_id = str(atom)
    node = graph.atom_nodes.get(atom_id)
    if node is None:
        raise KeyError(f"atom {atom_id} is not part of the graph")

    explanation = Explanation(
        atom_id, node.belief, verbalize_atom(node.atom, node.belief, db, scale))

    entries = []
    for edge in graph.edges:
        if edge.atom != atom_id or edge.direction not in (UPWARD, DOWNWARD):
            continue
        ground_rule = graph.ground_rules.get(edge.rule)
        text = verbalize_ground_rule(ground_rule) if ground_rule is not None \
            else graph.rule_nodes[edge.rule].text
        links = tuple(a for a in graph.atoms_of_rule[edge.rule] if a != atom_id)
        entries.append((edge.direction,
                        ExplanationEntry(edge.rule, text, links,
                                         edge.magnitude)))
    entries.sort(key=lambda pair: (-pair[1].magnitude, pair[1].rule_id))
    for direction, entry in entries:
        (explanation.why if direction == UPWARD
         else explanation.why_not).append(entry)
    return explanation
