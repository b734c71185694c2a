"""Instantiate rule templates against the atom database.

Grounding is closed-universe: a substitution only qualifies when every atom
template it touches (positive or negated, body or head) matches an atom that
was committed to the database. Summation terms in arithmetic rules expand to
all matching committed atoms, restricted by filters over helper atoms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .atoms import GroundAtom
from .lang import (
    CONSTANT, ArithmeticRuleBody, Comparison, LinearExpr, LinearTerm, Literal,
    Rule, format_linear_expr, format_literal, format_term, quote_constant,
)

FILTER_BELIEF_THRESHOLD = 0.0  # filter atoms must have belief strictly above


class GroundingError(Exception):
    pass


@dataclass(frozen=True)
class GroundLiteral:
    atom: GroundAtom
    negated: bool = False

    def __str__(self):
        return ("~" if self.negated else "") + str(self.atom)


def _substitute(tmpl, subst):
    args = []
    for term in tmpl.args:
        if term.kind == CONSTANT:
            args.append(term.text)
        else:
            args.append(subst[term.text])
    return GroundAtom(tmpl.predicate, tuple(args))


@dataclass(frozen=True)
class GroundLogicalRule:
    gid: int
    rule_index: int
    origin: Rule
    substitution: dict
    clause: tuple[GroundLiteral, ...]

    @property
    def hard(self):
        return self.origin.is_constraint

    def atoms(self):
        seen = []
        for lit in self.clause:
            if lit.atom not in seen:
                seen.append(lit.atom)
        return seen

    def render(self):
        """Original rule shape with constants substituted."""
        body = self.origin.body
        parts = []
        for item in body.body:
            if isinstance(item, Comparison):
                left = self._term_text(item.left)
                right = self._term_text(item.right)
                parts.append(f"{left} {item.op} {right}")
            else:
                parts.append(str(GroundLiteral(
                    _substitute(item.atom, self.substitution), item.negated)))
        head = " | ".join(
            str(GroundLiteral(_substitute(l.atom, self.substitution),
                              l.negated)) for l in body.head)
        text = f"{' & '.join(parts)} -> {head}" if parts else head
        if self.origin.is_constraint:
            return text + " ."
        prefix = f"{self.origin.weight}: " if self.origin.weight is not None else ""
        return prefix + text + (" ^2" if self.origin.squared else "")

    def _term_text(self, term):
        if term.kind == CONSTANT:
            return quote_constant(term.text)
        return quote_constant(self.substitution[term.text])


@dataclass(frozen=True)
class GroundArithmeticRule:
    gid: int
    rule_index: int
    origin: Rule
    substitution: dict
    # display form preserves the written lhs/rhs structure
    lhs_atoms: tuple[tuple[float, GroundAtom], ...]
    lhs_constant: float
    rhs_atoms: tuple[tuple[float, GroundAtom], ...]
    rhs_constant: float
    comparator: str
    # normal form: sum(coef * atom) <comparator> constant, duplicates merged
    terms: tuple[tuple[float, GroundAtom], ...]
    constant: float
    warnings: tuple[str, ...] = ()

    @property
    def hard(self):
        return self.origin.is_constraint

    def atoms(self):
        seen = []
        for _, atom in self.lhs_atoms + self.rhs_atoms:
            if atom not in seen:
                seen.append(atom)
        return seen

    def render(self):
        lhs = _render_side(self.lhs_atoms, self.lhs_constant)
        rhs = _render_side(self.rhs_atoms, self.rhs_constant)
        text = f"{lhs} {self.comparator} {rhs}"
        if self.origin.is_constraint:
            return text + " ."
        return f"{self.origin.weight}: {text}" + (" ^2" if self.origin.squared else "")


def _render_side(atom_terms, constant):
    expr = LinearExpr(
        tuple(LinearTerm(c, _atom_as_template(a)) for c, a in atom_terms),
        constant)
    return format_linear_expr(expr)


def _atom_as_template(atom):
    from .lang import AtomTemplate, Term
    return AtomTemplate(atom.predicate,
                        tuple(Term(CONSTANT, a) for a in atom.args))


@dataclass
class GroundingReport:
    rule_counts: list[int] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


@dataclass
class GroundModel:
    ground_rules: list = field(default_factory=list)
    atom_rules: dict[GroundAtom, list[int]] = field(default_factory=dict)

    def add(self, rule):
        self.ground_rules.append(rule)
        for atom in rule.atoms():
            self.atom_rules.setdefault(atom, []).append(rule.gid)

    def atoms(self):
        return sorted(self.atom_rules)

    def open_atoms(self, db):
        return [a for a in self.atoms() if db.get(a) and db.get(a).is_open]

    def dump(self):
        return "\n".join(r.render() for r in self.ground_rules)


# ---------------------------------------------------------------------------
# Logical grounding
# ---------------------------------------------------------------------------

def _eval_comparison(cmp_, subst):
    def value(term):
        if term.kind == CONSTANT:
            return term.text
        return subst.get(term.text)

    left, right = value(cmp_.left), value(cmp_.right)
    if left is None or right is None:
        return None  # not yet bound
    return (left != right) if cmp_.op == "!=" else (left == right)


def _join_templates(templates, comparisons, db, subst, out):
    """Left-to-right join over atom templates; emits full substitutions."""
    if not templates:
        for cmp_ in comparisons:
            if _eval_comparison(cmp_, subst) is not True:
                return
        out.append(dict(subst))
        return
    tmpl, rest = templates[0], templates[1:]
    pattern = []
    for term in tmpl.args:
        if term.kind == CONSTANT:
            pattern.append(term.text)
        else:
            pattern.append(subst.get(term.text))
    for rec in db.query_atoms(tmpl.predicate, tuple(pattern)):
        extension = {}
        ok = True
        for term, const in zip(tmpl.args, rec.atom.args):
            if term.kind == CONSTANT:
                continue
            bound = subst.get(term.text, extension.get(term.text))
            if bound is None:
                extension[term.text] = const
            elif bound != const:
                ok = False
                break
        if not ok:
            continue
        subst.update(extension)
        # evaluate any comparison that just became decidable
        pruned = False
        for cmp_ in comparisons:
            if _eval_comparison(cmp_, subst) is False:
                pruned = True
                break
        if not pruned:
            _join_templates(rest, comparisons, db, subst, out)
        for key in extension:
            del subst[key]


def ground_logical_rule(rule: Rule, db, rule_index=0, gid_start=0):
    """All closed-universe groundings of a logical rule, duplicates removed.

    Two groundings are duplicates when their clauses are identical as ordered
    literal tuples; symmetric substitutions that merely reorder the clause are
    kept apart (each is a distinct instantiation of the template).
    """
    if not rule.is_logical:
        raise GroundingError("ground_logical_rule needs a logical rule")
    body = rule.body
    templates = [it.atom for it in body.body if isinstance(it, Literal)]
    templates += [lit.atom for lit in body.head]
    comparisons = [it for it in body.body if isinstance(it, Comparison)]

    substitutions = []
    _join_templates(templates, comparisons, db, {}, substitutions)

    groundings = []
    seen = set()
    gid = gid_start
    for subst in substitutions:
        clause = tuple(
            GroundLiteral(_substitute(lit.atom, subst), lit.negated)
            for lit in body.clause())
        key = tuple((lit.atom, lit.negated) for lit in clause)
        if key in seen:
            continue
        seen.add(key)
        groundings.append(GroundLogicalRule(gid, rule_index, rule, subst, clause))
        gid += 1
    return groundings


# ---------------------------------------------------------------------------
# Arithmetic grounding
# ---------------------------------------------------------------------------

def _regular_pattern(tmpl, subst):
    """Pattern with summation positions wildcarded."""
    pattern = []
    for term in tmpl.args:
        if term.kind == CONSTANT:
            pattern.append(term.text)
        elif term.kind == SUMMATION_KIND:
            pattern.append(None)
        else:
            pattern.append(subst.get(term.text))
    return tuple(pattern)


SUMMATION_KIND = "summation"


def _join_regular(templates, db, subst, out):
    """Bind regular variables. Templates with summation variables contribute
    candidate bindings for their regular positions but are re-scanned during
    expansion; templates without summation variables must match outright."""
    if not templates:
        out.append(dict(subst))
        return
    tmpl, rest = templates[0], templates[1:]
    has_summation = bool(tmpl.summation_variables())
    unbound = [t.text for t in tmpl.args
               if t.kind == "variable" and t.text not in subst]
    if has_summation and not unbound:
        # fully bound regular positions; expansion may still be empty
        _join_regular(rest, db, subst, out)
        return
    seen_projections = set()
    for rec in db.query_atoms(tmpl.predicate, _regular_pattern(tmpl, subst)):
        extension = {}
        ok = True
        for term, const in zip(tmpl.args, rec.atom.args):
            if term.kind != "variable":
                continue
            bound = subst.get(term.text, extension.get(term.text))
            if bound is None:
                extension[term.text] = const
            elif bound != const:
                ok = False
                break
        if not ok:
            continue
        if has_summation:
            projection = tuple(sorted(extension.items()))
            if projection in seen_projections:
                continue
            seen_projections.add(projection)
        subst.update(extension)
        _join_regular(rest, db, subst, out)
        for key in extension:
            del subst[key]


def _filter_passes(filters, tmpl, subst, candidate_bindings, db):
    for flt in filters:
        if flt.variable not in candidate_bindings:
            continue
        local = dict(subst)
        local.update(candidate_bindings)
        for lit in flt.atoms:
            try:
                atom = _substitute(lit.atom, local)
            except KeyError as exc:
                raise GroundingError(
                    f"filter on {flt.variable} references unbound variable "
                    f"{exc.args[0]}")
            rec = db.get(atom)
            present = rec is not None and rec.belief > FILTER_BELIEF_THRESHOLD
            if lit.negated:
                if present:
                    return False
            elif not present:
                return False
    return True


def _expand_side(expr, filters, db, subst, warnings):
    atom_terms = []
    for term in expr.terms:
        tmpl = term.atom
        svars = tmpl.summation_variables()
        if not svars:
            atom_terms.append((term.coefficient, _substitute(tmpl, subst)))
            continue
        count = 0
        for rec in db.query_atoms(tmpl.predicate, _regular_pattern(tmpl, subst)):
            bindings = {}
            ok = True
            for t, const in zip(tmpl.args, rec.atom.args):
                if t.kind == "variable" and subst.get(t.text) != const:
                    ok = False
                    break
                if t.kind == SUMMATION_KIND:
                    if t.text in bindings and bindings[t.text] != const:
                        ok = False
                        break
                    bindings[t.text] = const
            if not ok:
                continue
            if not _filter_passes(filters, tmpl, subst, bindings, db):
                continue
            atom_terms.append((term.coefficient, rec.atom))
            count += 1
        if count == 0:
            warnings.append(
                f"summation over {tmpl.predicate} expanded to an empty sum")
    return atom_terms


def ground_arithmetic_rule(rule: Rule, db, rule_index=0, gid_start=0):
    if not rule.is_arithmetic:
        raise GroundingError("ground_arithmetic_rule needs an arithmetic rule")
    body = rule.body
    templates = [t.atom for t in body.lhs.terms] + [t.atom for t in body.rhs.terms]

    substitutions = []
    _join_regular(templates, db, {}, substitutions)

    groundings = []
    seen = set()
    gid = gid_start
    for subst in substitutions:
        warnings = []
        lhs_atoms = _expand_side(body.lhs, body.filters, db, subst, warnings)
        rhs_atoms = _expand_side(body.rhs, body.filters, db, subst, warnings)

        merged: dict[GroundAtom, float] = {}
        order: list[GroundAtom] = []
        for coef, atom in lhs_atoms:
            if atom not in merged:
                order.append(atom)
            merged[atom] = merged.get(atom, 0.0) + coef
        for coef, atom in rhs_atoms:
            if atom not in merged:
                order.append(atom)
            merged[atom] = merged.get(atom, 0.0) - coef
        terms = tuple((merged[a], a) for a in order if merged[a] != 0.0)
        constant = body.rhs.constant - body.lhs.constant

        key = (terms, constant, body.comparator)
        if key in seen:
            continue
        seen.add(key)
        groundings.append(GroundArithmeticRule(
            gid, rule_index, rule, subst,
            tuple(lhs_atoms), body.lhs.constant,
            tuple(rhs_atoms), body.rhs.constant,
            body.comparator, terms, constant, tuple(warnings)))
        gid += 1
    return groundings


# ---------------------------------------------------------------------------
# Program grounding
# ---------------------------------------------------------------------------

def ground_program(program, db):
    """Ground every rule in order. Returns (GroundModel, GroundingReport)."""
    model = GroundModel()
    report = GroundingReport()
    gid = 0
    for index, rule in enumerate(program.rules):
        if rule.is_logical:
            groundings = ground_logical_rule(rule, db, index, gid)
        else:
            groundings = ground_arithmetic_rule(rule, db, index, gid)
        for g in groundings:
            model.add(g)
            for warning in getattr(g, "warnings", ()):
                report.warnings.append(f"rule {index}: {warning}")
        report.rule_counts.append(len(groundings))
        gid += len(groundings)
    return model, report
