"""Rule templating language: parsing, validation, and canonical formatting.

A program file is line-oriented UTF-8. Each non-empty line is either a
directive (``@predicate``, ``@name``, ``@verbalize``), a ``//`` comment, or a
single rule statement. Constraints end with `` .``; weighted rules start with
``weight:`` and must not end with a dot. A dotless, weightless statement is
still accepted as a hard constraint, with a warning.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

CONSTANT = "constant"
VARIABLE = "variable"
SUMMATION = "summation"

_VAR_RE = re.compile(r"[A-Z][A-Za-z0-9_]*$")


class LangError(Exception):
    pass


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" or "warning"
    message: str
    line: int = 0
    column: int = 0
    token: str = ""

    def __str__(self):
        where = f"{self.line}:{self.column}" if self.line else "-"
        tok = f" near {self.token!r}" if self.token else ""
        return f"{self.severity} at {where}: {self.message}{tok}"


def has_errors(diagnostics) -> bool:
    return any(d.severity == "error" for d in diagnostics)


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Term:
    kind: str  # constant | variable | summation
    text: str

    def __post_init__(self):
        if self.kind == CONSTANT and not self.text:
            raise LangError("constant text must be non-empty")
        if self.kind in (VARIABLE, SUMMATION) and not _VAR_RE.match(self.text):
            raise LangError(f"invalid variable name {self.text!r}")


@dataclass(frozen=True)
class AtomTemplate:
    predicate: str
    args: tuple[Term, ...]

    @property
    def arity(self):
        return len(self.args)

    def variables(self):
        return [t.text for t in self.args if t.kind != CONSTANT]

    def summation_variables(self):
        return [t.text for t in self.args if t.kind == SUMMATION]


@dataclass(frozen=True)
class Literal:
    atom: AtomTemplate
    negated: bool = False


@dataclass(frozen=True)
class Comparison:
    """Built-in comparison between terms, only valid in logical rule bodies."""

    left: Term
    op: str  # "!=" or "=="
    right: Term


@dataclass(frozen=True)
class LogicalRuleBody:
    body: tuple  # Literal | Comparison, conjunction
    head: tuple[Literal, ...]  # disjunction

    def atom_templates(self):
        out = [item.atom for item in self.body if isinstance(item, Literal)]
        out.extend(lit.atom for lit in self.head)
        return out

    def clause(self):
        """Disjunctive form: negated body literals followed by head literals."""
        lits = [Literal(it.atom, not it.negated)
                for it in self.body if isinstance(it, Literal)]
        lits.extend(self.head)
        return tuple(lits)


@dataclass(frozen=True)
class LinearTerm:
    coefficient: float
    atom: AtomTemplate


@dataclass(frozen=True)
class LinearExpr:
    terms: tuple[LinearTerm, ...]
    constant: float = 0.0


@dataclass(frozen=True)
class Filter:
    """Restricts a summation variable to atoms passing a helper-atom test."""

    variable: str
    atoms: tuple[Literal, ...]  # conjunction, possibly negated


@dataclass(frozen=True)
class ArithmeticRuleBody:
    lhs: LinearExpr
    rhs: LinearExpr
    comparator: str  # "=", "<=", ">="
    filters: tuple[Filter, ...] = ()

    def atom_templates(self):
        return [t.atom for t in self.lhs.terms + self.rhs.terms]

    def summation_variables(self):
        out = []
        for tmpl in self.atom_templates():
            out.extend(tmpl.summation_variables())
        return out


@dataclass(frozen=True)
class Rule:
    body: object  # LogicalRuleBody | ArithmeticRuleBody
    is_constraint: bool
    weight: float | None = None
    squared: bool = False
    name: str | None = field(default=None, compare=False)
    verbalization: str | None = field(default=None, compare=False)
    span: tuple[int, int] = field(default=(0, 0), compare=False)
    line: int = field(default=0, compare=False)

    @property
    def is_logical(self):
        return isinstance(self.body, LogicalRuleBody)

    @property
    def is_arithmetic(self):
        return isinstance(self.body, ArithmeticRuleBody)

    def named(self, name):
        return Rule(self.body, self.is_constraint, self.weight, self.squared,
                    name, self.verbalization, self.span, self.line)

    def verbalized(self, template):
        return Rule(self.body, self.is_constraint, self.weight, self.squared,
                    self.name, template, self.span, self.line)


@dataclass
class PredicateDecl:
    name: str
    arity: int
    verbalization: str | None = None
    declared: bool = True  # False when auto-declared by the validator


@dataclass
class Program:
    predicates: dict[str, PredicateDecl] = field(default_factory=dict)
    rules: list[Rule] = field(default_factory=list)

    def rule_by_name(self, name):
        for rule in self.rules:
            if rule.name == name:
                return rule
        return None


@dataclass
class ParseResult:
    program: Program
    diagnostics: list[Diagnostic]

    @property
    def ok(self):
        return not has_errors(self.diagnostics)


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

_PUNCT = {
    "(": "LPAREN", ")": "RPAREN", ",": "COMMA", "&": "AMP", "|": "PIPE",
    "{": "LBRACE", "}": "RBRACE", "+": "PLUS", "-": "MINUS", "*": "STAR",
    ":": "COLON", ".": "DOT",
}


@dataclass(frozen=True)
class Token:
    type: str
    value: str
    line: int
    column: int
    number: float = 0.0


def _tokenize(text, line_no, diagnostics):
    """Tokenize one statement line. Always returns a token list."""
    tokens = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        col = i + 1
        if ch in " \t\r":
            i += 1
            continue
        if text.startswith("//", i):
            break
        if ch == "'":
            j = i + 1
            buf = []
            closed = False
            while j < n:
                c = text[j]
                if c == "\\" and j + 1 < n and text[j + 1] in "\\'":
                    buf.append(text[j + 1])
                    j += 2
                    continue
                if c == "'":
                    closed = True
                    j += 1
                    break
                buf.append(c)
                j += 1
            if not closed:
                diagnostics.append(Diagnostic(
                    "error", "unterminated quoted constant", line_no, col,
                    text[i:i + 12]))
                tokens.append(Token("QUOTED", "".join(buf), line_no, col))
                i = n
                break
            tokens.append(Token("QUOTED", "".join(buf), line_no, col))
            i = j
            continue
        if ch.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            # a dot only continues the number when followed by a digit, so
            # "= 1 ." and "= 1." both terminate the statement
            if j < n and text[j] == "." and j + 1 < n and text[j + 1].isdigit():
                j += 1
                while j < n and text[j].isdigit():
                    j += 1
            raw = text[i:j]
            tokens.append(Token("NUMBER", raw, line_no, col, float(raw)))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(Token("IDENT", text[i:j], line_no, col))
            i = j
            continue
        if text.startswith("->", i):
            tokens.append(Token("ARROW", "->", line_no, col))
            i += 2
            continue
        if text.startswith("!=", i):
            tokens.append(Token("NEQ", "!=", line_no, col))
            i += 2
            continue
        if text.startswith("==", i):
            tokens.append(Token("EQEQ", "==", line_no, col))
            i += 2
            continue
        if text.startswith("<=", i):
            tokens.append(Token("LE", "<=", line_no, col))
            i += 2
            continue
        if text.startswith(">=", i):
            tokens.append(Token("GE", ">=", line_no, col))
            i += 2
            continue
        if text.startswith("^2", i):
            tokens.append(Token("SQUARED", "^2", line_no, col))
            i += 2
            continue
        if ch in ("~", "!"):
            tokens.append(Token("NEG", ch, line_no, col))
            i += 1
            continue
        if ch == "=":
            tokens.append(Token("EQ", "=", line_no, col))
            i += 1
            continue
        if ch in _PUNCT:
            tokens.append(Token(_PUNCT[ch], ch, line_no, col))
            i += 1
            continue
        diagnostics.append(Diagnostic(
            "error", "unexpected character", line_no, col, ch))
        i += 1
    tokens.append(Token("EOF", "", line_no, n + 1))
    return tokens


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _StatementParser:
    def __init__(self, tokens, diagnostics):
        self.tokens = tokens
        self.pos = 0
        self.diagnostics = diagnostics

    def peek(self, offset=0):
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def next(self):
        tok = self.peek()
        if tok.type != "EOF":
            self.pos += 1
        return tok

    def at(self, *types):
        return self.peek().type in types

    def error(self, message, tok=None):
        tok = tok or self.peek()
        self.diagnostics.append(Diagnostic(
            "error", message, tok.line, tok.column, tok.value))
        raise _Bail()

    def warn(self, message, tok=None):
        tok = tok or self.peek()
        self.diagnostics.append(Diagnostic(
            "warning", message, tok.line, tok.column, tok.value))

    def expect(self, type_, what):
        if not self.at(type_):
            self.error(f"expected {what}")
        return self.next()

    # -- terms and atoms ----------------------------------------------------

    def parse_term(self, allow_summation):
        tok = self.peek()
        if tok.type == "QUOTED":
            self.next()
            return Term(CONSTANT, tok.value)
        if tok.type == "PLUS":
            self.next()
            name = self.expect("IDENT", "summation variable after '+'")
            if not _VAR_RE.match(name.value):
                self.error("summation variable must start with an uppercase "
                           "letter", name)
            if not allow_summation:
                self.error("summation variable is not allowed in a logical "
                           "rule", name)
            return Term(SUMMATION, name.value)
        if tok.type == "IDENT":
            self.next()
            if _VAR_RE.match(tok.value):
                return Term(VARIABLE, tok.value)
            self.warn("unquoted lowercase token treated as a constant; "
                      "constants should be quoted", tok)
            return Term(CONSTANT, tok.value)
        if tok.type == "NUMBER":
            self.next()
            self.warn("unquoted number treated as a constant", tok)
            return Term(CONSTANT, tok.value)
        self.error("expected a term")

    def parse_atom(self, allow_summation):
        name = self.expect("IDENT", "predicate name")
        self.expect("LPAREN", "'(' after predicate name")
        args = [self.parse_term(allow_summation)]
        while self.at("COMMA"):
            self.next()
            args.append(self.parse_term(allow_summation))
        self.expect("RPAREN", "')' closing the argument list")
        return AtomTemplate(name.value, tuple(args))

    def parse_literal(self, allow_summation):
        negated = False
        if self.at("NEG"):
            self.next()
            negated = True
        return Literal(self.parse_atom(allow_summation), negated)

    # -- logical rules ------------------------------------------------------

    def parse_logical(self):
        items = [self._parse_conjunct()]
        separators = []
        while self.at("AMP", "PIPE"):
            separators.append(self.next())
            items.append(self._parse_conjunct())
        if self.at("ARROW"):
            self.next()
            for sep in separators:
                if sep.type == "PIPE":
                    self.error("'|' is not allowed in a rule body", sep)
            head = self._parse_disjunction()
            return LogicalRuleBody(tuple(items), tuple(head))
        # no implication: the statement is a plain disjunction (clause form)
        for sep in separators:
            if sep.type == "AMP":
                self.error("'&' requires an implication ('->')", sep)
        for item in items:
            if isinstance(item, Comparison):
                self.error("built-in comparison outside a rule body")
        return LogicalRuleBody((), tuple(items))

    def _parse_conjunct(self):
        # lookahead for "term (!=|==) term" built-ins
        start = self.pos
        if self.at("IDENT", "QUOTED"):
            probe = self.peek(1)
            if probe.type in ("NEQ", "EQEQ"):
                left = self.parse_term(allow_summation=False)
                op = self.next().value
                right = self.parse_term(allow_summation=False)
                return Comparison(left, op, right)
        self.pos = start
        return self.parse_literal(allow_summation=False)

    def _parse_disjunction(self):
        lits = [self.parse_literal(allow_summation=False)]
        while self.at("PIPE"):
            self.next()
            lits.append(self.parse_literal(allow_summation=False))
        if self.at("AMP"):
            self.error("conjunction is not allowed in a rule head")
        return lits

    # -- arithmetic rules ---------------------------------------------------

    def parse_arithmetic(self):
        lhs = self.parse_linear_expr()
        if self.at("EQ"):
            cmp_ = "="
        elif self.at("LE"):
            cmp_ = "<="
        elif self.at("GE"):
            cmp_ = ">="
        else:
            self.error("expected '=', '<=' or '>=' in arithmetic rule")
        self.next()
        rhs = self.parse_linear_expr()
        return lhs, cmp_, rhs

    def parse_linear_expr(self):
        terms = []
        constant = 0.0
        sign = 1.0
        if self.at("MINUS"):
            self.next()
            sign = -1.0
        while True:
            coef = sign
            if self.at("NUMBER"):
                num = self.next()
                coef = sign * num.number
                if self.at("STAR"):
                    self.next()
                    terms.append(LinearTerm(coef, self.parse_atom(True)))
                elif self.at("IDENT") and self.peek(1).type == "LPAREN":
                    terms.append(LinearTerm(coef, self.parse_atom(True)))
                else:
                    constant += coef
            elif self.at("IDENT"):
                terms.append(LinearTerm(coef, self.parse_atom(True)))
            else:
                self.error("expected a number or an atom in expression")
            if self.at("PLUS") and self.peek(1).type in ("NUMBER", "IDENT", "MINUS"):
                # '+' binds as an operator only between addends; '+Var' inside
                # argument lists is consumed by parse_term
                self.next()
                sign = 1.0
                continue
            if self.at("MINUS"):
                self.next()
                sign = -1.0
                continue
            break
        return LinearExpr(tuple(terms), constant)

    def parse_filters(self, summation_vars):
        filters = []
        while self.at("LBRACE"):
            self.next()
            var = self.expect("IDENT", "filter variable")
            if var.value not in summation_vars:
                self.error(
                    f"filter bound to {var.value!r}, which is not a summation "
                    "variable of this rule", var)
            self.expect("COLON", "':' after filter variable")
            atoms = [self.parse_literal(allow_summation=False)]
            while self.at("AMP"):
                self.next()
                atoms.append(self.parse_literal(allow_summation=False))
            self.expect("RBRACE", "'}' closing the filter")
            filters.append(Filter(var.value, tuple(atoms)))
        return filters


class _Bail(Exception):
    """Internal: abandon the current statement after reporting an error."""


def _parse_statement(tokens, diagnostics, line_no):
    p = _StatementParser(tokens, diagnostics)
    weight = None
    squared = False
    if p.at("NUMBER") and p.peek(1).type == "COLON":
        weight = p.next().number
        p.next()
        if weight < 0:
            p.diagnostics.append(Diagnostic(
                "error", "rule weight must be non-negative", line_no, 1))
            return None

    # decide logical vs arithmetic by scanning for a top-level comparator
    depth = 0
    arithmetic = False
    for tok in p.tokens[p.pos:]:
        if tok.type in ("LPAREN", "LBRACE"):
            depth += 1
        elif tok.type in ("RPAREN", "RBRACE"):
            depth -= 1
        elif depth == 0 and tok.type in ("EQ", "LE", "GE"):
            arithmetic = True
            break

    try:
        if arithmetic:
            lhs, cmp_, rhs = p.parse_arithmetic()
            svars = set()
            for t in lhs.terms + rhs.terms:
                svars.update(t.atom.summation_variables())
            dotted = False
            filters = []
            while p.at("DOT", "LBRACE"):
                if p.at("DOT"):
                    if dotted:
                        p.error("duplicate statement terminator")
                    p.next()
                    dotted = True
                else:
                    filters.extend(p.parse_filters(svars))
            body = ArithmeticRuleBody(lhs, rhs, cmp_, tuple(filters))
        else:
            body = p.parse_logical()
            dotted = False
            if p.at("DOT"):
                p.next()
                dotted = True
        if p.at("SQUARED"):
            tok = p.next()
            if weight is None:
                p.error("'^2' is only valid on weighted rules", tok)
            squared = True
            if p.at("DOT"):
                p.next()
                dotted = True
        if not p.at("EOF"):
            p.error("unexpected trailing input")
    except _Bail:
        return None

    if weight is not None and dotted:
        diagnostics.append(Diagnostic(
            "error", "weighted rule must not end with '.'", line_no, 1))
        return None
    if weight is None and not dotted:
        diagnostics.append(Diagnostic(
            "warning", "constraint lacking '.' terminator", line_no, 1))
    if isinstance(body, ArithmeticRuleBody):
        seen = {}
        for t in body.lhs.terms + body.rhs.terms:
            for v in t.atom.summation_variables():
                seen[v] = seen.get(v, 0) + 1
        for v, count in seen.items():
            if count > 1:
                diagnostics.append(Diagnostic(
                    "error",
                    f"summation variable {v} appears in more than one "
                    "argument position", line_no, 1))
                return None
    return Rule(body, weight is None, weight, squared, line=line_no)


_DIRECTIVE_RE = re.compile(r"@(\w+)\s*(.*)")
_PRED_DECL_RE = re.compile(r"([A-Za-z_]\w*)\s*/\s*(\d+)\s*$")
_VERBALIZE_RE = re.compile(r"(rule\s+)?([A-Za-z_]\w*)\s*:\s*\"(.*)\"\s*$")
_NAME_RE = re.compile(r"([A-Za-z_]\w*)\s*$")


def parse_program(text: str) -> ParseResult:
    """Parse a full program. Total: returns an AST plus diagnostics."""
    program = Program()
    diagnostics: list[Diagnostic] = []
    pending_name = None
    pending_rule_verbalizations: dict[str, str] = {}

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("//"):
            continue
        if line.startswith("@"):
            m = _DIRECTIVE_RE.match(line)
            kind = m.group(1) if m else ""
            rest = m.group(2) if m else ""
            if kind == "predicate":
                dm = _PRED_DECL_RE.match(rest)
                if not dm:
                    diagnostics.append(Diagnostic(
                        "error", "malformed @predicate directive (expected "
                        "Name/arity)", line_no, 1, line))
                    continue
                name, arity = dm.group(1), int(dm.group(2))
                if name in program.predicates:
                    diagnostics.append(Diagnostic(
                        "error", f"duplicate predicate declaration {name}",
                        line_no, 1))
                    continue
                if arity < 1:
                    diagnostics.append(Diagnostic(
                        "error", f"predicate {name} must have arity >= 1",
                        line_no, 1))
                    continue
                program.predicates[name] = PredicateDecl(name, arity)
            elif kind == "verbalize":
                vm = _VERBALIZE_RE.match(rest)
                if not vm:
                    diagnostics.append(Diagnostic(
                        "error", "malformed @verbalize directive", line_no, 1,
                        line))
                    continue
                if vm.group(1):
                    pending_rule_verbalizations[vm.group(2)] = vm.group(3)
                else:
                    pred = vm.group(2)
                    decl = program.predicates.get(pred)
                    if decl is None:
                        decl = PredicateDecl(pred, 0, declared=False)
                        program.predicates[pred] = decl
                    decl.verbalization = vm.group(3)
            elif kind == "name":
                nm = _NAME_RE.match(rest)
                if not nm:
                    diagnostics.append(Diagnostic(
                        "error", "malformed @name directive", line_no, 1, line))
                    continue
                pending_name = nm.group(1)
            else:
                diagnostics.append(Diagnostic(
                    "error", f"unknown directive @{kind}", line_no, 1, line))
            continue

        tokens = _tokenize(line, line_no, diagnostics)
        rule = _parse_statement(tokens, diagnostics, line_no)
        if rule is None:
            pending_name = None
            continue
        if pending_name:
            rule = rule.named(pending_name)
            pending_name = None
        program.rules.append(rule)

    for name, template in pending_rule_verbalizations.items():
        target = program.rule_by_name(name)
        if target is None:
            diagnostics.append(Diagnostic(
                "warning", f"@verbalize rule {name}: no rule with that name"))
            continue
        program.rules[program.rules.index(target)] = target.verbalized(template)

    return ParseResult(program, diagnostics)


def parse_rule(text: str):
    """Parse exactly one statement. Returns (Rule | None, diagnostics)."""
    result = parse_program(text)
    diagnostics = result.diagnostics
    if len(result.program.rules) > 1:
        diagnostics.append(Diagnostic(
            "error", "multiple statements where one was expected"))
        return None, diagnostics
    if not result.program.rules:
        if not has_errors(diagnostics):
            diagnostics.append(Diagnostic("error", "no statement found"))
        return None, diagnostics
    return result.program.rules[0], diagnostics


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------

def validate_program(program: Program) -> list[Diagnostic]:
    """Check arities, declarations, variable safety, and filter bindings.

    Undeclared predicates are auto-declared with their first-seen arity.
    """
    diagnostics = []

    def check_atom(tmpl, rule):
        decl = program.predicates.get(tmpl.predicate)
        if decl is None:
            program.predicates[tmpl.predicate] = PredicateDecl(
                tmpl.predicate, tmpl.arity, declared=False)
            diagnostics.append(Diagnostic(
                "warning",
                f"predicate {tmpl.predicate} is not declared; assuming "
                f"arity {tmpl.arity}", rule.line))
            return
        if decl.declared is False and decl.arity == 0:
            decl.arity = tmpl.arity  # declared implicitly via @verbalize
            return
        if decl.arity != tmpl.arity:
            diagnostics.append(Diagnostic(
                "error",
                f"arity mismatch for {tmpl.predicate}: declared/first seen "
                f"{decl.arity}, used with {tmpl.arity}", rule.line))

    for rule in program.rules:
        for tmpl in rule.body.atom_templates():
            check_atom(tmpl, rule)
        if rule.is_logical:
            body_vars = set()
            for item in rule.body.body:
                if isinstance(item, Literal):
                    body_vars.update(item.atom.variables())
            # grounding binds variables from every template, head included
            template_vars = set()
            for tmpl in rule.body.atom_templates():
                template_vars.update(tmpl.variables())
            for item in rule.body.body:
                if isinstance(item, Comparison):
                    for term in (item.left, item.right):
                        if term.kind != CONSTANT and \
                                term.text not in template_vars:
                            diagnostics.append(Diagnostic(
                                "error",
                                f"built-in comparison uses unbound "
                                f"variable {term.text}", rule.line))
            if rule.body.body:
                for lit in rule.body.head:
                    for v in lit.atom.variables():
                        if v not in body_vars:
                            diagnostics.append(Diagnostic(
                                "warning",
                                f"unsafe variable {v}: appears in the head "
                                "but not in the body", rule.line))
        else:
            svars = set(rule.body.summation_variables())
            seen = set()
            for flt in rule.body.filters:
                if flt.variable in seen:
                    diagnostics.append(Diagnostic(
                        "error",
                        f"duplicate filter binding for {flt.variable}",
                        rule.line))
                seen.add(flt.variable)
                rule_vars = set()
                for tmpl in rule.body.atom_templates():
                    rule_vars.update(tmpl.variables())
                for lit in flt.atoms:
                    check_atom(lit.atom, rule)
                    for v in lit.atom.variables():
                        if v not in rule_vars:
                            diagnostics.append(Diagnostic(
                                "error",
                                f"filter on {flt.variable} references unbound "
                                f"variable {v}", rule.line))
            del svars
    return diagnostics


# ---------------------------------------------------------------------------
# Formatting
# ---------------------------------------------------------------------------

def format_number(x: float) -> str:
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def format_weight(w: float) -> str:
    if w == int(w) and abs(w) < 1e15:
        return f"{w:.1f}"
    return repr(w)


def quote_constant(text: str) -> str:
    return "'" + text.replace("\\", "\\\\").replace("'", "\\'") + "'"


def format_term(term: Term) -> str:
    if term.kind == CONSTANT:
        return quote_constant(term.text)
    if term.kind == SUMMATION:
        return "+" + term.text
    return term.text


def format_atom_template(tmpl: AtomTemplate) -> str:
    return f"{tmpl.predicate}({','.join(format_term(t) for t in tmpl.args)})"


def format_literal(lit: Literal) -> str:
    return ("~" if lit.negated else "") + format_atom_template(lit.atom)


def format_linear_expr(expr: LinearExpr) -> str:
    parts = []
    for term in expr.terms:
        coef = term.coefficient
        atom_text = format_atom_template(term.atom)
        if abs(coef) == 1.0:
            body = atom_text
        else:
            body = f"{format_number(abs(coef))} * {atom_text}"
        if not parts:
            parts.append(body if coef >= 0 else f"-{body}")
        else:
            parts.append(("+ " if coef >= 0 else "- ") + body)
    if expr.constant != 0 or not parts:
        const = expr.constant
        if not parts:
            parts.append(format_number(const))
        else:
            parts.append(("+ " if const >= 0 else "- ")
                         + format_number(abs(const)))
    return " ".join(parts)


def format_rule(rule: Rule) -> str:
    """Canonical text form; parse_rule(format_rule(r)) equals r structurally."""
    if rule.is_logical:
        body_parts = []
        for item in rule.body.body:
            if isinstance(item, Comparison):
                body_parts.append(
                    f"{format_term(item.left)} {item.op} "
                    f"{format_term(item.right)}")
            else:
                body_parts.append(format_literal(item))
        head_text = " | ".join(format_literal(l) for l in rule.body.head)
        if body_parts:
            text = f"{' & '.join(body_parts)} -> {head_text}"
        else:
            text = head_text
    else:
        text = (f"{format_linear_expr(rule.body.lhs)} {rule.body.comparator} "
                f"{format_linear_expr(rule.body.rhs)}")

    if rule.is_constraint:
        text += " ."
        if rule.is_arithmetic:
            for flt in rule.body.filters:
                inner = " & ".join(format_literal(l) for l in flt.atoms)
                text += f" {{{flt.variable}: {inner}}}"
    else:
        if rule.is_arithmetic:
            for flt in rule.body.filters:
                inner = " & ".join(format_literal(l) for l in flt.atoms)
                text += f" {{{flt.variable}: {inner}}}"
        text = f"{format_weight(rule.weight)}: {text}"
        if rule.squared:
            text += " ^2"
    return text
