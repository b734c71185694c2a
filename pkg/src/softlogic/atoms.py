"""Atom database: the committed universe of ground atoms with beliefs.

Atoms are partitioned by status: ``open`` atoms are decision variables,
``observed`` atoms are evidence, and ``frozen`` atoms are a temporary
debugging overlay that pins a belief without forgetting that the atom used
to be open. Observed and frozen atoms are treated identically by inference.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .lang import PredicateDecl, quote_constant

OPEN = "open"
OBSERVED = "observed"
FROZEN = "frozen"
STATUSES = (OPEN, OBSERVED, FROZEN)


class AtomError(Exception):
    pass


@dataclass(frozen=True, order=True)
class GroundAtom:
    predicate: str
    args: tuple[str, ...]

    def __str__(self):
        return f"{self.predicate}({','.join(quote_constant(a) for a in self.args)})"

    @property
    def key(self):
        return str(self)


_ATOM_ID_RE = re.compile(r"\s*([A-Za-z_]\w*)\s*\((.*)\)\s*$")


def parse_atom_id(text: str):
    """Parse ``Pred('a','b')`` / ``Pred(a,*)`` into (predicate, args).

    Unquoted ``*`` (or ``_``) is a wildcard and becomes None; other unquoted
    tokens are taken literally. Returns None if the text is not an atom id.
    """
    m = _ATOM_ID_RE.match(text)
    if not m:
        return None
    predicate = m.group(1)
    body = m.group(2)
    args = []
    buf = []
    in_quote = False
    escape = False
    was_quoted = False

    def flush():
        raw = "".join(buf).strip() if not was_quoted else "".join(buf)
        if not was_quoted and raw in ("*", "_"):
            args.append(None)
        else:
            args.append(raw)

    for ch in body:
        if in_quote:
            if escape:
                buf.append(ch)
                escape = False
            elif ch == "\\":
                escape = True
            elif ch == "'":
                in_quote = False
            else:
                buf.append(ch)
            continue
        if ch == "'":
            in_quote = True
            was_quoted = True
            continue
        if ch == ",":
            flush()
            buf = []
            was_quoted = False
            continue
        buf.append(ch)
    if buf or was_quoted or not args:
        if body.strip() or was_quoted:
            flush()
    return predicate, tuple(args)


@dataclass
class AtomRecord:
    atom: GroundAtom
    belief: float
    status: str

    def __post_init__(self):
        if not 0.0 <= self.belief <= 1.0:
            raise AtomError(
                f"belief {self.belief} out of range [0,1] for {self.atom}")
        if self.status not in STATUSES:
            raise AtomError(f"unknown status {self.status!r}")

    @property
    def is_open(self):
        return self.status == OPEN


@dataclass
class AtomDatabase:
    predicates: dict[str, PredicateDecl] = field(default_factory=dict)
    _records: dict[GroundAtom, AtomRecord] = field(default_factory=dict)
    # predicate -> position -> constant -> set of atoms
    _index: dict[str, list[dict[str, set]]] = field(default_factory=dict)

    # -- predicates ----------------------------------------------------------

    def register_predicate(self, name, arity, verbalization=None,
                           declared=True):
        if name in self.predicates:
            raise AtomError(f"predicate {name} already registered")
        if arity < 1:
            raise AtomError(f"predicate {name} must have arity >= 1")
        decl = PredicateDecl(name, arity, verbalization, declared)
        self.predicates[name] = decl
        self._index[name] = [dict() for _ in range(arity)]
        return decl

    def register_program_predicates(self, program):
        for decl in program.predicates.values():
            if decl.name in self.predicates:
                ours = self.predicates[decl.name]
                if decl.verbalization and not ours.verbalization:
                    ours.verbalization = decl.verbalization
                continue
            if decl.arity >= 1:
                self.register_predicate(decl.name, decl.arity,
                                        decl.verbalization, decl.declared)

    # -- commits -------------------------------------------------------------

    def commit_atom(self, atom, belief=0.0, status=OPEN):
        """Store or update a record. Recommitting updates belief and status."""
        if isinstance(atom, tuple):
            atom = GroundAtom(atom[0], tuple(atom[1]))
        decl = self.predicates.get(atom.predicate)
        if decl is None:
            self.register_predicate(atom.predicate, len(atom.args),
                                    declared=False)
        elif decl.arity != len(atom.args):
            raise AtomError(
                f"arity mismatch: {atom.predicate} is declared with arity "
                f"{decl.arity}, got {len(atom.args)} args")
        record = AtomRecord(atom, belief, status)
        fresh = atom not in self._records
        self._records[atom] = record
        if fresh:
            for pos, const in enumerate(atom.args):
                self._index[atom.predicate][pos].setdefault(const, set()).add(atom)
        return record

    def get(self, atom):
        return self._records.get(atom)

    def __contains__(self, atom):
        return atom in self._records

    def __len__(self):
        return len(self._records)

    def records(self):
        """All records in deterministic (predicate, args) order."""
        return [self._records[a] for a in sorted(self._records)]

    def belief(self, atom, default=None):
        rec = self._records.get(atom)
        return rec.belief if rec is not None else default

    # -- queries -------------------------------------------------------------

    def query_atoms(self, predicate, pattern=None):
        """Records matching a per-position constant-or-wildcard pattern.

        ``pattern`` is a sequence with None as the wildcard; omitted means
        all-wildcards. Result order is deterministic (args lexicographic).
        """
        if predicate not in self.predicates:
            return []
        index = self._index[predicate]
        if pattern is None:
            pattern = (None,) * self.predicates[predicate].arity
        if len(pattern) != self.predicates[predicate].arity:
            return []
        candidate_sets = []
        for pos, const in enumerate(pattern):
            if const is not None:
                candidate_sets.append(index[pos].get(const, set()))
        if candidate_sets:
            atoms = set.intersection(*candidate_sets) if candidate_sets else set()
        else:
            atoms = {a for bucket in index[0].values() for a in bucket} \
                if index and index[0] else set()
        return [self._records[a] for a in sorted(atoms)]

    def query_pattern(self, text):
        """Query using an atom-id style pattern like ``Dana(*)``."""
        parsed = parse_atom_id(text)
        if parsed is None:
            raise AtomError(f"malformed atom pattern {text!r}")
        predicate, args = parsed
        return self.query_atoms(predicate, args)

    # -- status changes ------------------------------------------------------

    def set_status(self, target, status, pinned_belief=None):
        """Change status for a pattern string or a list of atoms.

        Freezing with a pinned belief overwrites the stored belief; without
        one, the current belief is pinned. Thawing keeps the belief as the
        starting value for the next solve. Returns the number of records
        changed.
        """
        if status not in STATUSES:
            raise AtomError(f"unknown status {status!r}")
        if pinned_belief is not None and not 0.0 <= pinned_belief <= 1.0:
            raise AtomError(f"pinned belief {pinned_belief} out of range")
        if isinstance(target, str):
            records = self.query_pattern(target)
            if not records and parse_atom_id(target) and \
                    None not in parse_atom_id(target)[1]:
                raise AtomError(f"unknown atom {target}")
        else:
            records = []
            for atom in target:
                rec = self._records.get(atom)
                if rec is None:
                    raise AtomError(f"unknown atom {atom}")
                records.append(rec)
        for rec in records:
            rec.status = status
            if pinned_belief is not None:
                rec.belief = pinned_belief
        return len(records)

    def freeze(self, target, pinned_belief=None):
        return self.set_status(target, FROZEN, pinned_belief)

    def thaw(self, target=None):
        """Re-open frozen atoms (all of them when target is None)."""
        if target is None:
            records = [r for r in self._records.values() if r.status == FROZEN]
            for rec in records:
                rec.status = OPEN
            return len(records)
        return self.set_status(target, OPEN)

    def copy(self):
        dup = AtomDatabase()
        for decl in self.predicates.values():
            dup.register_predicate(decl.name, decl.arity, decl.verbalization,
                                   decl.declared)
        for rec in self._records.values():
            dup.commit_atom(rec.atom, rec.belief, rec.status)
        return dup


# ---------------------------------------------------------------------------
# TSV round-trip
# ---------------------------------------------------------------------------

def _escape_arg(text):
    return text.replace("\\", "\\\\").replace("|", "\\|")


def _split_args(text):
    args = []
    buf = []
    escape = False
    for ch in text:
        if escape:
            buf.append(ch)
            escape = False
        elif ch == "\\":
            escape = True
        elif ch == "|":
            args.append("".join(buf))
            buf = []
        else:
            buf.append(ch)
    args.append("".join(buf))
    return args


def format_belief(x: float) -> str:
    text = f"{x:.6f}".rstrip("0")
    if text.endswith("."):
        text += "0"
    return text


def dump_tsv(db: AtomDatabase) -> str:
    lines = []
    for rec in db.records():
        args = "|".join(_escape_arg(a) for a in rec.atom.args)
        lines.append(
            f"{rec.atom.predicate}\t{args}\t{format_belief(rec.belief)}"
            f"\t{rec.status}")
    return "\n".join(lines) + ("\n" if lines else "")


def load_tsv(text: str, db: AtomDatabase | None = None) -> AtomDatabase:
    if db is None:
        db = AtomDatabase()
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise AtomError(
                f"line {line_no}: expected 4 tab-separated fields, "
                f"got {len(parts)}")
        predicate, args_text, belief_text, status = parts
        args = tuple(_split_args(args_text))
        try:
            belief = float(belief_text)
        except ValueError:
            raise AtomError(f"line {line_no}: bad belief {belief_text!r}")
        if status not in STATUSES:
            raise AtomError(f"line {line_no}: bad status {status!r}")
        db.commit_atom(GroundAtom(predicate, args), belief, status)
    return db
