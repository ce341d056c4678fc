"""Capability expression grammar, normalization and direct evaluation.

An expression is a taxonomy class plus a conjunction of per-property atoms:

    Drilling and (depth <= 15 mm) and (material in {steel, aluminium})

Normalization folds the atoms of each property into one feasible set: a
numeric interval with excluded points, or a finite member set. Integer
intervals are tightened to integer bounds (``depth < 15`` becomes
``depth <= 14``) and every numeric value is rescaled onto the property's
declared unit before folding. A property's optional declared range acts as
its value domain, so feasible sets are clipped to it.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from typing import TYPE_CHECKING

from .errors import (
    ExpressionSyntaxError,
    TypeMismatchError,
    UnitMismatchError,
    UnknownClassError,
    UnknownPropertyError,
)
from .values import (
    Literal,
    convert_between_units,
    format_literal,
    fraction_to_number,
    to_fraction,
    unit_base,
)

if TYPE_CHECKING:
    from .model import PropertyDefinition, WorldModel

NUMERIC_COMPARATORS = ("<", "<=", ">", ">=", "=", "!=")
SET_COMPARATORS = ("=", "!=", "in")


@dataclass(frozen=True)
class Atom:
    """One atomic constraint: ``property comparator literal [unit]``.

    For the ``in`` comparator ``literal`` is a tuple of members.
    """

    property_id: str
    comparator: str
    literal: Literal | tuple[Literal, ...]
    unit: str | None = None


@dataclass(frozen=True)
class CapabilityExpression:
    class_id: str
    atoms: tuple[Atom, ...] = ()


@dataclass(frozen=True)
class FeasibleSet:
    """Canonical set of admissible values for one property.

    kind "interval": numeric, bounds in the property's declared unit; for
    integer properties the bounds are closed integers and ``excluded`` holds
    strictly interior integers. kind "members": finite enum/boolean subset.
    kind "empty": unsatisfiable.
    """

    kind: str
    datatype: str
    lower: Fraction | None = None
    lower_closed: bool = False
    upper: Fraction | None = None
    upper_closed: bool = False
    excluded: frozenset = frozenset()
    members: tuple = ()

    # -- construction --------------------------------------------------

    @staticmethod
    def empty(datatype: str) -> FeasibleSet:
        return FeasibleSet(kind="empty", datatype=datatype)

    @staticmethod
    def of_members(datatype: str, values) -> FeasibleSet:
        members = tuple(sorted(set(values)))
        if not members:
            return FeasibleSet.empty(datatype)
        return FeasibleSet(kind="members", datatype=datatype, members=members)

    @staticmethod
    def interval(
        datatype: str,
        lower: Fraction | None,
        lower_closed: bool,
        upper: Fraction | None,
        upper_closed: bool,
        excluded=frozenset(),
    ) -> FeasibleSet:
        excluded = frozenset(Fraction(x) for x in excluded)
        if datatype == "integer":
            return _canonical_integer(lower, lower_closed, upper, upper_closed, excluded)
        return _canonical_real(lower, lower_closed, upper, upper_closed, excluded)

    # -- queries --------------------------------------------------------

    @property
    def is_empty(self) -> bool:
        return self.kind == "empty"

    def contains(self, value) -> bool:
        if self.kind == "empty":
            return False
        if self.kind == "members":
            return value in self.members
        v = to_fraction(value)
        if self.datatype == "integer" and v.denominator != 1:
            return False
        if self.lower is not None:
            if v < self.lower or (v == self.lower and not self.lower_closed):
                return False
        if self.upper is not None:
            if v > self.upper or (v == self.upper and not self.upper_closed):
                return False
        return v not in self.excluded

    def subset_of(self, other: FeasibleSet) -> bool:
        if self.kind == "empty":
            return True
        if other.kind == "empty":
            return False
        if self.kind == "members" or other.kind == "members":
            return set(self.members) <= set(other.members)
        if other.lower is not None:
            if self.lower is None:
                return False
            if other.lower > self.lower:
                return False
            if other.lower == self.lower and not other.lower_closed and self.lower_closed:
                return False
        if other.upper is not None:
            if self.upper is None:
                return False
            if other.upper < self.upper:
                return False
            if other.upper == self.upper and not other.upper_closed and self.upper_closed:
                return False
        return all(not self.contains(x) for x in other.excluded)

    def intersect(self, other: FeasibleSet) -> FeasibleSet:
        if self.kind == "empty" or other.kind == "empty":
            return FeasibleSet.empty(self.datatype)
        if self.kind == "members":
            return FeasibleSet.of_members(
                self.datatype, set(self.members) & set(other.members)
            )
        lower, lower_closed = _max_lower(
            (self.lower, self.lower_closed), (other.lower, other.lower_closed)
        )
        upper, upper_closed = _min_upper(
            (self.upper, self.upper_closed), (other.upper, other.upper_closed)
        )
        return FeasibleSet.interval(
            self.datatype, lower, lower_closed, upper, upper_closed,
            self.excluded | other.excluded,
        )

    def count(self) -> int | None:
        """Number of admissible values; None when infinite."""
        if self.kind == "empty":
            return 0
        if self.kind == "members":
            return len(self.members)
        if self.datatype != "integer" or self.lower is None or self.upper is None:
            return None
        return int(self.upper - self.lower) + 1 - len(self.excluded)

    def pick_member(self):
        """Deterministic member: midpoint rule for intervals, smallest member
        for finite sets. Only valid on non-empty sets."""
        if self.kind == "empty":
            raise ValueError("cannot pick from an empty feasible set")
        if self.kind == "members":
            return self.members[0]
        if self.datatype == "integer":
            return self._pick_integer()
        return self._pick_real()

    def _pick_integer(self) -> Fraction:
        if self.lower is not None and self.upper is not None:
            start = Fraction(math.floor((self.lower + self.upper) / 2))
        elif self.lower is not None:
            start = self.lower
        elif self.upper is not None:
            start = self.upper
        else:
            start = Fraction(0)
        offset = 0
        while True:
            for candidate in (start + offset, start - offset) if offset else (start,):
                if self.contains(candidate):
                    return candidate
            offset += 1

    def _pick_real(self) -> Fraction:
        if self.lower is not None and self.upper is not None:
            if self.lower == self.upper:
                return self.lower
            candidate = (self.lower + self.upper) / 2
            while candidate in self.excluded:
                candidate = (candidate + self.upper) / 2
            return candidate
        if self.lower is not None:
            candidate = self.lower if self.lower_closed else self.lower + 1
        elif self.upper is not None:
            candidate = self.upper if self.upper_closed else self.upper - 1
        else:
            candidate = Fraction(0)
        step = 1 if self.upper is None else -1
        while candidate in self.excluded:
            candidate += step
        return candidate


def _canonical_integer(lower, lower_closed, upper, upper_closed, excluded) -> FeasibleSet:
    if lower is not None:
        lower = Fraction(math.floor(lower) + 1) if not lower_closed else Fraction(math.ceil(lower))
    if upper is not None:
        upper = Fraction(math.ceil(upper) - 1) if not upper_closed else Fraction(math.floor(upper))
    points = {x for x in excluded if x.denominator == 1}
    # cascade endpoint exclusions into the bounds
    changed = True
    while changed:
        changed = False
        if lower is not None and lower in points:
            points.discard(lower)
            lower += 1
            changed = True
        if upper is not None and upper in points:
            points.discard(upper)
            upper -= 1
            changed = True
    if lower is not None and upper is not None and lower > upper:
        return FeasibleSet.empty("integer")
    interior = frozenset(
        x
        for x in points
        if (lower is None or x > lower) and (upper is None or x < upper)
    )
    return FeasibleSet(
        kind="interval",
        datatype="integer",
        lower=lower,
        lower_closed=lower is not None,
        upper=upper,
        upper_closed=upper is not None,
        excluded=interior,
    )


def _canonical_real(lower, lower_closed, upper, upper_closed, excluded) -> FeasibleSet:
    points = set(excluded)
    if lower is not None and lower_closed and lower in points:
        points.discard(lower)
        lower_closed = False
    if upper is not None and upper_closed and upper in points:
        points.discard(upper)
        upper_closed = False
    if lower is not None and upper is not None:
        if lower > upper:
            return FeasibleSet.empty("real")
        if lower == upper and not (lower_closed and upper_closed):
            return FeasibleSet.empty("real")
    interior = frozenset(
        x
        for x in points
        if (lower is None or x > lower) and (upper is None or x < upper)
    )
    return FeasibleSet(
        kind="interval",
        datatype="real",
        lower=lower,
        lower_closed=lower is not None and lower_closed,
        upper=upper,
        upper_closed=upper is not None and upper_closed,
        excluded=interior,
    )


def _max_lower(a, b):
    (v1, c1), (v2, c2) = a, b
    if v1 is None:
        return v2, c2
    if v2 is None:
        return v1, c1
    if v1 > v2:
        return v1, c1
    if v2 > v1:
        return v2, c2
    return v1, c1 and c2


def _min_upper(a, b):
    (v1, c1), (v2, c2) = a, b
    if v1 is None:
        return v2, c2
    if v2 is None:
        return v1, c1
    if v1 < v2:
        return v1, c1
    if v2 < v1:
        return v2, c2
    return v1, c1 and c2


@dataclass(frozen=True)
class NormalForm:
    """A class plus one feasible set per constrained property."""

    class_id: str
    feasible: dict[str, FeasibleSet] = field(default_factory=dict)

    def feasible_or_domain(self, property_id: str, world: WorldModel) -> FeasibleSet:
        got = self.feasible.get(property_id)
        if got is not None:
            return got
        return full_domain(world.property_def(property_id))


def full_domain(prop: PropertyDefinition) -> FeasibleSet:
    """The unconstrained feasible set of a property."""
    if prop.datatype == "enum":
        return FeasibleSet.of_members("enum", prop.enum_values)
    if prop.datatype == "boolean":
        return FeasibleSet.of_members("boolean", (False, True))
    if prop.declared_range is not None:
        lo, hi = prop.declared_range
        return FeasibleSet.interval(
            prop.datatype, to_fraction(lo), True, to_fraction(hi), True
        )
    return FeasibleSet.interval(prop.datatype, None, False, None, False)


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<number>-?\d+(?:\.\d+)?)|(?P<ident>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op><=|>=|!=|<|>|=)|(?P<punct>[(){},]))"
)


@dataclass(frozen=True)
class _Token:
    kind: str  # number | ident | op | punct | end
    text: str
    pos: int


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        if match is None or match.end() == pos:
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            where = len(text) - len(stripped)
            raise ExpressionSyntaxError(f"unexpected character {text[where]!r}", where)
        for kind in ("number", "ident", "op", "punct"):
            value = match.group(kind)
            if value is not None:
                tokens.append(_Token(kind, value, match.start(kind)))
                break
        pos = match.end()
    tokens.append(_Token("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token], world: WorldModel):
        self.tokens = tokens
        self.world = world
        self.index = 0

    def peek(self) -> _Token:
        return self.tokens[self.index]

    def advance(self) -> _Token:
        token = self.tokens[self.index]
        self.index += 1
        return token

    def expect(self, kind: str, text: str | None = None, expected: str = "") -> _Token:
        token = self.peek()
        if token.kind != kind or (text is not None and token.text != text):
            raise ExpressionSyntaxError(
                f"unexpected {token.text!r}" if token.kind != "end" else "unexpected end of input",
                token.pos,
                (expected or text or kind,),
            )
        return self.advance()

    def parse(self) -> CapabilityExpression:
        class_token = self.expect("ident", expected="class name")
        if not self.world.taxonomy.has_class(class_token.text):
            raise UnknownClassError(f"class {class_token.text!r} is not in the taxonomy")
        atoms: list[Atom] = []
        while self.peek().kind != "end":
            self.expect("ident", "and")
            self.expect("punct", "(")
            atoms.append(self.parse_atom())
            self.expect("punct", ")")
        return CapabilityExpression(class_id=class_token.text, atoms=tuple(atoms))

    def parse_atom(self) -> Atom:
        prop_token = self.expect("ident", expected="property name")
        prop = self.world.property_def(prop_token.text)
        if prop is None:
            raise UnknownPropertyError(f"property {prop_token.text!r} is not defined")
        token = self.peek()
        if token.kind == "ident" and token.text == "in":
            self.advance()
            return self.parse_membership(prop)
        if token.kind != "op":
            raise ExpressionSyntaxError(
                f"unexpected {token.text!r}", token.pos, ("comparator", "in")
            )
        comparator = self.advance().text
        _check_comparator(prop, comparator)
        literal = self.parse_literal(prop)
        unit = None
        if self.peek().kind == "ident" and self.peek().text != "and":
            unit_token = self.advance()
            unit = unit_token.text
            _check_unit(prop, unit)
        return Atom(prop.id, comparator, literal, unit)

    def parse_membership(self, prop) -> Atom:
        _check_comparator(prop, "in")
        self.expect("punct", "{")
        values = [self.parse_literal(prop)]
        while self.peek().kind == "punct" and self.peek().text == ",":
            self.advance()
            values.append(self.parse_literal(prop))
        self.expect("punct", "}")
        return Atom(prop.id, "in", tuple(values), None)

    def parse_literal(self, prop) -> Literal:
        token = self.peek()
        if token.kind == "number":
            if prop.datatype not in ("integer", "real"):
                raise TypeMismatchError(
                    f"numeric literal {token.text} on {prop.datatype} property {prop.id!r}"
                )
            self.advance()
            if "." in token.text:
                return Decimal(token.text)
            return int(token.text)
        if token.kind == "ident":
            if prop.datatype == "boolean":
                if token.text not in ("true", "false"):
                    raise TypeMismatchError(
                        f"{token.text!r} is not a boolean literal (property {prop.id!r})"
                    )
                self.advance()
                return token.text == "true"
            if prop.datatype == "enum":
                if token.text not in prop.enum_values:
                    raise TypeMismatchError(
                        f"{token.text!r} is not a member of enum property {prop.id!r}"
                    )
                self.advance()
                return token.text
            raise TypeMismatchError(
                f"non-numeric literal {token.text!r} on {prop.datatype} property {prop.id!r}"
            )
        raise ExpressionSyntaxError(
            f"unexpected {token.text!r}" if token.kind != "end" else "unexpected end of input",
            token.pos,
            ("literal",),
        )


def _check_comparator(prop, comparator: str) -> None:
    allowed = NUMERIC_COMPARATORS if prop.datatype in ("integer", "real") else SET_COMPARATORS
    if comparator not in allowed:
        raise TypeMismatchError(
            f"comparator {comparator!r} is not legal for {prop.datatype} property {prop.id!r}"
        )


def _check_unit(prop, unit: str) -> None:
    base = unit_base(unit)  # raises UnknownUnit for off-table units
    if prop.unit is None:
        raise UnitMismatchError(
            f"property {prop.id!r} is unitless but constraint carries unit {unit!r}"
        )
    if unit_base(prop.unit) != base:
        raise UnitMismatchError(
            f"unit {unit!r} ({base}) does not match property {prop.id!r} unit "
            f"{prop.unit!r} ({unit_base(prop.unit)})"
        )


def parse_expression(text: str, world: WorldModel) -> CapabilityExpression:
    """Parse ``ClassName ('and' '(' atom ')')*`` into a resolved expression."""
    return _Parser(_tokenize(text), world).parse()


def expression_to_text(expr: CapabilityExpression) -> str:
    parts = [expr.class_id]
    for atom in expr.atoms:
        if atom.comparator == "in":
            rendered = "{" + ", ".join(format_literal(v) for v in atom.literal) + "}"
            parts.append(f"and ({atom.property_id} in {rendered})")
        else:
            rendered = format_literal(atom.literal)
            if atom.unit:
                rendered += f" {atom.unit}"
            parts.append(f"and ({atom.property_id} {atom.comparator} {rendered})")
    return " ".join(parts)


def validate_expression(expr: CapabilityExpression, world: WorldModel) -> list[str]:
    """Non-raising re-check of a (possibly hand-built) expression."""
    issues: list[str] = []
    if not world.taxonomy.has_class(expr.class_id):
        issues.append(f"class {expr.class_id!r} is not in the taxonomy")
    for atom in expr.atoms:
        prop = world.property_def(atom.property_id)
        if prop is None:
            issues.append(f"property {atom.property_id!r} is not defined")
            continue
        try:
            _check_comparator(prop, atom.comparator)
            if atom.unit is not None:
                _check_unit(prop, atom.unit)
            values = atom.literal if atom.comparator == "in" else (atom.literal,)
            for value in values:
                _check_atom_value(prop, value)
        except (TypeMismatchError, UnitMismatchError) as exc:
            issues.append(str(exc))
    return issues


def _check_atom_value(prop, value) -> None:
    if prop.datatype in ("integer", "real"):
        if isinstance(value, bool) or not isinstance(value, (int, Decimal, Fraction)):
            raise TypeMismatchError(
                f"{value!r} is not numeric (property {prop.id!r})"
            )
    elif prop.datatype == "enum":
        if not isinstance(value, str) or value not in prop.enum_values:
            raise TypeMismatchError(
                f"{value!r} is not a member of enum property {prop.id!r}"
            )
    elif prop.datatype == "boolean":
        if not isinstance(value, bool):
            raise TypeMismatchError(f"{value!r} is not boolean (property {prop.id!r})")


# ---------------------------------------------------------------------------
# normalization and evaluation
# ---------------------------------------------------------------------------

def _atom_value_declared(prop, atom: Atom, value) -> Fraction:
    """Atom literal rescaled onto the property's declared unit."""
    return convert_between_units(to_fraction(value), atom.unit, prop.unit)


def normalize(expr: CapabilityExpression, world: WorldModel) -> NormalForm:
    """Fold all atoms into one canonical feasible set per property."""
    grouped: dict[str, list[Atom]] = {}
    for atom in expr.atoms:
        grouped.setdefault(atom.property_id, []).append(atom)

    feasible: dict[str, FeasibleSet] = {}
    for property_id, atoms in grouped.items():
        prop = world.property_def(property_id)
        if prop is None:
            raise UnknownPropertyError(f"property {property_id!r} is not defined")
        if prop.datatype in ("enum", "boolean"):
            feasible[property_id] = _normalize_members(prop, atoms)
        else:
            feasible[property_id] = _normalize_interval(prop, atoms)
    return NormalForm(class_id=expr.class_id, feasible=feasible)


def _normalize_members(prop, atoms: list[Atom]) -> FeasibleSet:
    allowed = set(prop.enum_values) if prop.datatype == "enum" else {False, True}
    for atom in atoms:
        if atom.comparator == "=":
            allowed &= {atom.literal}
        elif atom.comparator == "!=":
            allowed -= {atom.literal}
        elif atom.comparator == "in":
            allowed &= set(atom.literal)
    return FeasibleSet.of_members(prop.datatype, allowed)


def _normalize_interval(prop, atoms: list[Atom]) -> FeasibleSet:
    lower: tuple[Fraction | None, bool] = (None, False)
    upper: tuple[Fraction | None, bool] = (None, False)
    excluded: set[Fraction] = set()
    for atom in atoms:
        value = _atom_value_declared(prop, atom, atom.literal)
        if atom.comparator == "<":
            upper = _min_upper(upper, (value, False))
        elif atom.comparator == "<=":
            upper = _min_upper(upper, (value, True))
        elif atom.comparator == ">":
            lower = _max_lower(lower, (value, False))
        elif atom.comparator == ">=":
            lower = _max_lower(lower, (value, True))
        elif atom.comparator == "=":
            lower = _max_lower(lower, (value, True))
            upper = _min_upper(upper, (value, True))
        elif atom.comparator == "!=":
            excluded.add(value)
    if prop.declared_range is not None:
        lo, hi = prop.declared_range
        lower = _max_lower(lower, (to_fraction(lo), True))
        upper = _min_upper(upper, (to_fraction(hi), True))
    return FeasibleSet.interval(
        prop.datatype, lower[0], lower[1], upper[0], upper[1], frozenset(excluded)
    )


def normal_form_to_expression(nf: NormalForm, world: WorldModel) -> CapabilityExpression:
    """Re-encode a normal form as an equivalent expression."""
    atoms: list[Atom] = []
    for property_id in sorted(nf.feasible):
        fs = nf.feasible[property_id]
        prop = world.property_def(property_id)
        unit = prop.unit if prop is not None else None
        if fs.kind == "members":
            if len(fs.members) == 1:
                atoms.append(Atom(property_id, "=", fs.members[0], None))
            else:
                atoms.append(Atom(property_id, "in", fs.members, None))
            continue
        if fs.kind == "empty":
            # one contradictory pair keeps the encoding expressible
            zero = 0 if fs.datatype == "integer" else Decimal(0)
            one = 1 if fs.datatype == "integer" else Decimal(1)
            atoms.append(Atom(property_id, ">=", one, unit))
            atoms.append(Atom(property_id, "<=", zero, unit))
            continue
        if fs.lower is not None:
            cmp = ">=" if fs.lower_closed else ">"
            atoms.append(Atom(property_id, cmp, _bound_literal(fs, fs.lower), unit))
        if fs.upper is not None:
            cmp = "<=" if fs.upper_closed else "<"
            atoms.append(Atom(property_id, cmp, _bound_literal(fs, fs.upper), unit))
        for point in sorted(fs.excluded):
            atoms.append(Atom(property_id, "!=", _bound_literal(fs, point), unit))
    return CapabilityExpression(class_id=nf.class_id, atoms=tuple(atoms))


def _bound_literal(fs: FeasibleSet, value: Fraction) -> Literal:
    if fs.datatype == "integer":
        return int(value)
    return fraction_to_number(value)


def format_feasible_set(fs: FeasibleSet) -> str:
    """Human/machine-stable rendering, e.g. ``[10, 15]`` or ``(-inf, 15]``."""
    if fs.kind == "empty":
        return "EMPTY"
    if fs.kind == "members":
        return "{" + ", ".join(format_literal(m) for m in fs.members) + "}"
    left = "[" if fs.lower_closed else "("
    right = "]" if fs.upper_closed else ")"
    low = format_literal(fs.lower) if fs.lower is not None else "-inf"
    high = format_literal(fs.upper) if fs.upper is not None else "inf"
    text = f"{left}{low}, {high}{right}"
    if fs.excluded:
        text += " \\ {" + ", ".join(format_literal(x) for x in sorted(fs.excluded)) + "}"
    return text


def evaluate_expression(
    expr: CapabilityExpression, assignment, world: WorldModel
) -> bool:
    """Direct raw-atom evaluation of an assignment (class membership aside).

    Assignment values are taken to be on each property's declared unit scale.
    Missing properties fail the atoms that mention them.
    """
    for atom in expr.atoms:
        if atom.property_id not in assignment:
            return False
        prop = world.property_def(atom.property_id)
        value = assignment[atom.property_id]
        if prop.datatype in ("integer", "real"):
            v = to_fraction(value)
            bound = _atom_value_declared(prop, atom, atom.literal)
            if atom.comparator == "<" and not v < bound:
                return False
            if atom.comparator == "<=" and not v <= bound:
                return False
            if atom.comparator == ">" and not v > bound:
                return False
            if atom.comparator == ">=" and not v >= bound:
                return False
            if atom.comparator == "=" and not v == bound:
                return False
            if atom.comparator == "!=" and not v != bound:
                return False
        else:
            if atom.comparator == "=" and value != atom.literal:
                return False
            if atom.comparator == "!=" and value == atom.literal:
                return False
            if atom.comparator == "in" and value not in atom.literal:
                return False
    return True
