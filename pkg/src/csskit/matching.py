"""Compatibility of required vs provided capabilities.

A match conjoins the two normal forms under closed-world closure (sibling
classes are disjoint, a class subsumes its descendants) and classifies how
the two satisfying sets relate:

    EXACT    same satisfying set
    PLUGIN   required strictly inside provided
    SUBSUME  provided strictly inside required
    INTERSECT joint satisfiability without containment
    DISJOINT  no common satisfying assignment

Cost is linear in the number of constrained properties; every check is a
per-property interval or member-set operation.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

from .expressions import (
    CapabilityExpression,
    FeasibleSet,
    NormalForm,
    normalize,
)
from .model import WorldModel
from .taxonomy import Taxonomy, is_subclass_of
from .values import Literal, fraction_to_number


class MatchDegree(Enum):
    EXACT = "EXACT"
    PLUGIN = "PLUGIN"
    SUBSUME = "SUBSUME"
    INTERSECT = "INTERSECT"
    DISJOINT = "DISJOINT"

    @property
    def rank(self) -> int:
        return _DEGREE_RANK[self]


_DEGREE_RANK = {
    MatchDegree.EXACT: 4,
    MatchDegree.PLUGIN: 3,
    MatchDegree.SUBSUME: 2,
    MatchDegree.INTERSECT: 1,
    MatchDegree.DISJOINT: 0,
}


class _ClassDisjoint:
    """Marker returned by conjoin when neither class subsumes the other."""

    def __repr__(self) -> str:  # pragma: no cover - cosmetic
        return "DISJOINT_CLASS"


DISJOINT_CLASS = _ClassDisjoint()


@dataclass(frozen=True)
class PropertyComparison:
    required: FeasibleSet
    provided: FeasibleSet
    intersection: FeasibleSet


@dataclass(frozen=True)
class MatchResult:
    degree: MatchDegree
    witness: dict[str, Literal] | None
    per_property: dict[str, PropertyComparison]


def satisfiable(nf: NormalForm, tax: Taxonomy) -> bool:
    """True iff the class exists and every feasible set is non-empty."""
    if not tax.has_class(nf.class_id):
        return False
    return all(not fs.is_empty for fs in nf.feasible.values())


def conjoin(
    required: NormalForm, provided: NormalForm, tax: Taxonomy
) -> NormalForm | _ClassDisjoint:
    """Conjunction of two normal forms; DISJOINT_CLASS under closure when
    neither class subsumes the other."""
    if is_subclass_of(tax, required.class_id, provided.class_id):
        class_id = required.class_id
    elif is_subclass_of(tax, provided.class_id, required.class_id):
        class_id = provided.class_id
    else:
        return DISJOINT_CLASS
    feasible: dict[str, FeasibleSet] = {}
    for property_id in sorted(set(required.feasible) | set(provided.feasible)):
        left = required.feasible.get(property_id)
        right = provided.feasible.get(property_id)
        if left is None:
            feasible[property_id] = right
        elif right is None:
            feasible[property_id] = left
        else:
            feasible[property_id] = left.intersect(right)
    return NormalForm(class_id=class_id, feasible=feasible)


def match_capabilities(
    required: CapabilityExpression,
    provided: CapabilityExpression,
    world: WorldModel,
) -> MatchResult:
    required_nf = normalize(required, world)
    provided_nf = normalize(provided, world)
    tax = world.taxonomy

    property_ids = sorted(set(required_nf.feasible) | set(provided_nf.feasible))
    per_property: dict[str, PropertyComparison] = {}
    for property_id in property_ids:
        r = required_nf.feasible_or_domain(property_id, world)
        p = provided_nf.feasible_or_domain(property_id, world)
        per_property[property_id] = PropertyComparison(r, p, r.intersect(p))

    conjunction = conjoin(required_nf, provided_nf, tax)
    if conjunction is DISJOINT_CLASS or any(
        comparison.intersection.is_empty for comparison in per_property.values()
    ):
        return MatchResult(MatchDegree.DISJOINT, None, per_property)

    required_in_provided = is_subclass_of(
        tax, required_nf.class_id, provided_nf.class_id
    ) and all(
        c.required.subset_of(c.provided) for c in per_property.values()
    )
    provided_in_required = is_subclass_of(
        tax, provided_nf.class_id, required_nf.class_id
    ) and all(
        c.provided.subset_of(c.required) for c in per_property.values()
    )

    if required_in_provided and provided_in_required:
        degree = MatchDegree.EXACT
    elif required_in_provided:
        degree = MatchDegree.PLUGIN
    elif provided_in_required:
        degree = MatchDegree.SUBSUME
    else:
        degree = MatchDegree.INTERSECT

    witness = {
        property_id: _as_literal(comparison.intersection.pick_member())
        for property_id, comparison in per_property.items()
    }
    return MatchResult(degree, witness, per_property)


def _as_literal(value) -> Literal:
    if isinstance(value, Fraction):
        return fraction_to_number(value)
    return value


def rank_providers(
    required: CapabilityExpression,
    candidates,
    world: WorldModel,
):
    """Non-disjoint candidates ordered by degree, then resource and capability id.

    ``candidates`` is an iterable of (resource_id, Capability); the result is a
    list of (resource_id, capability_id, MatchResult).
    """
    scored = []
    for resource_id, capability in candidates:
        result = match_capabilities(required, capability.expression, world)
        if result.degree is not MatchDegree.DISJOINT:
            scored.append((resource_id, capability.id, result))
    scored.sort(key=lambda item: (-item[2].degree.rank, item[0], item[1]))
    return scored
