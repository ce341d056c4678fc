"""Commercial layer: tendered requests, offers, awards and contracts.

An offer is admissible when it envelopes every covered capability
requirement (match degree EXACT or PLUGIN) and satisfies all tender bounds.
Selection picks a set of admissible, unexpired offers covering every
requested capability key exactly once, never mixing mutually exclusive
offers, at minimal total cost. Money and CO2 use exact decimal arithmetic;
all bound comparisons are inclusive.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from decimal import Decimal
from typing import TYPE_CHECKING

from .errors import NoFeasibleCombinationError, OfferExpiredError, UnknownCapKeyError
from .matching import MatchDegree, match_capabilities

if TYPE_CHECKING:
    from .expressions import CapabilityExpression
    from .model import WorldModel

#: degrees that commit a provider commercially (full envelope of the need)
COVERING_DEGREES = (MatchDegree.EXACT, MatchDegree.PLUGIN)

#: how quantity is assigned to combined offers (see Award.quantity_allocation)
FULL_QUANTITY_PER_OFFER = "full-quantity-per-offer"

#: exact search is used up to this many admissible candidates
EXACT_SEARCH_LIMIT = 20


@dataclass(frozen=True)
class TenderCriteria:
    quantity: int
    max_unit_price: Decimal
    max_co2_per_unit: Decimal
    delivery_deadline: datetime
    required_certifications: frozenset[str] = frozenset()
    nda_required: bool = False


@dataclass(frozen=True)
class ServiceRequest:
    request_id: str
    required_capabilities: tuple[tuple[str, CapabilityExpression], ...]
    tender: TenderCriteria
    submitted_at: datetime
    response_deadline: datetime

    def cap_keys(self) -> tuple[str, ...]:
        return tuple(key for key, _ in self.required_capabilities)

    def required_expression(self, cap_key: str) -> CapabilityExpression:
        for key, expression in self.required_capabilities:
            if key == cap_key:
                return expression
        raise UnknownCapKeyError(f"request has no capability key {cap_key!r}")


@dataclass(frozen=True)
class ServiceOffer:
    offer_id: str
    provider_id: str
    request_id: str
    covered_cap_keys: tuple[str, ...]
    provided_capabilities: dict[str, CapabilityExpression]
    unit_price: Decimal
    co2_per_unit: Decimal
    delivery_date: datetime
    certifications: frozenset[str] = frozenset()
    nda_accepted: bool = False
    valid_until: datetime | None = None
    exclusive_group: str | None = None


@dataclass(frozen=True)
class Violation:
    criterion: str
    detail: str


@dataclass(frozen=True)
class Admissibility:
    admissible: bool
    violations: tuple[Violation, ...] = ()


@dataclass(frozen=True)
class Award:
    request_id: str
    selected_offers: tuple[ServiceOffer, ...]
    total_cost: Decimal
    strategy: str  # "exact" | "greedy"
    quantity_allocation: str = FULL_QUANTITY_PER_OFFER

    def offer_ids(self) -> tuple[str, ...]:
        return tuple(offer.offer_id for offer in self.selected_offers)


@dataclass(frozen=True)
class Contract:
    contract_id: str
    request_id: str
    accepted_offer_ids: tuple[str, ...]
    total_price: Decimal
    formed_at: datetime


def evaluate_offer(
    request: ServiceRequest,
    offer: ServiceOffer,
    world: WorldModel,
    accept_intersect: bool = False,
) -> Admissibility:
    """Check one offer against the request's capability and tender criteria.

    ``accept_intersect`` widens capability coverage to INTERSECT matches;
    the default keeps the strict full-envelope rule.
    """
    if offer.request_id != request.request_id:
        raise UnknownCapKeyError(
            f"offer {offer.offer_id!r} answers request {offer.request_id!r}, "
            f"not {request.request_id!r}"
        )
    request_keys = set(request.cap_keys())
    for cap_key in offer.covered_cap_keys:
        if cap_key not in request_keys:
            raise UnknownCapKeyError(f"request has no capability key {cap_key!r}")
        if cap_key not in offer.provided_capabilities:
            raise UnknownCapKeyError(
                f"offer {offer.offer_id!r} covers {cap_key!r} without a "
                "provided capability"
            )

    accepted = COVERING_DEGREES + ((MatchDegree.INTERSECT,) if accept_intersect else ())
    violations: list[Violation] = []
    for cap_key in offer.covered_cap_keys:
        result = match_capabilities(
            request.required_expression(cap_key),
            offer.provided_capabilities[cap_key],
            world,
        )
        if result.degree not in accepted:
            violations.append(
                Violation(
                    "capabilityCoverage",
                    f"{cap_key}: degree {result.degree.value} does not cover "
                    "the requirement",
                )
            )
    tender = request.tender
    if offer.unit_price > tender.max_unit_price:
        violations.append(
            Violation(
                "maxUnitPrice",
                f"unit price {offer.unit_price} exceeds {tender.max_unit_price}",
            )
        )
    if offer.co2_per_unit > tender.max_co2_per_unit:
        violations.append(
            Violation(
                "maxCo2PerUnit",
                f"CO2 {offer.co2_per_unit} exceeds {tender.max_co2_per_unit}",
            )
        )
    if offer.delivery_date > tender.delivery_deadline:
        violations.append(
            Violation(
                "deliveryDeadline",
                f"delivery {offer.delivery_date.isoformat()} is after "
                f"{tender.delivery_deadline.isoformat()}",
            )
        )
    missing = tender.required_certifications - offer.certifications
    if missing:
        violations.append(
            Violation(
                "requiredCertifications",
                "missing certifications: " + ", ".join(sorted(missing)),
            )
        )
    if tender.nda_required and not offer.nda_accepted:
        violations.append(
            Violation("ndaRequired", "non-disclosure agreement not accepted")
        )
    return Admissibility(admissible=not violations, violations=tuple(violations))


def select_offers(
    request: ServiceRequest,
    offers,
    now: datetime,
    world: WorldModel,
    accept_intersect: bool = False,
) -> Award:
    """Cost-minimal covering combination of admissible, unexpired offers.

    Exact search up to EXACT_SEARCH_LIMIT candidates, greedy above; ties on
    cost break toward the lexicographically smallest offer-id set.
    """
    candidates = [
        offer
        for offer in sorted(offers, key=lambda o: o.offer_id)
        if (offer.valid_until is None or offer.valid_until >= now)
        and evaluate_offer(request, offer, world, accept_intersect).admissible
    ]
    keys = frozenset(request.cap_keys())
    if not keys:
        raise NoFeasibleCombinationError("request has no capability keys")

    if len(candidates) <= EXACT_SEARCH_LIMIT:
        chosen = _exact_cover(keys, candidates)
        strategy = "exact"
    else:
        chosen = _greedy_cover(keys, candidates)
        strategy = "greedy"
    if chosen is None:
        raise NoFeasibleCombinationError(
            f"no admissible combination covers {sorted(keys)}"
        )
    total = Decimal(request.tender.quantity) * sum(
        (offer.unit_price for offer in chosen), Decimal(0)
    )
    return Award(
        request_id=request.request_id,
        selected_offers=tuple(chosen),
        total_cost=total,
        strategy=strategy,
    )


def _exact_cover(keys: frozenset[str], candidates: list[ServiceOffer]):
    best: tuple[Decimal, tuple[str, ...], list[ServiceOffer]] | None = None

    def walk(index: int, covered: frozenset[str], groups: frozenset[str],
             cost: Decimal, chosen: list[ServiceOffer]) -> None:
        nonlocal best
        if best is not None and cost > best[0]:
            return
        if covered == keys:
            key = (cost, tuple(offer.offer_id for offer in chosen))
            if best is None or (cost, key[1]) < (best[0], best[1]):
                best = (cost, key[1], list(chosen))
            return
        if index >= len(candidates):
            return
        # coverage feasibility prune: every missing key needs a remaining offer
        missing = keys - covered
        remaining = set()
        for offer in candidates[index:]:
            remaining.update(offer.covered_cap_keys)
        if not missing <= remaining:
            return
        offer = candidates[index]
        covered_by_offer = frozenset(offer.covered_cap_keys)
        if (
            not (covered_by_offer & covered)
            and (offer.exclusive_group is None or offer.exclusive_group not in groups)
        ):
            chosen.append(offer)
            walk(
                index + 1,
                covered | covered_by_offer,
                groups | ({offer.exclusive_group} if offer.exclusive_group else frozenset()),
                cost + offer.unit_price,
                chosen,
            )
            chosen.pop()
        walk(index + 1, covered, groups, cost, chosen)

    walk(0, frozenset(), frozenset(), Decimal(0), [])
    return None if best is None else best[2]


def _greedy_cover(keys: frozenset[str], candidates: list[ServiceOffer]):
    covered: frozenset[str] = frozenset()
    groups: frozenset[str] = frozenset()
    chosen: list[ServiceOffer] = []
    pool = list(candidates)
    while covered != keys:
        best_offer = None
        best_rate: Decimal | None = None
        for offer in pool:
            covered_by_offer = frozenset(offer.covered_cap_keys)
            if covered_by_offer & covered:
                continue  # exactly-once coverage
            if offer.exclusive_group is not None and offer.exclusive_group in groups:
                continue
            new = covered_by_offer - covered
            if not new:
                continue
            rate = offer.unit_price / Decimal(len(new))
            if best_rate is None or rate < best_rate:
                best_rate, best_offer = rate, offer
        if best_offer is None:
            return None
        chosen.append(best_offer)
        pool.remove(best_offer)
        covered |= frozenset(best_offer.covered_cap_keys)
        if best_offer.exclusive_group is not None:
            groups |= {best_offer.exclusive_group}
    return chosen


def form_contract(award: Award, accepted_at: datetime) -> Contract:
    """Bind an award into a contract; every selected offer must still be valid."""
    if not award.selected_offers:
        raise ValueError("cannot form a contract from an empty award")
    for offer in award.selected_offers:
        if offer.valid_until is not None and accepted_at > offer.valid_until:
            raise OfferExpiredError(
                offer.offer_id,
                f"offer {offer.offer_id!r} expired at "
                f"{offer.valid_until.isoformat()}",
            )
    return Contract(
        contract_id=f"contract-{award.request_id}",
        request_id=award.request_id,
        accepted_offer_ids=award.offer_ids(),
        total_price=award.total_cost,
        formed_at=accepted_at,
    )
