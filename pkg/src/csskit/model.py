"""Production-world entity types and whole-model validation.

The world ties a class taxonomy and property definitions to resources (which
provide capabilities and expose skills) and products (whose process steps
require capabilities). All types are immutable value data after load and safe
to share between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from decimal import Decimal
from typing import TYPE_CHECKING

from .errors import NotFoundError
from .taxonomy import Taxonomy
from .values import DATATYPES, Literal, UNIT_TABLE, literal_matches

if TYPE_CHECKING:
    from .expressions import CapabilityExpression
    from .market import ServiceOffer

STATE_MACHINE_PROFILE = "PACKML-17"

#: runtime-assigned skill metadata; never writable and never a declared parameter
LOCAL_RUNTIME_ID_FIELD = "localRuntimeId"


@dataclass(frozen=True)
class PropertyDefinition:
    id: str
    datatype: str
    unit: str | None = None
    enum_values: tuple[str, ...] = ()
    declared_range: tuple[int | Decimal, int | Decimal] | None = None


@dataclass(frozen=True)
class Capability:
    """Implementation-independent description of a production function."""

    id: str
    iri: str
    expression: CapabilityExpression
    property_to_parameter: dict[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class ParameterSpec:
    param_id: str
    direction: str  # "input" | "output"
    datatype: str
    unit: str | None = None
    default: Literal | None = None


@dataclass(frozen=True)
class SkillDescriptor:
    skill_id: str
    capability_ref: str
    name: str | None = None
    parameters: tuple[ParameterSpec, ...] = ()
    has_feasibility_check: bool = False
    has_precondition_check: bool = False
    state_machine_profile: str = STATE_MACHINE_PROFILE

    def input_parameters(self) -> tuple[ParameterSpec, ...]:
        return tuple(p for p in self.parameters if p.direction == "input")

    def output_parameters(self) -> tuple[ParameterSpec, ...]:
        return tuple(p for p in self.parameters if p.direction == "output")

    def parameter(self, param_id: str) -> ParameterSpec | None:
        for spec in self.parameters:
            if spec.param_id == param_id:
                return spec
        return None


@dataclass(frozen=True)
class Resource:
    id: str
    provided_capabilities: tuple[Capability, ...] = ()
    skills: tuple[SkillDescriptor, ...] = ()


@dataclass(frozen=True)
class ProcessStep:
    id: str
    required_capability: CapabilityExpression
    parameter_values: dict[str, Literal] = field(default_factory=dict)


@dataclass(frozen=True)
class Product:
    id: str
    steps: tuple[ProcessStep, ...] = ()


@dataclass(frozen=True)
class WorldModel:
    taxonomy: Taxonomy
    property_defs: tuple[PropertyDefinition, ...] = ()
    resources: tuple[Resource, ...] = ()
    products: tuple[Product, ...] = ()
    service_catalog: tuple[ServiceOffer, ...] = ()

    def property_def(self, property_id: str) -> PropertyDefinition | None:
        for prop in self.property_defs:
            if prop.id == property_id:
                return prop
        return None

    def capabilities(self):
        """(resource, capability) pairs in model order."""
        for resource in self.resources:
            for capability in resource.provided_capabilities:
                yield resource, capability

    def resource(self, resource_id: str) -> Resource | None:
        for resource in self.resources:
            if resource.id == resource_id:
                return resource
        return None

    def product(self, product_id: str) -> Product | None:
        for product in self.products:
            if product.id == product_id:
                return product
        return None

    def skills_for_capability(self, resource: Resource, capability: Capability):
        """The resource's skills implementing a capability, by skill id order."""
        matches = [
            s
            for s in resource.skills
            if s.capability_ref in (capability.iri, capability.id)
        ]
        return sorted(matches, key=lambda s: s.skill_id)


def resolve_capability(world: WorldModel, iri: str) -> Capability:
    """The unique capability carrying ``iri``; first in model order on ties."""
    for _, capability in world.capabilities():
        if capability.iri == iri:
            return capability
    raise NotFoundError(f"no capability carries iri {iri!r}")


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ValidationIssue:
    severity: str  # "error" | "warning"
    path: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[ValidationIssue, ...] = ()

    @property
    def ok(self) -> bool:
        return not any(issue.severity == "error" for issue in self.issues)

    def errors(self) -> tuple[ValidationIssue, ...]:
        return tuple(issue for issue in self.issues if issue.severity == "error")


def validate_model(world: WorldModel) -> ValidationReport:
    """Check every model invariant; problems become report entries, ordered by path."""
    issues: list[ValidationIssue] = []

    def error(path: str, message: str) -> None:
        issues.append(ValidationIssue("error", path, message))

    def warning(path: str, message: str) -> None:
        issues.append(ValidationIssue("warning", path, message))

    for message in world.taxonomy.structural_issues():
        error("taxonomy", message)

    _validate_properties(world, error)
    _validate_resources(world, error)
    _validate_products(world, error, warning)
    _validate_catalog(world, error)

    issues.sort(key=lambda issue: (issue.path, issue.message))
    return ValidationReport(issues=tuple(issues))


def _validate_properties(world: WorldModel, error) -> None:
    seen: set[str] = set()
    for prop in world.property_defs:
        path = f"properties[{prop.id}]"
        if prop.id in seen:
            error(path, f"duplicate property id {prop.id!r}")
        seen.add(prop.id)
        if prop.datatype not in DATATYPES:
            error(path, f"unknown datatype {prop.datatype!r}")
            continue
        if prop.datatype == "enum" and not prop.enum_values:
            error(path, "enum property must declare enumValues")
        if prop.datatype != "enum" and prop.enum_values:
            error(path, "enumValues are only allowed on enum properties")
        if prop.unit is not None and prop.unit not in UNIT_TABLE:
            error(path, f"unit {prop.unit!r} is not in the scale table")
        if prop.declared_range is not None:
            lo, hi = prop.declared_range
            if prop.datatype not in ("integer", "real"):
                error(path, "declaredRange is only allowed on numeric properties")
            elif lo > hi:
                error(path, f"declaredRange lower {lo} exceeds upper {hi}")


def _validate_resources(world: WorldModel, error) -> None:
    from .expressions import validate_expression

    resource_ids: set[str] = set()
    capability_ids: set[str] = set()
    capability_iris: set[str] = set()
    skill_ids: set[str] = set()
    known_refs: set[str] = set()
    for resource in world.resources:
        for capability in resource.provided_capabilities:
            known_refs.add(capability.iri)
            known_refs.add(capability.id)

    for resource in world.resources:
        rpath = f"resources[{resource.id}]"
        if resource.id in resource_ids:
            error(rpath, f"duplicate resource id {resource.id!r}")
        resource_ids.add(resource.id)

        for capability in resource.provided_capabilities:
            cpath = f"{rpath}.capabilities[{capability.id}]"
            if capability.id in capability_ids:
                error(cpath, f"duplicate capability id {capability.id!r}")
            capability_ids.add(capability.id)
            if capability.iri in capability_iris:
                error(cpath, f"duplicate capability iri {capability.iri!r}")
            capability_iris.add(capability.iri)
            for message in validate_expression(capability.expression, world):
                error(f"{cpath}.expression", message)

        for skill in resource.skills:
            spath = f"{rpath}.skills[{skill.skill_id}]"
            if skill.skill_id in skill_ids:
                error(spath, f"duplicate skill id {skill.skill_id!r}")
            skill_ids.add(skill.skill_id)
            if not skill.capability_ref:
                error(f"{spath}.capabilityRef", "capabilityRef must be specified")
            elif skill.capability_ref not in known_refs:
                error(
                    f"{spath}.capabilityRef",
                    f"dangling reference: {skill.capability_ref!r} names no capability",
                )
            for message in descriptor_issues(skill):
                error(spath, message)


def descriptor_issues(skill: SkillDescriptor) -> list[str]:
    """Structural defects of a skill descriptor (shared with host registration)."""
    messages: list[str] = []
    if skill.state_machine_profile != STATE_MACHINE_PROFILE:
        messages.append(
            f"unsupported state machine profile {skill.state_machine_profile!r}"
        )
    seen: set[str] = set()
    for spec in skill.parameters:
        if spec.param_id in seen:
            messages.append(f"duplicate parameter id {spec.param_id!r}")
        seen.add(spec.param_id)
        if spec.param_id.lower() == LOCAL_RUNTIME_ID_FIELD.lower():
            messages.append("localRuntimeId is runtime metadata, not a parameter")
        if spec.direction not in ("input", "output"):
            messages.append(
                f"parameter {spec.param_id!r} has invalid direction {spec.direction!r}"
            )
        if spec.datatype not in DATATYPES:
            messages.append(
                f"parameter {spec.param_id!r} has unknown datatype {spec.datatype!r}"
            )
        elif spec.default is not None and not literal_matches(spec.datatype, spec.default):
            messages.append(
                f"parameter {spec.param_id!r} default {spec.default!r} "
                f"is not a {spec.datatype} literal"
            )
        if spec.unit is not None and spec.unit not in UNIT_TABLE:
            messages.append(
                f"parameter {spec.param_id!r} unit {spec.unit!r} is not in the scale table"
            )
    return messages


def _validate_products(world: WorldModel, error, warning) -> None:
    from .expressions import normalize, validate_expression

    product_ids: set[str] = set()
    for product in world.products:
        ppath = f"products[{product.id}]"
        if product.id in product_ids:
            error(ppath, f"duplicate product id {product.id!r}")
        product_ids.add(product.id)
        if not product.steps:
            warning(ppath, "product has no steps and cannot be orchestrated")
        step_ids: set[str] = set()
        for step in product.steps:
            spath = f"{ppath}.steps[{step.id}]"
            if step.id in step_ids:
                error(spath, f"duplicate step id {step.id!r}")
            step_ids.add(step.id)
            messages = validate_expression(step.required_capability, world)
            for message in messages:
                error(f"{spath}.requiredCapability", message)
            if messages:
                continue
            nf = normalize(step.required_capability, world)
            for property_id, value in step.parameter_values.items():
                vpath = f"{spath}.parameterValues[{property_id}]"
                prop = world.property_def(property_id)
                if prop is None:
                    error(vpath, f"property {property_id!r} is not defined")
                    continue
                if not literal_matches(prop.datatype, value):
                    error(
                        vpath,
                        f"{value!r} is not a {prop.datatype} literal",
                    )
                    continue
                fs = nf.feasible_or_domain(property_id, world)
                if not fs.contains(value):
                    error(
                        vpath,
                        f"value {value!r} violates the step's own constraints",
                    )


def _validate_catalog(world: WorldModel, error) -> None:
    from .expressions import validate_expression

    offer_ids: set[str] = set()
    for offer in world.service_catalog:
        opath = f"serviceCatalog[{offer.offer_id}]"
        if offer.offer_id in offer_ids:
            error(opath, f"duplicate offer id {offer.offer_id!r}")
        offer_ids.add(offer.offer_id)
        for cap_key, expression in offer.provided_capabilities.items():
            for message in validate_expression(expression, world):
                error(f"{opath}.providedCapabilities[{cap_key}]", message)
