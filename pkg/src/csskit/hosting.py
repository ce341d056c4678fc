"""Build skill hosts for document-defined resources.

Skills loaded from world files carry no executable behavior, so hosts built
here wire each skill to a simulated behavior derived from its capability:
the feasibility check accepts exactly the inputs inside the capability's
feasible sets, and execution echoes inputs onto like-named output
parameters (an output ``achievedDepth`` mirrors the input ``depth``).
"""

from __future__ import annotations

from fractions import Fraction

from .errors import NotFoundError, UnitMismatchError, UnknownUnitError
from .expressions import NormalForm, normalize
from .model import Capability, Resource, SkillDescriptor, WorldModel
from .skills import FeasibilityResult, SimulatedClock, SkillBehavior, SkillHost
from .values import convert_between_units, format_literal, fraction_to_number, to_fraction


class CapabilityEnvelopeBehavior(SkillBehavior):
    """Simulated behavior bounded by the capability's provided envelope."""

    def __init__(self, world: WorldModel, capability: Capability,
                 descriptor: SkillDescriptor, execute_duration: float = 1.0):
        self._world = world
        self._descriptor = descriptor
        self._nf: NormalForm = normalize(capability.expression, world)
        self._execute_duration = execute_duration
        # parameter -> property, from explicit mappings plus name equality
        self._param_to_property: dict[str, str] = {}
        for property_id, param_id in capability.property_to_parameter.items():
            self._param_to_property[param_id] = property_id
        for spec in descriptor.input_parameters():
            if spec.param_id not in self._param_to_property:
                if world.property_def(spec.param_id) is not None:
                    self._param_to_property[spec.param_id] = spec.param_id

    def _property_value(self, param_id: str, value) -> tuple[str, Fraction] | None:
        property_id = self._param_to_property.get(param_id)
        if property_id is None:
            return None
        prop = self._world.property_def(property_id)
        if prop is None or prop.datatype not in ("integer", "real"):
            return None
        spec = self._descriptor.parameter(param_id)
        try:
            scaled = convert_between_units(
                to_fraction(value), spec.unit if spec else None, prop.unit
            )
        except (UnitMismatchError, UnknownUnitError):
            return None
        return property_id, scaled

    def feasibility(self, inputs) -> FeasibilityResult:
        for param_id, value in inputs.items():
            mapped = self._property_value(param_id, value)
            if mapped is None:
                continue
            property_id, scaled = mapped
            fs = self._nf.feasible_or_domain(property_id, self._world)
            if not fs.contains(scaled):
                return FeasibilityResult(
                    feasible=False,
                    reason=(
                        f"{param_id}={format_literal(value)} is outside the "
                        f"provided limit for {property_id}"
                    ),
                )
        return FeasibilityResult(
            feasible=True, estimates={"durationSeconds": self._execute_duration}
        )

    def on_execute(self, inputs):
        outputs = {}
        by_id = {spec.param_id: spec for spec in self._descriptor.input_parameters()}
        for spec in self._descriptor.output_parameters():
            source = None
            if spec.param_id in by_id:
                source = spec.param_id
            elif spec.param_id.startswith("achieved"):
                stem = spec.param_id[len("achieved"):]
                candidates = (stem[:1].lower() + stem[1:], stem)
                source = next((c for c in candidates if c in by_id), None)
            if source is None or source not in inputs:
                if spec.default is not None:
                    outputs[spec.param_id] = spec.default
                continue
            value = inputs[source]
            try:
                scaled = convert_between_units(
                    to_fraction(value), by_id[source].unit, spec.unit
                )
            except (UnitMismatchError, UnknownUnitError):
                continue
            if spec.datatype == "integer":
                if scaled.denominator == 1:
                    outputs[spec.param_id] = int(scaled)
            elif spec.datatype == "real":
                outputs[spec.param_id] = fraction_to_number(scaled)
        return outputs

    def duration(self, state: str, inputs) -> float:
        return self._execute_duration if state == "Execute" else 0.0


def build_resource_host(
    world: WorldModel,
    resource_id: str,
    clock: SimulatedClock | None = None,
    behavior_factory=None,
) -> SkillHost:
    """A host exposing every skill of one resource.

    ``behavior_factory(world, capability, descriptor)`` may override the
    default envelope behavior (e.g. to inject failures in tests).
    """
    resource = world.resource(resource_id)
    if resource is None:
        raise NotFoundError(f"no resource {resource_id!r} in the world")
    host = SkillHost(name=resource_id, clock=clock)
    factory = behavior_factory or CapabilityEnvelopeBehavior
    for descriptor in resource.skills:
        capability = _capability_for(world, resource, descriptor)
        behavior = factory(world, capability, descriptor)
        host.register_skill(descriptor, behavior)
    return host


def _capability_for(world: WorldModel, resource: Resource,
                    descriptor: SkillDescriptor) -> Capability:
    for capability in resource.provided_capabilities:
        if descriptor.capability_ref in (capability.iri, capability.id):
            return capability
    for _, capability in world.capabilities():
        if descriptor.capability_ref in (capability.iri, capability.id):
            return capability
    raise NotFoundError(
        f"skill {descriptor.skill_id!r} references unknown capability "
        f"{descriptor.capability_ref!r}"
    )
