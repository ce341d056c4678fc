"""Plan product steps onto resources and execute them over protocol clients.

Planning consults the capability matcher per step and keeps the full ranked
candidate list, so execution can fail over to the next-ranked provider when
a feasibility check rejects, a precondition fails, or a run aborts. The
trace records every state change, parameter write, feasibility verdict and
output read with a logical timestamp, which makes repeated runs over
identical worlds byte-for-byte reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import TYPE_CHECKING

from . import jsonio
from .errors import (
    ConnectionLostError,
    ModelInvalidError,
    NoMatchForStepError,
    RemoteError,
    StepFailedNoAlternativeError,
    TypeMismatchError,
    UnboundRequiredParameterError,
    UnknownParameterError,
)
from .expressions import normalize
from .matching import MatchDegree, rank_providers
from .model import validate_model
from .values import (
    Literal,
    convert_between_units,
    fraction_to_number,
    literal_matches,
    to_fraction,
)

if TYPE_CHECKING:
    from .model import Capability, ProcessStep, Product, SkillDescriptor, WorldModel
    from .protocol import SkillClient


@dataclass(frozen=True)
class PlanEntry:
    step_id: str
    resource_id: str
    capability_id: str
    skill_id: str
    match_degree: MatchDegree
    parameter_assignment: dict[str, Literal]
    alternates: tuple[PlanEntry, ...] = ()


@dataclass(frozen=True)
class ProductionPlan:
    product_id: str
    entries: tuple[PlanEntry, ...]


@dataclass(frozen=True)
class TraceRecord:
    timestamp: int
    step_id: str
    local_runtime_id: str
    kind: str  # stateChange | paramWrite | feasibility | outputRead | error
    detail: dict


@dataclass(frozen=True)
class ExecutionTrace:
    records: tuple[TraceRecord, ...] = ()

    @property
    def failed(self) -> bool:
        return bool(self.records) and self.records[-1].kind == "error"

    def state_changes(self, step_id: str) -> tuple[str, ...]:
        return tuple(
            record.detail["newState"]
            for record in self.records
            if record.kind == "stateChange" and record.step_id == step_id
        )


@dataclass(frozen=True)
class ExecuteOptions:
    use_feasibility: bool = True
    event_timeout: float = 5.0


def bind_parameters(
    step: ProcessStep,
    capability: Capability,
    descriptor: SkillDescriptor,
    world: WorldModel,
) -> dict[str, Literal]:
    """Map step property values onto skill input parameters.

    Explicit property-to-parameter mappings win; unmapped properties bind to
    the equally named parameter when one exists. Values are rescaled from the
    property's declared unit onto the parameter's unit. Inputs left unbound
    fall back to descriptor defaults.
    """
    assignment: dict[str, Literal] = {}
    for property_id, value in step.parameter_values.items():
        explicit = property_id in capability.property_to_parameter
        target = capability.property_to_parameter.get(property_id, property_id)
        spec = descriptor.parameter(target)
        if spec is None or spec.direction != "input":
            if explicit:
                raise UnknownParameterError(
                    f"mapping targets {target!r}, which is not an input parameter "
                    f"of skill {descriptor.skill_id!r}"
                )
            continue  # property not taken by this skill
        prop = world.property_def(property_id)
        if prop is not None and prop.datatype in ("integer", "real"):
            scaled = convert_between_units(to_fraction(value), prop.unit, spec.unit)
            if spec.datatype == "integer":
                if scaled.denominator != 1:
                    raise TypeMismatchError(
                        f"{target}: {value!r} does not scale to an integer value"
                    )
                assignment[target] = int(scaled)
            elif spec.datatype == "real":
                assignment[target] = fraction_to_number(scaled)
            else:
                raise TypeMismatchError(
                    f"{target}: numeric property {property_id!r} cannot bind to "
                    f"{spec.datatype} parameter"
                )
        else:
            if not literal_matches(spec.datatype, value):
                raise TypeMismatchError(
                    f"{target}: {value!r} is not a {spec.datatype} literal"
                )
            assignment[target] = value
    for spec in descriptor.input_parameters():
        if spec.param_id not in assignment:
            if spec.default is not None:
                assignment[spec.param_id] = spec.default
            else:
                raise UnboundRequiredParameterError(spec.param_id)
    return assignment


def plan(product: Product, world: WorldModel) -> ProductionPlan:
    """Choose a provider, capability and skill for every product step."""
    report = validate_model(world)
    if not report.ok:
        details = "; ".join(f"{i.path}: {i.message}" for i in report.errors())
        raise ModelInvalidError(f"world fails validation: {details}")

    candidates = [(resource.id, capability) for resource, capability in world.capabilities()]
    entries: list[PlanEntry] = []
    for step in product.steps:
        ranked = rank_providers(step.required_capability, candidates, world)
        qualifying: list[PlanEntry] = []
        for resource_id, capability_id, result in ranked:
            resource = world.resource(resource_id)
            capability = next(
                c for c in resource.provided_capabilities if c.id == capability_id
            )
            provided_nf = normalize(capability.expression, world)
            inside = all(
                provided_nf.feasible_or_domain(property_id, world).contains(value)
                for property_id, value in step.parameter_values.items()
            )
            if not inside:
                continue
            skills = world.skills_for_capability(resource, capability)
            if not skills:
                continue
            descriptor = skills[0]
            qualifying.append(
                PlanEntry(
                    step_id=step.id,
                    resource_id=resource_id,
                    capability_id=capability_id,
                    skill_id=descriptor.skill_id,
                    match_degree=result.degree,
                    parameter_assignment=bind_parameters(
                        step, capability, descriptor, world
                    ),
                )
            )
        if not qualifying:
            raise NoMatchForStepError(step.id)
        primary = replace(qualifying[0], alternates=tuple(qualifying[1:]))
        entries.append(primary)
    return ProductionPlan(product_id=product.id, entries=tuple(entries))


class _TraceBuilder:
    def __init__(self):
        self.records: list[TraceRecord] = []
        self._tick = 0

    def add(self, step_id: str, local_runtime_id: str, kind: str, detail: dict) -> None:
        self.records.append(
            TraceRecord(self._tick, step_id, local_runtime_id, kind, detail)
        )
        self._tick += 1

    def build(self) -> ExecutionTrace:
        return ExecutionTrace(records=tuple(self.records))


def execute_plan(
    plan_: ProductionPlan,
    connections,
    options: ExecuteOptions | None = None,
) -> ExecutionTrace:
    """Run every plan entry in order through the given protocol clients.

    ``connections`` maps resource ids to connected, hello'd SkillClients.
    On step failure the next-ranked candidate from planning is tried; with
    none left a terminal error record is appended and
    StepFailedNoAlternative (carrying the partial trace) is raised.
    """
    options = options or ExecuteOptions()
    trace = _TraceBuilder()

    for entry in plan_.entries:
        chain = (entry, *entry.alternates)
        succeeded = False
        for candidate in chain:
            if candidate.resource_id not in connections:
                raise ConnectionLostError(
                    f"no connection for resource {candidate.resource_id!r}"
                )
            client = connections[candidate.resource_id]
            if _attempt_step(candidate, client, options, trace):
                succeeded = True
                break
        if not succeeded:
            trace.add(
                entry.step_id,
                "",
                "error",
                {"code": "StepFailedNoAlternative", "stepId": entry.step_id},
            )
            raise StepFailedNoAlternativeError(entry.step_id, trace.build())
    return trace.build()


def _attempt_step(
    entry: PlanEntry,
    client: SkillClient,
    options: ExecuteOptions,
    trace: _TraceBuilder,
) -> bool:
    """One candidate attempt; True on success, False to fail over."""
    listed = client.list_skills()
    local_runtime_id = next(
        (
            item["localRuntimeId"]
            for item in listed
            if item["skillId"] == entry.skill_id
        ),
        None,
    )
    if local_runtime_id is None:
        trace.add(
            entry.step_id,
            "",
            "error",
            {"code": "UnknownSkill", "skillId": entry.skill_id},
        )
        return False

    description = client.describe(local_runtime_id)
    client.subscribe(local_runtime_id)
    try:
        if options.use_feasibility and description["hasFeasibilityCheck"]:
            verdict = client.feasibility(local_runtime_id, entry.parameter_assignment)
            trace.add(
                entry.step_id,
                local_runtime_id,
                "feasibility",
                {"feasible": verdict["feasible"], "reason": verdict.get("reason")},
            )
            if not verdict["feasible"]:
                return False

        state = client.read(local_runtime_id)["state"]
        if state == "Stopped":
            client.command(local_runtime_id, "Reset")
            if not _await_state(client, entry, local_runtime_id, "Idle", options, trace):
                return False
        elif state != "Idle":
            trace.add(
                entry.step_id,
                local_runtime_id,
                "error",
                {"code": "WrongState", "state": state},
            )
            return False

        client.write(local_runtime_id, entry.parameter_assignment)
        trace.add(
            entry.step_id,
            local_runtime_id,
            "paramWrite",
            {"values": dict(entry.parameter_assignment)},
        )

        try:
            client.command(local_runtime_id, "Start")
        except RemoteError as exc:
            if exc.remote_code == "PreconditionViolated":
                trace.add(
                    entry.step_id,
                    local_runtime_id,
                    "error",
                    {"code": exc.remote_code, "message": exc.message},
                )
                return False
            raise

        terminal = _await_state(
            client, entry, local_runtime_id, "Complete", options, trace,
            failure_state="Aborted",
        )
        if not terminal:
            return False

        outputs = client.read(local_runtime_id)["outputValues"]
        trace.add(
            entry.step_id, local_runtime_id, "outputRead", {"outputs": outputs}
        )
        client.command(local_runtime_id, "Reset")
        return _await_state(client, entry, local_runtime_id, "Idle", options, trace)
    finally:
        client.subscribe(local_runtime_id, enable=False)


def _await_state(
    client: SkillClient,
    entry: PlanEntry,
    local_runtime_id: str,
    target: str,
    options: ExecuteOptions,
    trace: _TraceBuilder,
    failure_state: str | None = None,
) -> bool:
    """Record state-change events until target (True) or failure_state (False)."""
    while True:
        event = client.next_event(timeout=options.event_timeout)
        if event.payload.get("localRuntimeId") != local_runtime_id:
            continue
        new_state = event.payload["newState"]
        trace.add(
            entry.step_id,
            local_runtime_id,
            "stateChange",
            {"newState": new_state},
        )
        if new_state == target:
            return True
        if failure_state is not None and new_state == failure_state:
            return False


def trace_to_lines(trace: ExecutionTrace) -> list[str]:
    """One wire-format object per record, in order."""
    return [
        jsonio.dumps(
            {
                "timestamp": record.timestamp,
                "stepId": record.step_id,
                "localRuntimeId": record.local_runtime_id,
                "kind": record.kind,
                "detail": record.detail,
            }
        )
        for record in trace.records
    ]
