"""Skill hosting: profile state machines, parameter sets and checks.

A host owns skill instances addressed by a host-unique ``localRuntimeId``.
Commands move an instance through the 17-state PACKML-17 profile; acting
states auto-advance on internal completion, driven by a simulated clock so
runs are instant and deterministic. Behaviors plug in the actual work:
``on_execute`` produces output values (or raises :class:`SkillFault`, which
takes the instance down the abort path), plus optional feasibility and
precondition callbacks mirroring the descriptor's check flags.

Concurrency: one lock serializes commands, writes and completions; reads
take the same lock and return consistent snapshots.
"""

from __future__ import annotations

import heapq
import itertools
import threading
from dataclasses import dataclass, field

from .errors import (
    DescriptorInvalidError,
    DuplicateSkillIdError,
    InvalidTransitionError,
    NotWritableError,
    PreconditionViolatedError,
    TypeMismatchError,
    UnknownParameterError,
    UnknownSkillError,
    UnsupportedCheckError,
    WrongStateError,
)
from .model import LOCAL_RUNTIME_ID_FIELD, SkillDescriptor, descriptor_issues
from .values import Literal, literal_matches

STATES = (
    "Stopped", "Starting", "Idle", "Suspended", "Execute", "Stopping",
    "Aborting", "Aborted", "Holding", "Held", "Unholding", "Suspending",
    "Unsuspending", "Resetting", "Completing", "Complete", "Clearing",
)

COMMANDS = (
    "Reset", "Start", "Stop", "Hold", "Unhold", "Suspend", "Unsuspend",
    "Abort", "Clear",
)

#: acting state -> state entered on internal completion ("SC")
ACTING_NEXT = {
    "Starting": "Execute",
    "Execute": "Completing",
    "Completing": "Complete",
    "Resetting": "Idle",
    "Holding": "Held",
    "Unholding": "Execute",
    "Suspending": "Suspended",
    "Unsuspending": "Execute",
    "Stopping": "Stopped",
    "Aborting": "Aborted",
    "Clearing": "Stopped",
}

_NO_STOP = frozenset({"Stopped", "Stopping", "Aborting", "Aborted", "Clearing"})
_NO_ABORT = frozenset({"Aborting", "Aborted"})

_COMMAND_TABLE = {
    ("Idle", "Start"): "Starting",
    ("Complete", "Reset"): "Resetting",
    ("Stopped", "Reset"): "Resetting",
    ("Execute", "Hold"): "Holding",
    ("Held", "Unhold"): "Unholding",
    ("Execute", "Suspend"): "Suspending",
    ("Suspended", "Unsuspend"): "Unsuspending",
    ("Aborted", "Clear"): "Clearing",
}


def transition(state: str, command: str) -> str | None:
    """Target state for (state, command), or None when the pair is invalid."""
    if command == "Stop":
        return "Stopping" if state not in _NO_STOP else None
    if command == "Abort":
        return "Aborting" if state not in _NO_ABORT else None
    return _COMMAND_TABLE.get((state, command))


class SimulatedClock:
    """Monotonic simulated time; the host advances it to due completions."""

    def __init__(self, start: float = 0.0):
        self._now = float(start)

    def now(self) -> float:
        return self._now

    def advance_to(self, t: float) -> None:
        if t > self._now:
            self._now = t


@dataclass(frozen=True)
class FeasibilityResult:
    feasible: bool
    reason: str | None = None
    estimates: dict[str, Literal] = field(default_factory=dict)


class SkillFault(Exception):
    """Raised by a behavior to signal execution failure (abort path)."""


class SkillBehavior:
    """Callbacks wiring a descriptor to simulated work."""

    def on_execute(self, inputs: dict[str, Literal]) -> dict[str, Literal]:
        return {}

    def feasibility(self, inputs: dict[str, Literal]) -> FeasibilityResult:
        return FeasibilityResult(feasible=True)

    def precondition(self, inputs: dict[str, Literal]) -> str | None:
        """None when satisfied, else the violation reason."""
        return None

    def duration(self, state: str, inputs: dict[str, Literal]) -> float | None:
        """Simulated seconds spent in an acting state; None = until advance()."""
        return 0.0


@dataclass(frozen=True)
class SkillEvent:
    local_runtime_id: str
    previous_state: str
    new_state: str
    seq: int
    time: float


@dataclass(frozen=True)
class SkillSnapshot:
    local_runtime_id: str
    descriptor: SkillDescriptor
    state: str
    input_values: dict[str, Literal]
    output_values: dict[str, Literal]
    last_error: str | None


class _Instance:
    def __init__(self, local_runtime_id: str, descriptor: SkillDescriptor,
                 behavior: SkillBehavior):
        self.local_runtime_id = local_runtime_id
        self.descriptor = descriptor
        self.behavior = behavior
        self.state = "Stopped"
        self.input_values: dict[str, Literal] = {
            spec.param_id: spec.default
            for spec in descriptor.input_parameters()
            if spec.default is not None
        }
        self.output_values: dict[str, Literal] = {}
        self.last_error: str | None = None
        self.event_seq = 0
        self.timer_token = 0
        self.exec_started = False
        self.exec_remaining: float | None = 0.0
        self.exec_deadline: float | None = None


class SkillHost:
    """Container for skill instances sharing a clock and an event stream."""

    def __init__(self, name: str = "skill-host", clock: SimulatedClock | None = None):
        self.name = name
        self.clock = clock if clock is not None else SimulatedClock()
        self._lock = threading.RLock()
        self._instances: dict[str, _Instance] = {}
        self._by_skill_id: dict[str, str] = {}
        self._listeners: list = []
        self._timers: list = []
        self._timer_counter = itertools.count()
        self._id_counter = itertools.count(1)

    # -- registration and discovery --------------------------------------

    def register_skill(self, descriptor: SkillDescriptor,
                       behavior: SkillBehavior) -> str:
        with self._lock:
            if not descriptor.capability_ref:
                raise DescriptorInvalidError("capabilityRef must be specified")
            problems = descriptor_issues(descriptor)
            if problems:
                raise DescriptorInvalidError("; ".join(problems))
            if descriptor.skill_id in self._by_skill_id:
                raise DuplicateSkillIdError(
                    f"skill id {descriptor.skill_id!r} is already registered"
                )
            local_runtime_id = f"lr-{next(self._id_counter):04d}"
            instance = _Instance(local_runtime_id, descriptor, behavior)
            self._instances[local_runtime_id] = instance
            self._by_skill_id[descriptor.skill_id] = local_runtime_id
            return local_runtime_id

    def local_runtime_ids(self) -> tuple[str, ...]:
        with self._lock:
            return tuple(self._instances)

    def lookup_skill_id(self, skill_id: str) -> str:
        with self._lock:
            local_runtime_id = self._by_skill_id.get(skill_id)
            if local_runtime_id is None:
                raise UnknownSkillError(f"no skill with id {skill_id!r}")
            return local_runtime_id

    def add_listener(self, listener) -> None:
        with self._lock:
            self._listeners.append(listener)

    def remove_listener(self, listener) -> None:
        with self._lock:
            if listener in self._listeners:
                self._listeners.remove(listener)

    # -- interaction ------------------------------------------------------

    def fire_command(self, local_runtime_id: str, command: str) -> str:
        with self._lock:
            instance = self._get(local_runtime_id)
            if command not in COMMANDS:
                raise InvalidTransitionError(instance.state, command)
            target = transition(instance.state, command)
            if target is None:
                raise InvalidTransitionError(instance.state, command)
            if command == "Start" and instance.descriptor.has_precondition_check:
                reason = instance.behavior.precondition(dict(instance.input_values))
                if reason is not None:
                    raise PreconditionViolatedError(reason)
            if instance.state == "Execute" and target in ("Holding", "Suspending"):
                self._capture_remaining(instance)
            instance.timer_token += 1  # cancel any pending completion
            self._enter(instance, target)
            self._pump()
            return target

    def advance(self, local_runtime_id: str) -> str:
        """Manually complete the current acting state (behaviors with
        duration None)."""
        with self._lock:
            instance = self._get(local_runtime_id)
            if instance.state not in ACTING_NEXT:
                raise WrongStateError(
                    f"state {instance.state} has no internal completion"
                )
            instance.timer_token += 1
            self._complete(instance)
            self._pump()
            return instance.state

    def write_parameters(self, local_runtime_id: str,
                         values: dict[str, Literal]) -> tuple[str, ...]:
        with self._lock:
            instance = self._get(local_runtime_id)
            if instance.state not in ("Idle", "Stopped"):
                raise WrongStateError(
                    f"parameters are writable in Idle or Stopped, not {instance.state}"
                )
            for param_id, value in values.items():
                if param_id.lower() == LOCAL_RUNTIME_ID_FIELD.lower():
                    raise NotWritableError(f"parameter {param_id!r} is not writable")
                spec = instance.descriptor.parameter(param_id)
                if spec is None:
                    raise UnknownParameterError(f"no parameter {param_id!r}")
                if spec.direction != "input":
                    raise NotWritableError(f"parameter {param_id!r} is not writable")
                if not literal_matches(spec.datatype, value):
                    raise TypeMismatchError(
                        f"{param_id}: {value!r} is not a {spec.datatype} literal"
                    )
            instance.input_values.update(values)
            return tuple(values)

    def read_skill(self, local_runtime_id: str) -> SkillSnapshot:
        with self._lock:
            instance = self._get(local_runtime_id)
            return SkillSnapshot(
                local_runtime_id=instance.local_runtime_id,
                descriptor=instance.descriptor,
                state=instance.state,
                input_values=dict(instance.input_values),
                output_values=dict(instance.output_values),
                last_error=instance.last_error,
            )

    def check_feasibility(self, local_runtime_id: str,
                          inputs: dict[str, Literal]) -> FeasibilityResult:
        with self._lock:
            instance = self._get(local_runtime_id)
            if not instance.descriptor.has_feasibility_check:
                raise UnsupportedCheckError(
                    f"skill {instance.descriptor.skill_id!r} has no feasibility check"
                )
            for param_id, value in inputs.items():
                spec = instance.descriptor.parameter(param_id)
                if spec is None or spec.direction != "input":
                    raise TypeMismatchError(
                        f"{param_id!r} is not an input parameter"
                    )
                if not literal_matches(spec.datatype, value):
                    raise TypeMismatchError(
                        f"{param_id}: {value!r} is not a {spec.datatype} literal"
                    )
            merged = {**instance.input_values, **inputs}
            result = instance.behavior.feasibility(merged)
            if not result.feasible and not result.reason:
                raise ValueError(
                    "behavior returned infeasible without a reason"
                )
            return result

    # -- internals ---------------------------------------------------------

    def _get(self, local_runtime_id: str) -> _Instance:
        instance = self._instances.get(local_runtime_id)
        if instance is None:
            raise UnknownSkillError(f"no skill instance {local_runtime_id!r}")
        return instance

    def _capture_remaining(self, instance: _Instance) -> None:
        if instance.exec_deadline is None:
            instance.exec_remaining = None
        else:
            instance.exec_remaining = max(
                instance.exec_deadline - self.clock.now(), 0.0
            )

    def _enter(self, instance: _Instance, state: str) -> None:
        previous = instance.state
        instance.state = state
        instance.event_seq += 1
        event = SkillEvent(
            local_runtime_id=instance.local_runtime_id,
            previous_state=previous,
            new_state=state,
            seq=instance.event_seq,
            time=self.clock.now(),
        )
        for listener in list(self._listeners):
            listener(event)

        if state == "Resetting":
            instance.output_values = {}
            instance.last_error = None
            instance.exec_started = False
            instance.exec_remaining = 0.0

        if state == "Execute":
            if previous == "Starting":
                instance.exec_started = True
                try:
                    outputs = instance.behavior.on_execute(dict(instance.input_values))
                except SkillFault as fault:
                    instance.last_error = str(fault) or "execution failed"
                    instance.timer_token += 1
                    self._enter(instance, "Aborting")
                    return
                self._store_outputs(instance, outputs or {})
                duration = instance.behavior.duration("Execute", dict(instance.input_values))
            else:
                duration = instance.exec_remaining
            self._schedule(instance, duration, track_deadline=True)
            return

        if state in ACTING_NEXT:
            duration = instance.behavior.duration(state, dict(instance.input_values))
            self._schedule(instance, duration, track_deadline=False)

    def _store_outputs(self, instance: _Instance, outputs: dict[str, Literal]) -> None:
        for param_id, value in outputs.items():
            spec = instance.descriptor.parameter(param_id)
            if spec is None or spec.direction != "output":
                raise TypeMismatchError(
                    f"behavior produced undeclared output {param_id!r}"
                )
            if not literal_matches(spec.datatype, value):
                raise TypeMismatchError(
                    f"output {param_id}: {value!r} is not a {spec.datatype} literal"
                )
            instance.output_values[param_id] = value

    def _schedule(self, instance: _Instance, duration: float | None,
                  track_deadline: bool) -> None:
        if track_deadline:
            instance.exec_deadline = (
                None if duration is None else self.clock.now() + duration
            )
        if duration is None:
            return
        due = self.clock.now() + duration
        heapq.heappush(
            self._timers,
            (due, next(self._timer_counter), instance.local_runtime_id,
             instance.timer_token),
        )

    def _complete(self, instance: _Instance) -> None:
        target = ACTING_NEXT.get(instance.state)
        if target is None:
            return
        self._enter(instance, target)

    def _pump(self) -> None:
        while self._timers:
            due, _, local_runtime_id, token = heapq.heappop(self._timers)
            instance = self._instances.get(local_runtime_id)
            if instance is None or token != instance.timer_token:
                continue
            self.clock.advance_to(due)
            instance.timer_token += 1
            self._complete(instance)
