from __future__ import annotations

import pytest

from csskit.errors import (
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
from csskit.model import ParameterSpec, SkillDescriptor
from csskit.skills import (
    COMMANDS,
    STATES,
    FeasibilityResult,
    SkillBehavior,
    SkillFault,
    SkillHost,
)

DRILL_LIMIT = 15


def drill_descriptor(skill_id="skill-drill", **kw) -> SkillDescriptor:
    return SkillDescriptor(
        skill_id=skill_id,
        capability_ref="urn:cap:drill",
        parameters=(
            ParameterSpec("depth", "input", "integer", unit="mm", default=5),
            ParameterSpec("achievedDepth", "output", "integer", unit="mm"),
        ),
        **kw,
    )


class DrillBehavior(SkillBehavior):
    def on_execute(self, inputs):
        return {"achievedDepth": inputs["depth"]}

    def feasibility(self, inputs):
        depth = inputs.get("depth", 0)
        if depth > DRILL_LIMIT:
            return FeasibilityResult(
                False, reason=f"depth {depth} exceeds limit {DRILL_LIMIT}"
            )
        return FeasibilityResult(True)


class ManualBehavior(SkillBehavior):
    """Parks in every acting state until host.advance() is called."""

    def duration(self, state, inputs):
        return None


class FaultyBehavior(SkillBehavior):
    def on_execute(self, inputs):
        raise SkillFault("bit snapped")


# --- registration -------------------------------------------------------------

def test_register_assigns_runtime_id_and_stopped_state():
    host = SkillHost()
    lrid = host.register_skill(drill_descriptor(), DrillBehavior())
    assert lrid == "lr-0001"
    assert host.read_skill(lrid).state == "Stopped"
    assert host.register_skill(drill_descriptor("skill-2"), DrillBehavior()) == "lr-0002"


def test_register_rejects_empty_capability_ref():
    host = SkillHost()
    descriptor = SkillDescriptor(skill_id="skill-x", capability_ref="")
    with pytest.raises(DescriptorInvalidError):
        host.register_skill(descriptor, SkillBehavior())


def test_register_rejects_duplicate_skill_id():
    host = SkillHost()
    host.register_skill(drill_descriptor(), DrillBehavior())
    with pytest.raises(DuplicateSkillIdError):
        host.register_skill(drill_descriptor(), DrillBehavior())


def test_register_rejects_local_runtime_id_parameter():
    descriptor = SkillDescriptor(
        skill_id="skill-x",
        capability_ref="urn:x",
        parameters=(ParameterSpec("localRuntimeId", "input", "enum"),),
    )
    with pytest.raises(DescriptorInvalidError):
        SkillHost().register_skill(descriptor, SkillBehavior())


def test_register_loads_defaults():
    host = SkillHost()
    lrid = host.register_skill(drill_descriptor(), DrillBehavior())
    assert host.read_skill(lrid).input_values == {"depth": 5}


# --- command firing -------------------------------------------------------------

def test_idle_start_goes_to_starting():
    host = SkillHost()
    lrid = host.register_skill(drill_descriptor(), ManualBehavior())
    host.fire_command(lrid, "Reset")
    host.advance(lrid)  # Resetting -> Idle
    assert host.fire_command(lrid, "Start") == "Starting"


def test_invalid_pair_raises_and_leaves_state():
    host = SkillHost()
    lrid = host.register_skill(drill_descriptor(), DrillBehavior())
    host.fire_command(lrid, "Reset")
    host.fire_command(lrid, "Start")  # runs through to Complete
    assert host.read_skill(lrid).state == "Complete"
    with pytest.raises(InvalidTransitionError):
        host.fire_command(lrid, "Start")
    assert host.read_skill(lrid).state == "Complete"


def test_unknown_skill():
    with pytest.raises(UnknownSkillError):
        SkillHost().fire_command("lr-9999", "Start")


def test_failing_precondition_blocks_start():
    class Blocked(DrillBehavior):
        def precondition(self, inputs):
            return "no workpiece clamped"

    host = SkillHost()
    lrid = host.register_skill(
        drill_descriptor(has_precondition_check=True), Blocked()
    )
    host.fire_command(lrid, "Reset")
    assert host.read_skill(lrid).state == "Idle"
    with pytest.raises(PreconditionViolatedError):
        host.fire_command(lrid, "Start")
    assert host.read_skill(lrid).state == "Idle"


# --- exhaustive transition closure -----------------------------------------------

_PARK = {
    "Stopped": [],
    "Resetting": ["Reset"],
    "Idle": ["Reset", "*"],
    "Starting": ["Reset", "*", "Start"],
    "Execute": ["Reset", "*", "Start", "*"],
    "Completing": ["Reset", "*", "Start", "*", "*"],
    "Complete": ["Reset", "*", "Start", "*", "*", "*"],
    "Holding": ["Reset", "*", "Start", "*", "Hold"],
    "Held": ["Reset", "*", "Start", "*", "Hold", "*"],
    "Unholding": ["Reset", "*", "Start", "*", "Hold", "*", "Unhold"],
    "Suspending": ["Reset", "*", "Start", "*", "Suspend"],
    "Suspended": ["Reset", "*", "Start", "*", "Suspend", "*"],
    "Unsuspending": ["Reset", "*", "Start", "*", "Suspend", "*", "Unsuspend"],
    "Stopping": ["Reset", "Stop"],
    "Aborting": ["Abort"],
    "Aborted": ["Abort", "*"],
    "Clearing": ["Abort", "*", "Clear"],
}

# the normative table, written out independently of the implementation
_EXPECTED: dict[tuple[str, str], str] = {
    ("Idle", "Start"): "Starting",
    ("Complete", "Reset"): "Resetting",
    ("Stopped", "Reset"): "Resetting",
    ("Execute", "Hold"): "Holding",
    ("Held", "Unhold"): "Unholding",
    ("Execute", "Suspend"): "Suspending",
    ("Suspended", "Unsuspend"): "Unsuspending",
    ("Aborted", "Clear"): "Clearing",
}
for _state in STATES:
    if _state not in ("Stopped", "Stopping", "Aborting", "Aborted", "Clearing"):
        _EXPECTED[(_state, "Stop")] = "Stopping"
    if _state not in ("Aborting", "Aborted"):
        _EXPECTED[(_state, "Abort")] = "Aborting"


def _park(state: str) -> tuple[SkillHost, str]:
    host = SkillHost()
    lrid = host.register_skill(drill_descriptor(), ManualBehavior())
    for action in _PARK[state]:
        if action == "*":
            host.advance(lrid)
        else:
            host.fire_command(lrid, action)
    assert host.read_skill(lrid).state == state
    return host, lrid


def test_every_state_command_pair_matches_the_table():
    assert len(STATES) == 17 and len(COMMANDS) == 9
    checked = 0
    for state in STATES:
        for command in COMMANDS:
            host, lrid = _park(state)
            expected = _EXPECTED.get((state, command))
            if expected is None:
                with pytest.raises(InvalidTransitionError):
                    host.fire_command(lrid, command)
                assert host.read_skill(lrid).state == state
            else:
                assert host.fire_command(lrid, command) == expected
            checked += 1
    assert checked == 17 * 9
    assert len(_EXPECTED) == 8 + 12 + 15


# --- parameters -------------------------------------------------------------------

def test_write_parameters_in_idle():
    host = SkillHost()
    lrid = host.register_skill(drill_descriptor(), DrillBehavior())
    host.fire_command(lrid, "Reset")
    assert host.write_parameters(lrid, {"depth": 12}) == ("depth",)
    assert host.read_skill(lrid).input_values["depth"] == 12


def test_write_parameters_in_stopped():
    host = SkillHost()
    lrid = host.register_skill(drill_descriptor(), DrillBehavior())
    assert host.read_skill(lrid).state == "Stopped"
    assert host.write_parameters(lrid, {"depth": 7}) == ("depth",)


def test_write_parameters_wrong_state():
    host = SkillHost()
    lrid = host.register_skill(drill_descriptor(), ManualBehavior())
    host.fire_command(lrid, "Reset")
    host.advance(lrid)
    host.fire_command(lrid, "Start")
    host.advance(lrid)  # Starting -> Execute
    with pytest.raises(WrongStateError):
        host.write_parameters(lrid, {"depth": 9})


def test_write_parameters_rejections():
    host = SkillHost()
    lrid = host.register_skill(drill_descriptor(), DrillBehavior())
    with pytest.raises(NotWritableError):
        host.write_parameters(lrid, {"localRuntimeId": "lr-0009"})
    with pytest.raises(NotWritableError):
        host.write_parameters(lrid, {"achievedDepth": 3})
    with pytest.raises(UnknownParameterError):
        host.write_parameters(lrid, {"speed": 3})
    with pytest.raises(TypeMismatchError):
        host.write_parameters(lrid, {"depth": "deep"})


# --- read --------------------------------------------------------------------------

def test_read_after_complete_contains_outputs():
    host = SkillHost()
    lrid = host.register_skill(drill_descriptor(), DrillBehavior())
    host.fire_command(lrid, "Reset")
    host.write_parameters(lrid, {"depth": 12})
    host.fire_command(lrid, "Start")
    snapshot = host.read_skill(lrid)
    assert snapshot.state == "Complete"
    assert snapshot.output_values == {"achievedDepth": 12}


def test_read_fresh_registration():
    host = SkillHost()
    lrid = host.register_skill(drill_descriptor(), DrillBehavior())
    snapshot = host.read_skill(lrid)
    assert snapshot.state == "Stopped"
    assert snapshot.output_values == {}
    assert snapshot.last_error is None


def test_read_unknown():
    with pytest.raises(UnknownSkillError):
        SkillHost().read_skill("lr-0404")


# --- feasibility ---------------------------------------------------------------------

def test_feasibility_inside_limit():
    host = SkillHost()
    lrid = host.register_skill(
        drill_descriptor(has_feasibility_check=True), DrillBehavior()
    )
    assert host.check_feasibility(lrid, {"depth": 12}).feasible


def test_feasibility_outside_limit_names_reason():
    host = SkillHost()
    lrid = host.register_skill(
        drill_descriptor(has_feasibility_check=True), DrillBehavior()
    )
    result = host.check_feasibility(lrid, {"depth": 40})
    assert not result.feasible
    assert "limit" in result.reason


def test_feasibility_unsupported():
    host = SkillHost()
    lrid = host.register_skill(drill_descriptor(), DrillBehavior())
    with pytest.raises(UnsupportedCheckError):
        host.check_feasibility(lrid, {"depth": 12})


def test_feasibility_is_side_effect_free():
    host = SkillHost()
    lrid = host.register_skill(
        drill_descriptor(has_feasibility_check=True), DrillBehavior()
    )
    host.fire_command(lrid, "Reset")
    before = host.read_skill(lrid)
    host.check_feasibility(lrid, {"depth": 40})
    after = host.read_skill(lrid)
    assert before == after


# --- runs, events, faults ---------------------------------------------------------------

def test_successful_run_state_sequence():
    host = SkillHost()
    seen = []
    host.add_listener(lambda e: seen.append(e.new_state))
    lrid = host.register_skill(drill_descriptor(), DrillBehavior())
    host.fire_command(lrid, "Reset")
    host.fire_command(lrid, "Start")
    assert seen == ["Resetting", "Idle", "Starting", "Execute", "Completing", "Complete"]


def test_event_seq_is_per_instance_monotone():
    host = SkillHost()
    events = []
    host.add_listener(lambda e: events.append(e))
    a = host.register_skill(drill_descriptor("skill-a"), DrillBehavior())
    b = host.register_skill(drill_descriptor("skill-b"), DrillBehavior())
    for lrid in (a, b):
        host.fire_command(lrid, "Reset")
        host.fire_command(lrid, "Start")
    for lrid in (a, b):
        seqs = [e.seq for e in events if e.local_runtime_id == lrid]
        assert seqs == list(range(1, len(seqs) + 1))
        assert len(seqs) == 6  # one event per state change


def test_abort_reaches_aborted_within_one_completion():
    for state in ("Idle", "Execute", "Held", "Complete", "Stopping"):
        host = SkillHost()
        lrid = host.register_skill(drill_descriptor(), ManualBehavior())
        for action in _PARK[state]:
            host.advance(lrid) if action == "*" else host.fire_command(lrid, action)
        assert host.fire_command(lrid, "Abort") == "Aborting"
        host.advance(lrid)
        assert host.read_skill(lrid).state == "Aborted"


def test_behavior_fault_takes_abort_path():
    host = SkillHost()
    seen = []
    host.add_listener(lambda e: seen.append(e.new_state))
    lrid = host.register_skill(drill_descriptor(), FaultyBehavior())
    host.fire_command(lrid, "Reset")
    host.fire_command(lrid, "Start")
    snapshot = host.read_skill(lrid)
    assert snapshot.state == "Aborted"
    assert "bit snapped" in snapshot.last_error
    assert seen[-3:] == ["Execute", "Aborting", "Aborted"]


def test_hold_and_resume_completes():
    host = SkillHost()
    lrid = host.register_skill(drill_descriptor(), ManualBehavior())
    for action in _PARK["Execute"]:
        host.advance(lrid) if action == "*" else host.fire_command(lrid, action)
    host.fire_command(lrid, "Hold")
    host.advance(lrid)  # Holding -> Held
    host.fire_command(lrid, "Unhold")
    host.advance(lrid)  # Unholding -> Execute
    assert host.read_skill(lrid).state == "Execute"
    host.advance(lrid)  # Execute -> Completing
    host.advance(lrid)
    assert host.read_skill(lrid).state == "Complete"


def test_simulated_durations_advance_clock():
    class Timed(DrillBehavior):
        def duration(self, state, inputs):
            return 2.5 if state == "Execute" else 0.0

    host = SkillHost()
    lrid = host.register_skill(drill_descriptor(), Timed())
    host.fire_command(lrid, "Reset")
    host.fire_command(lrid, "Start")
    assert host.read_skill(lrid).state == "Complete"
    assert host.clock.now() == 2.5
