import copy
import random

import pytest
from conftest import FIXTURES, MODEL_FIXTURES, RULE_FIXTURES, load

from iotforge.diagnostics import CATALOG, ERROR, WARNING
from iotforge.formatter import format_model
from iotforge.model import IoTEvent, IoTState, StateMachine, SoftwareComponent, IoTModel, Transition
from iotforge.parser import parse_file, parse_model
from iotforge.validator import (
    RULES,
    UnknownRuleError,
    explain_rule,
    synthesize_state_events,
    validate,
)

CODES = [f"V{n:03d}" for n in range(1, 13)]


def diag_codes(model, **kw):
    return [d.code for d in validate(model, **kw)]


@pytest.mark.parametrize("code", CODES)
def test_rule_has_failing_fixture(code):
    m = parse_file(FIXTURES / "rules" / f"{code}_fail.iot")
    got = diag_codes(m)
    assert code in got
    # each failing fixture is a single-rule mutation
    assert set(got) == {code}


@pytest.mark.parametrize("code", CODES)
def test_rule_has_passing_fixture(code):
    m = parse_file(FIXTURES / "rules" / f"{code}_pass.iot")
    assert validate(m) == []


def test_catalog_is_closed():
    assert sorted(RULES) == sorted(CODES + ["R001"])
    assert all(code in CATALOG for code in CODES)
    assert CATALOG["V008"][1] == WARNING and CATALOG["V011"][1] == WARNING
    assert all(CATALOG[c][1] == ERROR for c in CODES if c not in ("V008", "V011"))


def test_smarthome_is_clean(smarthome):
    assert validate(smarthome) == []
    assert validate(smarthome, analysis=True) == []


def test_missing_onexit_names_state():
    m = parse_model(
        "model M { software { component A { statemachine S init Idle { "
        "state Idle { onentry e; } event e kind general; } } } }"
    )
    diags = validate(m)
    assert sorted(d.code for d in diags) == ["V004", "V008"]
    v004 = next(d for d in diags if d.code == "V004")
    assert "Idle" in v004.message and "OnExit" in v004.message and v004.severity == ERROR


def test_wcet_above_deadline():
    m = parse_model(
        "model M { software { component A { operation f() timing "
        "{ kind: periodic wcet: 10ms period: 20ms deadline: 5ms }; } } "
        "hardware { processor P; } deployment { deploy A on P; } }"
    )
    assert diag_codes(m) == ["V007"]


def test_v008_is_an_error_when_analysis_is_requested():
    m = load("rules/V008_fail.iot")
    assert [(d.code, d.severity) for d in validate(m)] == [("V008", WARNING)]
    assert [(d.code, d.severity) for d in validate(m, analysis=True)] == [("V008", ERROR)]


def _machine(flags):
    """One state per (has_entry, has_exit) flag pair; all events declared."""
    states = []
    for i, (entry, exit_) in enumerate(flags):
        states.append(IoTState(f"S{i}", "e" if entry else None, "e" if exit_ else None))
    sm = StateMachine("SM", "S0", states, [], [IoTEvent("e", "general")])
    return IoTModel("M", software=[SoftwareComponent("A", state_machine=sm)])


def _v004_states(model):
    return sorted({d.message.split("'")[1] for d in validate(model) if d.code == "V004"})


def test_v004_fires_exactly_on_incomplete_states():
    m = _machine([(True, True), (True, False), (False, True), (False, False)])
    assert _v004_states(m) == ["S1", "S2", "S3"]
    messages = [d.message for d in validate(m) if d.code == "V004"]
    assert len(messages) == 3
    assert "OnEntry or OnExit" in messages[-1]  # S3 lacks both events


@pytest.mark.parametrize("seed", range(30))
def test_v004_exactness_random(seed):
    rng = random.Random(seed)
    flags = [(rng.random() < 0.6, rng.random() < 0.6) for _ in range(rng.randint(1, 6))]
    expected = sorted(f"S{i}" for i, (a, b) in enumerate(flags) if not (a and b))
    assert _v004_states(_machine(flags)) == expected


def test_v004_unresolved_event():
    m = parse_model(
        "model M { software { component A { statemachine S init X { "
        "state X { onentry e; onexit ghost; } event e kind general; } } } "
        "hardware { processor P; } deployment { deploy A on P; } }"
    )
    diags = validate(m)
    assert [d.code for d in diags] == ["V004"] and "ghost" in diags[0].message


def test_explain_rule():
    text = explain_rule("V004")
    assert "OnEntry" in text and "OnExit" in text
    assert "wcet <= deadline <= period" in explain_rule("V007")
    assert explain_rule("R001").startswith("R001 (error): unresolved reference.")
    with pytest.raises(UnknownRuleError):
        explain_rule("V999")
    with pytest.raises(KeyError):
        explain_rule("P001")


@pytest.mark.parametrize("path", MODEL_FIXTURES + RULE_FIXTURES, ids=lambda p: p.name)
def test_determinism_and_order(path):
    m = parse_file(path)
    a, b = validate(m, str(path)), validate(parse_file(path), str(path))
    assert a == b
    keys = [d.sort_key() for d in a]
    assert keys == sorted(keys)


# -- monotonicity ----------------------------------------------------------------

def _named_lists(model):
    """Yield (owner list, element name) for every removable named element."""
    for b in model.system.blocks:
        yield b.flow_ports, None
        yield b.contracts, None
    yield model.system.connections, None
    stack = list(model.software)
    while stack:
        c = stack.pop()
        stack.extend(c.subcomponents)
        for lst in (c.payloads, c.properties, c.ports, c.operations, c.subcomponents):
            yield lst, None
        sm = c.state_machine
        if sm is not None:
            for lst in (sm.states, sm.events, sm.actions, sm.transitions):
                yield lst, None
    yield model.hardware, None
    yield model.deployment, None
    if model.operational:
        op = model.operational
        for lst in (op.protocols, op.servers, op.storage, op.modes):
            yield lst, None


def _mutants(model):
    lists = list(_named_lists(model))
    for li, (lst, _) in enumerate(lists):
        for k in range(len(lst)):
            mutant = copy.deepcopy(model)
            target = list(_named_lists(mutant))[li][0]
            removed = target.pop(k)
            yield removed, mutant


def _related_words(removed):
    words = set()
    for attr in ("name", "component", "processor", "source", "target", "trigger",
                 "source_block", "target_block", "source_port", "target_port"):
        v = getattr(removed, attr, None)
        if isinstance(v, str):
            words.add(v)
    return words


@pytest.mark.parametrize("name", ["smarthome.iot", "mutual_wait.iot", "nested.iot", "rules/V002_pass.iot"])
def test_removal_only_affects_related_elements(name):
    model = load(name)
    before = {(d.code, d.message) for d in validate(model)}
    checked = 0
    for removed, mutant in _mutants(model):
        words = _related_words(removed)
        for d in validate(mutant):
            if (d.code, d.message) in before:
                continue
            assert any(w in d.message for w in words), (removed, d.format())
        checked += 1
    assert checked >= 5


def test_synthesize_state_events():
    m = load("rules/V004_fail.iot")
    fixed, added = synthesize_state_events(m)
    assert added == ["Display.DisplaySM.leaveBlank2"]
    assert validate(fixed) == []
    assert "V004" in [d.code for d in validate(m)]  # input untouched
    assert parse_model(format_model(fixed)) == fixed
