import pytest
from conftest import GOLDEN, load

from iotforge import parse_model
from iotforge.codegen import ROWS, emit, map_model, mapping_coverage, message_name, thing_name


def files(model):
    return dict(emit(map_model(model)))


@pytest.mark.parametrize("name", ["smarthome", "pingpong", "nested"])
def test_golden_output(name):
    got = files(load(f"{name}.iot"))
    expected = {
        p.relative_to(GOLDEN / name).as_posix(): p.read_text()
        for p in (GOLDEN / name).rglob("*.thingml")
    }
    assert got == expected


def test_empty_model_emits_only_configuration():
    out = emit(map_model(load("empty.iot")))
    assert out == [("config/main.thingml", "configuration Empty {\n}\n")]


def test_component_becomes_thing(smarthome):
    doc = map_model(smarthome)
    assert [t.name for t in doc.things] == ["TempSensor", "Thermostat", "Gateway"]
    assert files(smarthome)["things/TempSensor.thingml"].startswith("thing TempSensor {\n")


def test_payload_becomes_message(smarthome):
    text = files(smarthome)["things/TempSensor.thingml"]
    assert "\tmessage tempReading(value : Double)\n" in text
    assert message_name("TempReading") == "tempReading"


def test_ports_and_connector(smarthome):
    out = files(smarthome)
    assert "\tprovided port tempOut {\n\t\tsends tempReading\n\t}\n" in out["things/TempSensor.thingml"]
    assert "\trequired port tempIn {\n\t\treceives tempReading\n\t}\n" in out["things/Thermostat.thingml"]
    assert "\tconnector thermostat.tempIn => tempSensor.tempOut\n" in out["config/main.thingml"]


def test_guard_and_incoming_event(smarthome):
    text = files(smarthome)["things/Thermostat.thingml"]
    assert "\t\t\tevent e : tempIn?tempReading\n\t\t\tguard e.value < 19.0\n" in text
    assert "guard (not (e.value > 23.0)) and heating\n" in text


def test_send_action(smarthome):
    assert "tempOut!tempReading(value)" in files(smarthome)["things/TempSensor.thingml"]


def test_nested_components_are_flattened():
    doc = map_model(load("nested.iot"))
    assert [t.name for t in doc.things] == ["Gateway", "Gateway_Radio", "Logger"]
    assert thing_name("Gateway.Radio") == "Gateway_Radio"
    assert "enumeration Gateway_Radio_channel {" in files(load("nested.iot"))["config/main.thingml"]


def test_output_is_deterministic(smarthome):
    assert emit(map_model(smarthome)) == emit(map_model(load("smarthome.iot")))


def test_things_precede_configuration(smarthome):
    paths = [p for p, _ in emit(map_model(smarthome))]
    assert paths[-1] == "config/main.thingml"
    assert all(p.startswith("things/") for p in paths[:-1])


# -- coverage -------------------------------------------------------------------------


def test_coverage_of_empty_model():
    cov = mapping_coverage(load("empty.iot"))
    assert cov.counts == {key: 0 for key, _ in ROWS}
    assert not cov.all_rows_covered


def test_no_state_machines_no_behavior_rows():
    cov = mapping_coverage(load("nested.iot"))
    assert cov["state_transition"] == cov["guard"] == cov["event_action"] == 0
    assert cov["component"] == 3


def test_smarthome_covers_every_row(smarthome):
    cov = mapping_coverage(smarthome)
    assert cov.all_rows_covered
    assert cov.format().splitlines()[0].startswith("Component -> Thing")


def _walk(comps):
    for c in comps:
        yield c
        yield from _walk(c.subcomponents)


@pytest.mark.parametrize("name", ["smarthome", "pingpong", "nested", "mutual_wait", "empty", "overload"])
def test_coverage_totality(name):
    model = load(f"{name}.iot")
    comps = list(_walk(model.software))
    sms = [c.state_machine for c in comps if c.state_machine]
    cov = mapping_coverage(model)
    assert cov["component"] == len(comps)
    assert cov["port"] == sum(len(c.ports) for c in comps)
    assert cov["operation"] == sum(len(c.operations) for c in comps)
    assert cov["property"] == sum(len(c.properties) for c in comps)
    assert cov["payload"] == sum(len(c.payloads) for c in comps)
    assert cov["state_transition"] == sum(len(s.states) + len(s.transitions) for s in sms)
    assert cov["guard"] == sum(1 for s in sms for t in s.transitions if t.guard is not None)
    assert cov["event_action"] == sum(len(s.events) + len(s.actions) for s in sms)


def test_trace_targets_name_emitted_things(smarthome):
    doc = map_model(smarthome)
    things = {t.name for t in doc.things}
    for source, target in doc.trace["component"]:
        assert thing_name(source) == target and target in things


def test_enum_literals_are_qualified():
    model = parse_model("""
model E {
  software {
    component Lamp {
      property level : enum { Dim, Bright } = Bright;
    }
  }
}
""")
    text = files(model)["things/Lamp.thingml"]
    assert "property level : Lamp_level = Lamp_level:Bright" in text
