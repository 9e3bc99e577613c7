import random

import pytest
from conftest import MODEL_FIXTURES, RULE_FIXTURES, load

from iotforge.diagnostics import ResolutionError
from iotforge.model import (
    ComponentPort,
    Connector,
    DeploymentBinding,
    FlowPort,
    IoTModel,
    Operation,
    Processor,
    SoftwareComponent,
    SystemBlock,
    SystemView,
    TimingAnnotation,
    iter_components,
)
from iotforge.parser import parse_file, parse_model
from iotforge.symbols import (
    AmbiguousConnectionError,
    UnknownElementError,
    build_symbol_table,
    collect_symbols,
    connected_peer,
    deployed_task_set,
)
from iotforge.validator import validate

VALID = [p for p in MODEL_FIXTURES] + [p for p in RULE_FIXTURES if p.stem.endswith("_pass")]


def test_empty_model_has_empty_table():
    table, diags = collect_symbols(IoTModel("M"))
    assert diags == []
    assert table.components == {} and table.processors == {} and table.blocks == {}


def test_duplicate_component_names():
    m = parse_model("model M { software { component Sensor { } component Sensor { } } }")
    with pytest.raises(ResolutionError) as info:
        build_symbol_table(m)
    assert [d.code for d in info.value.diagnostics] == ["V001"]
    assert "Sensor" in info.value.diagnostics[0].message


def test_unresolved_trigger_names_the_event():
    m = parse_model(
        "model M { software { component A { statemachine S init X { "
        "state X { onentry e; onexit e; } event e kind general; on evGo from X to X; } } } }"
    )
    _, diags = collect_symbols(m)
    assert len(diags) == 1
    assert "evGo" in diags[0].message
    assert diags[0].span.start_line == 1


def test_task_set_empty_processor():
    m = parse_model("model M { hardware { processor P; } }")
    assert deployed_task_set(m, "P") == []


def test_task_set_only_annotated_operations():
    m = parse_model(
        "model M { software { component A { operation helper(); "
        "operation sample() timing { kind: periodic wcet: 1ms period: 4ms deadline: 4ms }; } } "
        "hardware { processor P; } deployment { deploy A on P; } }"
    )
    tasks = deployed_task_set(m, "P")
    assert [t.id for t in tasks] == [("A", "sample")]
    assert tasks[0].priority is None and tasks[0].processor == "P"


def test_subcomponent_inherits_deployment():
    m = load("nested.iot")
    # frozen from a manual walk of the fixture tree
    assert [t.id for t in deployed_task_set(m, "MCU1")] == [("Gateway", "sync"), ("Gateway.Radio", "transmit")]
    assert [t.id for t in deployed_task_set(m, "MCU2")] == [("Logger", "flush")]


def test_unknown_processor():
    with pytest.raises(UnknownElementError):
        deployed_task_set(load("smarthome.iot"), "Nope")


def test_connected_peer_examples(smarthome):
    assert connected_peer(smarthome, "TempSensor", "tempOut") == ("Thermostat", "tempIn")
    assert connected_peer(smarthome, "Thermostat", "tempIn") == ("TempSensor", "tempOut")
    assert connected_peer(smarthome, "Gateway", "anything") is None
    # block names are accepted too
    assert connected_peer(smarthome, "SensorNode", "tempOut") == ("Thermostat", "tempIn")


def test_connected_peer_unknown_and_ambiguous():
    blocks = [SystemBlock("A", [FlowPort("o", "out", "P")]), SystemBlock("B", [FlowPort("i", "in", "P")]),
              SystemBlock("C", [FlowPort("i", "in", "P")])]
    m = IoTModel("M", SystemView(blocks, [Connector("A", "o", "B", "i"), Connector("A", "o", "C", "i")]))
    with pytest.raises(AmbiguousConnectionError):
        connected_peer(m, "A", "o")
    assert connected_peer(m, "B", "i") == ("A", "o")
    with pytest.raises(UnknownElementError):
        connected_peer(m, "Z", "o")


@pytest.mark.parametrize("path", VALID, ids=lambda p: p.name)
def test_connected_peer_symmetry(path):
    m = parse_file(path)
    table = build_symbol_table(m)
    for conn in m.system.connections:
        for block, port in ((conn.source_block, conn.source_port), (conn.target_block, conn.target_port)):
            peer = connected_peer(m, block, port, table)
            assert peer is not None
            owner = table.block_of.get(peer[0], peer[0])
            back = connected_peer(m, owner, peer[1], table)
            assert connected_peer(m, back[0], back[1], table) == peer


def _deref_all(m, table):
    """Follow every reference in a model through the table."""
    for qname, comp in table.components.items():
        for port in comp.ports:
            for name in port.sends + port.receives:
                table.payload(qname, name)
        sm = comp.state_machine
        if sm is None:
            continue
        assert sm.state(sm.initial) is not None
        for st in sm.states:
            assert sm.event(st.on_entry) is not None and sm.event(st.on_exit) is not None
        for ev in sm.events:
            if ev.port:
                table.port(qname, ev.port)
            if ev.payload:
                table.payload(qname, ev.payload)
            if ev.effect:
                assert sm.action(ev.effect) is not None
        for act in sm.actions:
            if act.kind == "assign":
                assert comp.property(act.target) is not None
            else:
                table.port(qname, act.port)
                table.payload(qname, act.payload)
        for tr in sm.transitions:
            assert sm.state(tr.source) and sm.state(tr.target) and sm.event(tr.trigger)
    for block in m.system.blocks:
        for fp in block.flow_ports:
            table.global_payload(fp.payload_type)
        if block.realizes:
            table.component(block.realizes)
    for conn in m.system.connections:
        assert table.block(conn.source_block).flow_port(conn.source_port)
        assert table.block(conn.target_block).flow_port(conn.target_port)
    for d in m.deployment:
        table.component(d.component)
        table.processor(d.processor)
    if m.operational:
        for p in m.operational.protocols:
            if p.server:
                assert p.server in table.servers


@pytest.mark.parametrize("path", VALID, ids=lambda p: p.name)
def test_resolution_totality(path):
    m = parse_file(path)
    _deref_all(m, build_symbol_table(m))


def _random_deployment_model(rng):
    procs = [Processor(f"P{i}", rng.randint(1, 2)) for i in range(rng.randint(1, 3))]
    counter = iter(range(10**6))

    def comp(depth):
        c = SoftwareComponent(f"C{next(counter)}")
        for k in range(rng.randint(0, 3)):
            timing = None
            if rng.random() < 0.6:
                timing = TimingAnnotation("periodic", 1000, 10000, 10000, None)
            c.operations.append(Operation(f"op{k}", timing=timing))
        if depth < 2:
            c.subcomponents = [comp(depth + 1) for _ in range(rng.randint(0, 2))]
        return c

    tops = [comp(0) for _ in range(rng.randint(1, 4))]
    deploy = [DeploymentBinding(c.name, rng.choice(procs).name) for c in tops if rng.random() < 0.7]
    return IoTModel("M", software=tops, hardware=procs, deployment=deploy)


@pytest.mark.parametrize("seed", range(40))
def test_task_sets_partition_annotated_operations(seed):
    m = _random_deployment_model(random.Random(seed))
    assert not [d for d in validate(m) if d.is_error]
    deployed = {d.component for d in m.deployment}
    expected = {
        (q, op.name)
        for q, c in iter_components(m.software)
        for op in c.operations
        if op.timing is not None and q.split(".")[0] in deployed
    }
    seen = []
    for p in m.hardware:
        tasks = deployed_task_set(m, p.name)
        assert tasks == sorted(tasks, key=lambda t: (t.component, t.operation))
        seen.extend(t.id for t in tasks)
    assert len(seen) == len(set(seen))
    assert set(seen) == expected


def test_port_without_payload_is_reported():
    m = IoTModel("M", software=[SoftwareComponent("A", ports=[ComponentPort("p", "provided")])])
    assert [d.code for d in validate(m)] == ["V009"]
