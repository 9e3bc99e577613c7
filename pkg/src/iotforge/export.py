"""Canonical JSON export of a resolved model.

Every reference is written as a fully qualified dotted name (for example
``TempSensor.SensorSM.Idle`` or ``TempSensor.TempReading``), durations are
integer microseconds and keys keep a fixed order, so equal models export to
identical text.  Guards and contract expressions are exported as canonical
expression text.
"""
from __future__ import annotations

import json
from typing import Optional

from .formatter import format_expr
from .model import IoTModel, Literal, PrimType, SoftwareComponent
from .symbols import SymbolTable, build_symbol_table

FORMAT = "iotforge-model/1"


def _type(t: PrimType) -> dict:
    out: dict = {"kind": t.kind}
    if t.kind == "enum":
        out["members"] = list(t.members)
    return out


def _literal(lit: Optional[Literal]):
    return None if lit is None else lit.value


def _q(*parts: Optional[str]) -> Optional[str]:
    if any(p is None for p in parts):
        return None
    return ".".join(parts)


class _Exporter:
    def __init__(self, model: IoTModel, table: SymbolTable):
        self.model = model
        self.table = table

    def payload_ref(self, qname: str, name: Optional[str]) -> Optional[str]:
        if name is None:
            return None
        return _q(self.table.payload_owner(qname, name), name)

    def flow_payload_ref(self, name: str) -> str:
        return _q(self.table.payload_decls[name][0][0], name)

    def run(self) -> dict:
        return {
            "format": FORMAT,
            "name": self.model.name,
            "system": self.system(),
            "components": [self.component(q, c) for q, c in self.table.components.items()],
            "hardware": [{"name": p.name, "cores": p.cores} for p in self.model.hardware],
            "deployment": [
                {"component": d.component, "processor": d.processor} for d in self.model.deployment
            ],
            "operational": self.operational(),
        }

    def system(self) -> dict:
        blocks = []
        for b in self.model.system.blocks:
            blocks.append(
                {
                    "name": b.name,
                    "realizes": b.realizes,
                    "flow_ports": [
                        {
                            "name": _q(b.name, fp.name),
                            "direction": fp.direction,
                            "payload": self.flow_payload_ref(fp.payload_type),
                        }
                        for fp in b.flow_ports
                    ],
                    "contracts": [
                        {
                            "name": _q(b.name, c.name),
                            "assume": format_expr(c.assume),
                            "guarantee": format_expr(c.guarantee),
                        }
                        for c in b.contracts
                    ],
                }
            )
        connectors = [
            {"source": _q(c.source_block, c.source_port), "target": _q(c.target_block, c.target_port)}
            for c in self.model.system.connections
        ]
        return {"blocks": blocks, "connectors": connectors}

    def component(self, qname: str, comp: SoftwareComponent) -> dict:
        return {
            "name": qname,
            "parent": self.table.parents.get(qname),
            "subcomponents": [_q(qname, s.name) for s in comp.subcomponents],
            "payloads": [
                {
                    "name": _q(qname, p.name),
                    "fields": [{"name": f.name, "type": _type(f.type)} for f in p.fields],
                }
                for p in comp.payloads
            ],
            "properties": [
                {"name": _q(qname, p.name), "type": _type(p.type), "initial": _literal(p.initial)}
                for p in comp.properties
            ],
            "ports": [
                {
                    "name": _q(qname, p.name),
                    "kind": p.kind,
                    "sends": [self.payload_ref(qname, n) for n in p.sends],
                    "receives": [self.payload_ref(qname, n) for n in p.receives],
                }
                for p in comp.ports
            ],
            "operations": [self.operation(qname, op) for op in comp.operations],
            "state_machine": self.state_machine(qname, comp),
        }

    @staticmethod
    def operation(qname: str, op) -> dict:
        t = op.timing
        timing = None
        if t is not None:
            timing = {
                "kind": t.kind,
                "wcet_us": t.wcet,
                "period_or_miat_us": t.period_or_miat,
                "deadline_us": t.deadline,
                "priority": t.priority,
            }
        return {
            "name": _q(qname, op.name),
            "parameters": [{"name": p.name, "type": _type(p.type)} for p in op.parameters],
            "timing": timing,
        }

    def state_machine(self, qname: str, comp: SoftwareComponent) -> Optional[dict]:
        sm = comp.state_machine
        if sm is None:
            return None
        base = _q(qname, sm.name)

        def local(name):
            return _q(base, name)

        return {
            "name": base,
            "initial": local(sm.initial),
            "states": [
                {"name": local(s.name), "on_entry": local(s.on_entry), "on_exit": local(s.on_exit)}
                for s in sm.states
            ],
            "events": [
                {
                    "name": local(e.name),
                    "kind": e.kind,
                    "port": _q(qname, e.port),
                    "payload": self.payload_ref(qname, e.payload),
                    "effect": local(e.effect),
                }
                for e in sm.events
            ],
            "actions": [
                {
                    "name": local(a.name),
                    "kind": a.kind,
                    "payload": self.payload_ref(qname, a.payload),
                    "port": _q(qname, a.port),
                    "target": _q(qname, a.target),
                    "value": _literal(a.value),
                }
                for a in sm.actions
            ],
            "transitions": [
                {
                    "source": local(t.source),
                    "target": local(t.target),
                    "trigger": local(t.trigger),
                    "guard": None if t.guard is None else format_expr(t.guard),
                }
                for t in sm.transitions
            ],
        }

    def operational(self) -> Optional[dict]:
        op = self.model.operational
        if op is None:
            return None
        return {
            "protocols": [
                {"name": p.name, "kind": p.kind, "custom": p.custom, "server": p.server}
                for p in op.protocols
            ],
            "servers": [{"name": s.name, "uri": s.uri} for s in op.servers],
            "storage": [{"name": s.name, "capacity": s.capacity} for s in op.storage],
            "modes": [m.name for m in op.modes],
        }


def export_model(model: IoTModel) -> dict:
    """Resolve ``model`` and return its canonical JSON-ready structure.

    Raises :class:`~iotforge.diagnostics.ResolutionError` when names do not
    resolve.
    """
    return _Exporter(model, build_symbol_table(model)).run()


def export_json(model: IoTModel) -> str:
    return json.dumps(export_model(model), indent=2) + "\n"
