"""Canonical text rendering of models (inverse of the parser)."""
from __future__ import annotations

from .model import (
    MS,
    S,
    BinOp,
    IoTModel,
    Literal,
    Not,
    PrimType,
    Ref,
    SoftwareComponent,
)

INDENT = "  "


def format_duration(us: int) -> str:
    if us and us % S == 0:
        return f"{us // S}s"
    if us and us % MS == 0:
        return f"{us // MS}ms"
    return f"{us}us"


def quote(text: str) -> str:
    out = text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t")
    return f'"{out}"'


def format_literal(lit: Literal) -> str:
    if lit.kind == "bool":
        return "true" if lit.value else "false"
    if lit.kind == "string":
        return quote(lit.value)
    if lit.kind == "real":
        return repr(float(lit.value))
    return str(lit.value)


def format_type(t: PrimType) -> str:
    return str(t)


def format_expr(e) -> str:
    if isinstance(e, Literal):
        return format_literal(e)
    if isinstance(e, Ref):
        return e.dotted
    if isinstance(e, Not):
        return "not " + _operand(e.operand)
    if isinstance(e, BinOp):
        return f"{_operand(e.left)} {e.op} {_operand(e.right)}"
    raise TypeError(f"not an expression: {e!r}")


def _operand(e) -> str:
    text = format_expr(e)
    return text if isinstance(e, (Literal, Ref)) else f"({text})"


class _Writer:
    def __init__(self):
        self.lines: list[str] = []
        self.depth = 0

    def line(self, text: str) -> None:
        self.lines.append(INDENT * self.depth + text)

    def open(self, text: str) -> None:
        self.line(text + " {")
        self.depth += 1

    def close(self) -> None:
        self.depth -= 1
        self.line("}")


def format_model(model: IoTModel) -> str:
    """Render ``model`` in canonical form.

    Sections appear in the order system, software, hardware, deployment,
    operational; empty sections are omitted except an explicitly present
    operational view.
    """
    w = _Writer()
    w.open(f"model {model.name}")
    sv = model.system
    if sv.blocks or sv.connections:
        w.open("system")
        for b in sv.blocks:
            head = f"block {b.name}" + (f" realizes {b.realizes}" if b.realizes else "")
            w.open(head)
            for fp in b.flow_ports:
                w.line(f"port {fp.direction} {fp.name} : {fp.payload_type};")
            for c in b.contracts:
                w.line(f"contract {c.name} assume [{format_expr(c.assume)}] guarantee [{format_expr(c.guarantee)}];")
            w.close()
        for c in sv.connections:
            w.line(f"connect {c.source_block}.{c.source_port} -> {c.target_block}.{c.target_port};")
        w.close()
    if model.software:
        w.open("software")
        for comp in model.software:
            _component(w, comp)
        w.close()
    if model.hardware:
        w.open("hardware")
        for p in model.hardware:
            w.line(f"processor {p.name} cores {p.cores};")
        w.close()
    if model.deployment:
        w.open("deployment")
        for d in model.deployment:
            w.line(f"deploy {d.component} on {d.processor};")
        w.close()
    op = model.operational
    if op is not None:
        w.open("operational")
        for p in op.protocols:
            text = f"protocol {p.name} kind {p.kind}"
            if p.kind == "custom":
                text += " " + quote(p.custom or "")
            if p.server:
                text += f" server {p.server}"
            w.line(text + ";")
        for s in op.servers:
            w.line(f"server {s.name} uri {quote(s.uri)};")
        for s in op.storage:
            w.line(f"storage {s.name} capacity {quote(s.capacity)};")
        for m in op.modes:
            w.line(f"mode {m.name};")
        w.close()
    w.close()
    return "\n".join(w.lines) + "\n"


def _component(w: _Writer, comp: SoftwareComponent) -> None:
    w.open(f"component {comp.name}")
    for p in comp.payloads:
        if not p.fields:
            w.line(f"payload {p.name} {{ }}")
            continue
        w.open(f"payload {p.name}")
        for f in p.fields:
            w.line(f"{f.name}: {format_type(f.type)};")
        w.close()
    for prop in comp.properties:
        w.line(f"property {prop.name}: {format_type(prop.type)} = {format_literal(prop.initial)};")
    for port in comp.ports:
        text = f"{port.kind} port {port.name}"
        if port.sends:
            text += " sends " + ", ".join(port.sends)
        if port.receives:
            text += " receives " + ", ".join(port.receives)
        w.line(text + ";")
    for op in comp.operations:
        params = ", ".join(f"{p.name}: {format_type(p.type)}" for p in op.parameters)
        text = f"operation {op.name}({params})"
        t = op.timing
        if t is not None:
            rate = "period" if t.kind == "periodic" else "miat"
            text += (
                f" timing {{ kind: {t.kind} wcet: {format_duration(t.wcet)}"
                f" {rate}: {format_duration(t.period_or_miat)}"
            )
            if t.priority is not None:
                text += f" priority: {t.priority}"
            text += f" deadline: {format_duration(t.deadline)} }}"
        w.line(text + ";")
    sm = comp.state_machine
    if sm is not None:
        w.open(f"statemachine {sm.name} init {sm.initial}")
        for st in sm.states:
            body = ""
            if st.on_entry is not None:
                body += f" onentry {st.on_entry};"
            if st.on_exit is not None:
                body += f" onexit {st.on_exit};"
            w.line(f"state {st.name} {{{body} }}")
        for ev in sm.events:
            text = f"event {ev.name} kind {ev.kind}"
            if ev.port:
                text += f" port {ev.port}"
            if ev.payload:
                text += f" payload {ev.payload}"
            if ev.effect:
                text += f" effect {ev.effect}"
            w.line(text + ";")
        for a in sm.actions:
            if a.kind == "assign":
                w.line(f"action {a.name} assign {a.target} = {format_literal(a.value)};")
            else:
                w.line(f"action {a.name} {a.kind} {a.payload} via {a.port};")
        for tr in sm.transitions:
            text = f"on {tr.trigger} from {tr.source} to {tr.target}"
            if tr.guard is not None:
                text += f" guard [{format_expr(tr.guard)}]"
            w.line(text + ";")
        w.close()
    for sub in comp.subcomponents:
        _component(w, sub)
    w.close()
