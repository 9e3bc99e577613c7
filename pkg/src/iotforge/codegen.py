"""Model-to-ThingML transformation.

``map_model`` builds an intermediate :class:`ThingMLDocument` applying the
element mapping

    Component                 -> Thing
    Provided/required port    -> Provided/required port
    Operation                 -> Function
    Property                  -> Property
    Payload                   -> Message
    IoTState/Transition       -> State/Transition
    StateGuards               -> Guards
    IoTEvent/Action           -> Event/Action

and ``emit`` renders it as text in a subset of ThingML's textual syntax
(see ``docs/emitted-grammar.md``).  Nested components are flattened into
things named ``Parent_Child``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .formatter import quote
from .model import (
    BinOp,
    IoTAction,
    IoTModel,
    Literal,
    Not,
    Payload,
    PrimType,
    Ref,
    SoftwareComponent,
)
from .symbols import SymbolTable, collect_symbols
from .validator import expr_type, trigger_payload

ROWS = (
    ("component", "Component -> Thing"),
    ("port", "Provided/required port -> Provided/required port"),
    ("operation", "Operation -> Function"),
    ("property", "Property -> Property"),
    ("payload", "Payload -> Message"),
    ("state_transition", "IoTState/Transition -> State/Transition"),
    ("guard", "StateGuards -> Guards"),
    ("event_action", "IoTEvent/Action -> Event/Action"),
)

PRIMITIVES = {"bool": "Boolean", "int": "Integer", "real": "Double", "string": "String"}
EVENT_VAR = "e"


def message_name(payload: str) -> str:
    return payload[:1].lower() + payload[1:]


def thing_name(qname: str) -> str:
    return qname.replace(".", "_")


# -- intermediate document -------------------------------------------------------


@dataclass
class Enumeration:
    name: str
    members: tuple[str, ...]


@dataclass
class MessageDecl:
    name: str
    params: list[tuple[str, str]] = field(default_factory=list)


@dataclass
class TProperty:
    name: str
    type: str
    init: str


@dataclass
class TPort:
    name: str
    kind: str
    sends: list[str] = field(default_factory=list)
    receives: list[str] = field(default_factory=list)


@dataclass
class TFunction:
    name: str
    params: list[tuple[str, str]] = field(default_factory=list)
    note: Optional[str] = None


@dataclass
class TTransition:
    target: str
    event: Optional[tuple[str, str]] = None  # (port, message)
    guard: Optional[str] = None
    actions: list[str] = field(default_factory=list)
    comment: Optional[str] = None


@dataclass
class TState:
    name: str
    entry: list[str] = field(default_factory=list)
    exit: list[str] = field(default_factory=list)
    transitions: list[TTransition] = field(default_factory=list)


@dataclass
class Statechart:
    name: str
    init: str
    states: list[TState] = field(default_factory=list)
    internal_events: list[str] = field(default_factory=list)


@dataclass
class Thing:
    name: str
    properties: list[TProperty] = field(default_factory=list)
    messages: list[MessageDecl] = field(default_factory=list)
    ports: list[TPort] = field(default_factory=list)
    functions: list[TFunction] = field(default_factory=list)
    statechart: Optional[Statechart] = None


@dataclass
class Instance:
    name: str
    thing: str


@dataclass
class TConnector:
    client: str
    client_port: str
    server: str
    server_port: str


@dataclass
class ThingMLDocument:
    name: str
    things: list[Thing] = field(default_factory=list)
    messages: list[MessageDecl] = field(default_factory=list)
    enumerations: list[Enumeration] = field(default_factory=list)
    instances: list[Instance] = field(default_factory=list)
    connectors: list[TConnector] = field(default_factory=list)
    unmapped_connectors: list[str] = field(default_factory=list)
    # row key -> [(source element, target element)]
    trace: dict[str, list[tuple[str, str]]] = field(default_factory=lambda: {k: [] for k, _ in ROWS})


@dataclass
class CoverageReport:
    counts: dict[str, int]

    def __getitem__(self, row: str) -> int:
        return self.counts[row]

    @property
    def all_rows_covered(self) -> bool:
        return all(v >= 1 for v in self.counts.values())

    def format(self) -> str:
        width = max(len(label) for _, label in ROWS)
        return "".join(f"{label:<{width}}  {self.counts[key]}\n" for key, label in ROWS)


# -- mapping -----------------------------------------------------------------------


class _Mapper:
    def __init__(self, model: IoTModel):
        self.model = model
        self.table: SymbolTable = collect_symbols(model)[0]
        self.doc = ThingMLDocument(model.name)
        self.enums: dict[str, Enumeration] = {}
        self.messages: dict[str, MessageDecl] = {}

    def trace(self, row: str, source: str, target: str) -> None:
        self.doc.trace[row].append((source, target))

    def type_name(self, typ: PrimType, enum_name: str) -> str:
        if typ.kind != "enum":
            return PRIMITIVES[typ.kind]
        if enum_name not in self.enums:
            self.enums[enum_name] = Enumeration(enum_name, typ.members)
        return enum_name

    def literal(self, lit: Literal, enum_name: Optional[str] = None) -> str:
        if lit.kind == "bool":
            return "true" if lit.value else "false"
        if lit.kind == "string":
            return quote(lit.value)
        if lit.kind == "real":
            return repr(float(lit.value))
        if lit.kind == "enum":
            return f"{enum_name}:{lit.value}" if enum_name else str(lit.value)
        return str(lit.value)

    def default_literal(self, typ: PrimType, enum_name: str) -> str:
        kind = "enum" if typ.kind == "enum" else typ.kind
        return self.literal(Literal(typ.default(), kind), enum_name)

    def message(self, owner: str, payload: Payload) -> MessageDecl:
        name = message_name(payload.name)
        if name not in self.messages:
            params = [(f.name, self.type_name(f.type, f"{payload.name}_{f.name}")) for f in payload.fields]
            self.messages[name] = MessageDecl(name, params)
        return self.messages[name]

    def run(self) -> ThingMLDocument:
        for qname, comp in self.table.components.items():
            self.doc.things.append(self.thing(qname, comp))
        self.doc.messages = list(self.messages.values())
        self.doc.enumerations = list(self.enums.values())
        self.configuration()
        return self.doc

    def thing(self, qname: str, comp: SoftwareComponent) -> Thing:
        name = thing_name(qname)
        th = Thing(name)
        self.trace("component", qname, name)
        for prop in comp.properties:
            enum = f"{name}_{prop.name}"
            th.properties.append(TProperty(prop.name, self.type_name(prop.type, enum), self.literal(prop.initial, enum)))
            self.trace("property", f"{qname}.{prop.name}", f"{name}.{prop.name}")
        declared: list[str] = []
        for p in comp.payloads:
            decl = self.message(qname, p)
            self.trace("payload", f"{qname}.{p.name}", decl.name)
            if decl.name not in declared:
                declared.append(decl.name)
                th.messages.append(decl)
        for port in comp.ports:
            for ref in port.sends + port.receives:
                decl = self.message(qname, self.table.payload(qname, ref))
                if decl.name not in declared:
                    declared.append(decl.name)
                    th.messages.append(decl)
            th.ports.append(
                TPort(port.name, port.kind, [message_name(s) for s in port.sends], [message_name(r) for r in port.receives])
            )
            self.trace("port", f"{qname}.{port.name}", f"{name}.{port.name}")
        for op in comp.operations:
            params = [(p.name, self.type_name(p.type, f"{name}_{op.name}_{p.name}")) for p in op.parameters]
            note = None
            if op.timing is not None:
                t = op.timing
                note = f"{t.kind} wcet={t.wcet}us period={t.period_or_miat}us deadline={t.deadline}us"
                if t.priority is not None:
                    note += f" priority={t.priority}"
            th.functions.append(TFunction(op.name, params, note))
            self.trace("operation", f"{qname}.{op.name}", f"{name}.{op.name}")
        if comp.state_machine is not None:
            th.statechart = self.statechart(qname, name, comp)
        return th

    def statechart(self, qname: str, name: str, comp: SoftwareComponent) -> Statechart:
        sm = comp.state_machine
        chart = Statechart(sm.name, sm.initial)
        for ev in sm.events:
            if ev.kind == "general":
                chart.internal_events.append(ev.name)
                target = f"internal event {ev.name}"
            elif ev.kind == "incoming":
                target = f"{ev.port}?{message_name(ev.payload)}"
            else:
                target = f"{ev.port}!{message_name(ev.payload)}"
            self.trace("event_action", f"{qname}.{sm.name}.{ev.name}", target)
        for act in sm.actions:
            self.trace("event_action", f"{qname}.{sm.name}.{act.name}", f"action {act.kind}")
        for st in sm.states:
            ts = TState(st.name)
            ts.entry = self.effect(qname, name, comp, st.on_entry, None)
            ts.exit = self.effect(qname, name, comp, st.on_exit, None)
            chart.states.append(ts)
            self.trace("state_transition", f"{qname}.{sm.name}.{st.name}", f"state {st.name}")
        by_name = {s.name: s for s in chart.states}
        for index, tr in enumerate(sm.transitions):
            ev = sm.event(tr.trigger)
            payload = trigger_payload(self.table, qname, sm, tr)
            t = TTransition(tr.target)
            if ev.kind == "incoming":
                t.event = (ev.port, message_name(ev.payload))
            else:
                t.comment = f"{ev.kind} event {ev.name}"
            if tr.guard is not None:
                t.guard = self.expr(tr.guard, name, comp, payload)
                self.trace("guard", f"{qname}.{sm.name}.transition[{index}]", t.guard)
            t.actions = self.effect(qname, name, comp, tr.trigger, payload)
            by_name[tr.source].transitions.append(t)
            self.trace("state_transition", f"{qname}.{sm.name}.transition[{index}]", f"transition {tr.source} -> {tr.target}")
        return chart

    def effect(self, qname, name, comp: SoftwareComponent, event_name, payload) -> list[str]:
        sm = comp.state_machine
        ev = sm.event(event_name)
        if ev is None or ev.effect is None:
            return []
        return self.action(qname, name, comp, sm.action(ev.effect), payload)

    def action(self, qname, name, comp: SoftwareComponent, act: IoTAction, payload) -> list[str]:
        if act.kind == "assign":
            enum = f"{name}_{act.target}"
            return [f"{act.target} = {self.literal(act.value, enum)}"]
        p = self.table.payload(qname, act.payload)
        msg = message_name(p.name)
        if act.kind == "send":
            args = []
            for f in p.fields:
                prop = comp.property(f.name)
                if prop is not None and (prop.type == f.type or (f.type.kind == "real" and prop.type.kind == "int")):
                    args.append(f.name)
                else:
                    args.append(self.default_literal(f.type, f"{p.name}_{f.name}"))
            return [f"{act.port}!{msg}({', '.join(args)})"]
        if payload is None or payload.name != p.name:
            return [f"// receive {msg} via {act.port}: fields are read by the triggering transition"]
        lines = []
        for f in p.fields:
            prop = comp.property(f.name)
            if prop is not None and (prop.type == f.type or (prop.type.kind == "real" and f.type.kind == "int")):
                lines.append(f"{f.name} = {EVENT_VAR}.{f.name}")
        return lines or [f"// receive {msg} via {act.port}: no matching properties"]

    def expr(self, e, name: str, comp: SoftwareComponent, payload) -> str:
        if isinstance(e, Literal):
            return self.literal(e)
        if isinstance(e, Ref):
            return self.ref(e, comp, payload)
        if isinstance(e, Not):
            return f"not {self.operand(e.operand, name, comp, payload)}"
        if isinstance(e, BinOp):
            if e.op in ("and", "or"):
                return f"{self.operand(e.left, name, comp, payload)} {e.op} {self.operand(e.right, name, comp, payload)}"
            lt, rt = expr_type(e.left, comp, payload), expr_type(e.right, comp, payload)
            left = self.cmp_operand(e.left, lt, e.right, name, comp, payload)
            right = self.cmp_operand(e.right, rt, e.left, name, comp, payload)
            op = "==" if e.op == "=" else e.op
            return f"{left} {op} {right}"
        raise TypeError(f"not an expression: {e!r}")

    def operand(self, e, name, comp, payload) -> str:
        text = self.expr(e, name, comp, payload)
        return text if isinstance(e, (Literal, Ref)) else f"({text})"

    def cmp_operand(self, e, own_type, other, name, comp, payload) -> str:
        if isinstance(own_type, tuple):
            # a bare enumeration member takes the enumeration of the other operand
            enum = self.enum_name_of(other, name, comp, payload)
            return f"{enum}:{own_type[1]}" if enum else own_type[1]
        return self.operand(e, name, comp, payload)

    def enum_name_of(self, e, name, comp: SoftwareComponent, payload) -> Optional[str]:
        if not isinstance(e, Ref):
            return None
        if self.is_field(e, payload):
            return f"{payload.name}_{e.parts[-1]}"
        return f"{name}_{e.parts[-1]}"

    @staticmethod
    def is_field(ref: Ref, payload) -> bool:
        return len(ref.parts) == 2 or (payload is not None and payload.field_type(ref.parts[0]) is not None)

    def ref(self, ref: Ref, comp: SoftwareComponent, payload) -> str:
        if self.is_field(ref, payload):
            return f"{EVENT_VAR}.{ref.parts[-1]}"
        return ref.parts[0]

    def configuration(self) -> None:
        taken: set[str] = set()
        inst_of: dict[str, str] = {}
        for th in self.doc.things:
            base = th.name[:1].lower() + th.name[1:]
            inst = base
            n = 2
            while inst in taken:
                inst = f"{base}{n}"
                n += 1
            taken.add(inst)
            inst_of[th.name] = inst
            self.doc.instances.append(Instance(inst, th.name))
        t = self.table
        for conn in self.model.system.connections:
            ends = []
            for b, p in ((conn.source_block, conn.source_port), (conn.target_block, conn.target_port)):
                block = t.blocks.get(b)
                comp = t.components.get(block.realizes) if block and block.realizes else None
                port = comp.port(p) if comp else None
                if port is None:
                    break
                ends.append((inst_of[thing_name(block.realizes)], port))
            if len(ends) != 2:
                self.doc.unmapped_connectors.append(conn.label)
                continue
            (a, pa), (b, pb) = ends
            client, server = ((a, pa), (b, pb)) if pa.kind == "required" else ((b, pb), (a, pa))
            self.doc.connectors.append(TConnector(client[0], client[1].name, server[0], server[1].name))


def map_model(model: IoTModel) -> ThingMLDocument:
    """Build the intermediate ThingML document for a validated model."""
    return _Mapper(model).run()


def mapping_coverage(model: IoTModel) -> CoverageReport:
    """Number of source elements mapped under each row of the element mapping."""
    doc = map_model(model)
    return CoverageReport({key: len(doc.trace[key]) for key, _ in ROWS})


# -- text emission ---------------------------------------------------------------

INDENT = "\t"


def _block(lines: list[str], depth: int, head: str, body: list[str]) -> None:
    pad = INDENT * depth
    if not body:
        lines.append(f"{pad}{head} do end")
        return
    lines.append(f"{pad}{head} do")
    lines.extend(f"{pad}{INDENT}{b}" for b in body)
    lines.append(f"{pad}end")


def emit_thing(thing: Thing) -> str:
    lines = [f"thing {thing.name} {{"]
    if thing.properties:
        for p in thing.properties:
            lines.append(f"{INDENT}property {p.name} : {p.type} = {p.init}")
        lines.append("")
    if thing.messages:
        for m in thing.messages:
            params = ", ".join(f"{n} : {t}" for n, t in m.params)
            lines.append(f"{INDENT}message {m.name}({params})")
        lines.append("")
    for port in thing.ports:
        lines.append(f"{INDENT}{port.kind} port {port.name} {{")
        if port.sends:
            lines.append(f"{INDENT * 2}sends {', '.join(port.sends)}")
        if port.receives:
            lines.append(f"{INDENT * 2}receives {', '.join(port.receives)}")
        lines.append(f"{INDENT}}}")
        lines.append("")
    for fn in thing.functions:
        params = ", ".join(f"{n} : {t}" for n, t in fn.params)
        if fn.note:
            lines.append(f"{INDENT}// timing: {fn.note}")
        lines.append(f"{INDENT}function {fn.name}({params}) do")
        lines.append(f"{INDENT * 2}// TODO: operation bodies are not part of the source model")
        lines.append(f"{INDENT}end")
        lines.append("")
    chart = thing.statechart
    if chart is not None:
        for ev in chart.internal_events:
            lines.append(f"{INDENT}// internal event {ev}")
        lines.append(f"{INDENT}statechart {chart.name} init {chart.init} {{")
        for st in chart.states:
            lines.append(f"{INDENT * 2}state {st.name} {{")
            _block(lines, 3, "on entry", st.entry)
            _block(lines, 3, "on exit", st.exit)
            for tr in st.transitions:
                if tr.comment:
                    lines.append(f"{INDENT * 3}// {tr.comment}")
                lines.append(f"{INDENT * 3}transition -> {tr.target}")
                if tr.event:
                    lines.append(f"{INDENT * 3}event {EVENT_VAR} : {tr.event[0]}?{tr.event[1]}")
                if tr.guard:
                    lines.append(f"{INDENT * 3}guard {tr.guard}")
                if tr.actions:
                    _block(lines, 3, "action", tr.actions)
            lines.append(f"{INDENT * 2}}}")
        lines.append(f"{INDENT}}}")
    while lines[-1] == "":
        lines.pop()
    lines.append("}")
    return "\n".join(lines) + "\n"


def emit_configuration(doc: ThingMLDocument) -> str:
    lines: list[str] = []
    for th in doc.things:
        lines.append(f'import "../things/{th.name}.thingml"')
    if lines:
        lines.append("")
    for enum in doc.enumerations:
        lines.append(f"enumeration {enum.name} {{")
        lines.extend(f"{INDENT}{m} = {i}" for i, m in enumerate(enum.members))
        lines.append("}")
        lines.append("")
    lines.append(f"configuration {doc.name} {{")
    for inst in doc.instances:
        lines.append(f"{INDENT}instance {inst.name} : {inst.thing}")
    for c in doc.connectors:
        lines.append(f"{INDENT}connector {c.client}.{c.client_port} => {c.server}.{c.server_port}")
    for label in doc.unmapped_connectors:
        lines.append(f"{INDENT}// connector {label} joins a block that realizes no component")
    lines.append("}")
    return "\n".join(lines) + "\n"


def emit(doc: ThingMLDocument) -> list[tuple[str, str]]:
    """Render ``doc`` to ``(relative path, text)`` pairs, things first."""
    files = [(f"things/{th.name}.thingml", emit_thing(th)) for th in doc.things]
    files.append(("config/main.thingml", emit_configuration(doc)))
    return files
