"""Well-formedness rules V001-V012.

Resolution problems (duplicate and unresolved names) are found while building
the symbol table and reported under the rule they violate; the remaining
structural, typing and timing rules are checked here.  ``validate`` returns
both groups merged and sorted by ``(file, span, code)``.
"""
from __future__ import annotations

import copy
from collections import defaultdict
from typing import Optional

from .diagnostics import (
    CATALOG,
    DEFAULT_FILE,
    ERROR,
    WARNING,
    Diagnostic,
    sort_diagnostics,
    unknown_span,
)
from .model import (
    COMPARISONS,
    BinOp,
    IoTEvent,
    IoTModel,
    Literal,
    Not,
    PrimType,
    Ref,
    SoftwareComponent,
    StateMachine,
    Transition,
    iter_components,
)
from .symbols import SymbolTable, collect_symbols, connector_counts


class UnknownRuleError(KeyError):
    pass


RULES: dict[str, str] = {
    "V001": "Names must be unique within their namespace: top-level components, blocks "
    "and processors; ports, payloads, properties, operations and subcomponents of a "
    "component; fields of a payload; states, events and actions of a state machine; "
    "entries of each operational list.  Payloads re-declared in several components must "
    "be identical, and flattened component names and lower-cased message names must not "
    "collide.",
    "V002": "A connector joins two flow-ports that carry the same payload type, and the "
    "component ports behind them must send (source side) and receive (target side) it.",
    "V003": "A connector runs from an out or inout flow-port to an in or inout flow-port, "
    "and each flow-port is attached to at most one connector.  When both blocks realize "
    "components, the component ports of the same names exist and one is provided while "
    "the other is required.",
    "V004": "Every IoTState is associated with an OnEntry and an OnExit event, and both "
    "name declared events.  A state missing either one is rejected.",
    "V005": "A state machine's initial state is declared, every transition's source and "
    "target states exist, triggers are declared events and event effects are declared actions.",
    "V006": "Incoming and outgoing events name a port and a payload; the port must receive "
    "(incoming) or send (outgoing) that payload.  Send and receive actions name a port that "
    "sends or receives their payload.",
    "V007": "Timing annotations satisfy 0 < wcet <= deadline <= period (or minimum "
    "inter-arrival time), and an explicit priority is a positive integer.",
    "V008": "Components with behavior or timing annotations should be deployed on a "
    "processor (warning; an error when analysis is requested).  Deployment bindings name a "
    "known top-level component and processor, at most once per component.",
    "V009": "Payloads referenced by ports, flow-ports, events and actions are declared in "
    "the component or one of its ancestors, and every component port declares at least "
    "one payload.",
    "V010": "Guards type-check to boolean; property initial values and assignment literals "
    "match the declared type of the property they initialize.",
    "V011": "Two tasks on the same processor share an explicit priority (warning).  The "
    "analysis breaks ties by deadline, then component and operation name.",
    "V012": "Protocols in the operational view reference declared servers.",
    "R001": "Every name used by a block, connector, deployment binding, port, event, "
    "action, guard or transition refers to a declared element.  Guard names resolve "
    "to a field of the trigger's payload first, then to a property of the component.",
}


def explain_rule(code: str) -> str:
    """Human-readable description of a validator rule."""
    if code not in RULES:
        raise UnknownRuleError(code)
    title, severity = CATALOG[code]
    return f"{code} ({severity}): {title}.\n{RULES[code]}"


# -- typing ------------------------------------------------------------------

_NUMERIC = ("int", "real")


def literal_matches(lit: Literal, typ: PrimType) -> bool:
    if typ.kind == "real":
        return lit.kind in _NUMERIC
    if typ.kind == "enum":
        return lit.kind == "enum" and lit.value in typ.members
    return lit.kind == typ.kind


class GuardTypeError(Exception):
    pass


def ref_type(ref: Ref, comp: SoftwareComponent, trigger_payload) -> Optional[PrimType]:
    """Resolve a guard reference.  Bare names look up a field of the trigger's
    payload first, then a component property."""
    if len(ref.parts) == 2:
        pname, fname = ref.parts
        if trigger_payload is None or trigger_payload.name != pname:
            raise GuardTypeError(f"{ref.dotted!r} does not name a field of the trigger payload")
        t = trigger_payload.field_type(fname)
        if t is None:
            raise GuardTypeError(f"payload {pname!r} has no field {fname!r}")
        return t
    if len(ref.parts) != 1:
        raise GuardTypeError(f"bad reference {ref.dotted!r}")
    name = ref.parts[0]
    if trigger_payload is not None:
        t = trigger_payload.field_type(name)
        if t is not None:
            return t
    prop = comp.property(name)
    return prop.type if prop is not None else None


def expr_type(e, comp, payload):
    """Returns a PrimType, or ``("sym", name)`` for an unresolved bare name."""
    if isinstance(e, Literal):
        return PrimType(e.kind) if e.kind != "enum" else ("sym", e.value)
    if isinstance(e, Ref):
        t = ref_type(e, comp, payload)
        return t if t is not None else ("sym", e.dotted)
    if isinstance(e, Not):
        _expect_bool(e.operand, comp, payload)
        return PrimType("bool")
    if isinstance(e, BinOp):
        if e.op in ("and", "or"):
            _expect_bool(e.left, comp, payload)
            _expect_bool(e.right, comp, payload)
            return PrimType("bool")
        if e.op in COMPARISONS:
            lt, rt = expr_type(e.left, comp, payload), expr_type(e.right, comp, payload)
            _check_comparison(e.op, lt, rt)
            return PrimType("bool")
    raise GuardTypeError(f"malformed expression {e!r}")


def _expect_bool(e, comp, payload) -> None:
    t = expr_type(e, comp, payload)
    if isinstance(t, tuple):
        raise GuardTypeError(f"unknown name {t[1]!r}")
    if t.kind != "bool":
        raise GuardTypeError(f"expected a boolean but found {t}")


def _check_comparison(op: str, lt, rt) -> None:
    if isinstance(lt, tuple) and isinstance(rt, tuple):
        raise GuardTypeError(f"unknown name {lt[1]!r}")
    if isinstance(lt, tuple) or isinstance(rt, tuple):
        sym, other = (lt, rt) if isinstance(lt, tuple) else (rt, lt)
        if other.kind != "enum" or sym[1] not in other.members:
            raise GuardTypeError(f"unknown name {sym[1]!r}")
        if op not in ("=", "!="):
            raise GuardTypeError(f"operator {op!r} does not apply to enumerations")
        return
    if lt.kind in _NUMERIC and rt.kind in _NUMERIC:
        return
    if op not in ("=", "!="):
        raise GuardTypeError(f"operator {op!r} needs numeric operands, found {lt} and {rt}")
    if lt.kind != rt.kind or (lt.kind == "enum" and lt.members != rt.members):
        raise GuardTypeError(f"cannot compare {lt} with {rt}")


def trigger_payload(table: SymbolTable, qname: str, sm: StateMachine, tr: Transition):
    ev = sm.event(tr.trigger)
    if ev is None or ev.kind != "incoming" or ev.payload is None:
        return None
    try:
        return table.payload(qname, ev.payload)
    except LookupError:
        return None


def check_guard(table: SymbolTable, qname: str, comp: SoftwareComponent, tr: Transition) -> Optional[str]:
    """Return an error message if the transition's guard is ill-typed."""
    if tr.guard is None:
        return None
    payload = trigger_payload(table, qname, comp.state_machine, tr)
    try:
        _expect_bool(tr.guard, comp, payload)
    except GuardTypeError as exc:
        return str(exc)
    return None


# -- rules -------------------------------------------------------------------


class _Rules:
    def __init__(self, model: IoTModel, table: SymbolTable, file: str, analysis: bool):
        self.model = model
        self.table = table
        self.file = file
        self.analysis = analysis
        self.diags: list[Diagnostic] = []

    def report(self, code: str, message: str, element, severity: str = ERROR) -> None:
        span = getattr(element, "span", None) or unknown_span(self.file)
        self.diags.append(Diagnostic(severity, code, message, span))

    def run(self) -> list[Diagnostic]:
        for qname, comp in self.table.components.items():
            self.component(qname, comp)
        self.connectors()
        self.deployment()
        self.priorities()
        return self.diags

    def component(self, qname: str, comp: SoftwareComponent) -> None:
        for port in comp.ports:
            if not port.sends and not port.receives:
                self.report("V009", f"port {qname}.{port.name} declares no payload", port)
        for prop in comp.properties:
            if not literal_matches(prop.initial, prop.type):
                self.report("V010", f"initial value of property {qname}.{prop.name} does not match type {prop.type}", prop)
        for op in comp.operations:
            t = op.timing
            if t is None:
                continue
            where = f"operation {qname}.{op.name}"
            if t.wcet <= 0 or t.period_or_miat <= 0:
                self.report("V007", f"{where}: wcet and period must be positive", t)
            elif not (t.wcet <= t.deadline <= t.period_or_miat):
                self.report(
                    "V007",
                    f"{where}: requires wcet <= deadline <= period "
                    f"(wcet {t.wcet}us, deadline {t.deadline}us, period {t.period_or_miat}us)",
                    t,
                )
            if t.priority is not None and t.priority < 1:
                self.report("V007", f"{where}: priority must be a positive integer", t)
        sm = comp.state_machine
        if sm is None:
            return
        for st in sm.states:
            missing = [slot for slot, ref in (("OnEntry", st.on_entry), ("OnExit", st.on_exit)) if ref is None]
            if missing:
                self.report("V004", f"state {st.name!r} in {qname} has no {' or '.join(missing)} event", st)
        for ev in sm.events:
            if ev.kind == "general":
                continue
            if ev.port is None or ev.payload is None:
                self.report("V006", f"{ev.kind} event {ev.name!r} must name a port and a payload", ev)
                continue
            port = comp.port(ev.port)
            if port is None:
                continue
            carried = port.receives if ev.kind == "incoming" else port.sends
            if ev.payload not in carried:
                verb = "receive" if ev.kind == "incoming" else "send"
                self.report("V006", f"port {ev.port!r} does not {verb} payload {ev.payload!r} for event {ev.name!r}", ev)
        for act in sm.actions:
            if act.kind == "assign":
                prop = comp.property(act.target)
                if prop is not None and not literal_matches(act.value, prop.type):
                    self.report("V010", f"action {act.name!r} assigns a value that does not match {prop.type}", act)
                continue
            port = comp.port(act.port)
            if port is None:
                continue
            carried = port.sends if act.kind == "send" else port.receives
            if act.payload not in carried:
                self.report("V006", f"port {act.port!r} does not {act.kind} payload {act.payload!r} for action {act.name!r}", act)
        for tr in sm.transitions:
            if sm.event(tr.trigger) is None:
                continue
            problem = check_guard(self.table, qname, comp, tr)
            if problem:
                self.report("V010", f"guard of transition {tr.source}->{tr.target} on {tr.trigger}: {problem}", tr)

    def connectors(self) -> None:
        t = self.table
        counts = connector_counts(self.model)
        for conn in self.model.system.connections:
            for end in ((conn.source_block, conn.source_port), (conn.target_block, conn.target_port)):
                if counts[end] > 1:
                    self.report("V003", f"flow-port {end[0]}.{end[1]} is attached to {counts[end]} connectors", conn)
            sb, tb = t.blocks.get(conn.source_block), t.blocks.get(conn.target_block)
            if sb is None or tb is None:
                continue
            sp, tp = sb.flow_port(conn.source_port), tb.flow_port(conn.target_port)
            if sp is None or tp is None:
                continue
            if sp.payload_type != tp.payload_type:
                self.report("V002", f"connector {conn.label} joins payload {sp.payload_type!r} to {tp.payload_type!r}", conn)
            if sp.direction not in ("out", "inout") or tp.direction not in ("in", "inout"):
                self.report("V003", f"connector {conn.label} runs from direction {sp.direction!r} to direction {tp.direction!r}", conn)
            ends = []
            for block, fp, verb in ((sb, sp, "sends"), (tb, tp, "receives")):
                if block.realizes not in t.components:
                    continue
                cport = t.components[block.realizes].port(fp.name)
                if cport is None:
                    self.report("V003", f"component {block.realizes!r} has no port {fp.name!r} behind connector {conn.label}", conn)
                    continue
                ends.append(cport)
                if fp.payload_type not in getattr(cport, verb):
                    self.report("V002", f"port {block.realizes}.{cport.name} does not {verb[:-1]} {fp.payload_type!r}", conn)
            if len(ends) == 2 and ends[0].kind == ends[1].kind:
                self.report("V003", f"connector {conn.label} joins two {ends[0].kind} ports", conn)

    def deployment(self) -> None:
        severity = ERROR if self.analysis else WARNING
        # a broken binding is reported by resolution; only a missing one here
        bound = {d.component for d in self.model.deployment}
        for comp in self.model.software:
            if comp.name in bound:
                continue
            needs = None
            for _, c in iter_components([comp]):
                if any(op.timing for op in c.operations):
                    needs = "timing-annotated operations"
                    break
                if c.state_machine is not None:
                    needs = needs or "behavior"
            if needs:
                self.report("V008", f"component {comp.name!r} has {needs} but is not deployed", comp, severity)

    def priorities(self) -> None:
        by_proc: dict[tuple[str, int], list] = defaultdict(list)
        for qname, comp in self.table.components.items():
            proc = self.table.processor_of(qname)
            if proc is None:
                continue
            for op in comp.operations:
                if op.timing is not None and op.timing.priority is not None:
                    by_proc[(proc, op.timing.priority)].append((qname, op))
        for (proc, prio), ops in by_proc.items():
            if len(ops) < 2:
                continue
            names = ", ".join(f"{q}.{op.name}" for q, op in ops)
            for _, op in ops[1:]:
                self.report("V011", f"priority {prio} on processor {proc!r} is shared by {names}", op.timing, WARNING)


def validate(model: IoTModel, file: str = DEFAULT_FILE, analysis: bool = False) -> list[Diagnostic]:
    """Check ``model`` against the V001-V012 catalog.

    An empty result (or warnings only) means the model can be consumed by the
    analysis, simulation and code generation back ends.  ``analysis=True``
    raises undeployed-component findings (V008) to errors.
    """
    table, diags = collect_symbols(model, file)
    diags = diags + _Rules(model, table, file, analysis).run()
    return sort_diagnostics(diags)


def synthesize_state_events(model: IoTModel) -> tuple[IoTModel, list[str]]:
    """Copy of ``model`` where every missing OnEntry/OnExit gets a no-op event.

    New events are general, have no effect and are named ``enter<State>`` or
    ``leave<State>`` (with a numeric suffix when the name is taken).  Returns
    the new model and the qualified names of the synthesized events.
    """
    fixed = copy.deepcopy(model)
    added: list[str] = []
    for qname, comp in iter_components(fixed.software):
        sm = comp.state_machine
        if sm is None:
            continue
        taken = {e.name for e in sm.events} | {a.name for a in sm.actions} | {s.name for s in sm.states}
        for st in sm.states:
            for attr, prefix in (("on_entry", "enter"), ("on_exit", "leave")):
                if getattr(st, attr) is not None:
                    continue
                base = prefix + st.name[:1].upper() + st.name[1:]
                name, n = base, 2
                while name in taken:
                    name, n = f"{base}{n}", n + 1
                taken.add(name)
                sm.events.append(IoTEvent(name, "general"))
                setattr(st, attr, name)
                added.append(f"{qname}.{sm.name}.{name}")
    return fixed, added
