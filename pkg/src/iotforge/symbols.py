"""Name resolution and derived views of a model.

Payload declarations are scoped to the component that declares them and to
its subcomponents.  The same payload name may be declared by several
components as long as the declarations are identical; flow-ports in the
system view resolve payload names against that global set.

Subcomponents inherit the deployment of their top-level ancestor.
"""
from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from typing import Optional

from .diagnostics import (
    DEFAULT_FILE,
    ERROR,
    Diagnostic,
    ResolutionError,
    SourceSpan,
    unknown_span,
)
from .model import (
    ComponentPort,
    IoTModel,
    Payload,
    Processor,
    SoftwareComponent,
    SystemBlock,
    TaskSpec,
    iter_components,
)


class UnknownElementError(LookupError):
    pass


class AmbiguousConnectionError(LookupError):
    pass


@dataclass
class SymbolTable:
    model: IoTModel
    components: dict[str, SoftwareComponent] = field(default_factory=dict)
    parents: dict[str, Optional[str]] = field(default_factory=dict)
    blocks: dict[str, SystemBlock] = field(default_factory=dict)
    processors: dict[str, Processor] = field(default_factory=dict)
    servers: dict[str, object] = field(default_factory=dict)
    # payload name -> [(declaring component, payload)]
    payload_decls: dict[str, list[tuple[str, Payload]]] = field(default_factory=dict)
    block_of: dict[str, str] = field(default_factory=dict)
    deployment: dict[str, str] = field(default_factory=dict)

    def component(self, qname: str) -> SoftwareComponent:
        try:
            return self.components[qname]
        except KeyError:
            raise UnknownElementError(f"unknown component {qname!r}") from None

    def top_level(self, qname: str) -> str:
        while self.parents.get(qname):
            qname = self.parents[qname]
        return qname

    def scope_chain(self, qname: str):
        """The component itself, then its ancestors."""
        cur: Optional[str] = qname
        while cur is not None:
            yield cur
            cur = self.parents.get(cur)

    def payload(self, qname: str, name: str) -> Payload:
        for scope in self.scope_chain(qname):
            for p in self.components[scope].payloads:
                if p.name == name:
                    return p
        raise UnknownElementError(f"payload {name!r} is not visible in {qname!r}")

    def payload_owner(self, qname: str, name: str) -> str:
        for scope in self.scope_chain(qname):
            if any(p.name == name for p in self.components[scope].payloads):
                return scope
        raise UnknownElementError(f"payload {name!r} is not visible in {qname!r}")

    def global_payload(self, name: str) -> Payload:
        decls = self.payload_decls.get(name)
        if not decls:
            raise UnknownElementError(f"unknown payload {name!r}")
        return decls[0][1]

    def port(self, qname: str, name: str) -> ComponentPort:
        p = self.component(qname).port(name)
        if p is None:
            raise UnknownElementError(f"unknown port {qname}.{name}")
        return p

    def processor(self, name: str) -> Processor:
        try:
            return self.processors[name]
        except KeyError:
            raise UnknownElementError(f"unknown processor {name!r}") from None

    def block(self, name: str) -> SystemBlock:
        try:
            return self.blocks[name]
        except KeyError:
            raise UnknownElementError(f"unknown block {name!r}") from None

    def processor_of(self, qname: str) -> Optional[str]:
        return self.deployment.get(self.top_level(qname))


def _span(element, file: str) -> SourceSpan:
    return getattr(element, "span", None) or unknown_span(file)


class _Collector:
    def __init__(self, model: IoTModel, file: str):
        self.model = model
        self.file = file
        self.diags: list[Diagnostic] = []
        self.table = SymbolTable(model)

    def report(self, code: str, message: str, element, severity: str = ERROR) -> None:
        self.diags.append(Diagnostic(severity, code, message, _span(element, self.file)))

    def unique(self, items, what: str, where: str) -> dict:
        seen: dict[str, object] = {}
        for item in items:
            if item.name in seen:
                self.report("V001", f"duplicate {what} {item.name!r} in {where}", item)
            else:
                seen[item.name] = item
        return seen

    def check_type(self, typ, element, where: str) -> None:
        if typ.kind == "enum" and len(set(typ.members)) != len(typ.members):
            self.report("V001", f"duplicate enum member in {where}", element)

    def run(self) -> tuple[SymbolTable, list[Diagnostic]]:
        m, t = self.model, self.table
        t.components = {}
        self.unique(m.software, "component", f"model {m.name}")
        for qname, comp in iter_components(m.software):
            if qname in t.components:
                continue
            t.components[qname] = comp
            for sub in comp.subcomponents:
                t.parents[f"{qname}.{sub.name}"] = qname
            t.parents.setdefault(qname, None)
        for qname, comp in t.components.items():
            self.collect_component(qname, comp)
        self.check_payload_conflicts()
        self.check_flat_names()

        t.blocks = self.unique(m.system.blocks, "block", "system view")
        t.processors = self.unique(m.hardware, "processor", "hardware view")
        self.collect_system()
        self.collect_deployment()
        self.collect_operational()
        return t, self.diags

    def collect_component(self, qname: str, comp: SoftwareComponent) -> None:
        t = self.table
        self.unique(comp.subcomponents, "subcomponent", qname)
        self.unique(comp.ports, "port", qname)
        self.unique(comp.payloads, "payload", qname)
        self.unique(comp.properties, "property", qname)
        self.unique(comp.operations, "operation", qname)
        for p in comp.payloads:
            t.payload_decls.setdefault(p.name, []).append((qname, p))
            self.unique(p.fields, "field", f"payload {p.name}")
            for f in p.fields:
                self.check_type(f.type, f, f"{p.name}.{f.name}")
        for prop in comp.properties:
            self.check_type(prop.type, prop, f"{qname}.{prop.name}")
        for op in comp.operations:
            self.unique(op.parameters, "parameter", f"operation {qname}.{op.name}")
            for par in op.parameters:
                self.check_type(par.type, par, f"{qname}.{op.name}({par.name})")

        def visible(name: str) -> bool:
            return any(
                any(p.name == name for p in t.components[s].payloads)
                for s in t.scope_chain(qname)
            )

        for port in comp.ports:
            for name in port.sends + port.receives:
                if not visible(name):
                    self.report("V009", f"port {qname}.{port.name} references undeclared payload {name!r}", port)

        sm = comp.state_machine
        if sm is None:
            return
        where = f"state machine {qname}.{sm.name}"
        states = self.unique(sm.states, "state", where)
        events = self.unique(sm.events, "event", where)
        actions = self.unique(sm.actions, "action", where)
        if sm.initial not in states:
            self.report("V005", f"initial state {sm.initial!r} of {where} is not declared", sm)
        for st in sm.states:
            for slot, ref in (("onentry", st.on_entry), ("onexit", st.on_exit)):
                if ref is not None and ref not in events:
                    self.report("V004", f"state {st.name!r} {slot} event {ref!r} is not declared", st)
        for ev in sm.events:
            if ev.port is not None and comp.port(ev.port) is None:
                self.report("V006", f"event {ev.name!r} names unknown port {ev.port!r}", ev)
            if ev.payload is not None and not visible(ev.payload):
                self.report("V009", f"event {ev.name!r} references undeclared payload {ev.payload!r}", ev)
            if ev.effect is not None and ev.effect not in actions:
                self.report("V005", f"event {ev.name!r} effect {ev.effect!r} is not a declared action", ev)
        for act in sm.actions:
            if act.port is not None and comp.port(act.port) is None:
                self.report("V006", f"action {act.name!r} names unknown port {act.port!r}", act)
            if act.payload is not None and not visible(act.payload):
                self.report("V009", f"action {act.name!r} references undeclared payload {act.payload!r}", act)
            if act.kind == "assign" and comp.property(act.target) is None:
                self.report("V010", f"action {act.name!r} assigns unknown property {act.target!r}", act)
        for tr in sm.transitions:
            for slot, ref in (("source", tr.source), ("target", tr.target)):
                if ref not in states:
                    self.report("V005", f"transition {slot} state {ref!r} is not declared", tr)
            if tr.trigger not in events:
                self.report("V005", f"transition trigger {tr.trigger!r} is not a declared event", tr)

    def check_payload_conflicts(self) -> None:
        for name, decls in self.table.payload_decls.items():
            first_owner, first = decls[0]
            for owner, p in decls[1:]:
                if p != first:
                    self.report(
                        "V001",
                        f"payload {name!r} in {owner} conflicts with the declaration in {first_owner}",
                        p,
                    )

    def check_flat_names(self) -> None:
        # generated code flattens the hierarchy to Parent_Child
        flat: dict[str, str] = {}
        for qname, comp in self.table.components.items():
            key = qname.replace(".", "_")
            if key in flat and flat[key] != qname:
                self.report("V001", f"component {qname!r} collides with {flat[key]!r} once flattened to {key!r}", comp)
            flat.setdefault(key, qname)
        lowered: dict[str, str] = {}
        for name, decls in self.table.payload_decls.items():
            key = name[:1].lower() + name[1:]
            if key in lowered and lowered[key] != name:
                self.report("V001", f"payload {name!r} collides with {lowered[key]!r} as message {key!r}", decls[0][1])
            lowered.setdefault(key, name)

    def collect_system(self) -> None:
        t = self.table
        for block in self.model.system.blocks:
            self.unique(block.flow_ports, "flow-port", f"block {block.name}")
            self.unique(block.contracts, "contract", f"block {block.name}")
            for fp in block.flow_ports:
                if fp.payload_type not in t.payload_decls:
                    self.report("V009", f"flow-port {block.name}.{fp.name} references undeclared payload {fp.payload_type!r}", fp)
            if block.realizes is not None:
                if block.realizes not in t.components:
                    self.report("R001", f"block {block.name!r} realizes unknown component {block.realizes!r}", block)
                elif block.realizes in t.block_of:
                    self.report("V001", f"component {block.realizes!r} is realized by more than one block", block)
                else:
                    t.block_of[block.realizes] = block.name
        for conn in self.model.system.connections:
            for b, p in ((conn.source_block, conn.source_port), (conn.target_block, conn.target_port)):
                block = t.blocks.get(b)
                if block is None:
                    self.report("R001", f"connector {conn.label} names unknown block {b!r}", conn)
                elif block.flow_port(p) is None:
                    self.report("R001", f"connector {conn.label} names unknown flow-port {b}.{p}", conn)

    def collect_deployment(self) -> None:
        t = self.table
        for binding in self.model.deployment:
            if binding.component not in t.components:
                self.report("V008", f"deployment names unknown component {binding.component!r}", binding, ERROR)
                continue
            if t.parents.get(binding.component):
                self.report("V008", f"subcomponent {binding.component!r} cannot be deployed directly", binding, ERROR)
                continue
            if binding.processor not in t.processors:
                self.report("V008", f"deployment names unknown processor {binding.processor!r}", binding, ERROR)
                continue
            if binding.component in t.deployment:
                self.report("V008", f"component {binding.component!r} is deployed more than once", binding, ERROR)
                continue
            t.deployment[binding.component] = binding.processor

    def collect_operational(self) -> None:
        op = self.model.operational
        if op is None:
            return
        self.unique(op.protocols, "protocol", "operational view")
        self.table.servers = self.unique(op.servers, "server", "operational view")
        self.unique(op.storage, "storage", "operational view")
        self.unique(op.modes, "mode", "operational view")
        for proto in op.protocols:
            if proto.server is not None and proto.server not in self.table.servers:
                self.report("V012", f"protocol {proto.name!r} references unknown server {proto.server!r}", proto)


def collect_symbols(model: IoTModel, file: str = DEFAULT_FILE) -> tuple[SymbolTable, list[Diagnostic]]:
    """Build the table and return it together with every resolution diagnostic."""
    return _Collector(model, file).run()


def build_symbol_table(model: IoTModel, file: str = DEFAULT_FILE) -> SymbolTable:
    """Resolve every name in ``model``.

    Raises :class:`ResolutionError` carrying one diagnostic per duplicate or
    unresolved name.
    """
    table, diags = collect_symbols(model, file)
    errors = [d for d in diags if d.is_error]
    if errors:
        raise ResolutionError(sorted(errors, key=Diagnostic.sort_key))
    return table


def deployed_task_set(model: IoTModel, processor: str, table: Optional[SymbolTable] = None) -> list[TaskSpec]:
    """Tasks for every timing-annotated operation deployed on ``processor``.

    Ordered by component qualified name, then operation name.
    """
    table = table or collect_symbols(model)[0]
    if processor not in table.processors:
        raise UnknownElementError(f"unknown processor {processor!r}")
    tasks = []
    for qname, comp in table.components.items():
        if table.processor_of(qname) != processor:
            continue
        for op in comp.operations:
            tm = op.timing
            if tm is None:
                continue
            tasks.append(
                TaskSpec(
                    component=qname,
                    operation=op.name,
                    kind=tm.kind,
                    wcet=tm.wcet,
                    period_or_miat=tm.period_or_miat,
                    deadline=tm.deadline,
                    priority=tm.priority,
                    processor=processor,
                )
            )
    tasks.sort(key=lambda t: (t.component, t.operation))
    return tasks


def _canonical_owner(table: SymbolTable, block: str) -> str:
    b = table.blocks.get(block)
    return b.realizes if b is not None and b.realizes in table.components else block


def connected_peer(model: IoTModel, component: str, port: str,
                   table: Optional[SymbolTable] = None) -> Optional[tuple[str, str]]:
    """Opposite endpoint of the connector attached to ``component.port``.

    ``component`` may name a software component (mapped to the block that
    realizes it) or a block.  The returned owner is the component realized by
    the peer block, or the block name when it realizes nothing.
    """
    table = table or collect_symbols(model)[0]
    if component in table.block_of:
        block = table.block_of[component]
    elif component in table.blocks:
        block = component
    elif component in table.components:
        return None
    else:
        raise UnknownElementError(f"unknown component or block {component!r}")
    found = []
    for conn in model.system.connections:
        if (conn.source_block, conn.source_port) == (block, port):
            found.append((conn.target_block, conn.target_port))
        if (conn.target_block, conn.target_port) == (block, port):
            found.append((conn.source_block, conn.source_port))
    if not found:
        return None
    if len(found) > 1:
        raise AmbiguousConnectionError(f"{component}.{port} is attached to {len(found)} connectors")
    peer_block, peer_port = found[0]
    return _canonical_owner(table, peer_block), peer_port


def connector_counts(model: IoTModel) -> dict[tuple[str, str], int]:
    counts: dict[tuple[str, str], int] = defaultdict(int)
    for conn in model.system.connections:
        counts[(conn.source_block, conn.source_port)] += 1
        counts[(conn.target_block, conn.target_port)] += 1
    return counts
