"""Typed metamodel for IoT models.

A model aggregates four views: the system view (blocks, flow-ports,
connectors, contracts), the software view (components with ports, payloads,
properties, operations and an event-based state machine), hardware plus
deployment, and the optional operational view.

References between elements are stored as plain names; they are resolved by
:func:`iotforge.symbols.build_symbol_table`.  Every named element carries an
optional source span which is excluded from equality, so a parsed model and a
reparsed model compare structurally.

Durations are integer microseconds throughout.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional, Union

from .diagnostics import SourceSpan

PRIMITIVE_KINDS = ("bool", "int", "real", "string", "enum")
# Types whose value domain is not finite; guards over these may be abstracted.
UNBOUNDED_KINDS = frozenset({"int", "real", "string"})

FLOW_DIRECTIONS = ("in", "out", "inout")
PORT_KINDS = ("provided", "required")
TIMING_KINDS = ("periodic", "sporadic")
EVENT_KINDS = ("general", "incoming", "outgoing")
ACTION_KINDS = ("send", "receive", "assign")
PROTOCOL_KINDS = ("mqtt", "coap", "http", "amqp", "custom")

US = 1
MS = 1_000
S = 1_000_000


def _span():
    return field(default=None, compare=False, repr=False, kw_only=True)


# -- types, literals, expressions -------------------------------------------


@dataclass(frozen=True)
class PrimType:
    kind: str
    members: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.kind not in PRIMITIVE_KINDS:
            raise ValueError(f"unknown primitive type {self.kind!r}")

    @property
    def is_finite(self) -> bool:
        return self.kind not in UNBOUNDED_KINDS

    def default(self) -> Any:
        return {"bool": False, "int": 0, "real": 0.0, "string": ""}.get(
            self.kind, self.members[0] if self.members else ""
        )

    def __str__(self) -> str:
        if self.kind == "enum":
            return "enum { " + ", ".join(self.members) + " }"
        return self.kind


@dataclass(frozen=True)
class Literal:
    """A typed constant; ``kind`` is one of the primitive kinds."""

    value: Any
    kind: str


@dataclass(frozen=True)
class Ref:
    """A property reference (``x``) or a payload-field reference (``P.x``)."""

    parts: tuple[str, ...]

    @property
    def dotted(self) -> str:
        return ".".join(self.parts)


@dataclass(frozen=True)
class Not:
    operand: "Expr"


COMPARISONS = ("=", "!=", "<", "<=", ">", ">=")
CONNECTIVES = ("and", "or")


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"


Expr = Union[Literal, Ref, Not, BinOp]


def expr_refs(expr: Expr):
    """Yield every :class:`Ref` in an expression tree, left to right."""
    if isinstance(expr, Ref):
        yield expr
    elif isinstance(expr, Not):
        yield from expr_refs(expr.operand)
    elif isinstance(expr, BinOp):
        yield from expr_refs(expr.left)
        yield from expr_refs(expr.right)


# -- system view --------------------------------------------------------------


@dataclass
class Contract:
    name: str
    assume: Expr
    guarantee: Expr
    span: Optional[SourceSpan] = _span()


@dataclass
class FlowPort:
    name: str
    direction: str
    payload_type: str
    span: Optional[SourceSpan] = _span()


@dataclass
class SystemBlock:
    name: str
    flow_ports: list[FlowPort] = field(default_factory=list)
    contracts: list[Contract] = field(default_factory=list)
    realizes: Optional[str] = None
    span: Optional[SourceSpan] = _span()

    def flow_port(self, name: str) -> Optional[FlowPort]:
        return next((p for p in self.flow_ports if p.name == name), None)


@dataclass
class Connector:
    source_block: str
    source_port: str
    target_block: str
    target_port: str
    span: Optional[SourceSpan] = _span()

    @property
    def label(self) -> str:
        return f"{self.source_block}.{self.source_port}->{self.target_block}.{self.target_port}"


@dataclass
class SystemView:
    blocks: list[SystemBlock] = field(default_factory=list)
    connections: list[Connector] = field(default_factory=list)

    def block(self, name: str) -> Optional[SystemBlock]:
        return next((b for b in self.blocks if b.name == name), None)


# -- software view ------------------------------------------------------------


@dataclass
class PayloadField:
    name: str
    type: PrimType
    span: Optional[SourceSpan] = _span()


@dataclass
class Payload:
    name: str
    fields: list[PayloadField] = field(default_factory=list)
    span: Optional[SourceSpan] = _span()

    def field_type(self, name: str) -> Optional[PrimType]:
        return next((f.type for f in self.fields if f.name == name), None)


@dataclass
class ComponentPort:
    name: str
    kind: str
    sends: list[str] = field(default_factory=list)
    receives: list[str] = field(default_factory=list)
    span: Optional[SourceSpan] = _span()


@dataclass
class Property:
    name: str
    type: PrimType
    initial: Literal
    span: Optional[SourceSpan] = _span()


@dataclass
class Parameter:
    name: str
    type: PrimType
    span: Optional[SourceSpan] = _span()


@dataclass
class TimingAnnotation:
    kind: str
    wcet: int
    period_or_miat: int
    deadline: int
    priority: Optional[int] = None
    span: Optional[SourceSpan] = _span()


@dataclass
class Operation:
    name: str
    parameters: list[Parameter] = field(default_factory=list)
    timing: Optional[TimingAnnotation] = None
    span: Optional[SourceSpan] = _span()


@dataclass
class IoTState:
    name: str
    on_entry: Optional[str] = None
    on_exit: Optional[str] = None
    span: Optional[SourceSpan] = _span()


@dataclass
class IoTEvent:
    name: str
    kind: str
    port: Optional[str] = None
    payload: Optional[str] = None
    effect: Optional[str] = None
    span: Optional[SourceSpan] = _span()


@dataclass
class IoTAction:
    """``send``/``receive`` use ``payload`` and ``port``; ``assign`` uses
    ``target`` (a property name) and ``value``."""

    name: str
    kind: str
    payload: Optional[str] = None
    port: Optional[str] = None
    target: Optional[str] = None
    value: Optional[Literal] = None
    span: Optional[SourceSpan] = _span()


@dataclass
class Transition:
    source: str
    target: str
    trigger: str
    guard: Optional[Expr] = None
    span: Optional[SourceSpan] = _span()


@dataclass
class StateMachine:
    name: str
    initial: str
    states: list[IoTState] = field(default_factory=list)
    transitions: list[Transition] = field(default_factory=list)
    events: list[IoTEvent] = field(default_factory=list)
    actions: list[IoTAction] = field(default_factory=list)
    span: Optional[SourceSpan] = _span()

    def state(self, name: Optional[str]) -> Optional[IoTState]:
        return next((s for s in self.states if s.name == name), None)

    def event(self, name: Optional[str]) -> Optional[IoTEvent]:
        return next((e for e in self.events if e.name == name), None)

    def action(self, name: Optional[str]) -> Optional[IoTAction]:
        return next((a for a in self.actions if a.name == name), None)


@dataclass
class SoftwareComponent:
    name: str
    subcomponents: list["SoftwareComponent"] = field(default_factory=list)
    ports: list[ComponentPort] = field(default_factory=list)
    payloads: list[Payload] = field(default_factory=list)
    properties: list[Property] = field(default_factory=list)
    operations: list[Operation] = field(default_factory=list)
    state_machine: Optional[StateMachine] = None
    span: Optional[SourceSpan] = _span()

    def port(self, name: Optional[str]) -> Optional[ComponentPort]:
        return next((p for p in self.ports if p.name == name), None)

    def property(self, name: Optional[str]) -> Optional[Property]:
        return next((p for p in self.properties if p.name == name), None)


# -- hardware, deployment, operational -----------------------------------------


@dataclass
class Processor:
    name: str
    cores: int = 1
    span: Optional[SourceSpan] = _span()


@dataclass
class DeploymentBinding:
    component: str
    processor: str
    span: Optional[SourceSpan] = _span()


@dataclass
class Protocol:
    name: str
    kind: str
    custom: Optional[str] = None
    server: Optional[str] = None
    span: Optional[SourceSpan] = _span()


@dataclass
class Server:
    name: str
    uri: str
    span: Optional[SourceSpan] = _span()


@dataclass
class Storage:
    name: str
    capacity: str
    span: Optional[SourceSpan] = _span()


@dataclass
class Mode:
    name: str
    span: Optional[SourceSpan] = _span()


@dataclass
class OperationalConfig:
    protocols: list[Protocol] = field(default_factory=list)
    servers: list[Server] = field(default_factory=list)
    storage: list[Storage] = field(default_factory=list)
    modes: list[Mode] = field(default_factory=list)


@dataclass
class IoTModel:
    name: str
    system: SystemView = field(default_factory=SystemView)
    software: list[SoftwareComponent] = field(default_factory=list)
    hardware: list[Processor] = field(default_factory=list)
    deployment: list[DeploymentBinding] = field(default_factory=list)
    operational: Optional[OperationalConfig] = None
    span: Optional[SourceSpan] = _span()

    def processor(self, name: str) -> Optional[Processor]:
        return next((p for p in self.hardware if p.name == name), None)


# -- analysis input -----------------------------------------------------------


@dataclass(frozen=True)
class TaskSpec:
    """One analyzable timing request, bound to a processor."""

    component: str
    operation: str
    kind: str
    wcet: int
    period_or_miat: int
    deadline: int
    priority: Optional[int] = None
    processor: Optional[str] = None

    @property
    def id(self) -> tuple[str, str]:
        return (self.component, self.operation)

    @property
    def label(self) -> str:
        return f"{self.component}.{self.operation}"


def iter_components(components, prefix: str = ""):
    """Yield ``(qualified_name, component)`` depth-first in declaration order."""
    for c in components:
        qname = f"{prefix}{c.name}"
        yield qname, c
        yield from iter_components(c.subcomponents, qname + ".")
