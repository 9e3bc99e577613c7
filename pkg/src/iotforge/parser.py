"""Tokenizer and recursive-descent parser for the ``.iot`` modeling language.

The grammar is documented in ``docs/language.md``.  Syntax errors inside a
top-level section are recovered by skipping to the end of that section, so a
single run can report several problems.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Optional

from .diagnostics import ERROR, Diagnostic, ParseError, SourceSpan
from .model import (
    COMPARISONS,
    MS,
    PROTOCOL_KINDS,
    S,
    US,
    BinOp,
    ComponentPort,
    Connector,
    Contract,
    DeploymentBinding,
    FlowPort,
    IoTAction,
    IoTEvent,
    IoTModel,
    IoTState,
    Literal,
    Mode,
    Not,
    Operation,
    OperationalConfig,
    Parameter,
    Payload,
    PayloadField,
    PrimType,
    Processor,
    Property,
    Protocol,
    Ref,
    Server,
    SoftwareComponent,
    StateMachine,
    Storage,
    SystemBlock,
    TimingAnnotation,
    Transition,
)

KEYWORDS = frozenset(
    """
    model system software hardware deployment operational
    block realizes port in out inout connect contract assume guarantee
    component provided required sends receives payload property operation
    timing kind periodic sporadic wcet period miat priority deadline
    statemachine init state onentry onexit event general incoming outgoing
    effect action send receive assign via on from to guard
    true false and or not bool int real string enum
    processor cores deploy protocol server storage capacity uri mode
    """.split()
)

DURATION_UNITS = {"us": US, "ms": MS, "s": S}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>//[^\n]*)
  | (?P<real>\d+\.\d+(?:[eE][+-]?\d+)?|\d+[eE][+-]?\d+)
  | (?P<int>\d+)
  | (?P<word>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<punct>->|!=|<=|>=|[{}()\[\];:,.=<>-])
    """,
    re.VERBOSE,
)

_ESCAPES = {"n": "\n", "t": "\t", '"': '"', "\\": "\\"}


@dataclass(frozen=True)
class Token:
    kind: str  # ident keyword int real duration string punct eof
    text: str
    line: int
    col: int
    end_line: int
    end_col: int
    value: object = None

    def describe(self) -> str:
        if self.kind == "eof":
            return "end of input"
        return repr(self.text)


def tokenize(source: str, file: str) -> tuple[list[Token], list[Diagnostic]]:
    tokens: list[Token] = []
    diags: list[Diagnostic] = []
    pos, line, line_start = 0, 1, 0
    n = len(source)
    while pos < n:
        col = pos - line_start + 1
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            ch = source[pos]
            msg = "unterminated string literal" if ch == '"' else f"unexpected character {ch!r}"
            diags.append(Diagnostic(ERROR, "P001", msg, SourceSpan(file, line, col, line, col + 1)))
            if ch == '"':
                nl = source.find("\n", pos)
                pos = n if nl < 0 else nl
            else:
                pos += 1
            continue
        kind = m.lastgroup
        text = m.group()
        end = m.end()
        if kind == "nl":
            line += 1
            line_start = end
            pos = end
            continue
        if kind in ("ws", "comment"):
            pos = end
            continue
        value: object = None
        if kind == "int":
            unit = re.match(r"[A-Za-z_][A-Za-z0-9_]*", source[end:])
            if unit:
                suffix = unit.group()
                if suffix not in DURATION_UNITS:
                    diags.append(
                        Diagnostic(
                            ERROR, "P001", f"invalid duration unit {suffix!r} (expected us, ms or s)",
                            SourceSpan(file, line, col, line, col + len(text) + len(suffix)),
                        )
                    )
                    pos = end + len(suffix)
                    continue
                kind = "duration"
                value = int(text) * DURATION_UNITS[suffix]
                text += suffix
                end += len(suffix)
            else:
                value = int(text)
        elif kind == "real":
            value = float(text)
        elif kind == "word":
            kind = "keyword" if text in KEYWORDS else "ident"
        elif kind == "string":
            value = re.sub(r"\\(.)", lambda e: _ESCAPES.get(e.group(1), e.group(1)), text[1:-1])
        tokens.append(Token(kind, text, line, col, line, col + len(text), value))
        pos = end
    col = pos - line_start + 1
    tokens.append(Token("eof", "", line, col, line, col))
    return tokens, diags


class _Abort(Exception):
    def __init__(self, diag: Diagnostic):
        self.diag = diag


SECTIONS = ("system", "software", "hardware", "deployment", "operational")


class Parser:
    def __init__(self, tokens: list[Token], file: str):
        self.toks = tokens
        self.file = file
        self.i = 0
        self.diags: list[Diagnostic] = []

    # -- token helpers --

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def at(self, *texts: str) -> bool:
        t = self.tok
        return t.kind in ("keyword", "punct") and t.text in texts

    def advance(self) -> Token:
        t = self.tok
        if t.kind != "eof":
            self.i += 1
        return t

    def error(self, message: str, tok: Optional[Token] = None, code: str = "P002") -> _Abort:
        t = tok or self.tok
        return _Abort(Diagnostic(ERROR, code, message, SourceSpan(self.file, t.line, t.col, t.end_line, t.end_col)))

    def expected(self, *what: str) -> _Abort:
        wanted = ", ".join(what)
        return self.error(f"expected {wanted} but found {self.tok.describe()}")

    def expect(self, text: str) -> Token:
        if not self.at(text):
            raise self.expected(repr(text))
        return self.advance()

    def ident(self) -> Token:
        t = self.tok
        if t.kind != "ident":
            if t.kind == "keyword":
                raise self.error(f"expected identifier but found reserved keyword {t.text!r}")
            raise self.expected("identifier")
        return self.advance()

    def qname(self) -> str:
        parts = [self.ident().text]
        while self.at("."):
            self.advance()
            parts.append(self.ident().text)
        return ".".join(parts)

    def duration(self) -> int:
        t = self.tok
        if t.kind != "duration":
            raise self.expected("duration (e.g. 5ms)")
        self.advance()
        return t.value  # type: ignore[return-value]

    def integer(self) -> int:
        t = self.tok
        if t.kind != "int":
            raise self.expected("integer")
        self.advance()
        return t.value  # type: ignore[return-value]

    def string(self) -> str:
        t = self.tok
        if t.kind != "string":
            raise self.expected("string literal")
        self.advance()
        return t.value  # type: ignore[return-value]

    def span_from(self, start: Token) -> SourceSpan:
        last = self.toks[self.i - 1] if self.i > 0 else start
        return SourceSpan(self.file, start.line, start.col, last.end_line, last.end_col)

    def one_of(self, *choices: str) -> str:
        if not self.at(*choices):
            raise self.expected(*(repr(c) for c in choices))
        return self.advance().text

    # -- recovery --

    def report(self, abort: _Abort) -> None:
        d = abort.diag
        # one diagnostic per position: later ones at the same spot are cascades
        start = (d.span.start_line, d.span.start_col)
        if all((e.span.start_line, e.span.start_col) != start for e in self.diags):
            self.diags.append(d)

    def skip_block(self, start: int) -> None:
        """Skip to just past the brace that closes the block opened after ``start``."""
        depth = 0
        opened = False
        for j in range(start, self.i):
            t = self.toks[j]
            if t.kind == "punct" and t.text == "{":
                depth += 1
                opened = True
            elif t.kind == "punct" and t.text == "}":
                depth -= 1
        while self.tok.kind != "eof":
            t = self.advance()
            if t.kind == "punct" and t.text == "{":
                depth += 1
                opened = True
            elif t.kind == "punct" and t.text == "}":
                depth -= 1
                if opened and depth <= 0:
                    return

    # -- grammar --

    def parse_model(self) -> IoTModel:
        start = self.tok
        self.expect("model")
        name = self.ident().text
        self.expect("{")
        model = IoTModel(name)
        seen: set[str] = set()
        while not self.at("}") and self.tok.kind != "eof":
            sec_start = self.i
            kw = self.tok
            try:
                if not self.at(*SECTIONS):
                    raise self.expected(*(repr(s) for s in SECTIONS), "'}'")
                if kw.text in seen:
                    self.report(self.error(f"duplicate {kw.text!r} section", kw, code="P003"))
                    self.skip_block(sec_start)
                    continue
                seen.add(kw.text)
                self.advance()
                getattr(self, "section_" + kw.text)(model)
            except _Abort as abort:
                self.report(abort)
                if self.i == sec_start:
                    self.advance()
                self.skip_block(sec_start)
        try:
            self.expect("}")
            if self.tok.kind != "eof":
                raise self.expected("end of input")
        except _Abort as abort:
            self.report(abort)
        model.span = self.span_from(start)
        return model

    def block_items(self, handlers: dict, what: str) -> None:
        self.expect("{")
        while not self.at("}"):
            if not self.at(*handlers):
                raise self.expected(*(repr(h) for h in handlers), "'}'")
            handlers[self.tok.text]()
        self.expect("}")

    # system view

    def section_system(self, model: IoTModel) -> None:
        sv = model.system
        self.block_items(
            {
                "block": lambda: sv.blocks.append(self.block()),
                "connect": lambda: sv.connections.append(self.connect()),
            },
            "system item",
        )

    def block(self) -> SystemBlock:
        start = self.expect("block")
        name = self.ident().text
        realizes = None
        if self.at("realizes"):
            self.advance()
            realizes = self.qname()
        b = SystemBlock(name, realizes=realizes)
        self.block_items(
            {
                "port": lambda: b.flow_ports.append(self.flow_port()),
                "contract": lambda: b.contracts.append(self.contract()),
            },
            "block item",
        )
        b.span = self.span_from(start)
        return b

    def flow_port(self) -> FlowPort:
        start = self.expect("port")
        direction = self.one_of("in", "out", "inout")
        name = self.ident().text
        self.expect(":")
        payload = self.ident().text
        self.expect(";")
        return FlowPort(name, direction, payload, span=self.span_from(start))

    def contract(self) -> Contract:
        start = self.expect("contract")
        name = self.ident().text
        self.expect("assume")
        assume = self.bracketed_expr()
        self.expect("guarantee")
        guarantee = self.bracketed_expr()
        self.expect(";")
        return Contract(name, assume, guarantee, span=self.span_from(start))

    def connect(self) -> Connector:
        start = self.expect("connect")
        sb = self.ident().text
        self.expect(".")
        sp = self.ident().text
        self.expect("->")
        tb = self.ident().text
        self.expect(".")
        tp = self.ident().text
        self.expect(";")
        return Connector(sb, sp, tb, tp, span=self.span_from(start))

    # software view

    def section_software(self, model: IoTModel) -> None:
        self.block_items({"component": lambda: model.software.append(self.component())}, "component")

    def component(self) -> SoftwareComponent:
        start = self.expect("component")
        c = SoftwareComponent(self.ident().text)

        def statemachine():
            kw = self.tok
            sm = self.statemachine()
            if c.state_machine is not None:
                self.report(self.error(f"component {c.name!r} declares more than one state machine", kw, code="P003"))
            else:
                c.state_machine = sm

        self.block_items(
            {
                "provided": lambda: c.ports.append(self.port()),
                "required": lambda: c.ports.append(self.port()),
                "payload": lambda: c.payloads.append(self.payload()),
                "property": lambda: c.properties.append(self.property()),
                "operation": lambda: c.operations.append(self.operation()),
                "statemachine": statemachine,
                "component": lambda: c.subcomponents.append(self.component()),
            },
            "component member",
        )
        c.span = self.span_from(start)
        return c

    def ident_list(self) -> list[str]:
        names = [self.ident().text]
        while self.at(","):
            self.advance()
            names.append(self.ident().text)
        return names

    def port(self) -> ComponentPort:
        start = self.tok
        kind = self.one_of("provided", "required")
        self.expect("port")
        p = ComponentPort(self.ident().text, kind)
        if self.at("sends"):
            self.advance()
            p.sends = self.ident_list()
        if self.at("receives"):
            self.advance()
            p.receives = self.ident_list()
        self.expect(";")
        p.span = self.span_from(start)
        return p

    def type_(self) -> PrimType:
        kind = self.one_of("bool", "int", "real", "string", "enum")
        if kind != "enum":
            return PrimType(kind)
        self.expect("{")
        members = self.ident_list()
        self.expect("}")
        return PrimType("enum", tuple(members))

    def payload(self) -> Payload:
        start = self.expect("payload")
        p = Payload(self.ident().text)
        self.expect("{")
        while not self.at("}"):
            fstart = self.tok
            fname = self.ident().text
            self.expect(":")
            ftype = self.type_()
            self.expect(";")
            p.fields.append(PayloadField(fname, ftype, span=self.span_from(fstart)))
        self.expect("}")
        p.span = self.span_from(start)
        return p

    def literal(self) -> Literal:
        t = self.tok
        if self.at("true", "false"):
            self.advance()
            return Literal(t.text == "true", "bool")
        sign = 1
        if self.at("-"):
            self.advance()
            sign = -1
            t = self.tok
            if t.kind not in ("int", "real"):
                raise self.expected("number")
        if t.kind == "int":
            self.advance()
            return Literal(sign * t.value, "int")  # type: ignore[operator]
        if t.kind == "real":
            self.advance()
            return Literal(sign * t.value, "real")  # type: ignore[operator]
        if t.kind == "string":
            self.advance()
            return Literal(t.value, "string")
        if t.kind == "ident":
            self.advance()
            return Literal(t.text, "enum")
        raise self.expected("literal")

    def property(self) -> Property:
        start = self.expect("property")
        name = self.ident().text
        self.expect(":")
        typ = self.type_()
        self.expect("=")
        init = self.literal()
        self.expect(";")
        return Property(name, typ, init, span=self.span_from(start))

    def operation(self) -> Operation:
        start = self.expect("operation")
        op = Operation(self.ident().text)
        self.expect("(")
        if not self.at(")"):
            while True:
                pstart = self.tok
                pname = self.ident().text
                self.expect(":")
                op.parameters.append(Parameter(pname, self.type_(), span=self.span_from(pstart)))
                if not self.at(","):
                    break
                self.advance()
        self.expect(")")
        if self.at("timing"):
            op.timing = self.timing()
        self.expect(";")
        op.span = self.span_from(start)
        return op

    def timing(self) -> TimingAnnotation:
        start = self.expect("timing")
        self.expect("{")
        self.expect("kind")
        self.expect(":")
        kind = self.one_of("periodic", "sporadic")
        self.expect("wcet")
        self.expect(":")
        wcet = self.duration()
        self.expect("period" if kind == "periodic" else "miat")
        self.expect(":")
        period = self.duration()
        priority = None
        if self.at("priority"):
            self.advance()
            self.expect(":")
            priority = self.integer()
        self.expect("deadline")
        self.expect(":")
        deadline = self.duration()
        self.expect("}")
        return TimingAnnotation(kind, wcet, period, deadline, priority, span=self.span_from(start))

    def statemachine(self) -> StateMachine:
        start = self.expect("statemachine")
        name = self.ident().text
        self.expect("init")
        sm = StateMachine(name, self.ident().text)
        self.block_items(
            {
                "state": lambda: sm.states.append(self.state()),
                "event": lambda: sm.events.append(self.event()),
                "action": lambda: sm.actions.append(self.action()),
                "on": lambda: sm.transitions.append(self.transition()),
            },
            "state machine item",
        )
        sm.span = self.span_from(start)
        return sm

    def state(self) -> IoTState:
        start = self.expect("state")
        st = IoTState(self.ident().text)
        self.expect("{")
        while not self.at("}"):
            kw = self.tok
            slot = self.one_of("onentry", "onexit")
            ref = self.ident().text
            self.expect(";")
            attr = "on_entry" if slot == "onentry" else "on_exit"
            if getattr(st, attr) is not None:
                self.report(self.error(f"state {st.name!r} declares {slot} twice", kw, code="P003"))
            else:
                setattr(st, attr, ref)
        self.expect("}")
        st.span = self.span_from(start)
        return st

    def event(self) -> IoTEvent:
        start = self.expect("event")
        name = self.ident().text
        self.expect("kind")
        ev = IoTEvent(name, self.one_of("general", "incoming", "outgoing"))
        if self.at("port"):
            self.advance()
            ev.port = self.ident().text
        if self.at("payload"):
            self.advance()
            ev.payload = self.ident().text
        if self.at("effect"):
            self.advance()
            ev.effect = self.ident().text
        self.expect(";")
        ev.span = self.span_from(start)
        return ev

    def action(self) -> IoTAction:
        start = self.expect("action")
        name = self.ident().text
        kind = self.one_of("send", "receive", "assign")
        if kind == "assign":
            target = self.ident().text
            self.expect("=")
            act = IoTAction(name, kind, target=target, value=self.literal())
        else:
            payload = self.ident().text
            self.expect("via")
            act = IoTAction(name, kind, payload=payload, port=self.ident().text)
        self.expect(";")
        act.span = self.span_from(start)
        return act

    def transition(self) -> Transition:
        start = self.expect("on")
        trigger = self.ident().text
        self.expect("from")
        source = self.ident().text
        self.expect("to")
        target = self.ident().text
        guard = None
        if self.at("guard"):
            self.advance()
            guard = self.bracketed_expr()
        self.expect(";")
        return Transition(source, target, trigger, guard, span=self.span_from(start))

    # hardware / deployment / operational

    def section_hardware(self, model: IoTModel) -> None:
        def processor():
            start = self.expect("processor")
            name = self.ident().text
            cores = 1
            if self.at("cores"):
                self.advance()
                cores = self.integer()
            self.expect(";")
            model.hardware.append(Processor(name, cores, span=self.span_from(start)))

        self.block_items({"processor": processor}, "processor")

    def section_deployment(self, model: IoTModel) -> None:
        def deploy():
            start = self.expect("deploy")
            comp = self.qname()
            self.expect("on")
            proc = self.ident().text
            self.expect(";")
            model.deployment.append(DeploymentBinding(comp, proc, span=self.span_from(start)))

        self.block_items({"deploy": deploy}, "deployment binding")

    def section_operational(self, model: IoTModel) -> None:
        op = OperationalConfig()
        model.operational = op

        def protocol():
            start = self.expect("protocol")
            name = self.ident().text
            self.expect("kind")
            t = self.tok
            if t.kind != "ident" or t.text not in PROTOCOL_KINDS:
                raise self.expected(*(repr(k) for k in PROTOCOL_KINDS))
            self.advance()
            proto = Protocol(name, t.text)
            if t.text == "custom":
                proto.custom = self.string()
            if self.at("server"):
                self.advance()
                proto.server = self.ident().text
            self.expect(";")
            proto.span = self.span_from(start)
            op.protocols.append(proto)

        def server():
            start = self.expect("server")
            name = self.ident().text
            self.expect("uri")
            uri = self.string()
            self.expect(";")
            op.servers.append(Server(name, uri, span=self.span_from(start)))

        def storage():
            start = self.expect("storage")
            name = self.ident().text
            self.expect("capacity")
            cap = self.string()
            self.expect(";")
            op.storage.append(Storage(name, cap, span=self.span_from(start)))

        def mode():
            start = self.expect("mode")
            name = self.ident().text
            self.expect(";")
            op.modes.append(Mode(name, span=self.span_from(start)))

        self.block_items(
            {"protocol": protocol, "server": server, "storage": storage, "mode": mode},
            "operational item",
        )

    # expressions

    def bracketed_expr(self):
        self.expect("[")
        e = self.expr()
        self.expect("]")
        return e

    def expr(self):
        left = self.and_expr()
        while self.at("or"):
            self.advance()
            left = BinOp("or", left, self.and_expr())
        return left

    def and_expr(self):
        left = self.unary()
        while self.at("and"):
            self.advance()
            left = BinOp("and", left, self.unary())
        return left

    def unary(self):
        if self.at("not"):
            self.advance()
            return Not(self.unary())
        left = self.atom()
        if self.at(*COMPARISONS):
            op = self.advance().text
            left = BinOp(op, left, self.atom())
        return left

    def atom(self):
        if self.at("("):
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        if self.tok.kind == "ident":
            parts = [self.advance().text]
            while self.at("."):
                self.advance()
                parts.append(self.ident().text)
            return Ref(tuple(parts))
        if self.at("true", "false", "-") or self.tok.kind in ("int", "real", "string"):
            return self.literal()
        raise self.expected("expression")


def parse_model(source: str, file: str = "<string>") -> IoTModel:
    """Parse ``source`` into an :class:`IoTModel`.

    Raises :class:`ParseError` with one or more P-coded diagnostics.
    """
    tokens, lex_diags = tokenize(source, file)
    if lex_diags:
        raise ParseError(lex_diags)
    parser = Parser(tokens, file)
    try:
        model = parser.parse_model()
    except _Abort as abort:
        parser.report(abort)
        model = None
    if parser.diags:
        raise ParseError(parser.diags)
    return model


def parse_file(path, file: Optional[str] = None) -> IoTModel:
    from pathlib import Path

    p = Path(path)
    return parse_model(p.read_text(encoding="utf-8"), file or str(path))
