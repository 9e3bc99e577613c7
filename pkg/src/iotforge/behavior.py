"""Asynchronous execution of the composed component state machines.

Semantics, in short:

* Every component (at any nesting depth) that owns a state machine takes part.
  Each has a current state, a valuation of its properties and a bounded FIFO
  input queue.
* Interleaving: one component fires one transition per step.
* A transition is enabled when its trigger is a general or outgoing event, or
  an incoming event whose port and payload match the head of the queue, and
  its guard holds.  Guard names resolve to a field of the head message first,
  then to a property.
* Firing order: OnExit effect of the source state, consumption of the head
  message, the trigger event's effect, the state change, OnEntry effect of
  the target state.  Self-loops exit and re-enter.
* ``send`` builds the message from same-named properties (type defaults for
  the rest) and routes it point-to-point through the system-view connector to
  the component realized by the peer block.  Messages to unconnected ports or
  to components without a state machine leave the system.  Enqueueing into a
  full queue drops the message and marks the configuration overflowed.
* ``receive`` copies the fields of the message consumed in this step into
  same-named properties; ``assign`` stores a literal.
* A deadlock is a configuration with no enabled move and at least one
  non-empty queue.  Quiescence with all queues empty is not a deadlock.

Values only ever come from literals in the model, so every valuation domain
is finite and exploration is exact.  ``abstract_guards=True`` additionally
treats guards that read int, real or string values as unknown: such
transitions are enabled under an assumption and findings are labelled
potential.
"""
from __future__ import annotations

import hashlib
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Any, Optional

from .model import (
    UNBOUNDED_KINDS,
    BinOp,
    IoTModel,
    Literal,
    Not,
    Ref,
    SoftwareComponent,
    expr_refs,
)
from .symbols import collect_symbols, connected_peer
from .validator import ref_type, trigger_payload

DEFAULT_QUEUE_BOUND = 4
DEFAULT_MAX_CONFIGS = 100_000


@dataclass(frozen=True)
class Message:
    port: str  # port of the receiving component
    payload: str
    fields: tuple[tuple[str, Any], ...] = ()

    def __str__(self) -> str:
        if not self.fields:
            return f"{self.payload}@{self.port}"
        args = ", ".join(f"{k}={v!r}" for k, v in self.fields)
        return f"{self.payload}({args})@{self.port}"


@dataclass(frozen=True)
class LocalConfig:
    state: str
    values: tuple[tuple[str, Any], ...] = ()
    queue: tuple[Message, ...] = ()


@dataclass(frozen=True)
class GlobalConfig:
    components: tuple[tuple[str, LocalConfig], ...]
    overflow: tuple[str, ...] = ()

    def local(self, name: str) -> LocalConfig:
        return dict(self.components)[name]

    @property
    def quiet(self) -> bool:
        return all(not lc.queue for _, lc in self.components)

    def digest(self) -> str:
        return hashlib.sha256(repr(self).encode()).hexdigest()[:16]

    def describe(self) -> str:
        parts = []
        for name, lc in self.components:
            vals = ",".join(f"{k}={v!r}" for k, v in lc.values)
            queue = " ".join(str(m) for m in lc.queue)
            parts.append(f"{name}:{lc.state}" + (f"{{{vals}}}" if vals else "") + f"[{queue}]")
        text = " | ".join(parts)
        if self.overflow:
            text += " overflow:" + ",".join(self.overflow)
        return text


@dataclass(frozen=True)
class Emission:
    destination: Optional[str]  # None: left the system
    message: Message

    def __str__(self) -> str:
        target = f"{self.destination}.{self.message.port}" if self.destination else "env"
        return f"{self.message.payload}->{target}"


@dataclass(frozen=True)
class Move:
    component: str
    transition: int  # index into the component's transition list
    source: str
    trigger: str
    target: str
    consumed: Optional[Message] = None
    emitted: tuple[Emission, ...] = ()
    assumed: bool = False  # guard outcome assumed under abstraction

    @property
    def key(self) -> tuple[str, int]:
        return (self.component, self.transition)

    def describe(self) -> str:
        text = f"{self.component} {self.source} --{self.trigger}--> {self.target}"
        if self.consumed is not None:
            text += f" [consumed {self.consumed}]"
        if self.emitted:
            text += " [emitted " + ", ".join(str(e) for e in self.emitted) + "]"
        if self.assumed:
            text += " [assumed guard]"
        return text


class QueueOverflow(Exception):
    pass


def _eval(expr, env: dict) -> Any:
    if isinstance(expr, Literal):
        return expr.value
    if isinstance(expr, Ref):
        if expr.dotted in env:
            return env[expr.dotted]
        return env.get(expr.parts[-1], expr.parts[-1]) if len(expr.parts) == 1 else env[expr.dotted]
    if isinstance(expr, Not):
        return not _eval(expr.operand, env)
    if isinstance(expr, BinOp):
        if expr.op == "and":
            return _eval(expr.left, env) and _eval(expr.right, env)
        if expr.op == "or":
            return _eval(expr.left, env) or _eval(expr.right, env)
        a, b = _eval(expr.left, env), _eval(expr.right, env)
        return {
            "=": lambda: a == b,
            "!=": lambda: a != b,
            "<": lambda: a < b,
            "<=": lambda: a <= b,
            ">": lambda: a > b,
            ">=": lambda: a >= b,
        }[expr.op]()
    raise TypeError(f"not an expression: {expr!r}")


def _coerce(value, typ):
    if typ.kind == "real" and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    return value


class Behavior:
    """Executable view of a validated model."""

    def __init__(self, model: IoTModel, queue_bound: int = DEFAULT_QUEUE_BOUND, abstract_guards: bool = False):
        self.model = model
        self.queue_bound = queue_bound
        self.abstract_guards = abstract_guards
        self.table, _ = collect_symbols(model)
        self.components: dict[str, SoftwareComponent] = {
            q: c for q, c in sorted(self.table.components.items()) if c.state_machine is not None
        }
        self.routes: dict[tuple[str, str], Optional[tuple[str, str]]] = {}
        for qname, comp in self.components.items():
            for port in comp.ports:
                peer = connected_peer(model, qname, port.name, self.table)
                self.routes[(qname, port.name)] = peer if peer and peer[0] in self.components else None
        self._abstract_cache: dict[tuple[str, int], bool] = {}

    # -- configurations --

    def initial_config(self) -> GlobalConfig:
        locals_: dict[str, dict] = {}
        states: dict[str, str] = {}
        queues: dict[str, list[Message]] = {}
        for qname, comp in self.components.items():
            states[qname] = comp.state_machine.initial
            locals_[qname] = {p.name: _coerce(p.initial.value, p.type) for p in comp.properties}
            queues[qname] = []
        overflow: list[str] = []
        emitted: list[Emission] = []
        for qname, comp in self.components.items():
            sm = comp.state_machine
            st = sm.state(sm.initial)
            if st is not None:
                self._event_effect(qname, st.on_entry, locals_[qname], None, queues, emitted, overflow)
        return self._freeze(states, locals_, queues, overflow)

    def _freeze(self, states, locals_, queues, overflow) -> GlobalConfig:
        comps = tuple(
            (q, LocalConfig(states[q], tuple(sorted(locals_[q].items())), tuple(queues[q])))
            for q in self.components
        )
        return GlobalConfig(comps, tuple(sorted(set(overflow))))

    # -- effects --

    def _event_effect(self, qname, event_name, values, msg, queues, emitted, overflow) -> None:
        sm = self.components[qname].state_machine
        ev = sm.event(event_name)
        if ev is None or ev.effect is None:
            return
        act = sm.action(ev.effect)
        if act is not None:
            self._action(qname, act, values, msg, queues, emitted, overflow)

    def _action(self, qname, act, values, msg, queues, emitted, overflow) -> None:
        comp = self.components[qname]
        if act.kind == "assign":
            prop = comp.property(act.target)
            values[act.target] = _coerce(act.value.value, prop.type) if prop else act.value.value
        elif act.kind == "receive":
            if msg is None or msg.payload != act.payload or msg.port != act.port:
                return
            payload = self.table.payload(qname, msg.payload)
            for fname, fval in msg.fields:
                prop = comp.property(fname)
                ftype = payload.field_type(fname)
                if prop is not None and (
                    prop.type == ftype or (prop.type.kind == "real" and ftype.kind == "int")
                ):
                    values[fname] = _coerce(fval, prop.type)
        elif act.kind == "send":
            payload = self.table.payload(qname, act.payload)
            fields = []
            for f in payload.fields:
                prop = comp.property(f.name)
                if prop is not None and (
                    prop.type == f.type or (f.type.kind == "real" and prop.type.kind == "int")
                ):
                    fields.append((f.name, _coerce(values[f.name], f.type)))
                else:
                    fields.append((f.name, f.type.default()))
            route = self.routes.get((qname, act.port))
            if route is None:
                emitted.append(Emission(None, Message(act.port, act.payload, tuple(fields))))
                return
            dest, dest_port = route
            message = Message(dest_port, act.payload, tuple(fields))
            emitted.append(Emission(dest, message))
            if len(queues[dest]) >= self.queue_bound:
                overflow.append(dest)
            else:
                queues[dest].append(message)

    # -- moves --

    def _guard_unknown(self, qname: str, index: int) -> bool:
        key = (qname, index)
        if key not in self._abstract_cache:
            comp = self.components[qname]
            tr = comp.state_machine.transitions[index]
            payload = trigger_payload(self.table, qname, comp.state_machine, tr)
            unknown = False
            if tr.guard is not None:
                for ref in expr_refs(tr.guard):
                    t = ref_type(ref, comp, payload)
                    if t is not None and t.kind in UNBOUNDED_KINDS:
                        unknown = True
            self._abstract_cache[key] = unknown
        return self._abstract_cache[key]

    def enabled_moves(self, config: GlobalConfig) -> list[Move]:
        moves: list[Move] = []
        if config.overflow:
            return moves
        for qname, lc in config.components:
            sm = self.components[qname].state_machine
            head = lc.queue[0] if lc.queue else None
            for index, tr in enumerate(sm.transitions):
                if tr.source != lc.state:
                    continue
                ev = sm.event(tr.trigger)
                if ev is None:
                    continue
                msg = None
                if ev.kind == "incoming":
                    if head is None or head.port != ev.port or head.payload != ev.payload:
                        continue
                    msg = head
                assumed = False
                if tr.guard is not None:
                    if self.abstract_guards and self._guard_unknown(qname, index):
                        assumed = True
                    else:
                        env = dict(lc.values)
                        if msg is not None:
                            for fname, fval in msg.fields:
                                env[fname] = fval
                                env[f"{msg.payload}.{fname}"] = fval
                        if not _eval(tr.guard, env):
                            continue
                _, emitted = self._fire(config, qname, index, msg)
                moves.append(Move(qname, index, tr.source, tr.trigger, tr.target, msg, tuple(emitted), assumed))
        return moves

    def _fire(self, config: GlobalConfig, qname: str, index: int, msg: Optional[Message]):
        sm = self.components[qname].state_machine
        tr = sm.transitions[index]
        states = {q: lc.state for q, lc in config.components}
        locals_ = {q: dict(lc.values) for q, lc in config.components}
        queues = {q: list(lc.queue) for q, lc in config.components}
        values = locals_[qname]
        emitted: list[Emission] = []
        overflow: list[str] = []
        src = sm.state(tr.source)
        self._event_effect(qname, src.on_exit if src else None, values, msg, queues, emitted, overflow)
        if msg is not None:
            queues[qname].pop(0)
        self._event_effect(qname, tr.trigger, values, msg, queues, emitted, overflow)
        states[qname] = tr.target
        dst = sm.state(tr.target)
        self._event_effect(qname, dst.on_entry if dst else None, values, msg, queues, emitted, overflow)
        return self._freeze(states, locals_, queues, overflow), emitted

    def step(self, config: GlobalConfig, move: Move) -> GlobalConfig:
        if move not in self.enabled_moves(config):
            raise ValueError(f"move is not enabled: {move.describe()}")
        return self._fire(config, move.component, move.transition, move.consumed)[0]

    def is_deadlock(self, config: GlobalConfig, moves: list[Move]) -> bool:
        if config.overflow or config.quiet:
            return False
        if self.abstract_guards:
            return all(m.assumed for m in moves)
        return not moves


# -- traces and reports ---------------------------------------------------------


@dataclass
class Trace:
    moves: list[Move]
    reason: str
    final: GlobalConfig
    seed: Optional[int] = None

    def format(self) -> str:
        lines = [f"step {k}: {m.describe()}" for k, m in enumerate(self.moves, 1)]
        lines.append(f"end: {self.reason} after {len(self.moves)} steps")
        return "\n".join(lines) + "\n"

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "steps": [_move_dict(k, m) for k, m in enumerate(self.moves, 1)],
            "reason": self.reason,
            "final": self.final.describe(),
        }


def _move_dict(k: int, m: Move) -> dict:
    return {
        "step": k,
        "component": m.component,
        "source": m.source,
        "event": m.trigger,
        "target": m.target,
        "consumed": str(m.consumed) if m.consumed else None,
        "emitted": [str(e) for e in m.emitted],
        "assumed": m.assumed,
    }


@dataclass
class Finding:
    digest: str
    config: GlobalConfig
    witness: list[Move]
    component: Optional[str] = None
    potential: bool = False

    def to_dict(self) -> dict:
        d = {
            "digest": self.digest,
            "config": self.config.describe(),
            "potential": self.potential,
            "witness": [_move_dict(k, m) for k, m in enumerate(self.witness, 1)],
        }
        if self.component is not None:
            d["component"] = self.component
        return d


@dataclass
class ExplorationReport:
    reachable_configs: int
    deadlocks: list[Finding] = field(default_factory=list)
    overflows: list[Finding] = field(default_factory=list)
    truncated: bool = False
    abstracted: bool = False

    @property
    def clean(self) -> bool:
        return not self.deadlocks and not self.overflows

    def to_dict(self) -> dict:
        return {
            "reachable_configs": self.reachable_configs,
            "truncated": self.truncated,
            "abstracted": self.abstracted,
            "deadlocks": [f.to_dict() for f in self.deadlocks],
            "overflows": [f.to_dict() for f in self.overflows],
        }

    def format(self) -> str:
        lines = [f"reachable configurations: {self.reachable_configs}" + (" (truncated)" if self.truncated else "")]
        for kind, findings in (("deadlock", self.deadlocks), ("overflow", self.overflows)):
            for f in findings:
                label = f"potential {kind}" if f.potential else kind
                where = f" in {f.component}" if f.component else ""
                lines.append(f"{label}{where} {f.digest}: {f.config.describe()}")
                lines.extend(f"  step {k}: {m.describe()}" for k, m in enumerate(f.witness, 1))
        if not self.deadlocks and not self.overflows:
            lines.append("no deadlocks or overflows")
        return "\n".join(lines) + "\n"


# -- public operations ------------------------------------------------------------


def initial_config(model: IoTModel, queue_bound: int = DEFAULT_QUEUE_BOUND) -> GlobalConfig:
    return Behavior(model, queue_bound).initial_config()


def enabled_moves(model: IoTModel, config: GlobalConfig, queue_bound: int = DEFAULT_QUEUE_BOUND,
                  abstract_guards: bool = False) -> list[Move]:
    return Behavior(model, queue_bound, abstract_guards).enabled_moves(config)


def step(model: IoTModel, config: GlobalConfig, move: Move, queue_bound: int = DEFAULT_QUEUE_BOUND,
         abstract_guards: bool = False) -> GlobalConfig:
    return Behavior(model, queue_bound, abstract_guards).step(config, move)


def replay(model: IoTModel, moves, queue_bound: int = DEFAULT_QUEUE_BOUND, abstract_guards: bool = False) -> GlobalConfig:
    """Re-execute ``moves`` from the initial configuration."""
    b = Behavior(model, queue_bound, abstract_guards)
    config = b.initial_config()
    for m in moves:
        config = b.step(config, m)
    return config


def run_random(model: IoTModel, steps: int, seed: int, queue_bound: int = DEFAULT_QUEUE_BOUND) -> Trace:
    """Random walk choosing uniformly among enabled moves with a seeded generator."""
    b = Behavior(model, queue_bound)
    rng = random.Random(seed)
    config = b.initial_config()
    moves: list[Move] = []
    reason = "steps-exhausted"
    while True:
        if config.overflow:
            reason = "overflow"
            break
        if len(moves) >= steps:
            break
        enabled = b.enabled_moves(config)
        if not enabled:
            reason = "deadlock-or-quiescence"
            break
        move = enabled[rng.randrange(len(enabled))]
        config = b.step(config, move)
        moves.append(move)
    return Trace(moves, reason, config, seed)


def explore(model: IoTModel, queue_bound: int = DEFAULT_QUEUE_BOUND, max_configs: int = DEFAULT_MAX_CONFIGS,
            abstract_guards: bool = False) -> ExplorationReport:
    """Breadth-first reachability over global configurations.

    Reports every reachable deadlock and every overflow with a shortest
    witness.  Overflowed configurations are not expanded.
    """
    b = Behavior(model, queue_bound, abstract_guards)
    init = b.initial_config()
    parent: dict[str, Optional[tuple[str, Move]]] = {init.digest(): None}
    report = ExplorationReport(0, abstracted=abstract_guards)

    def witness(digest: str) -> list[Move]:
        path = []
        while parent[digest] is not None:
            digest, move = parent[digest]
            path.append(move)
        return path[::-1]

    frontier = deque([init])
    if init.overflow:
        report.overflows.extend(
            Finding(init.digest(), init, [], c, abstract_guards) for c in init.overflow
        )
        frontier.clear()
    while frontier:
        config = frontier.popleft()
        digest = config.digest()
        moves = b.enabled_moves(config)
        if b.is_deadlock(config, moves):
            report.deadlocks.append(Finding(digest, config, witness(digest), None, abstract_guards))
        for move in moves:
            nxt = b._fire(config, move.component, move.transition, move.consumed)[0]
            nd = nxt.digest()
            if nd in parent:
                continue
            if len(parent) >= max_configs:
                report.truncated = True
                continue
            parent[nd] = (digest, move)
            if nxt.overflow:
                report.overflows.extend(
                    Finding(nd, nxt, witness(nd), c, abstract_guards) for c in nxt.overflow
                )
            else:
                frontier.append(nxt)
    report.reachable_configs = len(parent)
    return report
