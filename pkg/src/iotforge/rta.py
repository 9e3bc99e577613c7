"""Fixed-priority response-time analysis.

Per processor: derive the task set, complete priorities deadline-monotonically,
partition the tasks onto cores (first-fit decreasing utilization) and solve the
classic response-time recurrence

    w(k+1) = C_i + sum over higher-priority j of ceil(w(k) / T_j) * C_j

on each core.  Sporadic tasks are analysed at their minimum inter-arrival
time.  Deadlines are constrained (D <= T), so the first fixed point is the
worst-case response time and no busy-period extension is needed.

``simulate_schedule`` is an independent discrete-time preemptive simulator
used as an oracle for the recurrence.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import reduce
from typing import Optional

from .model import IoTModel, TaskSpec
from .symbols import UnknownElementError, collect_symbols, deployed_task_set

SCHEDULABLE = "schedulable"
UNSCHEDULABLE = "unschedulable"
OVERLOAD = "overload"


class EmptyTaskSetError(ValueError):
    pass


class DuplicatePriorityError(ValueError):
    pass


def utilization(tasks) -> Fraction:
    """Exact total utilization ``sum(C / T)``."""
    return sum((Fraction(t.wcet, t.period_or_miat) for t in tasks), Fraction(0))


def hyperperiod(tasks) -> int:
    """Least common multiple of all periods (minimum inter-arrival times)."""
    tasks = list(tasks)
    if not tasks:
        raise EmptyTaskSetError("hyperperiod of an empty task set")
    return reduce(math.lcm, (t.period_or_miat for t in tasks))


def _tie_key(t: TaskSpec):
    return (t.deadline, t.component, t.operation)


def assign_priorities(tasks) -> list[TaskSpec]:
    """Fill in missing priorities deadline-monotonically.

    Explicit priorities are kept and the remaining tasks are numbered after
    the largest explicit one, shorter deadline first; ties go by component
    then operation name.  If explicit priorities collide, every task is
    renumbered 1..n in (priority, deadline, component, operation) order so
    that the result is unique.  Output keeps the input order.
    """
    tasks = list(tasks)
    explicit = [t for t in tasks if t.priority is not None]
    implicit = sorted((t for t in tasks if t.priority is None), key=_tie_key)
    assigned: dict[tuple[str, str], int] = {}
    if len({t.priority for t in explicit}) == len(explicit):
        base = max((t.priority for t in explicit), default=0)
        for t in explicit:
            assigned[t.id] = t.priority
    else:
        base = 0
        for rank, t in enumerate(sorted(explicit, key=lambda t: (t.priority,) + _tie_key(t)), 1):
            assigned[t.id] = rank
            base = rank
    for offset, t in enumerate(implicit, 1):
        assigned[t.id] = base + offset
    return [replace(t, priority=assigned[t.id]) for t in tasks]


@dataclass(frozen=True)
class ResponseResult:
    task: TaskSpec
    response_time: Optional[int]  # None when the recurrence passed the deadline
    iterations: int
    schedulable: bool

    @property
    def diverged(self) -> bool:
        return self.response_time is None


def response_time(task: TaskSpec, higher_priority) -> ResponseResult:
    """Solve the recurrence for ``task`` under interference from ``higher_priority``.

    Starts at ``w = C``; stops at the fixed point, or as soon as ``w``
    exceeds the deadline (reported as diverged, unschedulable).
    """
    hp = [(t.wcet, t.period_or_miat) for t in higher_priority]
    c, d = task.wcet, task.deadline
    w = c
    if w > d:
        return ResponseResult(task, None, 0, False)
    iterations = 0
    while True:
        iterations += 1
        nxt = c + sum(-(-w // tj) * cj for cj, tj in hp)
        if nxt > d:
            return ResponseResult(task, None, iterations, False)
        if nxt == w:
            return ResponseResult(task, w, iterations, True)
        w = nxt


@dataclass
class CoreSchedule:
    core: int
    tasks: list[TaskSpec] = field(default_factory=list)
    results: list[ResponseResult] = field(default_factory=list)

    @property
    def utilization(self) -> Fraction:
        return utilization(self.tasks)


@dataclass
class ScheduleReport:
    processor: str
    cores: list[CoreSchedule]
    verdict: str
    unassigned: list[TaskSpec] = field(default_factory=list)

    @property
    def results(self) -> list[ResponseResult]:
        return [r for core in self.cores for r in core.results]

    @property
    def core_assignment(self) -> dict[tuple[str, str], int]:
        return {t.id: core.core for core in self.cores for t in core.tasks}

    @property
    def utilization_per_core(self) -> list[Fraction]:
        return [core.utilization for core in self.cores]

    @property
    def schedulable(self) -> bool:
        return self.verdict == SCHEDULABLE

    def to_dict(self) -> dict:
        cores = []
        for core in self.cores:
            u = core.utilization
            rows = []
            for r in core.results:
                t = r.task
                rows.append(
                    {
                        "id": t.label,
                        "kind": t.kind,
                        "wcet_us": t.wcet,
                        "period_us": t.period_or_miat,
                        "priority": t.priority,
                        "deadline_us": t.deadline,
                        "response_us": "diverged" if r.diverged else r.response_time,
                        "iterations": r.iterations,
                        "schedulable": r.schedulable,
                    }
                )
            cores.append({"core": core.core, "utilization": str(u), "tasks": rows})
        return {
            "processor": self.processor,
            "cores": cores,
            "unassigned": [t.label for t in self.unassigned],
            "verdict": self.verdict,
        }


def inflate_wcet(tasks, margin) -> list[TaskSpec]:
    """Scale WCETs by ``margin`` (rounded up to whole microseconds)."""
    factor = Fraction(str(margin))
    if factor <= 0:
        raise ValueError("wcet margin must be positive")
    if factor == 1:
        return list(tasks)
    return [replace(t, wcet=math.ceil(t.wcet * factor)) for t in tasks]


def partition(tasks, cores: int) -> tuple[list[CoreSchedule], list[TaskSpec]]:
    """First-fit decreasing utilization onto ``cores`` cores with U <= 1 per core.

    A single-core processor takes every task on core 0; its feasibility is
    then decided by the response-time analysis alone.
    """
    schedules = [CoreSchedule(i) for i in range(cores)]
    if cores == 1:
        schedules[0].tasks = list(tasks)
        return schedules, []
    unassigned = []
    order = sorted(tasks, key=lambda t: (-Fraction(t.wcet, t.period_or_miat), t.priority, t.component, t.operation))
    for t in order:
        u = Fraction(t.wcet, t.period_or_miat)
        for core in schedules:
            if core.utilization + u <= 1:
                core.tasks.append(t)
                break
        else:
            unassigned.append(t)
    return schedules, unassigned


def analyze_tasks(processor: str, tasks, cores: int = 1) -> ScheduleReport:
    tasks = assign_priorities(tasks)
    schedules, unassigned = partition(tasks, cores)
    for core in schedules:
        core.tasks.sort(key=lambda t: t.priority)
        core.results = [response_time(t, core.tasks[:i]) for i, t in enumerate(core.tasks)]
    if unassigned:
        verdict = OVERLOAD
    elif all(r.schedulable for core in schedules for r in core.results):
        verdict = SCHEDULABLE
    else:
        verdict = UNSCHEDULABLE
    return ScheduleReport(processor, schedules, verdict, unassigned)


def analyze_processor(model: IoTModel, processor: str, wcet_margin: float = 1.0) -> ScheduleReport:
    """Schedulability report for every task deployed on ``processor``."""
    table, _ = collect_symbols(model)
    if processor not in table.processors:
        raise UnknownElementError(f"unknown processor {processor!r}")
    tasks = inflate_wcet(deployed_task_set(model, processor, table), wcet_margin)
    return analyze_tasks(processor, tasks, table.processors[processor].cores)


# -- oracle ----------------------------------------------------------------


@dataclass
class Job:
    task: tuple[str, str]
    index: int
    release: int
    deadline: int
    remaining: int
    start: Optional[int] = None
    finish: Optional[int] = None
    missed: bool = False

    @property
    def response(self) -> Optional[int]:
        return None if self.finish is None else self.finish - self.release


@dataclass
class Timeline:
    horizon: int
    tick: int
    jobs: list[Job]
    misses: list[tuple[tuple[str, str], int]]

    def max_response(self, task_id) -> Optional[int]:
        values = [j.response for j in self.jobs if j.task == task_id and j.response is not None]
        return max(values, default=None)

    def missed(self, task_id) -> bool:
        return any(j.missed for j in self.jobs if j.task == task_id)


def simulate_schedule(tasks, horizon: int) -> Timeline:
    """Preemptive fixed-priority schedule with synchronous release at t=0.

    Jobs are released every period (sporadic tasks at their minimum
    inter-arrival time) strictly before ``horizon`` and run to completion even
    when late.  Time advances in ticks of the gcd of all durations, which is
    exact for integer-microsecond parameters and equivalent to a 1 us tick.
    """
    tasks = list(tasks)
    prios = [t.priority for t in tasks]
    if None in prios or len(set(prios)) != len(prios):
        raise DuplicatePriorityError("simulation needs unique explicit priorities")
    if not tasks:
        return Timeline(horizon, 1, [], [])
    tick = reduce(math.gcd, [horizon] + [v for t in tasks for v in (t.wcet, t.period_or_miat, t.deadline)])
    tick = tick or 1
    jobs: list[Job] = []
    for t in tasks:
        for k, r in enumerate(range(0, horizon, t.period_or_miat)):
            jobs.append(Job(t.id, k, r, r + t.deadline, t.wcet))
    prio = {t.id: t.priority for t in tasks}
    jobs.sort(key=lambda j: (j.release, prio[j.task]))
    end = max([horizon] + [j.deadline for j in jobs])
    misses: list[tuple[tuple[str, str], int]] = []
    pending: list[Job] = []
    nxt = 0
    now = 0
    while now < end:
        while nxt < len(jobs) and jobs[nxt].release <= now:
            pending.append(jobs[nxt])
            nxt += 1
        for j in pending:
            if not j.missed and j.deadline <= now:
                j.missed = True
                misses.append((j.task, j.deadline))
        if pending:
            job = min(pending, key=lambda j: (prio[j.task], j.release))
            if job.start is None:
                job.start = now
            job.remaining -= tick
            if job.remaining <= 0:
                job.finish = now + tick
                pending.remove(job)
        now += tick
    for j in pending:
        if not j.missed and j.deadline <= now:
            j.missed = True
            misses.append((j.task, j.deadline))
    return Timeline(horizon, tick, jobs, misses)
