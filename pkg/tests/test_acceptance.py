"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` or directly with
``python3 tests/test_acceptance.py``.
"""
import io
import random
import sys
import tempfile
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

import pytest  # noqa: E402
from conftest import ALL_FIXTURES, FIXTURES, GOLDEN, load  # noqa: E402
from generators import random_model, random_task_set  # noqa: E402
from oracles import ProductGraph, impl_config_key  # noqa: E402

from iotforge import format_model, parse_file, parse_model, validate  # noqa: E402
from iotforge.behavior import explore, replay  # noqa: E402
from iotforge.cli import run  # noqa: E402
from iotforge.codegen import ROWS, emit, map_model, mapping_coverage  # noqa: E402
from iotforge.model import MS, IoTEvent, IoTModel, IoTState, SoftwareComponent, StateMachine, TaskSpec  # noqa: E402
from iotforge.rta import SCHEDULABLE, UNSCHEDULABLE, analyze_tasks, hyperperiod, response_time, simulate_schedule  # noqa: E402

RULES = [f"V{n:03d}" for n in range(1, 13)]


def _valid(path):
    try:
        return validate(parse_file(path)) == []
    except Exception:
        return False


VALID_FIXTURES = [p for p in ALL_FIXTURES if _valid(p)]


# -- criteria -------------------------------------------------------------------------


def rta_oracle_agreement():
    """Response-time analysis agrees with the schedule simulator on random task sets."""
    start = time.perf_counter()
    rng = random.Random(20240501)
    checked = 0
    disagreements = []
    for _ in range(500):
        tasks = random_task_set(rng)
        assert len(tasks) <= 6 and all(t.deadline <= t.period_or_miat for t in tasks)
        timeline = simulate_schedule(tasks, hyperperiod(tasks))
        for t in tasks:
            r = response_time(t, [u for u in tasks if u.priority < t.priority])
            sim_ok = not timeline.missed(t.id)
            if r.schedulable != sim_ok or (sim_ok and r.response_time != timeline.max_response(t.id)):
                disagreements.append((tasks, t.id))
        checked += 1
    elapsed = time.perf_counter() - start
    assert not disagreements, f"{len(disagreements)} disagreements, first {disagreements[0]}"
    assert elapsed < 30, f"took {elapsed:.1f}s"
    return f"{checked} task sets, 0 disagreements, {elapsed:.2f}s"


def worked_analysis():
    """The three-task example and the overloaded pair give the expected verdicts."""
    def t(name, c, period, prio):
        return TaskSpec(name, "run", "periodic", c * MS, period * MS, period * MS, prio, "CPU")

    three = analyze_tasks("CPU", [t("A", 1, 4, 1), t("B", 2, 6, 2), t("C", 3, 12, 3)])
    got = [r.response_time for r in three.results]
    assert got == [1 * MS, 3 * MS, 10 * MS], got
    assert three.verdict == SCHEDULABLE
    pair = analyze_tasks("CPU", [t("A", 3, 4, 1), t("B", 2, 4, 2)])
    assert pair.verdict == UNSCHEDULABLE, pair.verdict
    return "responses 1/3/10 ms schedulable; (3,4),(2,4) unschedulable"


def mapping_coverage_and_goldens():
    """SmartHome covers every mapping row and emits the checked-in golden files."""
    model = load("smarthome.iot")
    cov = mapping_coverage(model)
    missing = [label for key, label in ROWS if cov[key] < 1]
    assert not missing, f"uncovered rows: {missing}"
    for name in ("smarthome", "pingpong", "nested"):
        emitted = dict(emit(map_model(load(f"{name}.iot"))))
        golden = {p.relative_to(GOLDEN / name).as_posix(): p.read_text() for p in (GOLDEN / name).rglob("*.thingml")}
        assert emitted == golden, f"{name}: emitted files differ from golden"
    return f"{len(ROWS)}/{len(ROWS)} rows covered, goldens byte-identical"


def _small(model):
    comps = [c for c in _walk(model.software) if c.state_machine]
    return comps and len(comps) <= 3 and all(len(c.state_machine.states) <= 4 for c in comps)


def _walk(comps):
    for c in comps:
        yield c
        yield from _walk(c.subcomponents)


def deadlock_equivalence():
    """Exploration matches brute-force product enumeration; the mutual-wait deadlock is found."""
    compared = 0
    for path in VALID_FIXTURES:
        model = parse_file(path)
        if not _small(model):
            continue
        for qb in (1, 2):
            oracle = ProductGraph(model, qb)
            rep = explore(model, queue_bound=qb)
            assert not rep.truncated
            assert {impl_config_key(f.config) for f in rep.deadlocks} == oracle.deadlocks, path.name
            assert {(impl_config_key(f.config), f.component) for f in rep.overflows} == oracle.overflows, path.name
            compared += 1
    assert compared >= 8
    mw = load("mutual_wait.iot")
    rep = explore(mw, queue_bound=2)
    assert len(rep.deadlocks) == 1, len(rep.deadlocks)
    witness = rep.deadlocks[0].witness
    assert len(witness) <= 4 and replay(mw, witness, queue_bound=2) == rep.deadlocks[0].config
    return f"{compared} fixture/bound pairs equal; mutual-wait: 1 deadlock, {len(witness)}-step witness"


def parser_round_trip():
    """parse, format, parse yields an equal model for fixtures and generated models."""
    fixtures = 0
    for path in ALL_FIXTURES:
        m = parse_file(path)
        assert parse_model(format_model(m)) == m, path.name
        fixtures += 1
    for seed in range(200):
        m = random_model(random.Random(seed))
        assert parse_model(format_model(m)) == m, f"seed {seed}"
    return f"{fixtures} fixtures and 200 generated models"


def validator_catalog():
    """Every rule has a failing and a passing fixture; V004 fires exactly on incomplete states."""
    for code in RULES:
        fail = validate(load(f"rules/{code}_fail.iot"))
        assert code in {d.code for d in fail}, f"{code}_fail does not trigger {code}"
        passing = validate(load(f"rules/{code}_pass.iot"))
        assert code not in {d.code for d in passing}, f"{code}_pass triggers {code}"
    rng = random.Random(4)
    for _ in range(50):
        flags = [(rng.random() < 0.6, rng.random() < 0.6) for _ in range(rng.randint(1, 6))]
        states = [IoTState(f"S{i}", "e" if a else None, "e" if b else None) for i, (a, b) in enumerate(flags)]
        sm = StateMachine("SM", "S0", states, [], [IoTEvent("e", "general")])
        model = IoTModel("M", software=[SoftwareComponent("A", state_machine=sm)])
        fired = sorted({d.message.split("'")[1] for d in validate(model) if d.code == "V004"})
        assert fired == sorted(f"S{i}" for i, (a, b) in enumerate(flags) if not (a and b)), flags
    return f"{len(RULES)} rules with pass/fail fixtures; V004 exact on 50 random machines"


def _capture(argv):
    out, err = io.StringIO(), io.StringIO()
    code = run(argv, out, err)
    return code, out.getvalue(), err.getvalue()


def _tree(root: Path):
    return {p.relative_to(root).as_posix(): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


def determinism():
    """Command outputs are byte-identical across two runs on every fixture."""
    runs = 0
    for path in ALL_FIXTURES:
        f = str(path)
        for argv in (["validate", f], ["validate", f, "--format", "json"], ["analyze", f],
                     ["analyze", f, "--format", "json"], ["explore", f], ["explore", f, "--format", "json"],
                     ["simulate", f, "--seed", "7"], ["simulate", f, "--seed", "7", "--format", "json"]):
            assert _capture(argv) == _capture(argv), argv
            runs += 1
        with tempfile.TemporaryDirectory() as a, tempfile.TemporaryDirectory() as b:
            ra, rb = _capture(["generate", f, "--out-dir", a]), _capture(["generate", f, "--out-dir", b])
            assert ra == rb and _tree(Path(a)) == _tree(Path(b)), f
            runs += 1
    return f"{runs} command runs on {len(ALL_FIXTURES)} fixtures repeated byte-identically"


CRITERIA = [
    (1, "RTA-oracle agreement", rta_oracle_agreement),
    (2, "worked analysis fixture", worked_analysis),
    (3, "mapping coverage and goldens", mapping_coverage_and_goldens),
    (4, "deadlock brute-force equivalence", deadlock_equivalence),
    (5, "parser round trip", parser_round_trip),
    (6, "validator catalog", validator_catalog),
    (7, "determinism", determinism),
]


def check(number):
    """Run one criterion and return its report line and success flag."""
    _, title, fn = CRITERIA[number - 1]
    try:
        detail = fn()
    except AssertionError as exc:
        return f"FAIL [{number}] {title}: {exc}", False
    return f"PASS [{number}] {title}: {detail}", True


@pytest.mark.parametrize("number", [n for n, _, _ in CRITERIA], ids=[t.replace(" ", "_") for _, t, _ in CRITERIA])
def test_criterion(number, capsys):
    line, ok = check(number)
    with capsys.disabled():
        print(f"\n{line}")
    assert ok, line


if __name__ == "__main__":
    results = [check(n) for n, _, _ in CRITERIA]
    for line, _ in results:
        print(line)
    sys.exit(0 if all(ok for _, ok in results) else 1)
