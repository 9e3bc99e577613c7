import io
import json
import shutil
import subprocess
import sys

import pytest
from conftest import FIXTURES, SCHEMAS
from jsonschema import Draft202012Validator
from referencing import Registry, Resource

from iotforge import __version__, parse_file, validate
from iotforge.cli import run


def _registry():
    resources = []
    for path in SCHEMAS.glob("*.json"):
        resources.append((path.name, Resource.from_contents(json.loads(path.read_text()))))
    return Registry().with_resources(resources)


REGISTRY = _registry()


def check_schema(name, data):
    schema = json.loads((SCHEMAS / name).read_text())
    Draft202012Validator(schema, registry=REGISTRY).validate(data)


class Tty(io.StringIO):
    def isatty(self):
        return True


def cli(*argv, stdout=None):
    out = stdout if stdout is not None else io.StringIO()
    err = io.StringIO()
    code = run([str(a) for a in argv], out, err)
    return code, out.getvalue(), err.getvalue()


def fx(name):
    return FIXTURES / name


# -- exit codes -------------------------------------------------------------------------


def test_validate_clean_model():
    code, out, _ = cli("validate", fx("smarthome.iot"))
    assert code == 0
    assert out.endswith("0 error(s), 0 warning(s)\n")


def test_validate_reports_rule_violation():
    code, out, _ = cli("validate", fx("rules/V004_fail.iot"))
    assert code == 1
    assert "error[V004]" in out


def test_validate_parse_error(tmp_path):
    bad = tmp_path / "bad.iot"
    bad.write_text("model X { software { component } }")
    code, out, _ = cli("validate", bad, "--format", "json")
    assert code == 1
    data = json.loads(out)
    check_schema("diagnostics.json", data)
    assert data[0]["code"] == "P002" and data[0]["span"]["start_line"] == 1


def test_analyze_overload_is_negative():
    code, out, _ = cli("analyze", fx("overload.iot"), "--processor", "MCU1", "--format", "json")
    assert code == 2
    data = json.loads(out)
    check_schema("schedule-report.json", data)
    assert data["processors"][0]["verdict"] == "unschedulable"


def test_analyze_schedulable():
    code, out, _ = cli("analyze", fx("smarthome.iot"))
    assert code == 0
    assert "processor MCU1 (1 core): schedulable" in out
    assert "utilization 5/6" in out and "utilization 0\n" in out


def test_analyze_unknown_processor():
    code, _, err = cli("analyze", fx("smarthome.iot"), "--processor", "GPU")
    assert code == 3 and "GPU" in err


def test_analyze_invalid_model_is_blocked():
    code, _, err = cli("analyze", fx("rules/V007_fail.iot"))
    assert code == 1 and "V007" in err


def test_analyze_margin_and_out(tmp_path):
    target = tmp_path / "r.json"
    code, out, _ = cli("analyze", fx("smarthome.iot"), "--wcet-margin", "1.5", "--format", "json", "--out", target)
    assert code == 2 and out == ""
    data = json.loads(target.read_text())
    assert data["wcet_margin"] == 1.5
    check_schema("schedule-report.json", data)


@pytest.mark.parametrize("value", ["0", "-1", "abc"])
def test_analyze_rejects_bad_margin(value):
    assert cli("analyze", fx("smarthome.iot"), "--wcet-margin", value)[0] == 3


def test_unknown_subcommand():
    code, _, err = cli("frobnicate", fx("smarthome.iot"))
    assert code == 3 and err


def test_missing_file():
    code, _, err = cli("validate", fx("nope.iot"))
    assert code == 3 and "nope.iot" in err


def test_no_arguments():
    assert cli()[0] == 3


def test_version():
    code, out, _ = cli("--version")
    assert code == 0 and __version__ in out


# -- simulate / explore -------------------------------------------------------------------


def test_simulate_json():
    code, out, _ = cli("simulate", fx("pingpong.iot"), "--steps", "6", "--seed", "1", "--format", "json")
    assert code == 0
    data = json.loads(out)
    check_schema("trace.json", data)
    assert len(data["steps"]) == 6 and data["reason"] == "steps-exhausted"


def test_simulate_overflow_is_negative():
    code, out, _ = cli("simulate", fx("pingpong_overflow.iot"), "--queue-bound", "1")
    assert code == 2 and "end: overflow" in out


def test_simulate_quiescence_is_ok(tmp_path):
    code, out, _ = cli("simulate", fx("smarthome.iot"), "--steps", "0")
    assert code == 0 and "after 0 steps" in out


def test_explore_deadlock():
    code, out, _ = cli("explore", fx("mutual_wait.iot"), "--format", "json")
    assert code == 2
    data = json.loads(out)
    check_schema("exploration-report.json", data)
    assert len(data["deadlocks"]) == 1


def test_explore_clean():
    code, out, _ = cli("explore", fx("pingpong.iot"), "--queue-bound", "2")
    assert code == 0 and "no deadlocks or overflows" in out


def test_explore_overflow_schema():
    code, out, _ = cli("explore", fx("pingpong_overflow.iot"), "--queue-bound", "1", "--format", "json")
    assert code == 2
    data = json.loads(out)
    check_schema("exploration-report.json", data)
    assert data["overflows"][0]["component"] == "Ponger"


def test_explore_abstract_guards():
    code, out, _ = cli("explore", fx("smarthome.iot"), "--abstract-guards", "--max-configs", "50", "--format", "json")
    data = json.loads(out)
    assert data["abstracted"] and data["truncated"]
    check_schema("exploration-report.json", data)


# -- generate / export --------------------------------------------------------------------


def test_generate(tmp_path):
    code, out, _ = cli("generate", fx("smarthome.iot"), "--out-dir", tmp_path)
    assert code == 0
    assert out.splitlines() == [
        "wrote things/TempSensor.thingml",
        "wrote things/Thermostat.thingml",
        "wrote things/Gateway.thingml",
        "wrote config/main.thingml",
    ]
    assert (tmp_path / "config/main.thingml").read_text().startswith('import "../things/TempSensor.thingml"')


def test_generate_requires_out_dir():
    assert cli("generate", fx("smarthome.iot"))[0] == 3


@pytest.mark.parametrize("name", ["smarthome.iot", "nested.iot", "pingpong.iot", "empty.iot", "mutual_wait.iot"])
def test_export_schema(name):
    code, out, _ = cli("export", fx(name))
    assert code == 0
    check_schema("model.json", json.loads(out))


# -- determinism, side effects, color ---------------------------------------------------------


@pytest.mark.parametrize("argv", [
    ("validate", "rules/V004_fail.iot", "--format", "json"),
    ("analyze", "smarthome.iot"),
    ("analyze", "smarthome.iot", "--format", "json"),
    ("simulate", "smarthome.iot", "--steps", "40"),
    ("explore", "mutual_wait.iot"),
    ("export", "nested.iot"),
])
def test_output_is_byte_identical(argv):
    args = (argv[0], fx(argv[1])) + argv[2:]
    assert cli(*args) == cli(*args)


def test_input_is_not_modified(tmp_path):
    src = tmp_path / "m.iot"
    shutil.copy(fx("smarthome.iot"), src)
    before = src.read_bytes()
    for command in ("validate", "analyze", "simulate", "explore", "export"):
        cli(command, src)
    cli("generate", src, "--out-dir", tmp_path / "out")
    cli("validate", src, "--fix")
    assert src.read_bytes() == before


def test_fix_writes_sibling(tmp_path):
    src = tmp_path / "display.iot"
    shutil.copy(fx("rules/V004_fail.iot"), src)
    code, out, err = cli("validate", src, "--fix")
    assert code == 1 and "V004" in out
    fixed = tmp_path / "display.fixed.iot"
    assert fixed.exists() and "1 event(s) synthesized" in err
    assert validate(parse_file(fixed)) == []


def test_color_only_on_tty(monkeypatch):
    monkeypatch.delenv("IOTFORGE_COLOR", raising=False)
    _, plain, _ = cli("analyze", fx("smarthome.iot"))
    assert "\x1b[" not in plain
    _, colored, _ = cli("analyze", fx("smarthome.iot"), stdout=Tty())
    assert "\x1b[32mschedulable\x1b[0m" in colored


def test_color_disabled_by_env(monkeypatch):
    monkeypatch.setenv("IOTFORGE_COLOR", "0")
    _, out, _ = cli("analyze", fx("smarthome.iot"), stdout=Tty())
    assert "\x1b[" not in out


def test_json_never_colored(monkeypatch):
    monkeypatch.delenv("IOTFORGE_COLOR", raising=False)
    _, out, _ = cli("validate", fx("rules/V004_fail.iot"), "--format", "json", stdout=Tty())
    assert "\x1b[" not in out


def test_console_script():
    proc = subprocess.run(
        [sys.executable, "-m", "iotforge", "validate", str(fx("smarthome.iot"))],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0, proc.stderr
