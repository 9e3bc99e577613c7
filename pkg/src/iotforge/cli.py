"""Command line front end: ``iotforge <command> <file> [options]``.

Exit codes: 0 success, 1 parse or validation errors, 2 negative analysis
verdict (unschedulable, overload, deadlock or overflow), 3 usage or I/O error.
Reports go to standard output (or ``--out``); diagnostics that stop a command
go to standard error.
"""
from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys
from pathlib import Path
from typing import Optional, TextIO

from . import __version__
from .behavior import DEFAULT_MAX_CONFIGS, DEFAULT_QUEUE_BOUND, explore, run_random
from .codegen import emit, map_model
from .diagnostics import Diagnostic, ParseError, has_errors
from .export import export_json
from .formatter import format_model
from .model import IoTModel
from .parser import parse_model
from .rta import SCHEDULABLE, analyze_processor
from .symbols import UnknownElementError
from .validator import synthesize_state_events, validate

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_NEGATIVE = 2
EXIT_USAGE = 3


class UsageError(Exception):
    pass


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage()}")


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _non_negative(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {value}")
    return value


def _margin(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not value > 0:
        raise argparse.ArgumentTypeError("wcet margin must be positive")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(prog="iotforge", description="Validate, analyze, simulate and generate IoT models.")
    parser.add_argument("--version", action="version", version=f"iotforge {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command", parser_class=_ArgumentParser)
    sub.required = True

    def command(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("file", help="model source file")
        p.add_argument("--format", choices=("text", "json"), default="text")
        return p

    p = command("validate", "check the V001-V012 rule catalog")
    p.add_argument("--fix", action="store_true", help="write <stem>.fixed.iot with no-op OnEntry/OnExit events")

    p = command("analyze", "fixed-priority response-time analysis per processor")
    p.add_argument("--processor", help="analyze only this processor")
    p.add_argument("--wcet-margin", type=_margin, default=1.0, help="scale every wcet before analysis")
    p.add_argument("--out", help="write the report here instead of standard output")

    p = command("simulate", "seeded random run of the composed state machines")
    p.add_argument("--steps", type=_non_negative, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--queue-bound", type=_positive, default=DEFAULT_QUEUE_BOUND)

    p = command("explore", "exhaustive bounded search for deadlocks and queue overflows")
    p.add_argument("--queue-bound", type=_positive, default=DEFAULT_QUEUE_BOUND)
    p.add_argument("--max-configs", type=_positive, default=DEFAULT_MAX_CONFIGS)
    p.add_argument("--abstract-guards", action="store_true",
                   help="explore both outcomes of guards over int, real and string values")

    p = command("generate", "emit ThingML-subset text")
    p.add_argument("--target", choices=("thingml",), default="thingml")
    p.add_argument("--out-dir", required=True)

    command("export", "canonical JSON export of the resolved model")
    return parser


# -- output helpers -------------------------------------------------------------

_COLORS = {"error": "31", "warning": "33", "ok": "32", "bad": "31"}


class _Out:
    def __init__(self, stream: TextIO, color: bool):
        self.stream = stream
        self.color = color

    def paint(self, text: str, tone: str) -> str:
        return f"\x1b[{_COLORS[tone]}m{text}\x1b[0m" if self.color else text

    def write(self, text: str) -> None:
        self.stream.write(text)


def _use_color(stream: TextIO) -> bool:
    if os.environ.get("IOTFORGE_COLOR", "1") == "0":
        return False
    isatty = getattr(stream, "isatty", None)
    return bool(isatty and isatty())


def _dump(data) -> str:
    return json.dumps(data, indent=2) + "\n"


def _diag_text(out: _Out, d: Diagnostic) -> str:
    text = d.format()
    return text.replace(f"{d.severity}[", out.paint(d.severity, d.severity) + "[", 1) if out.color else text


def _report_diags(err: _Out, diags) -> None:
    for d in diags:
        err.write(_diag_text(err, d) + "\n")


def _load(path: str, err: _Out, report: bool = True) -> tuple[Optional[IoTModel], list[Diagnostic], int]:
    """Read and parse; returns (model, parse diagnostics, exit code)."""
    try:
        source = Path(path).read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        err.write(f"iotforge: cannot read {path}: {exc}\n")
        return None, [], EXIT_USAGE
    try:
        return parse_model(source, path), [], EXIT_OK
    except ParseError as exc:
        if report:
            _report_diags(err, exc.diagnostics)
        return None, exc.diagnostics, EXIT_INVALID


def _gate(model: IoTModel, path: str, err: _Out, analysis: bool = False) -> int:
    """Validate before a back end runs; warnings are shown but do not stop it."""
    diags = validate(model, path, analysis=analysis)
    _report_diags(err, diags)
    return EXIT_INVALID if has_errors(diags) else EXIT_OK


# -- commands -------------------------------------------------------------------


def _summary(diags) -> str:
    errors = sum(1 for d in diags if d.is_error)
    return f"{errors} error(s), {len(diags) - errors} warning(s)"


def cmd_validate(args, out: _Out, err: _Out) -> int:
    model, diags, code = _load(args.file, err, report=False)
    if code == EXIT_USAGE:
        return code
    if model is not None:
        diags = validate(model, args.file)
    if args.format == "json":
        out.write(_dump([d.to_dict() for d in diags]))
    else:
        for d in diags:
            out.write(_diag_text(out, d) + "\n")
        tone = "bad" if has_errors(diags) else "ok"
        out.write(out.paint(f"{args.file}: {_summary(diags)}", tone) + "\n")
    if model is None:
        return code
    if args.fix:
        fixed, added = synthesize_state_events(model)
        src = Path(args.file)
        target = src.with_name(src.stem + ".fixed" + src.suffix)
        try:
            target.write_text(format_model(fixed), encoding="utf-8")
        except OSError as exc:
            err.write(f"iotforge: cannot write {target}: {exc}\n")
            return EXIT_USAGE
        err.write(f"wrote {target} ({len(added)} event(s) synthesized)\n")
    return EXIT_INVALID if has_errors(diags) else EXIT_OK


def _schedule_text(out: _Out, report) -> str:
    plural = "core" if len(report.cores) == 1 else "cores"
    tone = "ok" if report.verdict == SCHEDULABLE else "bad"
    lines = [f"processor {report.processor} ({len(report.cores)} {plural}): " + out.paint(report.verdict, tone)]
    for core in report.cores:
        u = core.utilization
        lines.append(f"  core {core.core}  utilization {u}")
        if not core.results:
            continue
        width = max(len(r.task.label) for r in core.results)
        lines.append(f"    {'prio':>4}  {'task':<{width}}  {'C':>8}  {'T':>8}  {'D':>8}  {'R':>8}  verdict")
        for r in core.results:
            t = r.task
            resp = "diverged" if r.diverged else str(r.response_time)
            verdict = "ok" if r.schedulable else "MISS"
            lines.append(
                f"    {t.priority:>4}  {t.label:<{width}}  {t.wcet:>8}  {t.period_or_miat:>8}"
                f"  {t.deadline:>8}  {resp:>8}  {verdict}"
            )
    if report.unassigned:
        lines.append("  unassigned: " + ", ".join(t.label for t in report.unassigned))
    return "\n".join(lines) + "\n"


def cmd_analyze(args, out: _Out, err: _Out) -> int:
    model, _, code = _load(args.file, err)
    if model is None:
        return code
    if args.processor is not None and model.processor(args.processor) is None:
        err.write(f"iotforge: unknown processor {args.processor!r}\n")
        return EXIT_USAGE
    code = _gate(model, args.file, err, analysis=True)
    if code:
        return code
    names = [args.processor] if args.processor else [p.name for p in model.hardware]
    try:
        reports = [analyze_processor(model, name, args.wcet_margin) for name in names]
    except UnknownElementError as exc:
        err.write(f"iotforge: {exc}\n")
        return EXIT_USAGE
    if args.format == "json":
        text = _dump({"model": model.name, "wcet_margin": args.wcet_margin,
                      "processors": [r.to_dict() for r in reports]})
    else:
        target = out if args.out is None else _Out(out.stream, False)
        text = "".join(_schedule_text(target, r) for r in reports) or "no processors\n"
    if args.out is not None:
        try:
            Path(args.out).write_text(text, encoding="utf-8")
        except OSError as exc:
            err.write(f"iotforge: cannot write {args.out}: {exc}\n")
            return EXIT_USAGE
    else:
        out.write(text)
    return EXIT_OK if all(r.verdict == SCHEDULABLE for r in reports) else EXIT_NEGATIVE


def cmd_simulate(args, out: _Out, err: _Out) -> int:
    model, _, code = _load(args.file, err)
    if model is None:
        return code
    code = _gate(model, args.file, err)
    if code:
        return code
    trace = run_random(model, args.steps, args.seed, args.queue_bound)
    out.write(_dump(trace.to_dict()) if args.format == "json" else trace.format())
    blocked = trace.reason == "overflow" or (trace.reason == "deadlock-or-quiescence" and not trace.final.quiet)
    return EXIT_NEGATIVE if blocked else EXIT_OK


def cmd_explore(args, out: _Out, err: _Out) -> int:
    model, _, code = _load(args.file, err)
    if model is None:
        return code
    code = _gate(model, args.file, err)
    if code:
        return code
    report = explore(model, args.queue_bound, args.max_configs, args.abstract_guards)
    out.write(_dump(report.to_dict()) if args.format == "json" else report.format())
    return EXIT_OK if report.clean else EXIT_NEGATIVE


def cmd_generate(args, out: _Out, err: _Out) -> int:
    model, _, code = _load(args.file, err)
    if model is None:
        return code
    code = _gate(model, args.file, err)
    if code:
        return code
    files = emit(map_model(model))
    root = Path(args.out_dir)
    try:
        for rel, text in files:
            path = root / rel
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
    except OSError as exc:
        err.write(f"iotforge: cannot write into {root}: {exc}\n")
        return EXIT_USAGE
    if args.format == "json":
        out.write(_dump({"target": args.target, "files": [rel for rel, _ in files]}))
    else:
        out.write("".join(f"wrote {rel}\n" for rel, _ in files))
    return EXIT_OK


def cmd_export(args, out: _Out, err: _Out) -> int:
    model, _, code = _load(args.file, err)
    if model is None:
        return code
    code = _gate(model, args.file, err)
    if code:
        return code
    out.write(export_json(model))
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate,
    "analyze": cmd_analyze,
    "simulate": cmd_simulate,
    "explore": cmd_explore,
    "generate": cmd_generate,
    "export": cmd_export,
}


def run(argv=None, stdout: Optional[TextIO] = None, stderr: Optional[TextIO] = None) -> int:
    """Run one command and return its exit code."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    try:
        with contextlib.redirect_stdout(stdout), contextlib.redirect_stderr(stderr):
            args = build_parser().parse_args(list(sys.argv[1:] if argv is None else argv))
    except UsageError as exc:
        stderr.write(str(exc))
        return EXIT_USAGE
    except SystemExit as exc:  # --help and --version
        return exc.code if isinstance(exc.code, int) else EXIT_OK
    out = _Out(stdout, _use_color(stdout))
    err = _Out(stderr, _use_color(stderr))
    return COMMANDS[args.command](args, out, err)


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
