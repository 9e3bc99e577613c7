"""iotforge: a textual modeling language and batch toolchain for
component-based IoT systems.

Models are parsed from text, validated against a numbered rule catalog,
analyzed for fixed-priority schedulability, explored for deadlocks and queue
overflows, and translated into ThingML-subset text.
"""
__version__ = "0.1.0"

from .behavior import (
    ExplorationReport,
    GlobalConfig,
    Move,
    Trace,
    enabled_moves,
    explore,
    initial_config,
    replay,
    run_random,
    step,
)
from .codegen import ThingMLDocument, emit, map_model, mapping_coverage
from .diagnostics import Diagnostic, ParseError, ResolutionError, SourceSpan
from .export import export_json, export_model
from .formatter import format_model
from .model import IoTModel, TaskSpec
from .parser import parse_file, parse_model
from .rta import (
    ResponseResult,
    ScheduleReport,
    Timeline,
    analyze_processor,
    assign_priorities,
    hyperperiod,
    response_time,
    simulate_schedule,
    utilization,
)
from .symbols import SymbolTable, build_symbol_table, connected_peer, deployed_task_set
from .validator import explain_rule, validate

__all__ = [
    "Diagnostic",
    "ExplorationReport",
    "GlobalConfig",
    "IoTModel",
    "Move",
    "ParseError",
    "ResolutionError",
    "ResponseResult",
    "ScheduleReport",
    "SourceSpan",
    "SymbolTable",
    "TaskSpec",
    "ThingMLDocument",
    "Timeline",
    "Trace",
    "analyze_processor",
    "assign_priorities",
    "build_symbol_table",
    "connected_peer",
    "deployed_task_set",
    "emit",
    "enabled_moves",
    "explain_rule",
    "explore",
    "export_json",
    "export_model",
    "format_model",
    "hyperperiod",
    "initial_config",
    "map_model",
    "mapping_coverage",
    "parse_file",
    "parse_model",
    "replay",
    "response_time",
    "run_random",
    "simulate_schedule",
    "step",
    "utilization",
    "validate",
]
