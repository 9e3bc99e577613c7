"""Source spans, diagnostics and the diagnostic code catalog."""
from __future__ import annotations

from dataclasses import dataclass

ERROR = "error"
WARNING = "warning"

DEFAULT_FILE = "<model>"


@dataclass(frozen=True, order=True)
class SourceSpan:
    """A 1-based, inclusive-start / exclusive-end range in a source file."""

    file: str
    start_line: int
    start_col: int
    end_line: int
    end_col: int

    def __str__(self) -> str:
        return f"{self.file}:{self.start_line}:{self.start_col}"

    def to_dict(self) -> dict:
        return {
            "start_line": self.start_line,
            "start_col": self.start_col,
            "end_line": self.end_line,
            "end_col": self.end_col,
        }


def unknown_span(file: str = DEFAULT_FILE) -> SourceSpan:
    return SourceSpan(file, 1, 1, 1, 1)


# code -> (title, default severity)
CATALOG: dict[str, tuple[str, str]] = {
    "P001": ("lexical error", ERROR),
    "P002": ("syntax error", ERROR),
    "P003": ("duplicate section", ERROR),
    "R001": ("unresolved reference", ERROR),
    "V001": ("unique names per namespace", ERROR),
    "V002": ("connector payload compatibility", ERROR),
    "V003": ("connector direction and provided/required pairing", ERROR),
    "V004": ("states declare OnEntry and OnExit events", ERROR),
    "V005": ("state machine structure resolves", ERROR),
    "V006": ("event and action ports carry their payload", ERROR),
    "V007": ("timing sanity", ERROR),
    "V008": ("deployment of behavior and analysis components", WARNING),
    "V009": ("payload references are declared", ERROR),
    "V010": ("guards and assignments type-check", ERROR),
    "V011": ("duplicate priorities on one processor", WARNING),
    "V012": ("operational references resolve", ERROR),
}


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    code: str
    message: str
    span: SourceSpan

    def __post_init__(self) -> None:
        if self.code not in CATALOG:
            raise ValueError(f"unknown diagnostic code {self.code!r}")
        if self.severity not in (ERROR, WARNING):
            raise ValueError(f"bad severity {self.severity!r}")

    @property
    def is_error(self) -> bool:
        return self.severity == ERROR

    def sort_key(self) -> tuple:
        s = self.span
        return (s.file, s.start_line, s.start_col, s.end_line, s.end_col, self.code, self.message)

    def format(self) -> str:
        """Render in the ``file:line:col: severity[code]: message`` convention."""
        s = self.span
        return f"{s.file}:{s.start_line}:{s.start_col}: {self.severity}[{self.code}]: {self.message}"

    def to_dict(self) -> dict:
        return {
            "code": self.code,
            "severity": self.severity,
            "message": self.message,
            "file": self.span.file,
            "span": self.span.to_dict(),
        }


def sort_diagnostics(diags) -> list[Diagnostic]:
    return sorted(diags, key=Diagnostic.sort_key)


def has_errors(diags) -> bool:
    return any(d.is_error for d in diags)


class DiagnosticError(Exception):
    """Base for failures that carry a list of diagnostics."""

    def __init__(self, diagnostics: list[Diagnostic]) -> None:
        self.diagnostics = list(diagnostics)
        first = self.diagnostics[0].format() if self.diagnostics else "no diagnostics"
        extra = len(self.diagnostics) - 1
        super().__init__(first + (f" (+{extra} more)" if extra > 0 else ""))


class ParseError(DiagnosticError):
    pass


class ResolutionError(DiagnosticError):
    pass
