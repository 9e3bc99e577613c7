import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parent.parent
FIXTURES = ROOT / "fixtures"
GOLDEN = Path(__file__).resolve().parent / "golden"
SCHEMAS = ROOT / "docs" / "schemas"

sys.path.insert(0, str(Path(__file__).resolve().parent))

from iotforge import parse_file  # noqa: E402

MODEL_FIXTURES = sorted(FIXTURES.glob("*.iot"))
RULE_FIXTURES = sorted((FIXTURES / "rules").glob("*.iot"))
ALL_FIXTURES = MODEL_FIXTURES + RULE_FIXTURES


def fixture_path(name: str) -> Path:
    return FIXTURES / name


def load(name: str):
    return parse_file(FIXTURES / name)


@pytest.fixture
def smarthome():
    return load("smarthome.iot")
