import csv
import io
from importlib import resources

import numpy as np
import pytest

_CRITERIA: list[str] = []


def load_reference(name: str) -> dict[str, np.ndarray]:
    """Columns of a shipped reference CSV; ``mesh`` stays a list of labels."""
    root = resources.files("wg3d") / "references"
    (path,) = [p for p in root.iterdir() if p.name.startswith(name)]
    rows = list(csv.DictReader(io.StringIO(path.read_text())))
    out = {}
    for key in rows[0]:
        vals = [r[key] for r in rows]
        try:
            out[key] = np.array([float(v) for v in vals])
        except ValueError:
            out[key] = vals
    return out


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""

    def record(label: str, ok: bool, detail: str) -> None:
        _CRITERIA.append(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")
        print(_CRITERIA[-1])
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in _CRITERIA:
            terminalreporter.write_line(line)
