import io
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from knowtrace.data import parse_interactions  # noqa: E402

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def long_csv(rows):
    text = "student,item,outcome,skills\n" + "".join(",".join(map(str, r)) + "\n" for r in rows)
    return io.StringIO(text)


@pytest.fixture
def tiny_dataset():
    rows = [
        ("s1", "A", 1, "k1"), ("s1", "B", 0, "k1~k2"), ("s1", "A", 1, "k1"),
        ("s2", "B", 1, "k1~k2"), ("s2", "C", 0, "k3"),
        ("s3", "C", 1, "k3"), ("s3", "A", 0, "k1"), ("s3", "B", 1, "k1~k2"), ("s3", "C", 1, "k3"),
    ]
    return parse_interactions(long_csv(rows))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
