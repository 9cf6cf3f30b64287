import numpy as np
import pytest
from hypothesis import strategies as st

from lipbandits.geometry import Box, Region


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@st.composite
def boxes(draw, d):
    lo, hi = [], []
    for _ in range(d):
        a = draw(st.floats(0.0, 1.0, allow_nan=False))
        b = draw(st.floats(0.0, 1.0, allow_nan=False))
        lo.append(min(a, b))
        hi.append(max(a, b))
    return Box(tuple(lo), tuple(hi))


@st.composite
def regions(draw, dims=(1, 2)):
    d = draw(st.sampled_from(dims))
    parts = draw(st.lists(boxes(d), min_size=1, max_size=3))
    return Region(Box.unit(d), tuple(parts))


def random_region(rng, d, max_parts=3):
    parts = []
    for _ in range(rng.integers(1, max_parts + 1)):
        a, b = rng.random(d), rng.random(d)
        parts.append(Box(tuple(np.minimum(a, b)), tuple(np.maximum(a, b))))
    return Region(Box.unit(d), tuple(parts))


# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE: list[str] = []


def record_criterion(number: int, passed: bool, detail: str) -> None:
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
