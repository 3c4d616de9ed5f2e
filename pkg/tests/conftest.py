import numpy as np
import pytest
from hypothesis import strategies as st

from tubelab.seq_space import SparseVec


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def sparse_vecs(max_index=12, max_size=6, bound=10.0):
    """Hypothesis strategy for small sparse vectors."""
    pairs = st.dictionaries(
        st.integers(0, max_index),
        st.floats(-bound, bound, allow_nan=False, allow_infinity=False),
        max_size=max_size,
    )
    return pairs.map(lambda d: SparseVec(list(d), list(d.values())))


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_report():
    def record(number: int, ok: bool, detail: str):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
