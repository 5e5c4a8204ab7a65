import numpy as np
import pytest

from quboml.qubo import BinaryQuadraticProblem


def random_problem(n: int, seed: int, low: float = -1.0, high: float = 1.0) -> BinaryQuadraticProblem:
    rng = np.random.default_rng(seed)
    return BinaryQuadraticProblem.from_matrix(np.triu(rng.uniform(low, high, (n, n))))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


CRITERIA: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record a criterion outcome for the end-of-run summary, then assert it."""

    def record(number: int, ok: bool, detail: str) -> None:
        CRITERIA[number] = (bool(ok), detail)
        assert ok, f"criterion {number}: {detail}"

    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        ok, detail = CRITERIA[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
