import numpy as np
import pytest

from quditbell.bell import CorrelationTable


def random_table(rng: np.random.Generator, n_a: int, n_b: int) -> CorrelationTable:
    """Consistent table: margins first, then each joint uniform in its Frechet bounds."""
    a = rng.random(n_a)
    b = rng.random(n_b)
    lo = np.maximum(0.0, a[:, None] + b[None, :] - 1.0)
    hi = np.minimum(a[:, None], b[None, :])
    joint = lo + rng.random((n_a, n_b)) * (hi - lo)
    return CorrelationTable(joint, a, b)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def acceptance_record():
    def record(label: str, passed: bool, detail: str = "") -> None:
        _ACCEPTANCE.append((label, passed, detail))

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, passed, detail in sorted(_ACCEPTANCE):
        mark = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{mark}] {label}  {detail}")
