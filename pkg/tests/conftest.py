import numpy as np
import pytest

from modalms.dataset import Dataset
from modalms.simulate import ScenarioSpec, gen_scenario


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def scenario1_200():
    return gen_scenario(ScenarioSpec(1, 0.5, 0.0, 200), 2024)


def random_dataset(rng, n=None, d=1, missing=0.0):
    n = n or int(rng.integers(5, 60))
    X = rng.random((n, d))
    y = rng.normal(size=n) * 2 + 3 * np.sin(4 * X[:, 0])
    if missing:
        drop = rng.random(n) < missing
        drop[int(rng.integers(n))] = False
        y = np.where(drop, np.nan, y)
    return Dataset(X, y)


_CRITERIA: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record one acceptance line: ``criterion(n, passed, detail)``."""

    def record(n: int, passed: bool, detail: str):
        _CRITERIA[n] = (bool(passed), detail)
        print(f"criterion {n:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        ok, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
