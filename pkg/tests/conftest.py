import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from chaosbounds.tensor import CoefficientTensor

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

finite = st.floats(-3, 3, allow_nan=False, allow_infinity=False, width=64)


@st.composite
def tensors(draw, min_order=1, max_order=3, max_dim=3):
    d = draw(st.integers(min_order, max_order))
    dims = tuple(draw(st.lists(st.integers(1, max_dim), min_size=d, max_size=d)))
    arr = draw(hnp.arrays(np.float64, dims, elements=finite))
    return CoefficientTensor(arr)


def random_tensor(rng, dims, scale=1.0):
    return CoefficientTensor(scale * rng.normal(size=dims))


def unit(rng, n):
    v = rng.normal(size=n)
    return v / np.linalg.norm(v)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE_LINES: dict[int, str] = {}


def record_acceptance(number: int, passed: bool, detail: str) -> None:
    """Store and print the one-line verdict of an acceptance criterion."""
    line = f"ACCEPTANCE {number:>2} {'PASS' if passed else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
