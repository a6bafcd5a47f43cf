import numpy as np
import pytest
from hypothesis import strategies as st

from tcpreempt.models import BathtubParams

REP = BathtubParams(A=0.45, tau1=1.0, tau2=0.8, b=24.0, L=24.0)

# lines collected by the acceptance suite, echoed in the terminal summary
CRITERIA_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if CRITERIA_LINES:
        terminalreporter.section("acceptance criteria")
        for line in CRITERIA_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rep():
    return REP


def random_bathtub(rng: np.random.Generator, L: float = 24.0) -> BathtubParams:
    """Draw valid bathtub parameters with F(0) <= 0.01 and F(L) <= 1."""
    while True:
        try:
            m = BathtubParams(
                A=rng.uniform(0.2, 0.9),
                tau1=rng.uniform(0.2, 5.0),
                tau2=rng.uniform(0.3, 3.0),
                b=rng.uniform(0.9 * L, 1.2 * L),
                L=L,
            )
        except ValueError:
            continue
        if m._raw_cdf(L) <= 1.0:
            return m


@st.composite
def bathtubs(draw):
    seed = draw(st.integers(0, 2**32 - 1))
    return random_bathtub(np.random.default_rng(seed))
