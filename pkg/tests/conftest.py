from fractions import Fraction

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from carnot import filiform, free2step, heisenberg, upper_triangular_nilradical

settings.register_profile("carnot", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("carnot")

CATALOG = {
    "heisenberg(1)": lambda: heisenberg(1),
    "heisenberg(2)": lambda: heisenberg(2),
    "free2step(3)": lambda: free2step(3),
    "filiform(5)": lambda: filiform(5),
    "nilradical(4)": lambda: upper_triangular_nilradical(4),
}


@pytest.fixture(params=sorted(CATALOG))
def algebra(request):
    return CATALOG[request.param]()


def rationals(max_num=9, max_den=5):
    return st.builds(Fraction, st.integers(-max_num, max_num), st.integers(1, max_den))


def rational_vectors(n, **kw):
    return st.lists(rationals(**kw), min_size=n, max_size=n)


def random_rational(rng, n, num=6, den=4):
    return [Fraction(int(a), int(b)) for a, b in zip(rng.integers(-num, num + 1, n),
                                                      rng.integers(1, den + 1, n))]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance criteria register their outcome here; summarised at the end of the run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
