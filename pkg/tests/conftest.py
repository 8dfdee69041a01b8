import sys

import numpy as np
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

settings.register_profile(
    "default",
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

# property suites run at least this many examples
N_PROP = 1000


@st.composite
def pmfs(draw, min_size=2, max_size=8, floor=1e-3):
    """Probability vectors with every entry at least about ``floor / size``."""
    k = draw(st.integers(min_size, max_size))
    w = draw(st.lists(st.floats(floor, 1.0), min_size=k, max_size=k))
    w = np.asarray(w)
    return w / w.sum()


@st.composite
def pmf_pairs(draw, min_size=2, max_size=6):
    k = draw(st.integers(min_size, max_size))
    p = draw(pmfs(k, k))
    q = draw(pmfs(k, k))
    return p, q


gammas = st.floats(0.05, 10.0)
gammas_with_zero = st.one_of(st.just(0.0), gammas)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
