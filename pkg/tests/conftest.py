import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from relayorp.channel import Receiver, Topology

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def make_topo(receivers, source=(0.0, 0.0), **kw) -> Topology:
    return Topology(tuple(source), tuple(Receiver(f"t{i + 1}", tuple(p)) for i, p in enumerate(receivers)), **kw)


def random_topo(rng: np.random.Generator, n: int, gamma=1.0, alpha=2.0, box=10.0) -> Topology:
    pts = rng.uniform(0.0, box, (n + 1, 2))
    return make_topo([tuple(p) for p in pts[1:]], source=tuple(pts[0]), gamma=gamma, alpha=alpha)


coord = st.floats(-10.0, 10.0, allow_nan=False, allow_infinity=False)


@st.composite
def topologies(draw, min_n=1, max_n=6):
    n = draw(st.integers(min_n, max_n))
    pts = draw(st.lists(st.tuples(coord, coord), min_size=n, max_size=n))
    # keep receivers clear of the source
    pts = [p for p in pts if np.hypot(*p) > 1e-3]
    if not pts:
        pts = [(1.0, 0.0)]
    gamma = draw(st.sampled_from([0.25, 0.5, 1.0, 2.0, 4.0]))
    alpha = draw(st.sampled_from([2.0, 3.0, 4.0]))
    return make_topo(pts, gamma=gamma, alpha=alpha)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
