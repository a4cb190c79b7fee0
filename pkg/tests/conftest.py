import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

ORDER_ONE_R3 = [
    "linear:x1",
    "linear:x2",
    "linear:x3",
    "linear:mix",
    "radial",
    "ellipsoidal",
    "q2-over-r",
    "x1x2-over-r",
    "cubic-over-r2",
    "trig",
    "exp-mix",
    "cubic-mix",
]


# filled by the acceptance module, echoed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def sphere_sample(m, dim=3, seed=0, min_last=0.0, max_lat=None):
    """Random unit points, optionally keeping |x_n| >= min_last and |theta2| <= max_lat."""
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < m:
        x = rng.normal(size=dim)
        x /= np.linalg.norm(x)
        if abs(x[-1]) < min_last:
            continue
        if max_lat is not None and abs(np.arcsin(x[2])) > max_lat:
            continue
        out.append(x)
    return np.array(out)
