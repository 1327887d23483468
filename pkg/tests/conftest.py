import math

import numpy as np
import pytest

from cctt import CollisionChecker, VehicleParams, bundled_scenario


@pytest.fixture(scope="session")
def params():
    return VehicleParams()


@pytest.fixture(scope="session")
def empty_checker():
    return CollisionChecker((), (-1e3, -1e3, 1e3, 1e3))


@pytest.fixture(scope="session")
def perp():
    return bundled_scenario("perp")


@pytest.fixture(scope="session")
def parallel():
    return bundled_scenario("parallel")


def rk4_clothoid(sigma, kappa_target, h=1e-4):
    """Integrate x' = cos th, y' = sin th, th' = sigma s from the origin (reference oracle).

    theta is known in closed form, so each RK4 step reduces to Simpson's rule
    on x and y; the steps are summed with numpy.
    """
    length = kappa_target / sigma
    n = max(1, int(math.ceil(length / h)))
    h = length / n
    s = np.arange(n) * h

    def f(u):
        th = 0.5 * sigma * u * u
        return np.cos(th), np.sin(th)

    c1, s1 = f(s)
    c2, s2 = f(s + h / 2)
    c4, s4 = f(s + h)
    x = float(np.sum(h / 6 * (c1 + 4 * c2 + c4)))
    y = float(np.sum(h / 6 * (s1 + 4 * s2 + s4)))
    return x, y, 0.5 * sigma * length * length


def max_sampled_curvature_step(path, params, ds=0.05):
    """Largest |dk| - sigma_max*ds between consecutive samples in one driving direction."""
    rows = path.sample(ds)
    same = rows[1:, 5] == rows[:-1, 5]
    excess = np.abs(np.diff(rows[:, 4])) - params.sigma_max * np.abs(np.diff(rows[:, 0]))
    return float(excess[same].max()) if np.any(same) else -math.inf


# ---------------------------------------------------------------- acceptance report


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line per acceptance criterion for the terminal summary."""
    lines = request.config.__dict__.setdefault("_acceptance_lines", {})

    def record(number, ok, detail):
        lines[number] = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(lines[number])
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.__dict__.get("_acceptance_lines")
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
