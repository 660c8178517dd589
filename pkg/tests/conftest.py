import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from parahess.grid_domain import ProblemSpec, TimeGrid, make_ball_domain
from parahess.hessian_core import sigma_k_root

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def abs2(z):
    return np.sum(np.asarray(z) ** 2, axis=-1)


def manufactured(n, k, h, T=0.25, M=8, R=1.0, a=2.0):
    """u*(t, z) = (1 + t)|z|^2 with g = 1 and the matching G."""
    op = sigma_k_root(n, k)
    f1 = op.one()
    return ProblemSpec(
        make_ball_domain(n, R, a, h), TimeGrid(T, M), op,
        G=lambda t, z, r: np.log((1 + t) * f1) - abs2(z) + (r - (1 + t) * abs2(z)),
        g=lambda z: np.ones(len(z)), phi=lambda t, z: (1 + t) * abs2(z), u0=abs2,
        exact=lambda t, z: (1 + t) * abs2(z), name="manufactured")


def exp_growth(n, k, h, T=0.25, M=8, R=1.0, a=2.0):
    """u*(t, z) = e^t |z|^2 with g = 1; forward and backward Euler are only first order here."""
    op = sigma_k_root(n, k)
    f1 = op.one()
    return ProblemSpec(
        make_ball_domain(n, R, a, h), TimeGrid(T, M), op,
        G=lambda t, z, r: np.log(np.exp(t) * f1) - np.exp(t) * abs2(z) + (r - np.exp(t) * abs2(z)),
        g=lambda z: np.ones(len(z)), phi=lambda t, z: np.exp(t) * abs2(z), u0=abs2,
        exact=lambda t, z: np.exp(t) * abs2(z), name="exp_growth")


def stationary(n, k, h, T=0.25, M=8, R=1.0, a=2.0):
    """u = |z|^2 for all t: g = f(1, ..., 1), G = 0."""
    op = sigma_k_root(n, k)
    f1 = op.one()
    return ProblemSpec(
        make_ball_domain(n, R, a, h), TimeGrid(T, M), op,
        G=lambda t, z, r: 0.0 * r, g=lambda z: np.full(len(z), f1),
        phi=lambda t, z: abs2(z), u0=abs2, exact=lambda t, z: abs2(z), name="stationary")


def exact_field(problem):
    dom = problem.domain
    return np.stack([dom.evaluate(problem.exact, t) for t in problem.times])


def max_error(problem, field):
    d = problem.domain.defined
    return float(np.max(np.abs(field.values[:, d] - exact_field(problem)[:, d])))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one PASS/FAIL line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def record_criterion(label: str, passed: bool, detail: str) -> None:
    line = f"{'PASS' if passed else 'FAIL'} {label}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
