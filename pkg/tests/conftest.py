import numpy as np
import pytest

from qform.reduction import QuadraticFormSpec


def random_spd(rng, n, ridge=1e-6):
    """``G'G + n * ridge * I`` with standard normal ``G``."""
    g = rng.standard_normal((n, n))
    return g.T @ g + n * ridge * np.eye(n)


def random_correlation(rng, n):
    s = random_spd(rng, n, ridge=0.1)
    d = 1.0 / np.sqrt(np.diag(s))
    return s * d[:, None] * d[None, :]


def random_spec(rng, n, centered=False, identity_weight=False):
    sigma = random_spd(rng, n, ridge=0.05)
    A = None if identity_weight else random_spd(rng, n, ridge=0.05) / n
    mu = None if centered else rng.normal(scale=0.7, size=n)
    return QuadraticFormSpec(sigma=sigma, A=A, mu=mu)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance summary ----------------------------------------------------------

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    marker = getattr(report, "criterion", None)
    if marker is None:
        return
    number, title = marker
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _CRITERIA[number] = (title, report.outcome)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is not None:
        report.criterion = tuple(m.args)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, outcome = _CRITERIA[number]
        verdict = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{verdict}] criterion {number}: {title}")
