import numpy as np
import pytest

from tmcdma import baseband

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "criterion(n, title): acceptance criterion covered by a test")
    config.addinivalue_line("markers", "slow: long-running statistical test")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.failed):
        return
    crit = getattr(report, "_criterion", None)
    if crit is None:
        return
    n, title = crit
    ok = _CRITERIA.get((n, title), True)
    _CRITERIA[(n, title)] = ok and report.passed


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is not None:
        report._criterion = (m.args[0], m.args[1])


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for (n, title), ok in sorted(_CRITERIA.items()):
        terminalreporter.write_line(
            f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {title}")


def random_instance(rng, K, N=None, sigma=0.5):
    """Random codes, bits and noisy matched-filter output."""
    N = N or max(2 * K, 4)
    C = rng.choice([-1.0, 1.0], size=(K, N)) / np.sqrt(N)
    R = baseband.correlation_matrix(C)
    b = rng.choice([-1, 1], size=K).astype(np.int8)
    chips = b @ C + sigma * rng.standard_normal(N)
    y = chips @ C.T
    return y, R, b


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
