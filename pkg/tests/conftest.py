import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for number in sorted(RESULTS):
            status, title, dt = RESULTS[number]
            terminalreporter.write_line(f"criterion {number}: {status} ({dt:.2f} s) {title}")
