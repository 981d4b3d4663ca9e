from __future__ import annotations

import pytest

from repot.zoo import StratificationPlan, generate_suite


@pytest.fixture(scope="session")
def default_suite():
    """The default 775-instance suite, generated once per session."""
    return generate_suite(StratificationPlan.default(), seed=7)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
