import pytest

from starprod.battery import curved_battery, full_battery
from starprod.fedosov import extract_cochains, solve_r
from starprod.weylalg import Truncation

N = 3
TRUNC = Truncation.for_order(N)


class _Engine:
    """Lazily solved Fedosov data and cochain tables per battery entry."""

    def __init__(self):
        self._fd = {}
        self._tables = {}

    def fd(self, entry, trunc=TRUNC):
        key = (entry.name, trunc)
        if key not in self._fd:
            self._fd[key] = solve_r(entry.geometry, trunc)
        return self._fd[key]

    def product(self, entry, trunc=TRUNC):
        key = (entry.name, trunc)
        if key not in self._tables:
            ex = extract_cochains(self.fd(entry, trunc))
            assert not ex.verification_failures
            self._tables[key] = ex.product
        return self._tables[key]


@pytest.fixture(scope="session")
def engine():
    return _Engine()


@pytest.fixture(scope="session")
def battery():
    return full_battery()


@pytest.fixture(scope="session")
def curved():
    return curved_battery()


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[n])
