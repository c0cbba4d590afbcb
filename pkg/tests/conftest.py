import re
import warnings

import pytest

# acceptance criterion -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def _order(name):
    num, tag = re.match(r"(\d+)(\w*)", name).groups()
    return int(num), tag


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE, key=_order):
        ok, detail = ACCEPTANCE[name]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")


@pytest.fixture
def quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield
