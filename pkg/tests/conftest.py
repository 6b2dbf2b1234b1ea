import pytest

from bscsim.core import DEFAULT_LADDER_KBPS, BitrateLadder, Manifest

K = 1000  # Kbps -> bps


@pytest.fixture
def ladder():
    return BitrateLadder.from_kbps(DEFAULT_LADDER_KBPS)


def make_manifest(n=175, L=2.0, phi=4, ladder=None):
    return Manifest(n, L, phi, ladder or BitrateLadder.from_kbps(DEFAULT_LADDER_KBPS))


@pytest.fixture
def manifest():
    return make_manifest()


# -- acceptance reporting ---------------------------------------------------

ACCEPTANCE = []  # (number, passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, passed, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}")
