import pytest

from pairtunnel import SystemParams

# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE_LINES: dict[int, str] = {}


def record(number: int, passed: bool, detail: str) -> None:
    line = f"CRITERION {number:2d}: {'PASS' if passed else 'FAIL'} | {detail}"
    ACCEPTANCE_LINES[number] = line
    print("\n" + line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])


@pytest.fixture
def far_sc():
    """Spin-conserving channel far from resonance: 2f/w = 1.6, 2U1/w = 1.4."""
    return SystemParams(f=32.0, u1=28.0, beta1=0.01, beta2=0.01)


@pytest.fixture
def far_sf():
    return SystemParams(alpha=0.5, omega_z=200.0, f=236.6, u1=28.0, beta1=0.01, beta2=0.01)


@pytest.fixture
def generic():
    """All terms switched on; no channel selection."""
    return SystemParams(
        nu=1.3, alpha=0.37, delta=0.8, omega=25.0, omega_z=7.0, f=11.0, beta1=0.02, beta2=0.05, u1=31.0, u2=12.0
    )
