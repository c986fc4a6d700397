import pytest

from nomaharq.model import SystemConfig, db_to_linear

FIG1 = dict(alpha1=0.7, alpha2=0.3, d1=7.0, d2=3.0, zeta=3.0, rate1=0.2, rate2=0.8)


def fig1_config(snr_db: float = 30.0, **changes) -> SystemConfig:
    fields = dict(FIG1, rho=db_to_linear(snr_db))
    fields.update(changes)
    return SystemConfig(**fields)


@pytest.fixture
def cfg():
    """fig1 defaults at rho = 1000 (30 dB)."""
    return fig1_config(30.0)


ACCEPTANCE_LINES = []


@pytest.fixture
def report(capsys):
    """Print and remember one PASS/FAIL line for an acceptance criterion."""

    def emit(number, ok, detail, elapsed, limit):
        in_time = elapsed <= limit
        verdict = "PASS" if ok and in_time else "FAIL"
        line = f"criterion {number}: {verdict} | {detail} | {elapsed:.1f}s (limit {limit:g}s)"
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print("\n" + line)
        return ok and in_time

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
