import pytest

from mixed_moments.hecke import generate_tau_table

# enough coefficients for every moment node up to t = 8000 (no doubling)
TABLE_N = 120_000


@pytest.fixture(scope="session")
def delta_table():
    return generate_tau_table(TABLE_N)


@pytest.fixture(scope="session")
def small_table():
    return generate_tau_table(20_000)


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE: list[str] = []


@pytest.fixture
def verdict():
    def record(n: int, ok: bool, detail: str) -> bool:
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
