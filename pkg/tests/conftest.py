import pytest

from d2dcache.params import CodeParams, SystemParams


@pytest.fixture
def baseline():
    """Cluster of 30 nodes, 9 storage nodes on average, unit churn, Delta = 1."""
    return SystemParams(M_c=30.0, n_c=9.0, lambda_=1.0, mu=1.0, omega=0.02, delta=1.0,
                        t_d=0.02, t_bs=0.2)


@pytest.fixture
def code_15_5():
    return SystemParams(M_c=30.0, n_c=15.0, delta=1.0, t_d=0.02, t_bs=0.2), CodeParams(15, 5)


_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def acceptance_record():
    def record(label: str, ok: bool, detail: str) -> None:
        _ACCEPTANCE.append((label, ok, detail))
    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in sorted(_ACCEPTANCE, key=lambda r: (int(r[0].rstrip("*")), r[0])):
        terminalreporter.write_line(f"criterion {label:<2} {'PASS' if ok else 'FAIL'}  {detail}")
