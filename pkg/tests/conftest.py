import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long-running acceptance runs")


_criteria: list[tuple[int, str, bool, str]] = []


@pytest.fixture
def criterion():
    """Record one acceptance line: criterion(number, title, passed, detail)."""
    def record(num: int, title: str, passed: bool, detail: str = "") -> bool:
        _criteria.append((num, title, bool(passed), detail))
        print(f"{'PASS' if passed else 'FAIL'} criterion {num}: {title} {detail}")
        return bool(passed)
    return record


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for num, title, ok, detail in sorted(_criteria):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {num:>2} {title}: {detail}")
