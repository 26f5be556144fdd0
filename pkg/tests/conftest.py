"""Collects acceptance results and prints one PASS/FAIL line per criterion."""

import pytest

_ACCEPTANCE: dict[int, list[tuple[str, bool, str]]] = {}


@pytest.fixture
def criterion():
    def report(number: int, label: str, ok: bool, detail: str) -> bool:
        _ACCEPTANCE.setdefault(number, []).append((label, bool(ok), detail))
        return bool(ok)

    return report


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_ACCEPTANCE):
        checks = _ACCEPTANCE[number]
        status = "PASS" if all(ok for _, ok, _ in checks) else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {status}")
        for label, ok, detail in checks:
            terminalreporter.write_line(f"    [{'ok' if ok else 'FAIL'}] {label}: {detail}")
