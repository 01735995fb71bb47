"""Shared fixtures and the acceptance-results table.

The acceptance tests record one or more clause verdicts per numbered
criterion; after the run a summary table prints one PASS/FAIL line per
criterion so the battery's outcome is visible in plain pytest output.
"""

import pytest

_RECORDS = []  # (criterion number, ok, detail)


class AcceptanceLog:
    def record(self, criterion: int, ok: bool, detail: str) -> bool:
        _RECORDS.append((int(criterion), bool(ok), str(detail)))
        return bool(ok)


@pytest.fixture(scope="session")
def acceptance():
    return AcceptanceLog()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _RECORDS:
        return
    grouped = {}
    for num, ok, detail in _RECORDS:
        grouped.setdefault(num, []).append((ok, detail))
    terminalreporter.section("ACCEPTANCE CRITERIA RESULTS")
    for num in sorted(grouped):
        entries = grouped[num]
        verdict = "PASS" if all(ok for ok, _ in entries) else "FAIL"
        details = "; ".join(detail for _, detail in entries)
        terminalreporter.write_line(f"criterion {num:>2}: {verdict} — {details}")
