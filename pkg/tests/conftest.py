"""Shared pytest hooks: one summary line per acceptance criterion."""

ACCEPTANCE_RESULTS: dict[str, tuple[bool, float, str]] = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_RESULTS):
        ok, elapsed, detail = ACCEPTANCE_RESULTS[key]
        tr.write_line(f"{key}: {'PASS' if ok else 'FAIL'} ({elapsed:.1f} s) {detail}")
