import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One pass/fail line per acceptance criterion, printed after the run."""
    module = sys.modules.get("test_acceptance")
    results = getattr(module, "RESULTS", None) if module else None
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number, description, passed, detail in sorted(results):
        status = "PASS" if passed else "FAIL"
        line = f"criterion {number:>2}: {status} - {description}"
        if detail:
            line += f" ({detail})"
        terminalreporter.write_line(line)
