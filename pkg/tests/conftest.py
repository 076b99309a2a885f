import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

_ACCEPTANCE_RESULTS: list[tuple[str, str]] = []


def record_acceptance(name: str, passed: bool, detail: str = "") -> None:
    status = "PASS" if passed else "FAIL"
    _ACCEPTANCE_RESULTS.append((name, f"{status}{': ' + detail if detail else ''}"))
    print(f"ACCEPTANCE {status}: {name}" + (f" ({detail})" if detail else ""))
    assert passed, f"acceptance criterion failed: {name} {detail}"


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, status in _ACCEPTANCE_RESULTS:
        terminalreporter.write_line(f"{status.split(':')[0]:4s}  {name}"
                                    + (f"  [{status.split(': ', 1)[1]}]" if ": " in status else ""))
