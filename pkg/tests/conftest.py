import sys
from collections import defaultdict
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

# criterion number -> list of (ok, message), filled by the acceptance tests
_ACCEPTANCE: dict[int, list[tuple[bool, str]]] = defaultdict(list)


@pytest.fixture
def record():
    def add(criterion: int, ok: bool, message: str) -> None:
        _ACCEPTANCE[criterion].append((bool(ok), message))
        print(f"criterion {criterion}: {'PASS' if ok else 'FAIL'} {message}")
    return add


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for c in sorted(_ACCEPTANCE):
        parts = _ACCEPTANCE[c]
        verdict = "PASS" if all(ok for ok, _ in parts) else "FAIL"
        detail = "; ".join(m for _, m in parts)
        terminalreporter.write_line(f"criterion {c:2d}: {verdict}  {detail}")
