from __future__ import annotations

import os

from hypothesis import settings

settings.register_profile("default", deadline=None, max_examples=60)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# filled by tests/test_acceptance.py: criterion label -> (passed, detail)
ACCEPTANCE_REPORT: dict[str, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(ACCEPTANCE_REPORT, key=_label_key):
        ok, detail = ACCEPTANCE_REPORT[label]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}: {detail}")


def _label_key(label: str):
    head = label.split()[0]
    num = "".join(ch for ch in head if ch.isdigit())
    return (int(num) if num else 99, label)
