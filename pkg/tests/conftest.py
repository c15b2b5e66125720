import contextlib

import pytest

_CRITERIA: dict[str, tuple[bool, str]] = {}


class _Record:
    def __init__(self):
        self.detail = ""


@pytest.fixture
def criterion():
    """``with criterion("3", "title") as rec:`` records one pass/fail line for the summary."""

    @contextlib.contextmanager
    def _run(number, title):
        rec = _Record()
        try:
            yield rec
        except BaseException as exc:
            _CRITERIA[number] = (False, f"{title}: {rec.detail or type(exc).__name__}")
            raise
        _CRITERIA[number] = (True, f"{title}: {rec.detail}")

    return _run


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA, key=int):
        ok, text = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'} | {text}")
