import pytest

from spitgate.traffic_synth import CallProfile, synth_call

_criteria = {}


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call" and not (call.when == "setup" and call.excinfo):
        return
    cid, title = marker.args
    ok = call.excinfo is None
    prev = _criteria.get(cid, (title, True))
    _criteria[cid] = (title, prev[1] and ok)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for cid in sorted(_criteria, key=lambda c: int(c[2:])):
        title, ok = _criteria[cid]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {cid}  {title}")


@pytest.fixture(scope="session")
def genuine_call():
    return synth_call(CallProfile("genuine", 42))
