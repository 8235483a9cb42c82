"""Collects acceptance outcomes and prints one PASS/FAIL line per criterion."""
import pytest

_criteria: dict[int, dict] = {}
_nodes: dict[str, int] = {}


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("acceptance")
        if mark:
            n, title = mark.args
            _criteria.setdefault(n, {"title": title, "ok": True, "seen": False})
            _nodes[item.nodeid] = n


def pytest_runtest_logreport(report):
    n = _nodes.get(report.nodeid)
    if n is None:
        return
    c = _criteria[n]
    if report.failed:
        c["ok"] = False
    if report.when == "call":
        c["seen"] = True


def pytest_terminal_summary(terminalreporter):
    ran = {n: c for n, c in _criteria.items() if c["seen"] or not c["ok"]}
    if not ran:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ran):
        c = ran[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if c['ok'] else 'FAIL'}  {c['title']}")
