import sys
from collections import OrderedDict
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_criteria: "OrderedDict[int, dict]" = OrderedDict()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): test belongs to an acceptance criterion")


def pytest_collection_modifyitems(items):
    for item in items:
        mark = item.get_closest_marker("criterion")
        if mark is not None:
            num, title = mark.args
            _criteria.setdefault(num, {"title": title, "outcomes": []})


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        _criteria[mark.args[0]]["outcomes"].append(report.outcome)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_criteria):
        info = _criteria[num]
        outs = info["outcomes"]
        if not outs:
            status = "NOT RUN"
        elif all(o == "passed" for o in outs):
            status = "PASS"
        elif all(o == "skipped" for o in outs):
            status = "SKIP"
        else:
            status = "FAIL"
        terminalreporter.write_line(f"criterion {num} [{status}] {info['title']} ({len(outs)} checks)")


@pytest.fixture(scope="session")
def overfit_run(tmp_path_factory):
    """Default desk-scale training run through the CLI: 16 synthetic images, ILNet-S, 64x64, 150 epochs."""
    from ilnet.cli import main

    out = tmp_path_factory.mktemp("overfit")
    code = main(["train", "--out", str(out)])
    assert code == 0
    return out
