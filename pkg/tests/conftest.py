import pytest

CRITERIA: dict[int, tuple[bool, str]] = {}


class CriterionRecorder:
    def __init__(self, number: int):
        self.number = number
        self.recorded = False

    def __call__(self, passed: bool, detail: str) -> bool:
        CRITERIA[self.number] = (bool(passed), detail)
        self.recorded = True
        line = f"CRITERION {self.number}: {'PASS' if passed else 'FAIL'}  {detail}"
        print(line)
        return bool(passed)


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")


@pytest.fixture
def criterion(request):
    marker = request.node.get_closest_marker("criterion")
    rec = CriterionRecorder(marker.args[0])
    yield rec
    if not rec.recorded:
        CRITERIA[rec.number] = (False, "did not complete")


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        passed, detail = CRITERIA[number]
        terminalreporter.write_line(f"CRITERION {number}: {'PASS' if passed else 'FAIL'}  {detail}")
