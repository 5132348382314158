import numpy as np
import pytest

from onchip_hom.config import load_config
from onchip_hom.pipeline import build_experiment
from onchip_hom.source import load_sellmeier


@pytest.fixture(scope="session")
def ktp():
    return load_sellmeier()


@pytest.fixture(scope="session")
def preset_config():
    return load_config("paper_fig4a")


@pytest.fixture(scope="session")
def preset_exp(preset_config):
    return build_experiment(preset_config)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = pytest.StashKey[list]()


@pytest.fixture
def criterion(request):
    """Record and print one PASS/FAIL line for an acceptance criterion."""
    lines = request.config.stash.setdefault(ACCEPTANCE_LINES, [])

    class _Recorder:
        def __init__(self):
            self.label = None

        def __call__(self, label):
            self.label = label

    rec = _Recorder()
    yield rec
    failed = request.node.stash.get(_FAILED, False)
    line = f"{rec.label}: {'FAIL' if failed else 'PASS'}"
    lines.append(line)
    print(f"\n{line}")


_FAILED = pytest.StashKey[bool]()


@pytest.hookimpl(wrapper=True)
def pytest_runtest_makereport(item, call):
    report = yield
    if call.when == "call" and report.failed:
        item.stash[_FAILED] = True
    return report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[0][1:])):
            terminalreporter.write_line(line)
