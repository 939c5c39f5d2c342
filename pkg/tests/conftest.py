# Run from the repository root or from tests/: python3 -m pytest -v
# Full size runs: add --benchmarks (minutes each), the 120x40x8 run also needs --slow (hours).

import sys
from os import path

import pytest

ROOT = path.dirname(path.dirname(path.abspath(__file__)))
if ROOT not in sys.path:
    sys.path.insert(0, ROOT)


def pytest_addoption(parser):
    parser.addoption("--benchmarks", action="store_true", default=False, help="run the full size benchmark problems")
    parser.addoption("--slow", action="store_true", default=False, help="run the multi hour benchmark")


def pytest_configure(config):
    config.addinivalue_line("markers", "benchmark: full size benchmark problem, needs --benchmarks")
    config.addinivalue_line("markers", "slow: multi hour run, needs --benchmarks and --slow")


def pytest_collection_modifyitems(config, items):
    skip_benchmark = pytest.mark.skip(reason="needs --benchmarks")
    skip_slow = pytest.mark.skip(reason="needs --slow")
    for item in items:
        if "benchmark" in item.keywords and not config.getoption("--benchmarks"):
            item.add_marker(skip_benchmark)
        if "slow" in item.keywords and not config.getoption("--slow"):
            item.add_marker(skip_slow)


@pytest.fixture
def output_dir(tmp_path):
    # Each run gets its own directory, log file included
    return str(tmp_path / "output")
