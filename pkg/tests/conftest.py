import sys

import numpy as np
import pytest

from resoctree import datasets
from resoctree.ingest import build_hierarchy
from resoctree.service import DatasetStore


@pytest.fixture(scope="session")
def data_root(tmp_path_factory):
    return tmp_path_factory.mktemp("data")


@pytest.fixture(scope="session")
def ds64(data_root):
    out = data_root / "shell64"
    vol = datasets.shell_volume(64)
    build_hierarchy([vol], (16, 16, 16), 3, (2, 2, 2), str(out), name="shell")
    return str(out)


@pytest.fixture(scope="session")
def store64(ds64):
    return DatasetStore(ds64)


@pytest.fixture(scope="session")
def ds64mc(data_root):
    out = data_root / "sparse64x4"
    chans = datasets.sparse_multichannel(64, channels=4)
    build_hierarchy(chans, (16, 16, 16), 3, (2, 2, 2), str(out),
                    name="sparse4")
    return str(out)


@pytest.fixture(scope="session")
def store64mc(ds64mc):
    return DatasetStore(ds64mc)


@pytest.fixture(scope="session")
def shell64_volume():
    return datasets.shell_volume(64)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo per-criterion verdict lines from the acceptance suite."""
    mod = sys.modules.get("tests.test_acceptance") or sys.modules.get(
        "test_acceptance")
    lines = getattr(mod, "REPORT_LINES", None) if mod else None
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
