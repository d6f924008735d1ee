import shutil
from pathlib import Path

import pytest

from hatepipe.corpus import SCHEME_A, SCHEME_B, Dataset, Instance

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def scheme_a():
    return SCHEME_A


@pytest.fixture
def scheme_b():
    return SCHEME_B


@pytest.fixture
def pipeline_fixture_dir(tmp_path):
    """Copy of the bundled 30-instance fixture, safe to run against."""
    dst = tmp_path / "pipeline"
    shutil.copytree(FIXTURES / "pipeline", dst)
    return dst


def make_dataset(scheme, rows):
    """rows: iterable of (id, text, label, split)."""
    return Dataset(
        scheme=scheme,
        instances=[
            Instance(id=r[0], text=r[1], label=r[2], split=r[3]) for r in rows
        ],
    )


@pytest.fixture
def tiny_train_a():
    return make_dataset(
        SCHEME_A,
        [
            ("t1", "we stand together", 0, "train"),
            ("t2", "get rid of them all", 1, "train"),
            ("t3", "a lovely afternoon", 0, "train"),
            ("t4", "they should disappear", 1, "train"),
        ],
    )
