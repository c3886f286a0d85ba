import os
from pathlib import Path

import pytest

from synth import write_ml100k_like, write_ml1m_like

# Real MovieLens raw data is looked up under $SRLGAN_DATA_ROOT (default
# ./data) in ml-100k/ and ml-1m/ subdirectories.  Tests that need the real
# datasets skip when they are absent.
DATA_ROOT = Path(os.environ.get("SRLGAN_DATA_ROOT", Path(__file__).parents[1] / "data"))
ML100K_DIR = DATA_ROOT / "ml-100k"
ML1M_DIR = DATA_ROOT / "ml-1m"


def require_ml100k():
    if not (ML100K_DIR / "u.data").exists():
        pytest.skip(f"real ML100K raw data not present at {ML100K_DIR} "
                    "(set SRLGAN_DATA_ROOT)")
    return ML100K_DIR


def require_ml1m():
    if not (ML1M_DIR / "ratings.dat").exists():
        pytest.skip(f"real ML1M raw data not present at {ML1M_DIR} "
                    "(set SRLGAN_DATA_ROOT)")
    return ML1M_DIR


@pytest.fixture(scope="session")
def synth100k_dir(tmp_path_factory):
    return write_ml100k_like(tmp_path_factory.mktemp("synth100k"))


@pytest.fixture(scope="session")
def synth1m_dir(tmp_path_factory):
    return write_ml1m_like(tmp_path_factory.mktemp("synth1m"))


@pytest.fixture(scope="session")
def synth_cache(synth100k_dir):
    from srlgan.pipeline import prepare_dataset

    cache, _ = prepare_dataset(synth100k_dir, "ml100k", items=50)
    return cache
