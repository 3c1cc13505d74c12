from pathlib import Path

import numpy as np
import pytest

from sswarm.dataset import Dataset, SemiSupervisedSplit

ROOT = Path(__file__).resolve().parents[1]
DATA = ROOT / "data"


def make_split(x, y, labeled, name="toy"):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    ds = Dataset(name, x, np.asarray(y))
    labeled = np.sort(np.asarray(labeled, dtype=np.int64))
    rest = np.setdiff1d(np.arange(len(x)), labeled)
    return SemiSupervisedSplit(ds, labeled, rest)


def blobs(seed, n_per=50, d=2, sigma=0.05, centers=(0.2, 0.8)):
    rng = np.random.default_rng(seed)
    x = np.vstack([rng.normal(c, sigma, size=(n_per, d)) for c in centers])
    y = np.repeat(np.arange(len(centers)), n_per)
    return x, y


@pytest.fixture
def data_dir():
    if not DATA.exists():
        pytest.skip("data/ not built; run scripts/fetch_datasets.py")
    return DATA
