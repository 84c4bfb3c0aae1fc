import numpy as np
import pytest

from hyfl.data import SparseDataset


def dataset_from_dense(x, y, name="dense"):
    """Build a SparseDataset from a dense matrix, keeping zero entries out."""
    x = np.asarray(x, dtype=np.float64)
    samples = []
    for row in x:
        idx = np.flatnonzero(row).astype(np.int64)
        samples.append((idx, row[idx].copy()))
    return SparseDataset(
        n_samples=x.shape[0],
        n_features=x.shape[1],
        samples=samples,
        labels=np.asarray(y, dtype=np.int64),
        name=name,
    )


@pytest.fixture
def tiny_dataset():
    # Single sample x=[1], y=+1: optimum is alpha=1, w=1, P=D=0.5 at lambda=1.
    return dataset_from_dense([[1.0]], [1])
