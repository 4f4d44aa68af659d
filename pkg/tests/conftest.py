import numpy as np
import pytest

from probebench import EmbeddingDataset, normalize_rows


def _blob_dataset(means, n_per_class, spread, rng, classes, split_tag):
    rows, labels = [], []
    for c, n_c in enumerate(n_per_class):
        rows.append(means[c] + spread * rng.normal(size=(n_c, means.shape[1])))
        labels.extend([c] * n_c)
    ds = EmbeddingDataset(
        data=np.vstack(rows),
        labels=np.array(labels, dtype=np.int64),
        classes=classes,
        split_tag=split_tag,
    )
    return normalize_rows(ds)


def gaussian_pair(
    n_train_per,
    n_test_per,
    n_classes=3,
    dim=8,
    spread=1.0,
    mean_scale=3.0,
    seed=0,
):
    """Train/test datasets drawn from the same well-separated Gaussian blobs.

    n_train_per / n_test_per may be ints or per-class sequences. Rows are
    unit-normalized.
    """
    rng = np.random.default_rng(seed)
    if isinstance(n_train_per, int):
        n_train_per = [n_train_per] * n_classes
    if isinstance(n_test_per, int):
        n_test_per = [n_test_per] * n_classes
    means = rng.normal(size=(n_classes, dim))
    means *= mean_scale / np.linalg.norm(means, axis=1, keepdims=True)
    classes = [f"class_{c}" for c in range(n_classes)]
    train = _blob_dataset(means, n_train_per, spread, rng, classes, "train")
    test = _blob_dataset(means, n_test_per, spread, rng, classes, "test")
    return train, test


@pytest.fixture
def blob_pair():
    return gaussian_pair(40, 30, n_classes=3, dim=8, seed=11)
