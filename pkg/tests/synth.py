"""Synthetic datasets shared by the trainer, CLI and acceptance tests."""

import numpy as np

from mllc.labels import LabelVector
from mllc.trainer import Dataset, Example


def separable_dataset(n=200, l=6, d=20, seed=0, margin=0.5):
    """Labels are signs of a hidden linear map; each ``x`` clears every
    hyperplane by at least ``margin`` (in units of the row norm)."""
    rng = np.random.default_rng(seed)
    truth = rng.standard_normal((l, d))
    norms = np.linalg.norm(truth, axis=1)
    rows = []
    while len(rows) < n:
        x = rng.standard_normal(d)
        s = truth @ x
        if np.min(np.abs(s) / norms) >= margin:
            rows.append((x, s >= 0))
    examples = tuple(
        Example(np.arange(d, dtype=np.int64), x, LabelVector.from_indices(l, np.flatnonzero(pos).tolist()))
        for x, pos in rows
    )
    return Dataset(l, d, examples)


def dataset_text(data):
    lines = []
    for ex in data:
        labels = ",".join(str(i) for i in ex.y.indices())
        feats = " ".join(f"{int(k)}:{float(v)!r}" for k, v in zip(ex.idx, ex.vals))
        lines.append(f"{labels}\t{feats}")
    return "\n".join(lines) + "\n"
