"""Minimum-redundancy maximum-relevance feature ranking.

Difference (MID) form with histogram mutual information: each column is cut
into equal-width bins, relevance is I(feature; label), redundancy is the mean
I(feature; already selected) over the selected set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from pupilemo.errors import InputError
from pupilemo.features import FeatureMatrix

DEFAULT_K = 51
DEFAULT_BINS = 10


@dataclass(frozen=True)
class StepScore:
    relevance_bits: float
    redundancy_bits: float
    objective: float


@dataclass(frozen=True)
class SelectionResult:
    selected: tuple[int, ...]
    scores: tuple[StepScore, ...]
    k: int
    n_bins: int


def discretize(column, n_bins: int = DEFAULT_BINS) -> np.ndarray:
    """Equal-width bin ids over [min, max]; the maximum lands in the last bin."""
    x = np.asarray(column, dtype=np.float64)
    if n_bins < 2:
        raise ValueError("n_bins must be at least 2")
    if x.size == 0:
        return np.zeros(0, dtype=np.int64)
    lo, hi = x.min(), x.max()
    if hi == lo:
        return np.zeros(x.size, dtype=np.int64)
    ids = np.floor((x - lo) / (hi - lo) * n_bins).astype(np.int64)
    return np.clip(ids, 0, n_bins - 1)


def mutual_information(x, y) -> float:
    """Plug-in mutual information in bits between two integer-coded columns."""
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    if x.shape != y.shape or x.size == 0:
        raise ValueError("x and y must be non-empty and of equal length")
    _, xi = np.unique(x, return_inverse=True)
    _, yi = np.unique(y, return_inverse=True)
    nx, ny = xi.max() + 1, yi.max() + 1
    joint = np.bincount(xi * ny + yi, minlength=nx * ny).reshape(nx, ny) / x.size
    px = joint.sum(axis=1, keepdims=True)
    py = joint.sum(axis=0, keepdims=True)
    nz = joint > 0
    mi = float((joint[nz] * np.log2(joint[nz] / (px @ py)[nz])).sum())
    return max(mi, 0.0)


def mrmr_select(fm: FeatureMatrix, k: int = DEFAULT_K, n_bins: int = DEFAULT_BINS) -> SelectionResult:
    """Greedy mRMR ranking of the matrix columns.

    Step one takes the most relevant column. Each later step takes the
    unselected column maximizing ``relevance - mean redundancy`` against the
    columns chosen so far. Ties go to the lower column index.
    """
    width = fm.X.shape[1]
    if len(fm) == 0:
        raise ValueError("feature matrix is empty")
    if not 1 <= k <= width:
        raise ValueError(f"k must lie in [1, {width}]")
    binned = [discretize(fm.X[:, j], n_bins) for j in range(width)]
    relevance = np.array([mutual_information(b, fm.labels) for b in binned])
    redundancy_sum = np.zeros(width)
    available = np.ones(width, dtype=bool)
    selected: list[int] = []
    scores: list[StepScore] = []
    for step in range(k):
        redundancy = redundancy_sum / step if step else np.zeros(width)
        objective = np.where(available, relevance - redundancy, -np.inf)
        best = int(np.argmax(objective))  # first maximum = lowest index
        selected.append(best)
        scores.append(StepScore(float(relevance[best]), float(redundancy[best]), float(objective[best])))
        available[best] = False
        for j in np.flatnonzero(available):
            redundancy_sum[j] += mutual_information(binned[j], binned[best])
    return SelectionResult(tuple(selected), tuple(scores), k, n_bins)


def format_report(result: SelectionResult, names) -> str:
    lines = ["rank,feature,relevance_bits,redundancy_bits,objective"]
    for rank, (idx, sc) in enumerate(zip(result.selected, result.scores), start=1):
        lines.append(f"{rank},{names[idx]},{sc.relevance_bits!r},{sc.redundancy_bits!r},{sc.objective!r}")
    return "\n".join(lines) + "\n"


def read_report(path) -> list[str]:
    """Feature names, in rank order, from a report written by :func:`format_report`."""
    names = []
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if header[:2] != ["rank", "feature"]:
            raise InputError(f"{path}: not a selection report")
        for line in fh:
            if line.strip():
                names.append(line.split(",")[1])
    return names
