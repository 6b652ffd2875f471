"""Self-labeling: change vectors and their row-sum labels.

A complete m x n price matrix becomes an m x (n-1) matrix of relative
changes, entry (i, j) being price(t_{j+1}) / price(t_j) - 1. Each series
then gets a numeric label equal to the sum of its change row, which turns
the unlabeled cohort into a supervised regression dataset: the change rows
are the features and the self-generated label is the target.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ContractError
from .sampler import SampleMatrix


def feature_names(n_samples: int) -> list[str]:
    """Column names T2_T1 .. Tn_Tn-1, one per consecutive sample pair."""
    return [f"T{j + 1}_T{j}" for j in range(1, n_samples)]


@dataclass
class ChangeMatrix:
    symbols: list[str]
    features: np.ndarray  # (m, n-1)
    feature_names: list[str]

    @property
    def m(self) -> int:
        return len(self.symbols)

    @property
    def n_features(self) -> int:
        return self.features.shape[1]


@dataclass
class LabeledDataset:
    changes: ChangeMatrix
    labels: np.ndarray  # (m,)


def compute_changes(matrix: SampleMatrix) -> ChangeMatrix:
    """Relative change of each consecutive sample pair, in time order.

    The matrix must already be filtered: a missing cell is a contract
    violation here, not a recoverable condition.
    """
    if matrix.n_samples < 2:
        raise ContractError(f"need at least 2 samples, got {matrix.n_samples}")
    if not matrix.is_complete():
        bad = [matrix.symbols[i] for i in np.nonzero(~matrix.present.all(axis=1))[0][:5]]
        raise ContractError(f"matrix has missing cells (e.g. {bad}); filter before computing changes")
    values = matrix.values
    feats = values[:, 1:] / values[:, :-1] - 1.0
    return ChangeMatrix(list(matrix.symbols), feats, feature_names(matrix.n_samples))


def self_label(changes: ChangeMatrix) -> LabeledDataset:
    """Attach to each series the sum of its change row as its label.

    Labels are not unique: offsetting moves can sum to the same value for
    different rows, and downstream consumers must tolerate duplicates.
    """
    labels = changes.features.sum(axis=1)
    return LabeledDataset(changes, labels)


def write_dataset_csv(dataset: LabeledDataset, path: str | Path) -> None:
    """Optional dump: `symbol,T2_T1,...,Tn_Tn-1,label`."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["symbol"] + dataset.changes.feature_names + ["label"])
        for i, sym in enumerate(dataset.changes.symbols):
            row = [sym] + [repr(float(v)) for v in dataset.changes.features[i]]
            row.append(repr(float(dataset.labels[i])))
            writer.writerow(row)
