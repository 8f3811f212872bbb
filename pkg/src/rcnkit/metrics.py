"""Regression and classification metrics, instance- and sequence-mode.

Sequence-mode pooling uses concatenation semantics: a sequence-to-sequence
metric over a dataset equals the plain metric over all time steps stacked
together, which weights sequences by their length. A single sequence is
therefore always scored identically in both modes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["MetricValue", "mse", "r2", "accuracy", "sequence_metric"]


@dataclass(frozen=True)
class MetricValue:
    name: str
    value: float
    n_samples: int
    degenerate: bool = False


def _paired(y_true, y_pred):
    a = np.asarray(y_true, dtype=np.float64)
    b = np.asarray(y_pred, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ValueError("metrics need at least one sample")
    return a, b


def mse(y_true, y_pred) -> float:
    """Mean squared deviation over all entries."""
    a, b = _paired(y_true, y_pred)
    return float(np.mean((a - b) ** 2))


def r2(y_true, y_pred):
    """Coefficient of determination ``1 - SSE/SST`` pooled over all entries.

    Constant truth has no variance to explain; that case returns a
    ``MetricValue`` flagged degenerate instead of a bare float.
    """
    a, b = _paired(y_true, y_pred)
    sse = float(np.sum((a - b) ** 2))
    sst = float(np.sum((a - a.mean()) ** 2))
    if sst == 0.0:
        return MetricValue("r2", float("nan"), a.shape[0], degenerate=True)
    return 1.0 - sse / sst


def accuracy(labels_true, labels_pred) -> float:
    """Fraction of exactly matching labels."""
    a = np.asarray(labels_true)
    b = np.asarray(labels_pred)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ValueError("metrics need at least one sample")
    return float(np.mean(a == b))


def _is_sequence_to_sequence(targets):
    # Per-step targets are arrays; sequence labels are scalars.
    return np.asarray(targets[0]).ndim >= 1


def sequence_metric(metric, dataset_true, dataset_pred):
    """Score a metric across sequences.

    Sequence-to-sequence data (per-step target arrays) is concatenated
    along time before scoring; sequence-to-label data is scored over the
    two label lists directly.
    """
    if len(dataset_true) != len(dataset_pred):
        raise ValueError(
            f"sequence count mismatch: {len(dataset_true)} vs {len(dataset_pred)}"
        )
    if len(dataset_true) == 0:
        raise ValueError("metrics need at least one sequence")
    if _is_sequence_to_sequence(dataset_true):
        lengths_true = [np.asarray(s).shape[0] for s in dataset_true]
        lengths_pred = [np.asarray(s).shape[0] for s in dataset_pred]
        if lengths_true != lengths_pred:
            raise ValueError("per-sequence lengths differ between truth and prediction")
        flat_true = np.concatenate([np.atleast_1d(np.asarray(s)) for s in dataset_true])
        flat_pred = np.concatenate([np.atleast_1d(np.asarray(s)) for s in dataset_pred])
        return metric(flat_true, flat_pred)
    return metric(np.asarray(dataset_true), np.asarray(dataset_pred))
