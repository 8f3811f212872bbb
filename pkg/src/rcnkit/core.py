"""Shared numeric foundations: activations, seeded randomness, scaling, CSV I/O.

All arithmetic is done in 64-bit floats. Matrices are row-major: one row is
one time step, one column is one feature.
"""

from __future__ import annotations

import csv
import gzip
import io
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ACTIVATIONS",
    "RNG_ALGORITHM",
    "apply_activation",
    "as_matrix",
    "make_rng",
    "MinMaxScaler",
    "SequenceDataset",
    "read_csv",
    "write_csv",
]

#: Pseudo-random generator backing every seeded draw in this package.
#: numpy guarantees stream stability for a fixed bit generator, so stored
#: seeds reproduce bit-identical weight matrices across releases as long as
#: this stays PCG64.
RNG_ALGORITHM = "numpy PCG64"


def make_rng(seed) -> np.random.Generator:
    """Return a PCG64 generator for ``seed`` (int or SeedSequence)."""
    return np.random.Generator(np.random.PCG64(seed))


def _identity(x):
    return x


def _logistic(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


ACTIVATIONS = {
    "identity": _identity,
    "tanh": np.tanh,
    "logistic": _logistic,
}


def apply_activation(m, kind):
    """Apply the named pointwise activation to a matrix or vector.

    ``kind`` is one of ``identity``, ``tanh``, ``logistic``, or a callable.
    """
    m = np.asarray(m, dtype=np.float64)
    if callable(kind):
        return kind(m)
    try:
        f = ACTIVATIONS[kind]
    except KeyError:
        raise ValueError(
            f"unknown activation {kind!r}; expected one of {sorted(ACTIVATIONS)}"
        ) from None
    return f(m)


def as_matrix(x, name="X", min_rows=0):
    """Coerce to a finite 2-D float64 array, raising on bad input.

    1-D input becomes a single-column matrix (a scalar time series).
    """
    m = np.asarray(x, dtype=np.float64)
    if m.ndim == 1:
        m = m.reshape(-1, 1)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    if m.shape[0] < min_rows:
        raise ValueError(f"{name} needs at least {min_rows} rows, got {m.shape[0]}")
    if m.size and not np.all(np.isfinite(m)):
        raise ValueError(f"{name} contains non-finite values")
    return m


@dataclass
class MinMaxScaler:
    """Per-column linear map of the training range onto [0, 1].

    Columns that are constant on the training data cannot be rescaled; they
    are mapped to 0 and flagged in ``degenerate`` instead of raising, so that
    fold pipelines keep running on pathological series.
    """

    min_: np.ndarray = field(default=None, repr=False)
    max_: np.ndarray = field(default=None, repr=False)
    degenerate: np.ndarray = field(default=None, repr=False)

    def fit(self, train):
        train = as_matrix(train, "train", min_rows=1)
        self.min_ = train.min(axis=0)
        self.max_ = train.max(axis=0)
        self.degenerate = self.max_ == self.min_
        return self

    @property
    def has_degenerate_columns(self) -> bool:
        return bool(np.any(self.degenerate))

    def _check_fitted(self, m, name):
        if self.min_ is None:
            raise RuntimeError("scaler is not fitted")
        m = as_matrix(m, name)
        if m.shape[1] != self.min_.shape[0]:
            raise ValueError(
                f"{name} has {m.shape[1]} columns, scaler was fitted on "
                f"{self.min_.shape[0]}"
            )
        return m

    def transform(self, m):
        m = self._check_fitted(m, "m")
        span = np.where(self.degenerate, 1.0, self.max_ - self.min_)
        out = (m - self.min_) / span
        out[:, self.degenerate] = 0.0
        return out

    def inverse_transform(self, m):
        m = self._check_fitted(m, "m")
        span = np.where(self.degenerate, 0.0, self.max_ - self.min_)
        return m * span + self.min_

    def fit_transform(self, train):
        return self.fit(train).transform(train)


class SequenceDataset:
    """Variable-length sequences with a shared feature width, plus targets.

    Targets are either one per-step array per sequence (sequence-to-sequence)
    or one label/value per sequence (sequence-to-label); the kind must be
    homogeneous within a dataset.
    """

    def __init__(self, sequences, targets):
        sequences = [as_matrix(s, f"sequences[{i}]", min_rows=1)
                     for i, s in enumerate(sequences)]
        targets = list(targets)
        if len(sequences) != len(targets):
            raise ValueError(
                f"{len(sequences)} sequences but {len(targets)} targets"
            )
        if not sequences:
            raise ValueError("dataset is empty")
        width = sequences[0].shape[1]
        for i, s in enumerate(sequences):
            if s.shape[1] != width:
                raise ValueError(
                    f"sequences[{i}] has {s.shape[1]} features, expected {width}"
                )
        kinds = {np.asarray(t).ndim >= 1 for t in targets}
        if len(kinds) > 1:
            raise ValueError("mixed per-step and per-sequence targets")
        self.sequences = sequences
        self.targets = targets
        self.per_step_targets = kinds.pop()
        if self.per_step_targets:
            for i, (s, t) in enumerate(zip(sequences, targets)):
                t = np.asarray(t)
                if t.shape[0] != s.shape[0]:
                    raise ValueError(
                        f"targets[{i}] has {t.shape[0]} steps, sequence has "
                        f"{s.shape[0]}"
                    )

    @property
    def feature_width(self) -> int:
        return self.sequences[0].shape[1]

    def __len__(self) -> int:
        return len(self.sequences)

    def __getitem__(self, i):
        return self.sequences[i], self.targets[i]

    def subset(self, indices) -> "SequenceDataset":
        return SequenceDataset(
            [self.sequences[i] for i in indices],
            [self.targets[i] for i in indices],
        )


def _open_text(path, mode="rt"):
    path = str(path)
    if path.endswith(".gz"):
        return gzip.open(path, mode, encoding="utf-8", newline="")
    return io.open(path, mode, encoding="utf-8", newline="")


def read_csv(path, expect_cols=None):
    """Read a comma-separated matrix of 64-bit floats.

    An optional single header row of column names is detected (any cell that
    does not parse as a float) and returned alongside the data. The row
    number in error messages is 1-based and counts the header.

    Returns ``(matrix, header_or_None)``.
    """
    rows = []
    header = None
    with _open_text(path) as fh:
        reader = csv.reader(fh)
        for lineno, rec in enumerate(reader, start=1):
            if not rec or (len(rec) == 1 and rec[0].strip() == ""):
                continue
            if lineno == 1:
                try:
                    rows.append([float(v) for v in rec])
                except ValueError:
                    header = [v.strip() for v in rec]
                continue
            try:
                rows.append([float(v) for v in rec])
            except ValueError as exc:
                raise ValueError(f"{path}: malformed row {lineno}: {exc}") from None
            if expect_cols is not None and len(rows[-1]) != expect_cols:
                raise ValueError(
                    f"{path}: row {lineno} has {len(rows[-1])} columns, "
                    f"expected {expect_cols}"
                )
            if len(rows) > 1 and len(rows[-1]) != len(rows[-2]):
                raise ValueError(f"{path}: row {lineno} has ragged column count")
    if not rows:
        return np.zeros((0, 0)), header
    m = np.asarray(rows, dtype=np.float64)
    if expect_cols is not None and m.shape[1] != expect_cols:
        raise ValueError(f"{path}: expected {expect_cols} columns, got {m.shape[1]}")
    return m, header


def write_csv(path, m, header=None):
    """Write a matrix as comma-separated 64-bit floats, one time step per row."""
    m = np.atleast_2d(np.asarray(m, dtype=np.float64))
    with _open_text(path, "wt") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if header is not None:
            writer.writerow(header)
        for row in m:
            writer.writerow([repr(float(v)) for v in row])
