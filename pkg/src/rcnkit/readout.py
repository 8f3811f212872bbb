"""Trainable linear readout via incremental ridge regression.

State rows are augmented with a constant 1 for the intercept. The
accumulator keeps only the running correlation matrices

    K += R~.T @ R~        (d+1 x d+1)
    P += targets.T @ R~   (n_out x d+1)

so memory is independent of how many samples have been seen. Finalizing
solves ``(K + eps * I) @ W.T = P.T``; the ridge term is applied uniformly,
intercept row included.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg

from .core import as_matrix

__all__ = ["RidgeAccumulator", "Readout"]


class RidgeAccumulator:
    """Running normal-equation sums for a ridge readout.

    Widths are fixed by the first ``partial_fit`` call; later calls with a
    different state or target width raise. Chunked updates commute, so any
    partition of the training rows yields the same solution as one batch.
    """

    def __init__(self, epsilon: float = 1e-5):
        if epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        self.epsilon = float(epsilon)
        self.k_ = None
        self.p_ = None
        self.n_samples_ = 0

    @property
    def state_width(self):
        return None if self.k_ is None else self.k_.shape[0] - 1

    def _ensure_shapes(self, d, n_out):
        if self.k_ is None:
            self.k_ = np.zeros((d + 1, d + 1))
            self.p_ = np.zeros((n_out, d + 1))
            return
        if self.k_.shape[0] != d + 1:
            raise ValueError(
                f"state width changed: accumulator holds {self.k_.shape[0] - 1}, "
                f"got {d}"
            )
        if self.p_.shape[0] != n_out:
            raise ValueError(
                f"target width changed: accumulator holds {self.p_.shape[0]}, "
                f"got {n_out}"
            )

    def partial_fit(self, states, targets):
        """Accumulate one chunk of (states, targets) rows; returns self."""
        states = as_matrix(states, "states")
        targets = as_matrix(targets, "targets")
        if states.shape[0] != targets.shape[0]:
            raise ValueError(
                f"states have {states.shape[0]} rows, targets {targets.shape[0]}"
            )
        self._ensure_shapes(states.shape[1], targets.shape[1])
        if states.shape[0] == 0:
            return self
        aug = np.hstack([states, np.ones((states.shape[0], 1))])
        k_update = aug.T @ aug
        # Keep K exactly symmetric regardless of BLAS path.
        self.k_ += 0.5 * (k_update + k_update.T)
        self.p_ += targets.T @ aug
        self.n_samples_ += states.shape[0]
        return self

    def merge(self, other: "RidgeAccumulator"):
        """Add another accumulator built over disjoint data; returns self."""
        if other.k_ is None:
            return self
        if self.k_ is None:
            self.k_ = other.k_.copy()
            self.p_ = other.p_.copy()
            self.n_samples_ = other.n_samples_
            return self
        if self.k_.shape != other.k_.shape or self.p_.shape != other.p_.shape:
            raise ValueError("cannot merge accumulators of different widths")
        self.k_ += other.k_
        self.p_ += other.p_
        self.n_samples_ += other.n_samples_
        return self

    def finalize(self) -> "Readout":
        """Solve the regularized normal equations for the output weights."""
        if self.k_ is None or self.n_samples_ < 1:
            raise ValueError("cannot finalize an accumulator with no samples")
        d_aug = self.k_.shape[0]
        lhs = self.k_ + self.epsilon * np.eye(d_aug)
        try:
            cho = scipy.linalg.cho_factor(lhs, check_finite=False)
            wt = scipy.linalg.cho_solve(cho, self.p_.T, check_finite=False)
        except scipy.linalg.LinAlgError:
            if self.epsilon == 0.0:
                raise np.linalg.LinAlgError(
                    "normal equations are singular with epsilon=0; set a "
                    "positive regularization strength"
                ) from None
            wt, *_ = scipy.linalg.lstsq(lhs, self.p_.T, check_finite=False)
        return Readout(wt.T)


class Readout:
    """Fitted linear map from augmented states to outputs.

    ``weights`` has shape (n_out, d+1); the last column is the intercept.
    """

    def __init__(self, weights):
        weights = np.asarray(weights, dtype=np.float64)
        if weights.ndim != 2:
            raise ValueError("readout weights must be 2-D")
        if not np.all(np.isfinite(weights)):
            raise ValueError("readout weights must be finite")
        self.weights = weights

    @property
    def n_outputs(self) -> int:
        return self.weights.shape[0]

    @property
    def state_width(self) -> int:
        return self.weights.shape[1] - 1

    def predict(self, states):
        """Per-row outputs ``W @ r~[n]``; shape T x n_out."""
        states = as_matrix(states, "states")
        if states.shape[1] != self.state_width:
            raise ValueError(
                f"readout takes {self.state_width}-wide states, got {states.shape[1]}"
            )
        return states @ self.weights[:, :-1].T + self.weights[:, -1]
