"""ELM and ESN estimators: blocks wired to the incremental ridge readout.

Both families work in two data modes. Instance mode takes a single matrix
of time steps and a target per step. Sequence mode takes a list of
variable-length sequences (or a ``SequenceDataset``); the recurrent state
is reset to zero for every sequence, each sequence contributes one
``partial_fit`` chunk, and the readout is finalized once at the end, so
the fitted model is independent of sequence order.

Classifiers train on one-hot 0/1 indicator targets; in sequence-to-label
mode the label is broadcast across the sequence's time steps and
predictions are aggregated back to one label per sequence by the decision
strategy (``winner_takes_all`` sums the class outputs over time before the
argmax). ``predict_proba`` is a softmax over the aggregated linear
outputs: a monotone convenience score, not a calibrated probability.
"""

from __future__ import annotations

import numpy as np

from .blocks import InputToNode, NodeToNode
from .core import SequenceDataset, as_matrix, make_rng
from .readout import RidgeAccumulator

__all__ = [
    "LabelEncoding",
    "PROJECTION_STRATEGIES",
    "aggregate_outputs",
    "project",
    "ElmRegressor",
    "ElmClassifier",
    "EsnRegressor",
    "EsnClassifier",
]

PROJECTION_STRATEGIES = ("winner_takes_all", "last_value", "mean_value")


def aggregate_outputs(outputs, strategy):
    """Collapse a T x n_out output matrix to one row per the strategy."""
    outputs = as_matrix(outputs, "outputs", min_rows=1)
    if strategy == "winner_takes_all":
        return outputs.sum(axis=0)
    if strategy == "last_value":
        return outputs[-1]
    if strategy == "mean_value":
        return outputs.mean(axis=0)
    raise ValueError(
        f"unknown strategy {strategy!r}; expected one of {PROJECTION_STRATEGIES}"
    )


def project(outputs, strategy="winner_takes_all", task="classification"):
    """Reduce per-step outputs to a single label index or value row.

    Classification returns the argmax of the aggregated outputs, ties going
    to the lowest class index. Regression returns the aggregated row itself.
    """
    agg = aggregate_outputs(outputs, strategy)
    if task == "classification":
        return int(np.argmax(agg))
    return agg


class LabelEncoding:
    """Bijection between class labels and one-hot indicator columns."""

    def __init__(self, classes):
        classes = np.asarray(classes)
        if classes.size < 1:
            raise ValueError("need at least one class")
        self.classes = classes
        self._index = {label: i for i, label in enumerate(classes.tolist())}

    @classmethod
    def from_labels(cls, labels) -> "LabelEncoding":
        return cls(np.unique(np.asarray(labels)))

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def encode(self, labels):
        """One-hot 0/1 target rows, one per label."""
        labels = np.asarray(labels).ravel()
        out = np.zeros((labels.shape[0], self.n_classes))
        for row, label in enumerate(labels.tolist()):
            try:
                out[row, self._index[label]] = 1.0
            except KeyError:
                raise ValueError(f"unseen label {label!r}") from None
        return out

    def decode(self, indices):
        """Map class indices back to labels."""
        indices = np.asarray(indices, dtype=np.int64)
        if indices.size and (indices.min() < 0 or indices.max() >= self.n_classes):
            raise ValueError(
                f"class index out of range for {self.n_classes} classes"
            )
        return self.classes[indices]


def _softmax(rows):
    z = rows - rows.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _detect_sequence_mode(X, requires_sequence):
    if requires_sequence is not None:
        return bool(requires_sequence)
    if isinstance(X, SequenceDataset):
        return True
    if isinstance(X, np.ndarray) and X.dtype != object:
        return False
    return isinstance(X, (list, tuple)) or (
        isinstance(X, np.ndarray) and X.dtype == object
    )


def _as_sequence_lists(X, y):
    if isinstance(X, SequenceDataset):
        if y is None:
            return X.sequences, X.targets
        return X.sequences, list(y)
    seqs = [as_matrix(s, f"X[{i}]", min_rows=1) for i, s in enumerate(X)]
    if not seqs:
        raise ValueError("dataset is empty")
    width = seqs[0].shape[1]
    for i, s in enumerate(seqs):
        if s.shape[1] != width:
            raise ValueError(f"X[{i}] has {s.shape[1]} features, expected {width}")
    return seqs, None if y is None else list(y)


class _BaseEstimator:
    """Shared wiring: graph construction, state computation, readout fit."""

    _recurrent = False
    _classifier = False

    def __init__(
        self,
        hidden_layer_size=500,
        k_in=None,
        input_activation=None,
        input_scaling=1.0,
        bias_scaling=0.0,
        spectral_radius=1.0,
        leakage=1.0,
        k_rec=None,
        reservoir_activation="tanh",
        bidirectional=False,
        alpha=1e-5,
        decision_strategy=None,
        requires_sequence=None,
        seed=42,
        input_to_node=None,
        node_to_node=None,
    ):
        if input_activation is None:
            input_activation = "identity" if self._recurrent else "tanh"
        if decision_strategy is None:
            decision_strategy = (
                "winner_takes_all" if self._classifier else "mean_value"
            )
        self.hidden_layer_size = hidden_layer_size
        self.k_in = k_in
        self.input_activation = input_activation
        self.input_scaling = input_scaling
        self.bias_scaling = bias_scaling
        self.spectral_radius = spectral_radius
        self.leakage = leakage
        self.k_rec = k_rec
        self.reservoir_activation = reservoir_activation
        self.bidirectional = bidirectional
        self.alpha = alpha
        self.decision_strategy = decision_strategy
        self.requires_sequence = requires_sequence
        self.seed = seed
        self.input_to_node = input_to_node
        self.node_to_node = node_to_node
        self.fitted_ = False

    _PARAM_NAMES = (
        "hidden_layer_size", "k_in", "input_activation", "input_scaling",
        "bias_scaling", "spectral_radius", "leakage", "k_rec",
        "reservoir_activation", "bidirectional", "alpha", "decision_strategy",
        "requires_sequence", "seed", "input_to_node", "node_to_node",
    )

    def get_params(self) -> dict:
        return {name: getattr(self, name) for name in self._PARAM_NAMES}

    def with_params(self, **overrides) -> "_BaseEstimator":
        """Fresh unfitted copy with some parameters replaced."""
        params = self.get_params()
        unknown = set(overrides) - set(params)
        if unknown:
            raise ValueError(f"unknown parameters: {sorted(unknown)}")
        params.update(overrides)
        return type(self)(**params)

    def _build_graphs(self, n_in, rng):
        graph = self.input_to_node
        if graph is None:
            graph = InputToNode(
                hidden_layer_size=self.hidden_layer_size,
                k_in=self.k_in,
                input_activation=self.input_activation,
                input_scaling=self.input_scaling,
                bias_scaling=self.bias_scaling,
            )
        graph.initialize(n_in, rng)
        self.input_graph_ = graph
        width = graph.output_width
        if self._recurrent:
            rec = self.node_to_node
            if rec is None:
                rec = NodeToNode(
                    hidden_layer_size=width,
                    k_rec=self.k_rec,
                    spectral_radius=self.spectral_radius,
                    leakage=self.leakage,
                    reservoir_activation=self.reservoir_activation,
                    bidirectional=self.bidirectional,
                )
            rec.initialize(width, rng)
            self.recurrent_graph_ = rec
            width = rec.output_width
        else:
            self.recurrent_graph_ = None
        self.state_width_ = width

    def compute_states(self, U):
        """States for one contiguous sequence, recurrent state starting at zero."""
        states = self.input_graph_.transform(U)
        if self.recurrent_graph_ is not None:
            states = self.recurrent_graph_.transform(states)
        return states

    def _target_matrix(self, y, n_rows, what):
        y = as_matrix(y, what)
        if y.shape[0] != n_rows:
            raise ValueError(f"{what} has {y.shape[0]} rows, expected {n_rows}")
        return y

    def _fit_readout(self, chunks):
        acc = RidgeAccumulator(epsilon=self.alpha)
        for states, targets in chunks:
            acc.partial_fit(states, targets)
        self.readout_ = acc.finalize()

    def fit(self, X, y):
        """Fit blocks (random draws) and readout (ridge solve); returns self."""
        self.sequence_mode_ = _detect_sequence_mode(X, self.requires_sequence)
        rng = make_rng(self.seed)
        if self.sequence_mode_:
            seqs, targets = _as_sequence_lists(X, y)
            if targets is None:
                raise ValueError("sequence-mode fit needs targets")
            if len(seqs) != len(targets):
                raise ValueError(
                    f"{len(seqs)} sequences but {len(targets)} targets"
                )
            self._build_graphs(seqs[0].shape[1], rng)
            prepared = self._prepare_sequence_targets(seqs, targets)
            self._fit_readout(
                (self.compute_states(s), t) for s, t in zip(seqs, prepared)
            )
        else:
            X = as_matrix(X, "X", min_rows=1)
            self._build_graphs(X.shape[1], rng)
            targets = self._prepare_instance_targets(X, y)
            self._fit_readout([(self.compute_states(X), targets)])
        self.fitted_ = True
        return self

    def _check_fitted(self):
        if not self.fitted_:
            raise RuntimeError(
                f"{type(self).__name__} must be fitted before predicting"
            )

    def _raw_outputs_instance(self, X):
        self._check_fitted()
        X = as_matrix(X, "X", min_rows=1)
        return self.readout_.predict(self.compute_states(X))

    def _raw_outputs_sequences(self, X):
        self._check_fitted()
        seqs, _ = _as_sequence_lists(X, None)
        return [self.readout_.predict(self.compute_states(s)) for s in seqs]


class _RegressorMixin:
    def _prepare_instance_targets(self, X, y):
        return self._target_matrix(y, X.shape[0], "y")

    def _prepare_sequence_targets(self, seqs, targets):
        self.per_step_targets_ = np.asarray(targets[0]).ndim >= 1
        prepared = []
        for i, (s, t) in enumerate(zip(seqs, targets)):
            if self.per_step_targets_:
                prepared.append(self._target_matrix(t, s.shape[0], f"y[{i}]"))
            else:
                prepared.append(np.full((s.shape[0], 1), float(t)))
        return prepared

    def predict(self, X):
        """Per-step outputs; in sequence-to-value mode one row per sequence."""
        if not _detect_sequence_mode(X, self.requires_sequence):
            out = self._raw_outputs_instance(X)
            return out[:, 0] if out.shape[1] == 1 else out
        outs = self._raw_outputs_sequences(X)
        if getattr(self, "per_step_targets_", True):
            return outs
        rows = np.vstack(
            [project(o, self.decision_strategy, task="regression") for o in outs]
        )
        return rows[:, 0] if rows.shape[1] == 1 else rows


class _ClassifierMixin:
    def _prepare_instance_targets(self, X, y):
        labels = np.asarray(y).ravel()
        if labels.shape[0] != X.shape[0]:
            raise ValueError(
                f"y has {labels.shape[0]} labels, expected {X.shape[0]}"
            )
        self.label_encoding_ = LabelEncoding.from_labels(labels)
        return self.label_encoding_.encode(labels)

    def _prepare_sequence_targets(self, seqs, targets):
        # Sequence labels are broadcast to every time step of their sequence.
        self.label_encoding_ = LabelEncoding.from_labels(targets)
        prepared = []
        for s, label in zip(seqs, targets):
            row = self.label_encoding_.encode([label])
            prepared.append(np.repeat(row, s.shape[0], axis=0))
        return prepared

    def predict(self, X):
        """Labels: per time step in instance mode, per sequence otherwise."""
        if not _detect_sequence_mode(X, self.requires_sequence):
            out = self._raw_outputs_instance(X)
            return self.label_encoding_.decode(np.argmax(out, axis=1))
        outs = self._raw_outputs_sequences(X)
        idx = [project(o, self.decision_strategy) for o in outs]
        return self.label_encoding_.decode(idx)

    def decision_scores(self, X):
        """Raw linear outputs before any aggregation or softmax."""
        if not _detect_sequence_mode(X, self.requires_sequence):
            return self._raw_outputs_instance(X)
        return self._raw_outputs_sequences(X)

    def predict_proba(self, X):
        """Softmax over (aggregated) linear outputs; monotone in the scores."""
        if not _detect_sequence_mode(X, self.requires_sequence):
            return _softmax(self._raw_outputs_instance(X))
        outs = self._raw_outputs_sequences(X)
        agg = np.vstack(
            [aggregate_outputs(o, self.decision_strategy) for o in outs]
        )
        return _softmax(agg)


class ElmRegressor(_RegressorMixin, _BaseEstimator):
    """Feed-forward random projection plus ridge readout, fit in two steps:
    collect the projected states, then solve for the output weights."""

    _recurrent = False
    _classifier = False


class ElmClassifier(_ClassifierMixin, _BaseEstimator):
    """ELM over one-hot indicator targets with decision-strategy projection."""

    _recurrent = False
    _classifier = True


class EsnRegressor(_RegressorMixin, _BaseEstimator):
    """Recurrent reservoir regressor, fit in three steps: project inputs,
    run the leaky recurrent update, then solve for the output weights."""

    _recurrent = True
    _classifier = False


class EsnClassifier(_ClassifierMixin, _BaseEstimator):
    """ESN over one-hot indicator targets with decision-strategy projection."""

    _recurrent = True
    _classifier = True
