"""Cross-validation, scoring, and sequential hyperparameter search.

A search plan is an ordered list of steps. Each step generates candidates
(a full grid or seeded random draws), scores every candidate by
cross-validated mean score with the current parameters overridden by the
candidate, and merges the winner into the current parameters before the
next step runs. Ties go to the earliest candidate in generation order, and
a candidate whose construction or fit fails scores -inf instead of
aborting the search, so long random sweeps survive degenerate draws.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import metrics as _metrics
from .core import SequenceDataset, make_rng
from .metrics import MetricValue, sequence_metric

__all__ = [
    "Uniform",
    "LogUniform",
    "Choice",
    "KFold",
    "TimeSeriesSplit",
    "PredefinedSplit",
    "Scorer",
    "SearchStep",
    "SearchResult",
    "cross_validate",
    "run_search",
]


# ---------------------------------------------------------------------------
# Parameter distributions


@dataclass(frozen=True)
class Uniform:
    """Uniform draw on [loc, loc + scale]."""

    loc: float
    scale: float

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError("scale must be > 0")

    def sample(self, rng):
        return float(self.loc + self.scale * rng.random())


@dataclass(frozen=True)
class LogUniform:
    """Log-uniform draw on [lo, hi], hi > lo > 0."""

    lo: float
    hi: float

    def __post_init__(self):
        if not 0 < self.lo < self.hi:
            raise ValueError("need hi > lo > 0")

    def sample(self, rng):
        return float(math.exp(rng.uniform(math.log(self.lo), math.log(self.hi))))


@dataclass(frozen=True)
class Choice:
    """Uniform draw from an explicit option list."""

    options: tuple

    def __init__(self, options):
        object.__setattr__(self, "options", tuple(options))
        if not self.options:
            raise ValueError("need at least one option")

    def sample(self, rng):
        return self.options[int(rng.integers(len(self.options)))]


# ---------------------------------------------------------------------------
# Splitters


def _dataset_length(n_or_data):
    if isinstance(n_or_data, (int, np.integer)):
        return int(n_or_data)
    if isinstance(n_or_data, np.ndarray) and n_or_data.dtype != object:
        return n_or_data.shape[0]
    return len(n_or_data)


@dataclass(frozen=True)
class KFold:
    """k contiguous (or shuffled) folds; every index tested exactly once."""

    k: int
    shuffle: bool = False
    seed: int = 0

    def split(self, n_or_data):
        n = _dataset_length(n_or_data)
        if self.k < 2 or self.k > n:
            raise ValueError(f"kfold needs 2 <= k <= n, got k={self.k}, n={n}")
        indices = np.arange(n)
        if self.shuffle:
            indices = make_rng(self.seed).permutation(n)
        sizes = np.full(self.k, n // self.k)
        sizes[: n % self.k] += 1
        splits, start = [], 0
        for size in sizes:
            test = indices[start:start + size]
            train = np.concatenate([indices[:start], indices[start + size:]])
            splits.append((train, test))
            start += size
        return splits

    @property
    def n_splits(self):
        return self.k


@dataclass(frozen=True)
class TimeSeriesSplit:
    """Expanding-window splits with equal contiguous test blocks.

    With ``test_size = n // (n_splits + 1)``, split i trains on
    ``[0, (i+1)*test_size)`` and tests on the block immediately after, so a
    test fold never overlaps or precedes its training data.
    """

    n_splits: int = 5

    def split(self, n_or_data):
        n = _dataset_length(n_or_data)
        if self.n_splits < 1:
            raise ValueError("n_splits must be >= 1")
        if n < self.n_splits + 1:
            raise ValueError(
                f"time series split needs n >= {self.n_splits + 1}, got {n}"
            )
        test_size = n // (self.n_splits + 1)
        splits = []
        for i in range(self.n_splits):
            fence = (i + 1) * test_size
            splits.append(
                (np.arange(0, fence), np.arange(fence, fence + test_size))
            )
        return splits


@dataclass(frozen=True)
class PredefinedSplit:
    """Explicit fold table of (train indices, test indices) pairs."""

    folds: tuple

    def __init__(self, folds):
        folds = tuple(
            (np.asarray(tr, dtype=np.int64), np.asarray(te, dtype=np.int64))
            for tr, te in folds
        )
        if not folds:
            raise ValueError("need at least one fold")
        object.__setattr__(self, "folds", folds)

    def split(self, n_or_data=None):
        if n_or_data is not None:
            n = _dataset_length(n_or_data)
            covered = np.unique(np.concatenate(
                [np.concatenate([tr, te]) for tr, te in self.folds]
            ))
            if covered.size and (covered.min() < 0 or covered.max() >= n):
                raise ValueError("fold table indexes outside the dataset")
        return list(self.folds)

    @property
    def n_splits(self):
        return len(self.folds)


# ---------------------------------------------------------------------------
# Scoring


_METRIC_DIRECTION = {"mse": False, "r2": True, "accuracy": True}


class Scorer:
    """Named metric plus orientation; the search always maximizes scores."""

    def __init__(self, metric="mse", greater_is_better=None):
        if callable(metric):
            self.name = getattr(metric, "__name__", "metric")
            self._fn = metric
            if greater_is_better is None:
                raise ValueError("callable metrics need greater_is_better")
        else:
            try:
                self._fn = getattr(_metrics, metric)
            except AttributeError:
                raise ValueError(f"unknown metric {metric!r}") from None
            self.name = metric
            if greater_is_better is None:
                greater_is_better = _METRIC_DIRECTION[metric]
        self.greater_is_better = bool(greater_is_better)

    def __call__(self, y_true, y_pred) -> float:
        if _is_sequence_container(y_true):
            value = sequence_metric(self._fn, y_true, list(y_pred))
        else:
            value = self._fn(y_true, y_pred)
        if isinstance(value, MetricValue):
            value = value.value
        value = float(value)
        return value if self.greater_is_better else -value


def _is_sequence_container(y):
    if isinstance(y, list):
        return any(np.asarray(t).ndim >= 1 for t in y)
    return isinstance(y, np.ndarray) and y.dtype == object


def _is_sequence_data(X):
    return isinstance(X, (list, SequenceDataset)) or (
        isinstance(X, np.ndarray) and X.dtype == object
    )


def _take(X, y, idx):
    if isinstance(X, SequenceDataset):
        sub = X.subset(idx)
        return sub.sequences, sub.targets
    if _is_sequence_data(X):
        return [X[i] for i in idx], [y[i] for i in idx]
    return X[idx], (None if y is None else np.asarray(y)[idx])


def cross_validate(factory, params, data, splitter, scorer) -> np.ndarray:
    """Per-fold scores: fit on each train fold, score on its test fold.

    Estimators are built fresh per fold from ``factory(params)``, so nothing
    fitted leaks across folds. Non-finite scores are recorded as -inf.
    """
    X, y = _unpack_data(data)
    folds = splitter.split(_dataset_length(X))
    scores = np.empty(len(folds))
    for i, (train_idx, test_idx) in enumerate(folds):
        X_tr, y_tr = _take(X, y, train_idx)
        X_te, y_te = _take(X, y, test_idx)
        est = factory(dict(params))
        est.fit(X_tr, y_tr)
        value = scorer(y_te, est.predict(X_te))
        scores[i] = value if np.isfinite(value) else -np.inf
    return scores


def _unpack_data(data):
    if isinstance(data, SequenceDataset):
        return data, None
    X, y = data
    return X, y


# ---------------------------------------------------------------------------
# Sequential search


@dataclass(frozen=True)
class SearchStep:
    """One optimization step: candidate source, CV scheme, and scorer."""

    name: str
    strategy: str  # "grid" or "random"
    space: dict
    splitter: object
    scorer: Scorer
    n_iter: int = 10
    seed: int = 0

    def __post_init__(self):
        if self.strategy not in ("grid", "random"):
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.strategy == "random" and self.n_iter < 1:
            raise ValueError("random search needs n_iter >= 1")
        if not self.space:
            raise ValueError("parameter space is empty")

    def candidates(self):
        """Deterministic candidate list in generation order."""
        names = list(self.space)
        if self.strategy == "grid":
            pools = []
            for name in names:
                spec = self.space[name]
                if not isinstance(spec, (list, tuple)):
                    raise ValueError(
                        f"grid parameter {name!r} needs an explicit value list"
                    )
                pools.append(list(spec))
            return [dict(zip(names, combo)) for combo in itertools.product(*pools)]
        rng = make_rng(self.seed)
        out = []
        for _ in range(self.n_iter):
            cand = {}
            for name in names:
                spec = self.space[name]
                if isinstance(spec, (list, tuple)):
                    spec = Choice(spec)
                cand[name] = spec.sample(rng)
            out.append(cand)
        return out


@dataclass
class CandidateResult:
    params: dict
    fold_scores: np.ndarray
    mean_score: float
    std_score: float
    error: str = ""


@dataclass
class StepResult:
    name: str
    candidates: list
    best_index: int

    @property
    def best_params(self) -> dict:
        return self.candidates[self.best_index].params

    @property
    def best_score(self) -> float:
        return self.candidates[self.best_index].mean_score


@dataclass
class SearchResult:
    """Full history of a sequential search plus the merged winner params."""

    initial_params: dict
    steps: list = field(default_factory=list)
    final_params: dict = field(default_factory=dict)

    def best_scores(self):
        return [s.best_score for s in self.steps]

    def report(self) -> str:
        """Deterministic plain-text per-step tables."""
        lines = ["sequential search report", "========================", ""]
        lines.append(f"initial params: {_fmt_params(self.initial_params)}")
        for step in self.steps:
            lines.append("")
            lines.append(f"step {step.name}")
            lines.append("-" * (5 + len(step.name)))
            for i, cand in enumerate(step.candidates):
                marker = "*" if i == step.best_index else " "
                folds = " ".join(_fmt(v) for v in cand.fold_scores)
                detail = f"folds=[{folds}]" if len(cand.fold_scores) else (
                    f"error={cand.error}"
                )
                lines.append(
                    f" {marker} {i:>4d} mean={_fmt(cand.mean_score)} "
                    f"std={_fmt(cand.std_score)} {detail} "
                    f"params={_fmt_params(cand.params)}"
                )
            lines.append(
                f"   best: #{step.best_index} score={_fmt(step.best_score)} "
                f"params={_fmt_params(step.best_params)}"
            )
        lines.append("")
        lines.append(f"final params: {_fmt_params(self.final_params)}")
        lines.append("")
        return "\n".join(lines)


def _fmt(v) -> str:
    if isinstance(v, float):
        return "-inf" if v == -np.inf else f"{v:.12g}"
    return str(v)


def _fmt_params(params: dict) -> str:
    items = ", ".join(f"{k}={_fmt(v)}" for k, v in sorted(params.items()))
    return "{" + items + "}"


def run_search(initial_params, steps, estimator_factory, data) -> SearchResult:
    """Run the steps in order, merging each step's winner into the params.

    Every candidate is scored by ``cross_validate`` mean score; a candidate
    that raises during construction or fitting is recorded with -inf rather
    than aborting. An empty step list returns the initial params unchanged.
    """
    current = dict(initial_params)
    result = SearchResult(initial_params=dict(initial_params))
    for step in steps:
        records = []
        for cand in step.candidates():
            merged = {**current, **cand}
            try:
                fold_scores = cross_validate(
                    estimator_factory, merged, data, step.splitter, step.scorer
                )
                mean = float(np.mean(fold_scores))
                if not np.isfinite(mean):
                    mean = -np.inf
                records.append(CandidateResult(
                    params=dict(cand),
                    fold_scores=fold_scores,
                    mean_score=mean,
                    std_score=float(np.std(fold_scores)),
                ))
            except Exception as exc:
                records.append(CandidateResult(
                    params=dict(cand),
                    fold_scores=np.empty(0),
                    mean_score=-np.inf,
                    std_score=float("nan"),
                    error=f"{type(exc).__name__}: {exc}",
                ))
        best = int(np.argmax([r.mean_score for r in records]))
        current.update(records[best].params)
        result.steps.append(StepResult(step.name, records, best))
    result.final_params = dict(current)
    return result
