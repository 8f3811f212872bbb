"""Benchmark data: chaotic series generation, the 8x8 digits set in
sequence form, trailing-average feature expansion, and horizon shifting.

The digits fixture bundled with the package is a plain CSV of 64 pixel
columns (integer values 0-16) plus one label column, one image per row.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

import numpy as np

from .core import SequenceDataset, as_matrix, make_rng, read_csv

__all__ = [
    "MackeyGlassConfig",
    "mackey_glass",
    "load_digits",
    "har_features",
    "shift_target",
    "VolatilityFold",
    "volatility_folds",
    "VOLATILITY_SERIES",
]


@dataclass(frozen=True)
class MackeyGlassConfig:
    """Generation settings for the delayed-feedback chaotic series.

    ``delay`` counts integration steps, so the physical delay is
    ``delay * dt``; halve ``dt`` and double ``delay`` to refine the
    integration of the same system. Defaults are the canonical
    chaotic-regime values; the initial history is a constant 1.2 with a
    small seeded jitter so distinct seeds give distinct trajectories.
    """

    n_timesteps: int = 5000
    delay: int = 17
    a: float = 0.2
    b: float = 0.1
    exponent: float = 10.0
    dt: float = 1.0
    discard: int | None = None
    seed: int = 42
    jitter: float = 1e-2

    def __post_init__(self):
        if self.n_timesteps < 2:
            raise ValueError("n_timesteps must be >= 2")
        if self.delay < 1:
            raise ValueError("delay must be >= 1 step")
        if self.dt <= 0:
            raise ValueError("dt must be > 0")
        if self.discard is not None and self.discard < 0:
            raise ValueError("discard must be >= 0")
        if self.jitter < 0:
            raise ValueError("jitter must be >= 0")

    @property
    def effective_discard(self) -> int:
        return 100 * self.delay if self.discard is None else self.discard


def mackey_glass(n_timesteps: int = 5000, config: MackeyGlassConfig = None, **kwargs):
    """One-step-ahead prediction pair (X, y) from the delay equation
    ``dx/dt = a x(t-tau) / (1 + x(t-tau)^p) - b x(t)`` integrated with
    forward Euler.

    Returns ``n_timesteps`` rows each: ``X`` is the series, ``y[n] = X[n+1]``
    (one extra sample is generated so both keep full length).
    """
    if config is None:
        config = MackeyGlassConfig(n_timesteps=n_timesteps, **kwargs)
    cfg = config
    tau = cfg.delay
    n_total = cfg.effective_discard + cfg.n_timesteps + 1
    rng = make_rng(cfg.seed)
    x = np.empty(tau + 1 + n_total)
    x[: tau + 1] = 1.2 + cfg.jitter * rng.uniform(-1.0, 1.0, tau + 1)
    for k in range(tau, tau + n_total):
        delayed = x[k - tau]
        x[k + 1] = x[k] + cfg.dt * (
            cfg.a * delayed / (1.0 + delayed ** cfg.exponent) - cfg.b * x[k]
        )
    series = x[tau + 1 + cfg.effective_discard:]
    X = series[: cfg.n_timesteps].reshape(-1, 1).copy()
    y = series[1: cfg.n_timesteps + 1].reshape(-1, 1).copy()
    return X, y


def _digits_fixture_path():
    return resources.files("rcnkit").joinpath("data/digits.csv.gz")


def load_digits(path=None, as_sequence: bool = False):
    """Load the 8x8 handwritten digits set from its 65-column CSV layout.

    Pixels (0-16) are mapped linearly onto [-1, 1]. With ``as_sequence``
    each image becomes an 8-step sequence scanned column by column, left to
    right, with the 8 pixel rows as features; otherwise a flat
    ``(n, 64)`` matrix and a label vector are returned.
    """
    if path is None:
        with resources.as_file(_digits_fixture_path()) as p:
            data, _ = read_csv(p, expect_cols=65)
    else:
        data, _ = read_csv(path, expect_cols=65)
    if data.shape[0] == 0:
        raise ValueError("digits file is empty")
    pixels = data[:, :64]
    labels = data[:, 64]
    bad = np.nonzero((pixels < 0) | (pixels > 16))[0]
    if bad.size:
        raise ValueError(f"pixel value outside 0..16 at data row {bad[0] + 1}")
    if np.any(labels != np.round(labels)):
        raise ValueError("labels must be integers")
    labels = labels.astype(np.int64)
    scaled = pixels / 8.0 - 1.0
    if not as_sequence:
        return scaled, labels
    sequences = [img.reshape(8, 8).T.copy() for img in scaled]
    return SequenceDataset(sequences, list(labels))


def _trailing_mean(v, window):
    out = np.empty_like(v)
    cs = np.cumsum(v)
    head = min(window, len(v))
    out[:head] = cs[:head] / np.arange(1, head + 1)
    if len(v) > window:
        out[window:] = (cs[window:] - cs[:-window]) / window
    return out


def har_features(x, strict_windows: bool = False):
    """Expand a scalar series to (value, trailing 5-mean, trailing 22-mean).

    Averages are causal: the window ends at the current sample. Early
    samples use whatever history exists; with ``strict_windows`` the first
    21 rows are dropped instead so every window is complete.
    """
    x = as_matrix(x, "x", min_rows=1)
    if x.shape[1] != 1:
        raise ValueError(f"har_features takes a single-column series, got {x.shape[1]}")
    v = x[:, 0]
    out = np.column_stack([v, _trailing_mean(v, 5), _trailing_mean(v, 22)])
    if strict_windows:
        if out.shape[0] <= 21:
            raise ValueError("series too short for strict 22-sample windows")
        out = out[21:]
    return out


def shift_target(x, horizon: int):
    """Align features with the series ``horizon`` steps ahead.

    Returns ``(X, y)`` with ``X = x[:T-h]`` (all columns) and
    ``y[n] = x[n+h]`` taken from column 0, which holds the raw series both
    for plain input and for ``har_features`` output.
    """
    x = as_matrix(x, "x")
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if x.shape[0] <= horizon:
        raise ValueError(
            f"series of length {x.shape[0]} cannot be shifted by {horizon}"
        )
    return x[:-horizon], x[horizon:, :1].copy()


VOLATILITY_SERIES = ("CAT", "EBAY", "MSFT")


@dataclass(frozen=True)
class VolatilityFold:
    train: str
    validation: str
    test: str
    horizon: int = 1

    def __post_init__(self):
        names = {self.train, self.validation, self.test}
        if names != set(VOLATILITY_SERIES):
            raise ValueError(
                f"fold must use each of {VOLATILITY_SERIES} exactly once"
            )
        if self.horizon not in (1, 5, 22):
            raise ValueError("horizon must be one of 1, 5, 22")


def volatility_folds(horizon: int = 1):
    """The three-fold rotation of train/validation/test series."""
    rotation = [
        ("CAT", "EBAY", "MSFT"),
        ("EBAY", "MSFT", "CAT"),
        ("MSFT", "CAT", "EBAY"),
    ]
    return [
        VolatilityFold(train, val, test, horizon)
        for train, val, test in rotation
    ]
