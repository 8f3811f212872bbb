"""Random projection blocks and their composition.

Three families live here:

* ``InputToNode`` projects input features into the hidden state space
  through a (typically row-sparse) random weight matrix plus bias, followed
  by a pointwise activation.
* ``NodeToNode`` adds recurrent connections and applies the leaky state
  update ``r[n] = (1 - leakage) * r[n-1] + leakage * f(rp[n] + W @ r[n-1])``
  with zero initial state, optionally running a second pass over the
  time-reversed input and stacking both state trajectories feature-wise.
* ``Cascade`` / ``Parallel`` compose initialized blocks into larger graphs.

Blocks are immutable once initialized; transforms are pure.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .core import apply_activation, as_matrix, make_rng

__all__ = [
    "SparseWeights",
    "SpectralRadiusError",
    "InputToNode",
    "NodeToNode",
    "Cascade",
    "Parallel",
    "compose",
    "make_predefined",
    "spectral_radius",
]

# Density above which matmuls run on a plain ndarray instead of CSR.
_DENSE_OP_THRESHOLD = 0.25


class SparseWeights:
    """Row-sparse weight matrix stored in CSR form.

    Explicit zeros are kept, so a row initialized with ``k`` connections
    reports ``k`` stored entries even if scaling drove the values to zero.
    """

    def __init__(self, matrix):
        if not sp.issparse(matrix):
            raise TypeError("SparseWeights wraps a scipy sparse matrix")
        m = matrix.tocsr().copy()
        m.sort_indices()
        if m.nnz and not np.all(np.isfinite(m.data)):
            raise ValueError("weight values must be finite")
        self._m = m

    @classmethod
    def from_rows(cls, n_cols, row_indices, row_values):
        """Build from per-row column-index and value arrays of equal shape."""
        row_indices = np.asarray(row_indices, dtype=np.int64)
        row_values = np.asarray(row_values, dtype=np.float64)
        if row_indices.shape != row_values.shape or row_indices.ndim != 2:
            raise ValueError("row_indices and row_values must share a 2-D shape")
        n_rows, k = row_indices.shape
        indptr = np.arange(0, n_rows * k + 1, k, dtype=np.int64)
        m = sp.csr_matrix(
            (row_values.ravel().copy(), row_indices.ravel().copy(), indptr),
            shape=(n_rows, n_cols),
        )
        return cls(m)

    @classmethod
    def from_dense(cls, dense):
        dense = np.asarray(dense, dtype=np.float64)
        if dense.ndim != 2:
            raise ValueError("dense weights must be 2-D")
        return cls(sp.csr_matrix(dense))

    @classmethod
    def from_triples(cls, shape, triples):
        """Rebuild from an ``(nnz, 3)`` array of (row, col, value) rows."""
        triples = np.asarray(triples, dtype=np.float64).reshape(-1, 3)
        rows = triples[:, 0].astype(np.int64)
        cols = triples[:, 1].astype(np.int64)
        m = sp.csr_matrix((triples[:, 2], (rows, cols)), shape=shape)
        return cls(m)

    @property
    def shape(self):
        return self._m.shape

    @property
    def nnz(self) -> int:
        return int(self._m.nnz)

    def row_nonzero_counts(self):
        return np.diff(self._m.indptr)

    @property
    def values(self):
        return self._m.data

    def to_dense(self):
        return np.asarray(self._m.todense(), dtype=np.float64)

    def tocsr(self):
        return self._m

    def triples(self):
        coo = self._m.tocoo()
        order = np.lexsort((coo.col, coo.row))
        out = np.empty((coo.nnz, 3), dtype=np.float64)
        out[:, 0] = coo.row[order]
        out[:, 1] = coo.col[order]
        out[:, 2] = coo.data[order]
        return out

    def scaled(self, factor: float) -> "SparseWeights":
        m = self._m.copy()
        m.data = m.data * float(factor)
        return SparseWeights(m)

    @property
    def density(self) -> float:
        r, c = self.shape
        return self.nnz / max(r * c, 1)

    def _operator(self):
        if not hasattr(self, "_op"):
            self._op = self.to_dense() if self.density > _DENSE_OP_THRESHOLD else self._m
        return self._op

    def matvec(self, v):
        """``W @ v`` for a 1-D state vector."""
        return self._operator() @ v

    def project_rows(self, U):
        """Apply to every row of ``U``: returns ``U @ W.T`` with shape T x rows."""
        op = self._operator()
        if sp.issparse(op):
            return np.ascontiguousarray(op.dot(U.T).T)
        return U @ op.T


class SpectralRadiusError(RuntimeError):
    """Raised when no eigenvalue estimate of acceptable quality was reached."""

    def __init__(self, message, best_estimate):
        super().__init__(message)
        self.best_estimate = best_estimate


def spectral_radius(w, budget: int = 10_000, tol: float = 1e-8,
                    block: int = 8) -> float:
    """Largest absolute eigenvalue of a square weight matrix.

    Runs block power iteration with a Rayleigh-Ritz projection on a small
    orthonormal basis (``block`` vectors), which tracks complex conjugate
    dominant pairs and nearly tied pair clusters instead of oscillating.
    Convergence is declared when the dominant Ritz value's residual
    ``|A z - lambda z|`` drops below ``tol * |lambda|``. If the budget runs
    out, the estimate is recomputed with ARPACK and, as a last resort, a
    dense eigensolve. Matrices of order <= 64 go straight to the dense
    solve.
    """
    if isinstance(w, SparseWeights):
        a = w.tocsr()
    elif sp.issparse(w):
        a = w.tocsr()
    else:
        a = np.asarray(w, dtype=np.float64)
    n, m = a.shape
    if n != m:
        raise ValueError(f"spectral radius needs a square matrix, got {a.shape}")
    if n == 0:
        return 0.0
    if n <= 64:
        dense = a.toarray() if sp.issparse(a) else a
        return float(np.max(np.abs(np.linalg.eigvals(dense))))

    if n > 2048:
        # Clustered spectral edges make block iteration slow at this size;
        # a restarted Krylov solve converges far faster, so try it first.
        est = _arpack_radius(a, n)
        if est is not None:
            return est

    k = min(max(block, 2), n)
    basis = make_rng(0xC0FFEE).standard_normal((n, k))
    q, _ = np.linalg.qr(basis)
    best = 0.0
    for _ in range(budget):
        z = a @ q
        if not np.any(z):
            return 0.0  # basis fell into the nullspace; radius 0 matrices only
        h = q.T @ z
        vals, vecs = np.linalg.eig(h)
        lead = int(np.argmax(np.abs(vals)))
        est = float(np.abs(vals[lead]))
        s = vecs[:, lead]
        resid = float(np.linalg.norm(z @ s - vals[lead] * (q @ s)))
        best = est
        if resid <= tol * max(est, 1e-30):
            return est
        q, _ = np.linalg.qr(z)

    est = _arpack_radius(a, n)
    if est is not None:
        return est
    try:
        dense = a.toarray() if sp.issparse(a) else a
        return float(np.max(np.abs(np.linalg.eigvals(dense))))
    except Exception as exc:
        raise SpectralRadiusError(
            f"spectral radius did not converge within {budget} iterations "
            f"(best estimate {best:.6g})",
            best_estimate=float(best),
        ) from exc


def _arpack_radius(a, n):
    sparse_a = a if sp.issparse(a) else sp.csr_matrix(a)
    try:
        v0 = make_rng(0xC0FFEE).standard_normal(n)
        vals = spla.eigs(
            sparse_a, k=min(6, n - 2), which="LM", v0=v0, maxiter=50_000,
            tol=1e-12, return_eigenvectors=False,
        )
        return float(np.max(np.abs(vals)))
    except Exception:
        return None


def _resolve_fan_in(k, width, what):
    if k is None:
        return width
    k = int(k)
    if k < 1:
        raise ValueError(f"{what} must be >= 1 or None for dense")
    return min(k, width)


def _draw_sparse_rows(rng, n_rows, n_cols, k, value_draw):
    """Fixed fan-in draw: row 0 first, distinct random columns per row."""
    indices = np.empty((n_rows, k), dtype=np.int64)
    values = np.empty((n_rows, k), dtype=np.float64)
    for i in range(n_rows):
        if k == n_cols:
            indices[i] = np.arange(n_cols)
        else:
            indices[i] = rng.choice(n_cols, size=k, replace=False)
        values[i] = value_draw(rng, k)
    return SparseWeights.from_rows(n_cols, indices, values)


class InputToNode:
    """Sparse random projection of input features plus bias and activation.

    Parameters mirror the usual reservoir vocabulary: ``hidden_layer_size``
    output neurons, each connected to ``k_in`` random inputs (``None`` for a
    dense matrix), weight values uniform on [-1, 1] times ``input_scaling``,
    bias uniform on [-1, 1] times ``bias_scaling``.
    """

    def __init__(
        self,
        hidden_layer_size: int = 500,
        k_in=None,
        input_activation="tanh",
        input_scaling: float = 1.0,
        bias_scaling: float = 0.0,
        seed=None,
    ):
        if hidden_layer_size < 1:
            raise ValueError("hidden_layer_size must be >= 1")
        if input_scaling < 0 or bias_scaling < 0:
            raise ValueError("scaling factors must be >= 0")
        self.hidden_layer_size = int(hidden_layer_size)
        self.k_in = k_in
        self.input_activation = input_activation
        self.input_scaling = float(input_scaling)
        self.bias_scaling = float(bias_scaling)
        self.seed = seed
        self.weights_ = None
        self.bias_ = None
        self.n_in_ = None

    @property
    def output_width(self) -> int:
        return self.hidden_layer_size

    def initialize(self, n_in: int, rng=None):
        """Draw weights for ``n_in`` input features; returns self."""
        if n_in < 1:
            raise ValueError("n_in must be >= 1")
        rng = make_rng(self.seed) if self.seed is not None else rng
        if rng is None:
            raise ValueError("no seed configured and no rng supplied")
        k = _resolve_fan_in(self.k_in, n_in, "k_in")
        scale = self.input_scaling
        self.weights_ = _draw_sparse_rows(
            rng, self.hidden_layer_size, n_in, k,
            lambda r, kk: r.uniform(-1.0, 1.0, kk) * scale,
        )
        self.bias_ = rng.uniform(-1.0, 1.0, self.hidden_layer_size) * self.bias_scaling
        self.n_in_ = int(n_in)
        return self

    def _check_ready(self, width):
        if self.weights_ is None:
            raise RuntimeError(f"{type(self).__name__} is not initialized")
        expected = self.weights_.shape[1]
        if width != expected:
            raise ValueError(
                f"{type(self).__name__} expects {expected} input features, got {width}"
            )

    def transform(self, U):
        """Row-wise projection: ``f(W_in @ u[n] + bias)`` for every time step."""
        U = as_matrix(U, "U")
        self._check_ready(U.shape[1])
        pre = self.weights_.project_rows(U) + self.bias_
        return apply_activation(pre, self.input_activation)

    def export_weights(self):
        if self.weights_ is None:
            raise RuntimeError("block is not initialized")
        return self.weights_, self.bias_.copy()


class PredefinedInputToNode(InputToNode):
    """Input block whose weights are supplied verbatim by the caller."""

    def __init__(self, weights, bias=None, input_activation="tanh"):
        if not isinstance(weights, SparseWeights):
            weights = SparseWeights.from_dense(weights)
        n_res, n_in = weights.shape
        super().__init__(hidden_layer_size=n_res, input_activation=input_activation)
        if bias is None:
            bias = np.zeros(n_res)
        bias = np.asarray(bias, dtype=np.float64).reshape(-1)
        if bias.shape[0] != n_res:
            raise ValueError(
                f"bias length {bias.shape[0]} does not match {n_res} rows"
            )
        self.weights_ = weights
        self.bias_ = bias
        self.n_in_ = n_in

    def initialize(self, n_in, rng=None):
        if n_in != self.n_in_:
            raise ValueError(
                f"predefined weights take {self.n_in_} input features, got {n_in}"
            )
        return self


class NodeToNode:
    """Leaky recurrent state update over a spectrally calibrated reservoir.

    The raw recurrent matrix has ``k_rec`` standard-normal entries per row
    (``None`` for dense) and is rescaled so its spectral radius equals
    ``spectral_radius`` exactly; a requested radius of zero yields an
    all-zero matrix. ``bidirectional=True`` doubles the state width by
    stacking a time-reversed second pass.
    """

    def __init__(
        self,
        hidden_layer_size: int = 500,
        k_rec=None,
        spectral_radius: float = 1.0,
        leakage: float = 1.0,
        reservoir_activation="tanh",
        bidirectional: bool = False,
        seed=None,
    ):
        if hidden_layer_size < 1:
            raise ValueError("hidden_layer_size must be >= 1")
        if not 0.0 < leakage <= 1.0:
            raise ValueError("leakage must lie in (0, 1]")
        if spectral_radius < 0:
            raise ValueError("spectral_radius must be >= 0")
        self.hidden_layer_size = int(hidden_layer_size)
        self.k_rec = k_rec
        self.spectral_radius = float(spectral_radius)
        self.leakage = float(leakage)
        self.reservoir_activation = reservoir_activation
        self.bidirectional = bool(bidirectional)
        self.seed = seed
        self.weights_ = None

    @property
    def output_width(self) -> int:
        return self.hidden_layer_size * (2 if self.bidirectional else 1)

    def initialize(self, n_in=None, rng=None):
        """Draw and rescale the recurrent matrix; returns self."""
        n = self.hidden_layer_size
        if n_in is not None and n_in != n:
            raise ValueError(
                f"NodeToNode of size {n} cannot take {n_in}-wide input; "
                "recurrent blocks connect one-to-one"
            )
        rng = make_rng(self.seed) if self.seed is not None else rng
        if rng is None:
            raise ValueError("no seed configured and no rng supplied")
        k = _resolve_fan_in(self.k_rec, n, "k_rec")
        raw = _draw_sparse_rows(
            rng, n, n, k, lambda r, kk: r.standard_normal(kk)
        )
        if self.spectral_radius == 0.0:
            self.weights_ = raw.scaled(0.0)
            return self
        rho_raw = spectral_radius(raw)
        if rho_raw == 0.0:
            raise ValueError(
                "drawn recurrent matrix has zero spectral radius; cannot "
                f"rescale to {self.spectral_radius}"
            )
        self.weights_ = raw.scaled(self.spectral_radius / rho_raw)
        return self

    def _pass(self, Rp):
        n = self.hidden_layer_size
        lam = self.leakage
        w = self.weights_
        out = np.empty_like(Rp)
        r = np.zeros(n)
        for t in range(Rp.shape[0]):
            pre = apply_activation(Rp[t] + w.matvec(r), self.reservoir_activation)
            r = (1.0 - lam) * r + lam * pre
            out[t] = r
        return out

    def transform(self, Rp):
        """Run the leaky update over time; zero initial state per call."""
        Rp = as_matrix(Rp, "Rp")
        if self.weights_ is None:
            raise RuntimeError("NodeToNode is not initialized")
        if Rp.shape[1] != self.hidden_layer_size:
            raise ValueError(
                f"NodeToNode expects width {self.hidden_layer_size}, "
                f"got {Rp.shape[1]}"
            )
        forward = self._pass(Rp)
        if not self.bidirectional:
            return forward
        backward = self._pass(Rp[::-1])[::-1]
        return np.hstack([forward, backward])

    def export_weights(self):
        if self.weights_ is None:
            raise RuntimeError("block is not initialized")
        return self.weights_, None


class PredefinedNodeToNode(NodeToNode):
    """Recurrent block with caller-supplied weights, used verbatim.

    No spectral rescaling is applied: a matrix set from outside stays
    exactly what the caller provided.
    """

    def __init__(
        self,
        weights,
        leakage: float = 1.0,
        reservoir_activation="tanh",
        bidirectional: bool = False,
    ):
        if not isinstance(weights, SparseWeights):
            weights = SparseWeights.from_dense(weights)
        n, m = weights.shape
        if n != m:
            raise ValueError(f"recurrent weights must be square, got {weights.shape}")
        super().__init__(
            hidden_layer_size=n,
            leakage=leakage,
            reservoir_activation=reservoir_activation,
            bidirectional=bidirectional,
        )
        self.weights_ = weights

    def initialize(self, n_in=None, rng=None):
        if n_in is not None and n_in != self.hidden_layer_size:
            raise ValueError(
                f"predefined recurrent block has size {self.hidden_layer_size}, "
                f"got input width {n_in}"
            )
        return self


def make_predefined(weights, bias=None, recurrent: bool = False, **config):
    """Wrap fixed weights in a block behaving like its random-drawn twin."""
    if recurrent:
        if bias is not None:
            raise ValueError("recurrent blocks take no bias")
        return PredefinedNodeToNode(weights, **config)
    return PredefinedInputToNode(weights, bias, **config)


class Cascade:
    """Apply stages in order; stage m feeds stage m+1."""

    def __init__(self, stages):
        stages = list(stages)
        if not stages:
            raise ValueError("cascade needs at least one stage")
        self.stages = stages

    @property
    def output_width(self) -> int:
        return self.stages[-1].output_width

    def initialize(self, n_in, rng=None):
        width = n_in
        for i, stage in enumerate(self.stages):
            try:
                stage.initialize(width, rng)
            except ValueError as exc:
                raise ValueError(f"cascade stage {i}: {exc}") from None
            width = stage.output_width
        return self

    def transform(self, U):
        out = U
        for i, stage in enumerate(self.stages):
            try:
                out = stage.transform(out)
            except ValueError as exc:
                raise ValueError(f"cascade stage {i}: {exc}") from None
        return out


class Parallel:
    """Apply members to the same input; concatenate outputs feature-wise."""

    def __init__(self, members):
        members = list(members)
        if not members:
            raise ValueError("parallel group needs at least one member")
        self.members = members

    @property
    def output_width(self) -> int:
        return sum(m.output_width for m in self.members)

    def initialize(self, n_in, rng=None):
        for i, member in enumerate(self.members):
            try:
                member.initialize(n_in, rng)
            except ValueError as exc:
                raise ValueError(f"parallel member {i}: {exc}") from None
        return self

    def transform(self, U):
        outputs = []
        for i, member in enumerate(self.members):
            try:
                outputs.append(member.transform(U))
            except ValueError as exc:
                raise ValueError(f"parallel member {i}: {exc}") from None
        return np.hstack(outputs)


def compose(graph, U):
    """Run a block or block graph on ``U``; plain function spelling of
    ``graph.transform(U)``."""
    return graph.transform(U)
