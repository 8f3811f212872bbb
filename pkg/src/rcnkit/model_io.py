"""Versioned binary container for fitted estimators.

Layout: the 8-byte magic ``RCNKIT01``, a little-endian uint32 format
version, a little-endian uint64 header length, a UTF-8 JSON header, then a
payload of little-endian float64 arrays referenced by offset from the
header. Sparse weights are stored as (row, col, value) triples. Loading a
saved model reproduces its predictions bit for bit: weights travel as raw
float64 and the rebuilt blocks apply them verbatim.
"""

from __future__ import annotations

import json
import numpy as np

from .blocks import (
    Cascade,
    Parallel,
    PredefinedInputToNode,
    PredefinedNodeToNode,
    SparseWeights,
)
from .core import MinMaxScaler
from .estimators import (
    ElmClassifier,
    ElmRegressor,
    EsnClassifier,
    EsnRegressor,
    LabelEncoding,
)
from .readout import Readout

__all__ = ["MAGIC", "FORMAT_VERSION", "save_model", "load_model"]

MAGIC = b"RCNKIT01"
FORMAT_VERSION = 1

_ESTIMATOR_KINDS = {
    "elm_regressor": ElmRegressor,
    "elm_classifier": ElmClassifier,
    "esn_regressor": EsnRegressor,
    "esn_classifier": EsnClassifier,
}


class _ArrayStore:
    """Accumulates float64 arrays and hands out payload references."""

    def __init__(self):
        self.chunks = []
        self.offset = 0

    def put(self, arr):
        arr = np.ascontiguousarray(np.asarray(arr, dtype="<f8"))
        ref = {"offset": self.offset, "shape": list(arr.shape)}
        raw = arr.tobytes()
        self.chunks.append(raw)
        self.offset += len(raw)
        return ref

    def payload(self):
        return b"".join(self.chunks)


class _ArrayReader:
    def __init__(self, payload):
        self.payload = payload

    def get(self, ref):
        shape = tuple(ref["shape"])
        count = int(np.prod(shape)) if shape else 1
        arr = np.frombuffer(
            self.payload, dtype="<f8", count=count, offset=ref["offset"]
        )
        return arr.reshape(shape).astype(np.float64)


def _json_coerce(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    raise TypeError(f"cannot store {type(value).__name__} in a model header")


def _weights_doc(weights: SparseWeights, store):
    return {"shape": list(weights.shape), "triples": store.put(weights.triples())}


def _weights_from_doc(doc, reader) -> SparseWeights:
    return SparseWeights.from_triples(tuple(doc["shape"]), reader.get(doc["triples"]))


def _block_doc(block, store):
    if hasattr(block, "stages"):
        return {"kind": "cascade",
                "stages": [_block_doc(s, store) for s in block.stages]}
    if hasattr(block, "members"):
        return {"kind": "parallel",
                "members": [_block_doc(m, store) for m in block.members]}
    if hasattr(block, "bias_"):
        weights, bias = block.export_weights()
        return {
            "kind": "input",
            "activation": block.input_activation,
            "weights": _weights_doc(weights, store),
            "bias": store.put(bias),
        }
    weights, _ = block.export_weights()
    return {
        "kind": "recurrent",
        "activation": block.reservoir_activation,
        "leakage": block.leakage,
        "bidirectional": block.bidirectional,
        "weights": _weights_doc(weights, store),
    }


def _block_from_doc(doc, reader):
    kind = doc["kind"]
    if kind == "cascade":
        return Cascade([_block_from_doc(d, reader) for d in doc["stages"]])
    if kind == "parallel":
        return Parallel([_block_from_doc(d, reader) for d in doc["members"]])
    if kind == "input":
        return PredefinedInputToNode(
            _weights_from_doc(doc["weights"], reader),
            bias=reader.get(doc["bias"]),
            input_activation=doc["activation"],
        )
    if kind == "recurrent":
        return PredefinedNodeToNode(
            _weights_from_doc(doc["weights"], reader),
            leakage=doc["leakage"],
            reservoir_activation=doc["activation"],
            bidirectional=doc["bidirectional"],
        )
    raise ValueError(f"unknown block kind {kind!r}")


def _labels_doc(encoding):
    classes = encoding.classes
    if classes.dtype.kind in "iu":
        return {"dtype": "int", "classes": [int(c) for c in classes]}
    if classes.dtype.kind == "f":
        return {"dtype": "float", "classes": [float(c) for c in classes]}
    return {"dtype": "str", "classes": [str(c) for c in classes]}


def _labels_from_doc(doc):
    dtype = {"int": np.int64, "float": np.float64, "str": None}[doc["dtype"]]
    classes = np.asarray(doc["classes"], dtype=dtype)
    return LabelEncoding(classes)


def _scaler_doc(scaler: MinMaxScaler, store):
    return {"min": store.put(scaler.min_), "max": store.put(scaler.max_)}


def _scaler_from_doc(doc, reader) -> MinMaxScaler:
    scaler = MinMaxScaler()
    scaler.min_ = reader.get(doc["min"])
    scaler.max_ = reader.get(doc["max"])
    scaler.degenerate = scaler.max_ == scaler.min_
    return scaler


def save_model(estimator, path, scalers=None):
    """Write a fitted estimator (plus optional named scalers) to ``path``."""
    if not getattr(estimator, "fitted_", False):
        raise ValueError("only fitted estimators can be saved")
    kind = next(
        (k for k, cls in _ESTIMATOR_KINDS.items() if type(estimator) is cls), None
    )
    if kind is None:
        raise TypeError(f"cannot serialize {type(estimator).__name__}")

    store = _ArrayStore()
    params = {
        name: value
        for name, value in estimator.get_params().items()
        if name not in ("input_to_node", "node_to_node")
    }
    header = {
        "estimator": kind,
        "params": params,
        "sequence_mode": bool(getattr(estimator, "sequence_mode_", False)),
        "state_width": int(estimator.state_width_),
        "input_graph": _block_doc(estimator.input_graph_, store),
        "recurrent_graph": (
            None if estimator.recurrent_graph_ is None
            else _block_doc(estimator.recurrent_graph_, store)
        ),
        "readout": store.put(estimator.readout_.weights),
        "labels": (
            _labels_doc(estimator.label_encoding_)
            if hasattr(estimator, "label_encoding_") else None
        ),
        "per_step_targets": bool(getattr(estimator, "per_step_targets_", True)),
        "scalers": {
            name: _scaler_doc(s, store) for name, s in (scalers or {}).items()
        },
    }
    blob = json.dumps(header, sort_keys=True, default=_json_coerce).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(np.uint32(FORMAT_VERSION).astype("<u4").tobytes())
        fh.write(np.uint64(len(blob)).astype("<u8").tobytes())
        fh.write(blob)
        fh.write(store.payload())


def load_model(path):
    """Rebuild a saved estimator; returns ``(estimator, scalers)``."""
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != MAGIC:
            raise ValueError(f"{path}: not a model file (bad magic {magic!r})")
        version = int(np.frombuffer(fh.read(4), dtype="<u4")[0])
        if version != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported format version {version}")
        header_len = int(np.frombuffer(fh.read(8), dtype="<u8")[0])
        header = json.loads(fh.read(header_len).decode("utf-8"))
        reader = _ArrayReader(fh.read())

    cls = _ESTIMATOR_KINDS[header["estimator"]]
    est = cls(**header["params"])
    est.input_graph_ = _block_from_doc(header["input_graph"], reader)
    est.recurrent_graph_ = (
        None if header["recurrent_graph"] is None
        else _block_from_doc(header["recurrent_graph"], reader)
    )
    est.readout_ = Readout(reader.get(header["readout"]))
    est.state_width_ = header["state_width"]
    est.sequence_mode_ = header["sequence_mode"]
    est.per_step_targets_ = header["per_step_targets"]
    if header["labels"] is not None:
        est.label_encoding_ = _labels_from_doc(header["labels"])
    est.fitted_ = True
    scalers = {
        name: _scaler_from_doc(doc, reader)
        for name, doc in header["scalers"].items()
    }
    return est, scalers
