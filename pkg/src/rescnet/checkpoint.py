"""Binary checkpoint format.

Layout (all integers little-endian)::

    b"RESCNET1"                   8-byte magic
    u32 version                   currently 1
    u64 header length, header     UTF-8 JSON, sorted keys
    u32 array count
    per array: u32 ndim, ndim x u64 shape, float64 LE data

The JSON header holds the configs, the per-layer progress log and the model
structure; every numeric array lives in the array table and is referenced
from the header by index. Serialisation is deterministic, so equal models
produce byte-identical files.
"""
import io
import json
import os
import struct
import tempfile
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .config import DataConfig, TrainConfig, from_dict, to_dict
from .engine import FirstLayer, LayerMetrics, ResCNetModel
from .errors import CheckpointError, CheckpointVersionError
from .filters import FilterBank
from .lda import LdaModel, PosteriorTransform
from .residual import CompensationLayer

MAGIC = b"RESCNET1"
VERSION = 1


@dataclass(frozen=True)
class Checkpoint:
    model: ResCNetModel
    data_config: DataConfig
    metrics: tuple

    @property
    def config(self):
        return self.model.config


class _Writer:
    def __init__(self):
        self.arrays = []

    def add(self, array):
        self.arrays.append(np.ascontiguousarray(array, dtype="<f8"))
        return len(self.arrays) - 1

    def bank(self, bank):
        return {"provenance": bank.provenance, "kernels": self.add(bank.kernels),
                "bias": self.add(bank.bias)}

    def lda(self, model):
        if model is None:
            return None
        return {"weights": self.add(model.weights), "intercepts": self.add(model.intercepts),
                "class_ids": [int(c) for c in model.class_ids], "ridge": model.ridge}


class _Reader:
    def __init__(self, arrays):
        self.arrays = arrays

    def get(self, index):
        return self.arrays[index]

    def bank(self, spec):
        return FilterBank(self.get(spec["kernels"]), self.get(spec["bias"]), spec["provenance"])

    def lda(self, spec):
        if spec is None:
            return None
        return LdaModel(self.get(spec["weights"]), self.get(spec["intercepts"]),
                        np.array(spec["class_ids"], dtype=np.int64), spec["ridge"])


def _transform_dict(t):
    return {"kind": t.kind, "sigmoid_scale": t.sigmoid_scale, "softmax_beta": t.softmax_beta}


def dumps(model, data_config=None, metrics=()):
    data_config = data_config or DataConfig()
    w = _Writer()
    layer1 = model.layer1
    header = {
        "train_config": to_dict(model.config),
        "data_config": to_dict(data_config),
        "metrics": [asdict(m) for m in metrics],
        "model": {
            "class_count": model.class_count,
            "input_shape": list(model.input_shape),
            "layer1": {"bank": w.bank(layer1.filter_bank), "lda": w.lda(layer1.model),
                       "transform": _transform_dict(layer1.transform)},
            "layers": [{"bank": w.bank(layer.filter_bank),
                        "positive": w.lda(layer.positive_model),
                        "negative": w.lda(layer.negative_model),
                        "n_p": layer.n_p, "n_n": layer.n_n, "alpha": layer.alpha,
                        "transform": _transform_dict(layer.transform)}
                       for layer in model.compensation_layers],
        },
    }
    text = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    out = io.BytesIO()
    out.write(MAGIC)
    out.write(struct.pack("<IQ", VERSION, len(text)))
    out.write(text)
    out.write(struct.pack("<I", len(w.arrays)))
    for array in w.arrays:
        out.write(struct.pack(f"<I{array.ndim}Q", array.ndim, *array.shape))
        out.write(array.tobytes())
    return out.getvalue()


def _take(buf, pos, size):
    if pos + size > len(buf):
        raise CheckpointError("checkpoint is truncated")
    return buf[pos:pos + size], pos + size


def loads(buf):
    if buf[:len(MAGIC)] != MAGIC:
        raise CheckpointVersionError("not a rescnet checkpoint (bad magic)")
    pos = len(MAGIC)
    raw, pos = _take(buf, pos, 12)
    version, header_len = struct.unpack("<IQ", raw)
    if version != VERSION:
        raise CheckpointVersionError(f"unsupported checkpoint version {version}")
    raw, pos = _take(buf, pos, header_len)
    try:
        header = json.loads(raw.decode("utf-8"))
    except ValueError as exc:
        raise CheckpointError("checkpoint header is not valid JSON") from exc
    raw, pos = _take(buf, pos, 4)
    count, = struct.unpack("<I", raw)
    arrays = []
    for _ in range(count):
        raw, pos = _take(buf, pos, 4)
        ndim, = struct.unpack("<I", raw)
        raw, pos = _take(buf, pos, 8 * ndim)
        shape = struct.unpack(f"<{ndim}Q", raw)
        raw, pos = _take(buf, pos, 8 * int(np.prod(shape, dtype=np.int64)))
        arrays.append(np.frombuffer(raw, dtype="<f8").reshape(shape).astype(np.float64))
    if pos != len(buf):
        raise CheckpointError("trailing bytes after checkpoint arrays")

    try:
        return _build(header, _Reader(arrays))
    except (KeyError, TypeError, IndexError) as exc:
        raise CheckpointError(f"checkpoint header is incomplete: {exc}") from exc


def _build(header, r):
    config = from_dict(TrainConfig, header["train_config"])
    spec = header["model"]
    l1 = spec["layer1"]
    layer1 = FirstLayer(r.bank(l1["bank"]), r.lda(l1["lda"]), PosteriorTransform(**l1["transform"]))
    layers = tuple(
        CompensationLayer(r.bank(s["bank"]), r.lda(s["positive"]), r.lda(s["negative"]),
                          s["n_p"], s["n_n"], s["alpha"], PosteriorTransform(**s["transform"]))
        for s in spec["layers"])
    model = ResCNetModel(layer1, layers, spec["class_count"], tuple(spec["input_shape"]), config)
    metrics = tuple(LayerMetrics(**m) for m in header["metrics"])
    return Checkpoint(model, from_dict(DataConfig, header["data_config"]), metrics)


def save_checkpoint(path, model, data_config=None, metrics=()):
    """Write atomically: a crash mid-write leaves the previous file intact."""
    path = Path(path)
    blob = dumps(model, data_config, metrics)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=path.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(blob)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_checkpoint(path):
    with open(path, "rb") as fh:
        return loads(fh.read())
