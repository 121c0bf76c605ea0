"""Binary checkpoint format for trained models.

Layout (all integers unsigned little-endian)::

    magic        8 bytes   b"LOPGPNCK"
    version      u32       currently 1
    n_hyper      u32
    n_hyper x    u32 key length, key (UTF-8), u32 value length, value (UTF-8)
    n_arrays     u32
    n_arrays x   u32 name length, name (UTF-8), u32 ndim, ndim x u64 shape,
                 prod(shape) x float64 little-endian, row-major

Hyperparameters are text: floats use ``repr`` so they round-trip exactly,
``None`` is written as the text ``None``. Keys and arrays are
written in sorted order so equal models produce byte-identical files.
"""

from __future__ import annotations

import math
import struct
from pathlib import Path
from typing import Dict, Tuple

import numpy as np

from .postnet import PostNetConfig, PostNetPredictor
from .train import TrainConfig, TrainedModel

MAGIC = b"LOPGPNCK"
VERSION = 1
_PRIORS = "meta.class_priors"


class CheckpointError(ValueError):
    pass


def _text(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return "None" if value is None else str(value)


def _pack_str(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<I", len(raw)) + raw


def encode(hyper: Dict[str, str], arrays: Dict[str, np.ndarray]) -> bytes:
    parts = [MAGIC, struct.pack("<I", VERSION), struct.pack("<I", len(hyper))]
    for key in sorted(hyper):
        parts += [_pack_str(key), _pack_str(_text(hyper[key]))]
    parts.append(struct.pack("<I", len(arrays)))
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name], dtype="<f8")
        parts += [_pack_str(name), struct.pack("<I", arr.ndim)]
        parts += [struct.pack("<Q", d) for d in arr.shape]
        parts.append(arr.tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise CheckpointError("truncated checkpoint")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]

    def text(self) -> str:
        return self.take(self.u32()).decode("utf-8")


def decode(data: bytes) -> Tuple[Dict[str, str], Dict[str, np.ndarray]]:
    r = _Reader(data)
    if r.take(len(MAGIC)) != MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    version = r.u32()
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    hyper = {}
    for _ in range(r.u32()):
        key = r.text()
        hyper[key] = r.text()
    arrays = {}
    for _ in range(r.u32()):
        name = r.text()
        shape = tuple(r.u64() for _ in range(r.u32()))
        count = math.prod(shape)
        arrays[name] = np.frombuffer(r.take(8 * count), dtype="<f8").astype(np.float64).reshape(shape)
    if r.pos != len(data):
        raise CheckpointError("trailing bytes after checkpoint payload")
    return hyper, arrays


def _parse(text: str, kind):
    if text == "None":
        return None
    if kind is bool:
        return text == "True"
    return kind(text)


def model_to_bytes(model: TrainedModel, extra: Dict[str, str] = None) -> bytes:
    pred = model.predictor
    hyper = {f"train.{k}": v for k, v in model.config.to_dict().items()}
    hyper.update({f"net.{k}": v for k, v in vars(pred.config).items()})
    hyper.update(
        {"kind": model.kind, "seed": model.seed, "best_epoch": model.best_epoch,
         "certainty_budget": float(pred.certainty_budget)}
    )
    hyper.update({f"extra.{k}": v for k, v in (extra or {}).items()})
    arrays = dict(pred.params)
    arrays[_PRIORS] = pred.class_priors
    return encode(hyper, arrays)


_TRAIN_TYPES = {
    "teleport_epsilon": float, "power_iterations": int, "sparsify_delta": float, "hidden_dim": int,
    "latent_dim": int, "flow_layers": int, "learning_rate": float, "max_epochs": int, "patience": int,
    "entropy_weight": float, "grad_clip": float, "certainty_budget": float, "model": str,
}


def model_from_bytes(data: bytes) -> Tuple[TrainedModel, Dict[str, str]]:
    """Rebuild a model; returns it with the ``extra.*`` entries (prefix stripped)."""
    hyper, arrays = decode(data)
    try:
        cfg = TrainConfig(**{k[6:]: _parse(v, _TRAIN_TYPES[k[6:]]) for k, v in hyper.items() if k.startswith("train.")})
        net = PostNetConfig(**{k[4:]: int(v) for k, v in hyper.items() if k.startswith("net.")})
        priors = arrays.pop(_PRIORS)
        pred = PostNetPredictor(net, arrays, priors, float(hyper["certainty_budget"]))
        model = TrainedModel(hyper["kind"], pred, cfg, int(hyper["seed"]), [], int(hyper["best_epoch"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"incomplete checkpoint: {exc}") from exc
    extra = {k[6:]: v for k, v in hyper.items() if k.startswith("extra.")}
    return model, extra


def save(model: TrainedModel, path, extra: Dict[str, str] = None) -> None:
    Path(path).write_bytes(model_to_bytes(model, extra))


def load(path) -> Tuple[TrainedModel, Dict[str, str]]:
    return model_from_bytes(Path(path).read_bytes())
