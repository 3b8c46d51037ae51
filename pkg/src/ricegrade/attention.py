"""Forward passes of SimAM and ECA on NCHW float64 tensors."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class TensorFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Tensor4:
    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 4 or min(arr.shape) < 1:
            raise ValueError(f"expected a non-empty NCHW tensor, got shape {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("tensor contains non-finite values")
        object.__setattr__(self, "data", arr)

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return tuple(int(s) for s in self.data.shape)

    def to_json(self) -> dict:
        return {"shape": list(self.shape), "data": self.data.ravel().tolist()}

    @classmethod
    def from_json(cls, obj) -> "Tensor4":
        if not isinstance(obj, dict) or "shape" not in obj or "data" not in obj:
            raise TensorFormatError("tensor JSON must be an object with 'shape' and 'data'")
        shape = obj["shape"]
        if (not isinstance(shape, list) or len(shape) != 4
                or not all(isinstance(s, int) and not isinstance(s, bool) and s >= 1 for s in shape)):
            raise TensorFormatError(f"shape must be four positive integers, got {shape!r}")
        data = obj["data"]
        if not isinstance(data, list):
            raise TensorFormatError("data must be a flat list of numbers")
        for i, v in enumerate(data):
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
                raise TensorFormatError(f"data[{i}] is not a finite number: {v!r}")
        expected = math.prod(shape)
        if len(data) != expected:
            raise TensorFormatError(f"shape {shape} needs {expected} values, data has {len(data)}")
        return cls(np.array(data, dtype=np.float64).reshape(shape))

    @classmethod
    def load(cls, path: str | Path) -> "Tensor4":
        text = Path(path).read_text(encoding="utf-8")
        try:
            obj = json.loads(text)
        except json.JSONDecodeError as exc:
            raise TensorFormatError(f"{path}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}")
        return cls.from_json(obj)

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json()), encoding="utf-8")


def sigmoid(z):
    """Logistic function, evaluated without overflow for large |z|."""
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


@dataclass(frozen=True)
class SimamParams:
    lam: float = 1e-4

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")


def simam(x: Tensor4, params: SimamParams = SimamParams()) -> Tensor4:
    """Parameter-free energy attention.

    ``n`` is the spatial size minus one (H*W - 1), so single-pixel maps are
    rejected.
    """
    arr = x.data if isinstance(x, Tensor4) else np.asarray(x, dtype=np.float64)
    h, w = arr.shape[2], arr.shape[3]
    n = h * w - 1
    if n < 1:
        raise ValueError("simam needs H*W >= 2")
    d = (arr - arr.mean(axis=(2, 3), keepdims=True)) ** 2
    v = d.sum(axis=(2, 3), keepdims=True) / n
    e_inv = d / (4.0 * (v + params.lam)) + 0.5
    return Tensor4(arr * sigmoid(e_inv))


SIMAM_PARAMETER_COUNT = 0


@dataclass(frozen=True)
class EcaParams:
    gamma: float = 2.0
    b: float = 1.0
    kernel_override: int | None = None
    kernel_weights: tuple[float, ...] | None = field(default=None)

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        k = self.kernel_override
        if k is not None and (k < 1 or k % 2 == 0):
            raise ValueError(f"kernel size must be a positive odd integer, got {k}")
        if self.kernel_weights is not None:
            object.__setattr__(self, "kernel_weights", tuple(float(w) for w in self.kernel_weights))
            size = len(self.kernel_weights)
            if size % 2 == 0 or (k is not None and size != k):
                raise ValueError(f"{size} kernel weights do not match an odd kernel size {k}")

    def kernel_size(self, channels: int) -> int:
        if self.kernel_override is not None:
            return self.kernel_override
        if self.kernel_weights is not None:
            return len(self.kernel_weights)
        return adaptive_kernel_size(channels, self.gamma, self.b)

    def weights(self, channels: int) -> np.ndarray:
        if self.kernel_weights is not None:
            return np.array(self.kernel_weights)
        k = self.kernel_size(channels)
        return np.full(k, 1.0 / k)


def adaptive_kernel_size(channels: int, gamma: float = 2.0, b: float = 1.0) -> int:
    """ECA kernel size: ``|(log2 C + b) / gamma|`` truncated, bumped to the next odd integer."""
    if channels < 1:
        raise ValueError("channels must be >= 1")
    t = int(abs((math.log2(channels) + b) / gamma))
    return t if t % 2 else t + 1


def channel_conv(descriptors: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Zero-padded 1-D cross-correlation along the last axis, same length out."""
    k = len(weights)
    pad = (k - 1) // 2
    padded = np.pad(descriptors, [(0, 0)] * (descriptors.ndim - 1) + [(pad, pad)])
    c = descriptors.shape[-1]
    out = np.zeros_like(descriptors, dtype=np.float64)
    for j, w in enumerate(weights):
        out += w * padded[..., j:j + c]
    return out


def eca_weights(x: Tensor4, params: EcaParams = EcaParams()) -> np.ndarray:
    """Per-(sample, channel) gate in (0, 1), shape (N, C)."""
    arr = x.data
    descriptors = arr.mean(axis=(2, 3))
    return sigmoid(channel_conv(descriptors, params.weights(arr.shape[1])))


def eca(x: Tensor4, params: EcaParams = EcaParams()) -> Tensor4:
    gate = eca_weights(x, params)
    return Tensor4(x.data * gate[:, :, None, None])


def eca_parameter_count(channels: int, params: EcaParams = EcaParams()) -> int:
    return params.kernel_size(channels)


def _stats(t: Tensor4) -> dict:
    d = t.data
    return {"min": float(d.min()), "max": float(d.max()), "mean": float(d.mean()), "std": float(d.std())}


def insertion_check(x: Tensor4, simam_params: SimamParams = SimamParams(),
                    eca_params: EcaParams = EcaParams()) -> dict:
    """Check that both ops are shape-preserving drop-ins and compare composition orders."""
    channels = x.shape[1]
    s = simam(x, simam_params)
    e = eca(x, eca_params)
    se = eca(s, eca_params)
    es = simam(e, simam_params)
    k = eca_parameter_count(channels, eca_params)
    diff = float(np.abs(se.data - es.data).max())
    return {
        "input_shape": list(x.shape),
        "simam": {"shape": list(s.shape), "shape_preserved": s.shape == x.shape,
                  "added_parameters": SIMAM_PARAMETER_COUNT, "stats": _stats(s)},
        "eca": {"shape": list(e.shape), "shape_preserved": e.shape == x.shape,
                "kernel_size": k, "added_parameters": k, "stats": _stats(e)},
        "simam_then_eca": {"shape": list(se.shape), "added_parameters": k, "stats": _stats(se)},
        "eca_then_simam": {"shape": list(es.shape), "added_parameters": k, "stats": _stats(es)},
        "orders_max_abs_diff": diff,
        "commutes": diff == 0.0,
    }
