"""Minimal reverse-mode autodiff over numpy arrays, plus the layers,
gradient checker and Adam optimizer the models are built from.

A Tensor wraps a float64 ndarray and records the backward closure of
the op that produced it; calling backward() on a scalar output runs an
iterative topological sweep and accumulates gradients into every leaf.
Everything is single-threaded and bit-deterministic for fixed inputs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigError, NumericError

CHECKPOINT_FORMAT = "iopkit-params"
CHECKPOINT_VERSION = 1


def _unbroadcast(grad: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a broadcast gradient back to the operand's shape."""
    if grad.shape == shape:
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    __slots__ = ("data", "grad", "_prev", "_bw")

    def __init__(self, data, prev: tuple = (), bw: Callable | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self._prev = prev
        self._bw = bw

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def _acc(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def item(self) -> float:
        return float(self.data)

    # -- arithmetic -----------------------------------------------------

    def __add__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)
        out = Tensor(self.data + other.data, (self, other))

        def bw(g):
            self._acc(_unbroadcast(g, self.data.shape))
            other._acc(_unbroadcast(g, other.data.shape))

        out._bw = bw
        return out

    __radd__ = __add__

    def __mul__(self, other) -> "Tensor":
        other = other if isinstance(other, Tensor) else Tensor(other)
        out = Tensor(self.data * other.data, (self, other))

        def bw(g):
            self._acc(_unbroadcast(g * other.data, self.data.shape))
            other._acc(_unbroadcast(g * self.data, other.data.shape))

        out._bw = bw
        return out

    __rmul__ = __mul__

    def __neg__(self) -> "Tensor":
        return self * -1.0

    def __sub__(self, other) -> "Tensor":
        return self + (-(other if isinstance(other, Tensor) else Tensor(other)))

    def __rsub__(self, other) -> "Tensor":
        return Tensor(other) + (-self)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        if self.data.ndim != 2 or other.data.ndim not in (1, 2):
            raise ValueError("matmul supports 2D @ 1D or 2D @ 2D")
        out = Tensor(self.data @ other.data, (self, other))

        def bw(g):
            if other.data.ndim == 1:
                self._acc(np.outer(g, other.data))
                other._acc(self.data.T @ g)
            else:
                self._acc(g @ other.data.T)
                other._acc(self.data.T @ g)

        out._bw = bw
        return out

    # -- elementwise nonlinearities -------------------------------------

    def tanh(self) -> "Tensor":
        out = Tensor(np.tanh(self.data), (self,))

        def bw(g):
            self._acc(g * (1.0 - out.data * out.data))

        out._bw = bw
        return out

    def sigmoid(self) -> "Tensor":
        x = self.data
        val = np.where(x >= 0, 1.0 / (1.0 + np.exp(-np.abs(x))), np.exp(-np.abs(x)) / (1.0 + np.exp(-np.abs(x))))
        out = Tensor(val, (self,))

        def bw(g):
            self._acc(g * out.data * (1.0 - out.data))

        out._bw = bw
        return out

    def exp(self) -> "Tensor":
        out = Tensor(np.exp(self.data), (self,))

        def bw(g):
            self._acc(g * out.data)

        out._bw = bw
        return out

    def log(self) -> "Tensor":
        out = Tensor(np.log(self.data), (self,))

        def bw(g):
            self._acc(g / self.data)

        out._bw = bw
        return out

    def sum(self) -> "Tensor":
        out = Tensor(self.data.sum(), (self,))

        def bw(g):
            self._acc(np.full_like(self.data, float(g)))

        out._bw = bw
        return out

    # -- autodiff driver -------------------------------------------------

    def backward(self) -> None:
        if self.data.size != 1:
            raise ValueError("backward() requires a scalar output")
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._prev:
                if id(parent) not in visited:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._bw is not None and node.grad is not None:
                node._bw(node.grad)


# -- multi-argument ops ---------------------------------------------------


def dot(a: Tensor, b: Tensor) -> Tensor:
    out = Tensor(a.data @ b.data, (a, b))

    def bw(g):
        a._acc(float(g) * b.data)
        b._acc(float(g) * a.data)

    out._bw = bw
    return out


def concat(parts: Sequence[Tensor]) -> Tensor:
    out = Tensor(np.concatenate([p.data for p in parts]), tuple(parts))
    offsets = np.cumsum([0] + [p.data.size for p in parts])

    def bw(g):
        for p, lo, hi in zip(parts, offsets, offsets[1:]):
            p._acc(g[lo:hi])

    out._bw = bw
    return out


def stack_scalars(parts: Sequence[Tensor]) -> Tensor:
    out = Tensor(np.array([float(p.data) for p in parts]), tuple(parts))

    def bw(g):
        for i, p in enumerate(parts):
            p._acc(np.asarray(g[i]))

    out._bw = bw
    return out


def tsum(parts: Sequence[Tensor]) -> Tensor:
    """Elementwise sum of same-shape tensors as a single flat node."""
    out = Tensor(np.sum([p.data for p in parts], axis=0), tuple(parts))

    def bw(g):
        for p in parts:
            p._acc(g)

    out._bw = bw
    return out


def item(t: Tensor, i: int) -> Tensor:
    out = Tensor(t.data[i], (t,))

    def bw(g):
        full = np.zeros_like(t.data)
        full[i] = float(g)
        t._acc(full)

    out._bw = bw
    return out


def row(t: Tensor, i: int) -> Tensor:
    """Row view of a 2D parameter, e.g. an embedding lookup."""
    out = Tensor(t.data[i], (t,))

    def bw(g):
        full = np.zeros_like(t.data)
        full[i] = g
        t._acc(full)

    out._bw = bw
    return out


def softmax(t: Tensor) -> Tensor:
    shifted = t.data - t.data.max()
    e = np.exp(shifted)
    val = e / e.sum()
    out = Tensor(val, (t,))

    def bw(g):
        t._acc(out.data * (g - float(g @ out.data)))

    out._bw = bw
    return out


def cross_entropy_logits(logits: Tensor, target: int) -> Tensor:
    """Softmax cross-entropy against a single class index."""
    z = logits.data
    m = z.max()
    lse = m + np.log(np.exp(z - m).sum())
    out = Tensor(lse - z[target], (logits,))

    def bw(g):
        p = np.exp(z - lse)
        p[target] -= 1.0
        logits._acc(float(g) * p)

    out._bw = bw
    return out


def bce_logits(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean binary cross-entropy of sigmoid(logits) against 0/1 targets."""
    z = logits.data
    y = np.asarray(targets, dtype=np.float64)
    if z.shape != y.shape:
        raise ValueError(f"shape mismatch: {z.shape} vs {y.shape}")
    per = np.maximum(z, 0.0) - z * y + np.log1p(np.exp(-np.abs(z)))
    count = max(z.size, 1)
    out = Tensor(per.sum() / count, (logits,))

    def bw(g):
        sig = np.where(z >= 0, 1.0 / (1.0 + np.exp(-np.abs(z))), np.exp(-np.abs(z)) / (1.0 + np.exp(-np.abs(z))))
        logits._acc(float(g) * (sig - y) / count)

    out._bw = bw
    return out


# -- parameter store -------------------------------------------------------


class ModelParams:
    """Flat named parameter store with gradient slots and Adam state.

    Weights initialise uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)]
    from the store's seeded generator; biases and other zero-flagged
    entries start at zero. Adam moments are created alongside each
    parameter, initialised to zero.
    """

    def __init__(self, seed: int = 0):
        self.rng = np.random.default_rng(seed)
        self._tensors: dict[str, Tensor] = {}
        self.adam_m: dict[str, np.ndarray] = {}
        self.adam_v: dict[str, np.ndarray] = {}
        self.step_count = 0

    def add(
        self,
        name: str,
        shape: tuple[int, ...],
        fan_in: int | None = None,
        zero: bool = False,
    ) -> Tensor:
        if name in self._tensors:
            raise ConfigError(f"parameter {name!r} already exists")
        if zero:
            data = np.zeros(shape)
        else:
            fan = fan_in if fan_in is not None else shape[-1]
            bound = 1.0 / math.sqrt(max(fan, 1))
            data = self.rng.uniform(-bound, bound, size=shape)
        t = Tensor(data)
        self._tensors[name] = t
        self.adam_m[name] = np.zeros(shape)
        self.adam_v[name] = np.zeros(shape)
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self._tensors

    def names(self) -> list[str]:
        return sorted(self._tensors)

    def zero_grad(self) -> None:
        for t in self._tensors.values():
            t.grad = None

    def num_parameters(self) -> int:
        return sum(t.data.size for t in self._tensors.values())

    def copy_data(self) -> dict[str, np.ndarray]:
        return {name: t.data.copy() for name, t in self._tensors.items()}

    def load_data(self, data: dict[str, np.ndarray]) -> None:
        for name, arr in data.items():
            if name not in self._tensors:
                raise ConfigError(f"unknown parameter {name!r} in checkpoint")
            if self._tensors[name].data.shape != arr.shape:
                raise ConfigError(
                    f"shape mismatch for {name!r}: "
                    f"{self._tensors[name].data.shape} vs {arr.shape}"
                )
            self._tensors[name].data = arr.astype(np.float64).copy()

    def save(self, path, extra: dict[str, np.ndarray] | None = None) -> None:
        """Write a versioned npz checkpoint of named arrays with shapes."""
        arrays = {f"param:{name}": t.data for name, t in self._tensors.items()}
        for name, arr in (extra or {}).items():
            arrays[f"state:{name}"] = arr
        meta = {"format": CHECKPOINT_FORMAT, "version": CHECKPOINT_VERSION}
        arrays["meta"] = np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8)
        np.savez(path, **arrays)

    @staticmethod
    def read_checkpoint(path) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray]]:
        with np.load(path) as bundle:
            meta = json.loads(bytes(bundle["meta"]).decode())
            if meta.get("format") != CHECKPOINT_FORMAT:
                raise ConfigError(f"not a parameter checkpoint: {path}")
            if meta.get("version") != CHECKPOINT_VERSION:
                raise ConfigError(f"unsupported checkpoint version {meta.get('version')}")
            params = {}
            state = {}
            for key in bundle.files:
                if key.startswith("param:"):
                    params[key[len("param:"):]] = bundle[key]
                elif key.startswith("state:"):
                    state[key[len("state:"):]] = bundle[key]
        return params, state


# -- layers ----------------------------------------------------------------


@dataclass(frozen=True)
class TimeEncoding:
    """Sinusoidal encoding of a discretised timestamp rank."""

    d: int
    base: float = 10000.0

    def __post_init__(self):
        if self.d <= 0 or self.d % 2:
            raise ConfigError(f"encoding dimension must be even and positive, got {self.d}")
        if self.base <= 1:
            raise ConfigError(f"frequency base must exceed 1, got {self.base}")


def time_encode(rank: int, enc: TimeEncoding) -> np.ndarray:
    """out[2i] = sin(rank / base^(2i/d)), out[2i+1] = cos(rank / base^(2i/d))."""
    if rank < 0:
        raise ValueError(f"rank must be non-negative, got {rank}")
    i = np.arange(enc.d // 2)
    angle = rank / enc.base ** (2.0 * i / enc.d)
    out = np.empty(enc.d)
    out[0::2] = np.sin(angle)
    out[1::2] = np.cos(angle)
    return out


def attention_aggregate(
    query: Tensor, keys: Sequence[Tensor], values: Sequence[Tensor]
) -> Tensor:
    """Softmax over scaled dot products, convex combination of values.

    An empty neighbourhood returns a zero vector shaped like the query
    (callers that use a different value dimension must special-case it).
    """
    if len(keys) != len(values):
        raise ValueError(f"{len(keys)} keys vs {len(values)} values")
    if not keys:
        return Tensor(np.zeros_like(query.data))
    scale = 1.0 / math.sqrt(query.data.size)
    scores = stack_scalars([dot(query, k) for k in keys]) * scale
    weights = softmax(scores)
    return tsum([values[i] * item(weights, i) for i in range(len(values))])


def gru_step(h: Tensor, x: Tensor, p: ModelParams, prefix: str = "gru") -> Tensor:
    """Standard GRU update: h' = (1-z) * h + z * tanh-candidate."""
    z = (p[f"{prefix}.Wz"] @ x + p[f"{prefix}.Uz"] @ h + p[f"{prefix}.bz"]).sigmoid()
    r = (p[f"{prefix}.Wr"] @ x + p[f"{prefix}.Ur"] @ h + p[f"{prefix}.br"]).sigmoid()
    cand = (p[f"{prefix}.Wh"] @ x + p[f"{prefix}.Uh"] @ (r * h) + p[f"{prefix}.bh"]).tanh()
    return (1.0 - z) * h + z * cand


def init_gru(p: ModelParams, input_dim: int, hidden_dim: int, prefix: str = "gru") -> None:
    for gate in ("z", "r", "h"):
        p.add(f"{prefix}.W{gate}", (hidden_dim, input_dim))
        p.add(f"{prefix}.U{gate}", (hidden_dim, hidden_dim))
        p.add(f"{prefix}.b{gate}", (hidden_dim,), zero=True)


def mlp_forward(x: Tensor, p: ModelParams, prefix: str = "mlp") -> Tensor:
    """Affine, tanh, affine; returns unnormalised logits."""
    hidden = (p[f"{prefix}.W1"] @ x + p[f"{prefix}.b1"]).tanh()
    return p[f"{prefix}.W2"] @ hidden + p[f"{prefix}.b2"]


def init_mlp(
    p: ModelParams, input_dim: int, hidden_dim: int, out_dim: int, prefix: str = "mlp"
) -> None:
    p.add(f"{prefix}.W1", (hidden_dim, input_dim))
    p.add(f"{prefix}.b1", (hidden_dim,), zero=True)
    p.add(f"{prefix}.W2", (out_dim, hidden_dim))
    p.add(f"{prefix}.b2", (out_dim,), zero=True)


# -- optimizer and checking --------------------------------------------------


def adam_step(
    params: ModelParams,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> None:
    """One bias-corrected Adam update; gradient slots are cleared after."""
    params.step_count += 1
    t = params.step_count
    for name in params.names():
        tensor = params[name]
        g = tensor.grad if tensor.grad is not None else np.zeros_like(tensor.data)
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite gradient for parameter {name!r}")
        m = params.adam_m[name]
        v = params.adam_v[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1**t)
        v_hat = v / (1.0 - beta2**t)
        tensor.data = tensor.data - lr * m_hat / (np.sqrt(v_hat) + eps)
        tensor.grad = None


def grad_check(
    f: Callable[[], Tensor], params: ModelParams, eps: float = 1e-5
) -> float:
    """Max relative error of reverse-mode gradients vs central differences.

    The relative error denominator is max(|analytic|, |numeric|, 1e-8)
    per coordinate. f must rebuild its graph from the stored parameter
    tensors on every call.
    """
    if eps <= 0:
        raise ValueError(f"finite-difference step must be positive, got {eps}")
    params.zero_grad()
    out = f()
    if not np.isfinite(out.data).all():
        raise NumericError("non-finite loss in gradient check")
    out.backward()
    analytic = {
        name: (params[name].grad.copy() if params[name].grad is not None
               else np.zeros_like(params[name].data))
        for name in params.names()
    }
    params.zero_grad()
    worst = 0.0
    for name in params.names():
        data = params[name].data
        grad = analytic[name]
        for idx in np.ndindex(data.shape):
            orig = data[idx]
            data[idx] = orig + eps
            f_plus = float(f().data)
            data[idx] = orig - eps
            f_minus = float(f().data)
            data[idx] = orig
            if not (math.isfinite(f_plus) and math.isfinite(f_minus)):
                raise NumericError("non-finite loss during finite differencing")
            numeric = (f_plus - f_minus) / (2.0 * eps)
            a = float(grad[idx])
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, err)
    return worst
