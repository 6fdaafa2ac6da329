"""Named parameter storage, initialization, SGD updates and checkpointing.

Checkpoint layout: an 8-byte magic header, a length-prefixed JSON manifest
(parameter names/shapes/dtype plus seed and step), then the raw float64
little-endian array payloads in manifest order.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .autodiff import Tensor

MAGIC = b"CGCK0001"


class ParameterStore:
    """Flat, named collection of trainable arrays with gradient slots."""

    def __init__(self, seed: int = 0):
        self.params: dict[str, Tensor] = {}
        self.seed = int(seed)
        self.rng = np.random.default_rng(seed)
        self.step = 0

    def new(self, name: str, shape: tuple, fan_in: int | None = None) -> Tensor:
        """Create (or fetch) a parameter, initialized uniform(+-1/sqrt(fan_in))."""
        if name in self.params:
            existing = self.params[name]
            if existing.data.shape != tuple(shape):
                raise ValueError(
                    f"parameter {name!r} exists with shape {existing.data.shape}, "
                    f"requested {tuple(shape)}")
            return existing
        if fan_in is None:
            fan_in = shape[0] if shape else 1
        bound = 1.0 / np.sqrt(max(fan_in, 1))
        data = self.rng.uniform(-bound, bound, size=shape)
        t = Tensor(data, requires_grad=True)
        self.params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self.params[name]

    def __contains__(self, name: str) -> bool:
        return name in self.params

    def names(self) -> list[str]:
        return sorted(self.params)

    def zero_grad(self) -> None:
        for t in self.params.values():
            t.grad = None

    def sgd_step(self, lr: float) -> None:
        for t in self.params.values():
            if t.grad is not None:
                t.data -= lr * t.grad
        self.step += 1

    def adam_step(self, lr: float, beta1: float = 0.9, beta2: float = 0.999,
                  eps: float = 1e-8) -> None:
        """Adam update (optional config extension; SGD remains the default)."""
        if not hasattr(self, "_adam_m"):
            self._adam_m: dict[str, np.ndarray] = {}
            self._adam_v: dict[str, np.ndarray] = {}
            self._adam_t = 0
        self._adam_t += 1
        t_step = self._adam_t
        for name in self.names():
            p = self.params[name]
            if p.grad is None:
                continue
            m = self._adam_m.setdefault(name, np.zeros_like(p.data))
            v = self._adam_v.setdefault(name, np.zeros_like(p.data))
            m *= beta1
            m += (1 - beta1) * p.grad
            v *= beta2
            v += (1 - beta2) * p.grad * p.grad
            m_hat = m / (1 - beta1 ** t_step)
            v_hat = v / (1 - beta2 ** t_step)
            p.data -= lr * m_hat / (np.sqrt(v_hat) + eps)
        self.step += 1

    # -- checkpointing -------------------------------------------------------
    def save(self, path) -> None:
        names = self.names()
        manifest = {
            "seed": self.seed,
            "step": self.step,
            "arrays": [{"name": n, "shape": list(self.params[n].data.shape),
                        "dtype": "float64"} for n in names],
        }
        blob = json.dumps(manifest, sort_keys=True).encode("utf-8")
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(struct.pack("<Q", len(blob)))
            fh.write(blob)
            for n in names:
                fh.write(self.params[n].data.astype("<f8").tobytes())

    @classmethod
    def load(cls, path) -> "ParameterStore":
        with open(path, "rb") as fh:
            magic = fh.read(8)
            if magic != MAGIC:
                raise ValueError(f"bad checkpoint magic: {magic!r}")
            (mlen,) = struct.unpack("<Q", fh.read(8))
            manifest = json.loads(fh.read(mlen).decode("utf-8"))
            store = cls(seed=manifest["seed"])
            store.step = manifest["step"]
            for entry in manifest["arrays"]:
                shape = tuple(entry["shape"])
                count = int(np.prod(shape)) if shape else 1
                raw = fh.read(count * 8)
                data = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
                store.params[entry["name"]] = Tensor(data, requires_grad=True)
        return store
