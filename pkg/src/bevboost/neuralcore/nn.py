"""Parameter containers.  Parameters are discovered in attribute order."""
from __future__ import annotations

import math

import numpy as np

from . import ops
from .tensor import Tensor


def parameter(data, name=None) -> Tensor:
    return Tensor(np.asarray(data, dtype=np.float32), requires_grad=True, name=name)


class Module:
    def named_parameters(self, prefix: str = ""):
        for key, value in vars(self).items():
            if isinstance(value, Tensor) and value.requires_grad:
                yield prefix + key, value
            elif isinstance(value, Module):
                yield from value.named_parameters(f"{prefix}{key}.")
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Module):
                        yield from item.named_parameters(f"{prefix}{key}.{i}.")

    def parameters(self) -> list[Tensor]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def freeze(self) -> "Module":
        for p in self.parameters():
            p.requires_grad = False
        return self

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: p.data for k, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        own = dict(self.named_parameters())
        missing = set(own) - set(state)
        if missing:
            raise KeyError(f"missing parameters: {sorted(missing)[:5]}")
        for k, p in own.items():
            if state[k].shape != p.shape:
                raise ValueError(f"shape mismatch for {k}: {state[k].shape} vs {p.shape}")
            p.data = np.array(state[k], dtype=p.dtype)

    def astype(self, dtype) -> "Module":
        """Cast parameters in place (the double-precision shadow path for gradient checks)."""
        for p in self.parameters():
            p.data = p.data.astype(dtype)
        return self


def fan_in_uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(np.float32)


class Conv2d(Module):
    def __init__(self, rng, c_in, c_out, k, stride=1, pad=None, bias=True, zero=False):
        self.stride = stride
        self.pad = (k - 1) // 2 if pad is None else pad
        shape = (c_out, c_in, k, k)
        self.weight = parameter(np.zeros(shape) if zero else fan_in_uniform(rng, shape, c_in * k * k))
        self.bias = parameter(np.zeros(c_out)) if bias else None

    def __call__(self, x):
        return ops.conv2d(x, self.weight, self.bias, self.stride, self.pad)


class InstanceNorm(Module):
    def __init__(self, channels, gain=1.0):
        self.gain = parameter(np.full(channels, gain))
        self.shift = parameter(np.zeros(channels))

    def __call__(self, x):
        return ops.instance_norm(x, self.gain, self.shift)


class Linear(Module):
    def __init__(self, rng, f_in, f_out, zero=False):
        self.weight = parameter(np.zeros((f_out, f_in)) if zero else fan_in_uniform(rng, (f_out, f_in), f_in))
        self.bias = parameter(np.zeros(f_out))

    def __call__(self, x):
        return ops.linear(x, self.weight, self.bias)


def grad_norm(module: Module) -> float:
    total = 0.0
    for p in module.parameters():
        if p.grad is not None:
            total += float(np.sum(p.grad.astype(np.float64) ** 2))
    return math.sqrt(total)


def checksum(module: Module) -> str:
    import hashlib

    h = hashlib.sha256()
    for name, p in module.named_parameters():
        h.update(name.encode())
        h.update(np.ascontiguousarray(p.data).tobytes())
    return h.hexdigest()
