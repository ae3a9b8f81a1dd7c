from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class AdamState:
    lr: float = 2e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def adam_step(params, grads, state: AdamState):
    """One bias-corrected Adam update; returns the new parameter arrays.

    Missing gradients (``None``) count as zero.
    """
    if not state.m:
        state.m = [np.zeros_like(p) for p in params]
        state.v = [np.zeros_like(p) for p in params]
    if len(state.m) != len(params):
        raise ValueError("Adam state does not match the parameter list")
    state.step += 1
    t = state.step
    c1 = 1 - state.beta1 ** t
    c2 = 1 - state.beta2 ** t
    out = []
    for i, (p, g) in enumerate(zip(params, grads)):
        if g is None:
            g = np.zeros_like(p)
        m = state.m[i] = state.beta1 * state.m[i] + (1 - state.beta1) * g
        v = state.v[i] = state.beta2 * state.v[i] + (1 - state.beta2) * (g * g)
        upd = state.lr * (m / c1) / (np.sqrt(v / c2) + state.eps)
        out.append((p - upd).astype(p.dtype, copy=False))
    return out


class Adam:
    """Adam over a fixed list of parameter tensors."""

    def __init__(self, params, lr=2e-4, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.state = AdamState(lr=lr, beta1=beta1, beta2=beta2, eps=eps)

    def step(self) -> None:
        new = adam_step([p.data for p in self.params], [p.grad for p in self.params], self.state)
        for p, d in zip(self.params, new):
            p.data = d

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def state_arrays(self, prefix: str) -> dict[str, np.ndarray]:
        out = {f"{prefix}.step": np.array([self.state.step], dtype=np.float32)}
        for i, (m, v) in enumerate(zip(self.state.m, self.state.v)):
            out[f"{prefix}.m.{i}"] = m
            out[f"{prefix}.v.{i}"] = v
        return out

    def load_state_arrays(self, arrays: dict[str, np.ndarray], prefix: str) -> None:
        key = f"{prefix}.step"
        if key not in arrays:
            return
        self.state.step = int(arrays[key][0])
        n = len(self.params)
        if f"{prefix}.m.0" in arrays:
            self.state.m = [arrays[f"{prefix}.m.{i}"].copy() for i in range(n)]
            self.state.v = [arrays[f"{prefix}.v.{i}"].copy() for i in range(n)]
