from __future__ import annotations

import numpy as np

from .params import ParamSet
from .tensor import StateError


class Adam:
    """Adam with optional persistent masks (pruned entries stay exactly zero)."""

    def __init__(
        self,
        params: ParamSet,
        lr: float = 1e-3,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        names: list[str] | None = None,
        masks: dict[str, np.ndarray] | None = None,
    ):
        self.params = params
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.names = list(names) if names is not None else params.names()
        self.masks = masks or {}
        self.t = 0
        self._m = {n: np.zeros_like(params[n].data) for n in self.names}
        self._v = {n: np.zeros_like(params[n].data) for n in self.names}

    def step(self) -> None:
        missing = [n for n in self.names if self.params[n].grad is None]
        if missing:
            raise StateError(f"no gradient for {missing[:3]}{'...' if len(missing) > 3 else ''}; run backward first")
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1**self.t
        c2 = 1.0 - b2**self.t
        for n in self.names:
            p = self.params[n]
            g = p.grad
            mask = self.masks.get(n)
            if mask is not None:
                g = g * mask
            m = self._m[n]
            v = self._v[n]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p.data -= (self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)).astype(p.dtype, copy=False)
            if mask is not None:
                p.data *= mask
            p.grad = None

    def zero_grad(self) -> None:
        for n in self.names:
            self.params[n].grad = None


def clip_grad_norm(params: ParamSet, max_norm: float, names: list[str] | None = None) -> float:
    names = names if names is not None else params.names()
    grads = [params[n].grad for n in names if params[n].grad is not None]
    total = float(np.sqrt(sum(float((g.astype(np.float64) ** 2).sum()) for g in grads)))
    if max_norm > 0 and total > max_norm:
        scale = max_norm / (total + 1e-12)
        for g in grads:
            g *= scale
    return total
