"""SGD with momentum and Adam, both with decoupled weight decay, plus step learning-rate decay."""

from __future__ import annotations

from typing import Dict, Iterable, List, Tuple

import numpy as np

from ..tensor import Parameter


class Optimizer:
    kind = "base"

    def __init__(self, named_params: Iterable[Tuple[str, Parameter]], lr: float, weight_decay: float = 0.0):
        self.params: List[Tuple[str, Parameter]] = list(named_params)
        self.lr = lr
        self.weight_decay = weight_decay
        self.steps = 0

    def zero_grad(self) -> None:
        for _, p in self.params:
            p.grad = None

    def step(self) -> None:
        missing = [name for name, p in self.params if p.grad is None]
        if missing:
            raise RuntimeError(f"optimizer step with missing gradients: {missing[:3]}")
        self.steps += 1
        for name, p in self.params:
            if self.weight_decay:
                p.data -= (self.lr * self.weight_decay) * p.data
            self._update(name, p)

    def _update(self, name: str, p: Parameter) -> None:
        raise NotImplementedError

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {"optim.steps": np.array([self.steps], dtype=np.float32)}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        self.steps = int(state["optim.steps"][0])


class SGD(Optimizer):
    kind = "sgd"

    def __init__(self, named_params, lr, momentum: float = 0.9, weight_decay: float = 0.0):
        super().__init__(named_params, lr, weight_decay)
        self.momentum = momentum
        self.velocity = {name: np.zeros_like(p.data) for name, p in self.params}

    def _update(self, name, p):
        v = self.velocity[name]
        v *= self.momentum
        v += p.grad
        p.data -= self.lr * v

    def state_dict(self):
        state = super().state_dict()
        state.update({f"optim.velocity.{n}": v for n, v in self.velocity.items()})
        return state

    def load_state_dict(self, state):
        super().load_state_dict(state)
        for n in self.velocity:
            self.velocity[n][...] = state[f"optim.velocity.{n}"]


class Adam(Optimizer):
    kind = "adam"

    def __init__(self, named_params, lr, betas=(0.9, 0.999), eps: float = 1e-8, weight_decay: float = 0.0):
        super().__init__(named_params, lr, weight_decay)
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.m = {name: np.zeros_like(p.data) for name, p in self.params}
        self.v = {name: np.zeros_like(p.data) for name, p in self.params}

    def _update(self, name, p):
        g = p.grad
        m, v = self.m[name], self.v[name]
        m *= self.beta1
        m += (1 - self.beta1) * g
        v *= self.beta2
        v += (1 - self.beta2) * (g * g)
        mhat = m / (1 - self.beta1 ** self.steps)
        vhat = v / (1 - self.beta2 ** self.steps)
        p.data -= (self.lr * mhat / (np.sqrt(vhat) + self.eps)).astype(p.data.dtype)

    def state_dict(self):
        state = super().state_dict()
        state.update({f"optim.m.{n}": a for n, a in self.m.items()})
        state.update({f"optim.v.{n}": a for n, a in self.v.items()})
        return state

    def load_state_dict(self, state):
        super().load_state_dict(state)
        for n in self.m:
            self.m[n][...] = state[f"optim.m.{n}"]
            self.v[n][...] = state[f"optim.v.{n}"]


OPTIMIZERS = {"sgd": SGD, "adam": Adam}


def make_optimizer(kind: str, named_params, lr: float, weight_decay: float) -> Optimizer:
    try:
        cls = OPTIMIZERS[kind]
    except KeyError:
        raise ValueError(f"unknown optimizer {kind!r}; choose from {sorted(OPTIMIZERS)}") from None
    return cls(named_params, lr, weight_decay=weight_decay)


def lr_schedule(epoch: int, lr: float, factor: float = 0.5, interval: int = 100) -> float:
    """Step decay: ``lr * factor ** (epoch // interval)``."""
    if epoch < 0:
        raise ValueError("epoch must be >= 0")
    return lr * factor ** (epoch // interval)
