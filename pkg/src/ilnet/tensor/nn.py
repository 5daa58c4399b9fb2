"""Parameter containers and the small layer set the network is built from."""

from __future__ import annotations

import math
from typing import Dict, Iterator, Optional, Tuple

import numpy as np

from . import ops
from .core import Tensor, get_default_dtype


class Parameter(Tensor):
    __slots__ = ()

    def __init__(self, data):
        super().__init__(data, requires_grad=True)


class ParamStore(dict):
    """Name -> Tensor map iterated in sorted-name order."""

    def __init__(self, items=()):
        super().__init__(sorted(dict(items).items()))

    def count(self) -> int:
        return sum(t.size for t in self.values())


# set by ForwardMemo while a gradient check replays forwards
_call_hook = None


class Module:
    """Minimal module tree: attributes that are Parameters, Modules or registered buffers."""

    def __init__(self):
        object.__setattr__(self, "_params", {})
        object.__setattr__(self, "_modules", {})
        object.__setattr__(self, "_buffers", {})
        object.__setattr__(self, "training", True)

    def __setattr__(self, name, value):
        if isinstance(value, Parameter):
            self._params[name] = value
        elif isinstance(value, Module):
            self._modules[name] = value
        object.__setattr__(self, name, value)

    def register_buffer(self, name: str, value: np.ndarray) -> None:
        self._buffers[name] = value
        object.__setattr__(self, name, value)

    def add_module(self, name: str, module: "Module") -> None:
        setattr(self, name, module)

    def named_parameters(self, prefix: str = "") -> Iterator[Tuple[str, Parameter]]:
        for name, p in self._params.items():
            yield prefix + name, p
        for name, m in self._modules.items():
            yield from m.named_parameters(prefix + name + ".")

    def named_buffers(self, prefix: str = "") -> Iterator[Tuple[str, np.ndarray]]:
        for name in self._buffers:
            yield prefix + name, getattr(self, name)
        for name, m in self._modules.items():
            yield from m.named_buffers(prefix + name + ".")

    def named_modules(self, prefix: str = "") -> Iterator[Tuple[str, "Module"]]:
        yield prefix.rstrip("."), self
        for name, m in self._modules.items():
            yield from m.named_modules(prefix + name + ".")

    def parameters(self):
        return [p for _, p in self.named_parameters()]

    def param_store(self) -> ParamStore:
        return ParamStore(self.named_parameters())

    def state_dict(self) -> Dict[str, np.ndarray]:
        """Parameters and buffers by dotted name (the checkpoint payload)."""
        state = {name: p.data for name, p in self.named_parameters()}
        for name, buf in self.named_buffers():
            state[name] = buf
        return dict(sorted(state.items()))

    def load_state_dict(self, state: Dict[str, np.ndarray], strict: bool = True) -> None:
        params = dict(self.named_parameters())
        buffers = dict(self.named_buffers())
        missing = (set(params) | set(buffers)) - set(state)
        if strict and missing:
            raise KeyError(f"state is missing entries: {sorted(missing)[:5]}")
        for name, p in params.items():
            if name in state:
                if state[name].shape != p.shape:
                    raise ValueError(f"shape mismatch for {name}: {state[name].shape} vs {p.shape}")
                p.data = np.array(state[name], dtype=p.data.dtype)
        for name, buf in buffers.items():
            if name in state:
                buf[...] = state[name]

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def train(self, mode: bool = True) -> "Module":
        for _, m in self.named_modules():
            object.__setattr__(m, "training", mode)
        return self

    def eval(self) -> "Module":
        return self.train(False)

    def astype(self, dtype) -> "Module":
        """Cast parameters and buffers in place."""
        for p in self.parameters():
            p.data = p.data.astype(dtype)
            p.grad = None
        for _, m in self.named_modules():
            for name in m._buffers:
                arr = getattr(m, name).astype(dtype)
                m._buffers[name] = arr
                object.__setattr__(m, name, arr)
        return self

    def __call__(self, *args, **kwargs):
        if _call_hook is not None:
            return _call_hook(self, args, kwargs)
        return self.forward(*args, **kwargs)

    def forward(self, *args, **kwargs):
        raise NotImplementedError


class ModuleList(Module):
    def __init__(self, modules=()):
        super().__init__()
        self._items = []
        for m in modules:
            self.append(m)

    def append(self, module: Module) -> None:
        setattr(self, str(len(self._items)), module)
        self._items.append(module)

    def __iter__(self):
        return iter(self._items)

    def __len__(self):
        return len(self._items)

    def __getitem__(self, i):
        return self._items[i]


def kaiming_uniform(rng: np.random.Generator, shape, fan_in: int) -> np.ndarray:
    bound = math.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape).astype(get_default_dtype())


class Conv2d(Module):
    def __init__(self, cin, cout, k=1, padding=0, dilation=1, bias=True, rng: Optional[np.random.Generator] = None):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.cin, self.cout, self.k = cin, cout, k
        self.padding, self.dilation = padding, dilation
        self.weight = Parameter(kaiming_uniform(rng, (cout, cin, k, k), cin * k * k))
        self.bias = Parameter(np.zeros(cout)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        return ops.conv2d(x, self.weight, self.bias, padding=self.padding, dilation=self.dilation)


class Conv1d(Module):
    """Single-channel, bias-free, length-preserving 1-D convolution."""

    def __init__(self, k: int, rng: Optional[np.random.Generator] = None):
        super().__init__()
        if k % 2 == 0:
            raise ValueError(f"Conv1d kernel must be odd, got {k}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.k = k
        self.weight = Parameter(kaiming_uniform(rng, (1, 1, k), k))

    def forward(self, x: Tensor) -> Tensor:
        return ops.conv1d(x, self.weight)


class BatchNorm2d(Module):
    def __init__(self, c: int, momentum: float = 0.9, eps: float = 1e-5):
        super().__init__()
        self.momentum, self.eps = momentum, eps
        self.weight = Parameter(np.ones(c))
        self.bias = Parameter(np.zeros(c))
        self.register_buffer("running_mean", np.zeros(c, dtype=get_default_dtype()))
        self.register_buffer("running_var", np.ones(c, dtype=get_default_dtype()))

    def forward(self, x: Tensor) -> Tensor:
        return ops.batch_norm(
            x, self.weight, self.bias, self.running_mean, self.running_var,
            training=self.training, momentum=self.momentum, eps=self.eps,
        )


class LayerNorm2d(Module):
    """Layer norm over (C,H,W) of each sample with a per-channel affine."""

    def __init__(self, c: int, eps: float = 1e-5):
        super().__init__()
        self.eps = eps
        self.weight = Parameter(np.ones((c, 1, 1)))
        self.bias = Parameter(np.zeros((c, 1, 1)))

    def forward(self, x: Tensor) -> Tensor:
        return ops.layer_norm(x, 3, self.weight, self.bias, eps=self.eps)


class ConvBNReLU(Module):
    def __init__(self, cin, cout, k=3, dilation=1, rng=None):
        super().__init__()
        self.conv = Conv2d(cin, cout, k, padding=dilation * (k // 2), dilation=dilation, rng=rng)
        self.bn = BatchNorm2d(cout)

    def forward(self, x):
        return ops.relu(self.bn(self.conv(x)))


class ConvLNReLU(Module):
    def __init__(self, cin, cout, rng=None):
        super().__init__()
        self.conv = Conv2d(cin, cout, 1, rng=rng)
        self.ln = LayerNorm2d(cout)

    def forward(self, x):
        return ops.relu(self.ln(self.conv(x)))
