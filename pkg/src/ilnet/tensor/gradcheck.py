"""Finite-difference checks of the autograd tape.

Checks run in float64 so that the central difference is limited by its
truncation error rather than by single-precision round-off.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from . import nn
from .core import Tensor, backward, default_dtype, no_grad


def rel_error(analytic: float, numeric: float, floor: float = 1e-6) -> float:
    return abs(analytic - numeric) / max(abs(analytic), abs(numeric), floor)


def check_op(
    fn: Callable[..., Tensor],
    inputs: Sequence[np.ndarray],
    eps: float = 1e-3,
    n_directions: int = 3,
    seed: int = 0,
) -> float:
    """Worst relative error between autograd and directional central differences.

    ``fn`` maps Tensors to a Tensor; it is reduced to a scalar through a fixed
    random projection so every output element contributes.
    """
    rng = np.random.default_rng(seed)
    with default_dtype(np.float64):
        base = [np.asarray(a, dtype=np.float64) for a in inputs]
        leaves = [Tensor(a, requires_grad=True) for a in base]
        out = fn(*leaves)
        proj = rng.standard_normal(out.shape)

        def scalar(arrays) -> float:
            with no_grad():
                y = fn(*[Tensor(a) for a in arrays])
            return float(np.sum(y.data * proj))

        loss = (out * Tensor(proj)).sum()
        backward(loss)
        grads = [t.grad if t.grad is not None else np.zeros_like(t.data) for t in leaves]
        worst = 0.0
        for _ in range(n_directions):
            dirs = [rng.standard_normal(a.shape) for a in base]
            plus = scalar([a + eps * d for a, d in zip(base, dirs)])
            minus = scalar([a - eps * d for a, d in zip(base, dirs)])
            numeric = (plus - minus) / (2 * eps)
            analytic = float(sum(np.sum(g * d) for g, d in zip(grads, dirs)))
            worst = max(worst, rel_error(analytic, numeric))
    return worst


@dataclass
class GroupResult:
    name: str
    max_error: float
    failures: List[tuple] = field(default_factory=list)  # (index, analytic, numeric, error)


@dataclass
class GradcheckReport:
    groups: List[GroupResult]
    rtol: float

    @property
    def passed(self) -> bool:
        return all(not g.failures for g in self.groups)

    @property
    def max_error(self) -> float:
        return max((g.max_error for g in self.groups), default=0.0)

    def to_dict(self) -> Dict:
        return {
            "passed": self.passed,
            "rtol": self.rtol,
            "max_error": round(self.max_error, 6),
            "groups": [
                {
                    "name": g.name,
                    "max_error": round(g.max_error, 6),
                    "failures": [
                        {"index": list(map(int, idx)), "analytic": a, "numeric": n, "error": e}
                        for idx, a, n, e in g.failures
                    ],
                }
                for g in self.groups
            ],
        }


def _same_arg(a, b) -> bool:
    if isinstance(a, Tensor) or isinstance(b, Tensor):
        return (
            isinstance(a, Tensor)
            and isinstance(b, Tensor)
            and a.shape == b.shape
            and np.array_equal(a.data, b.data)
        )
    if isinstance(a, (tuple, list)) and isinstance(b, (tuple, list)):
        return len(a) == len(b) and all(_same_arg(x, y) for x, y in zip(a, b))
    return type(a) is type(b) and a == b


class ForwardMemo:
    """Reuses submodule outputs across repeated no-grad forwards.

    ``record`` stores every module call of one reference forward.  During
    ``replay`` a call returns the stored output when the module holds none of
    the perturbed parameters and its arguments equal the recorded ones, which
    gives the same value a full forward would compute.
    """

    def __init__(self, model):
        self.owners: Dict[int, set] = {}
        self._index(model, [])
        self.calls: Dict[tuple, tuple] = {}
        self.dirty: set = set()
        self._recording = False
        self._seen: Dict[int, int] = {}

    def _index(self, module, chain):
        chain = chain + [id(module)]
        for p in module._params.values():
            self.owners.setdefault(id(p), set()).update(chain)
        for child in module._modules.values():
            self._index(child, chain)

    def _hook(self, module, args, kwargs):
        k = self._seen.get(id(module), 0)
        self._seen[id(module)] = k + 1
        key = (id(module), k)
        if not self._recording and id(module) not in self.dirty and key in self.calls:
            rec_args, rec_kwargs, out = self.calls[key]
            if _same_arg(list(args), list(rec_args)) and rec_kwargs.keys() == kwargs.keys() and all(
                _same_arg(kwargs[n], rec_kwargs[n]) for n in kwargs
            ):
                return out
        out = module.forward(*args, **kwargs)
        if self._recording:
            self.calls[key] = (args, dict(kwargs), out)
        return out

    def _run(self, fn):
        self._seen = {}
        prev = nn._call_hook
        nn._call_hook = self._hook
        try:
            with no_grad():
                return fn()
        finally:
            nn._call_hook = prev

    def record(self, fn):
        self._recording = True
        try:
            return self._run(fn)
        finally:
            self._recording = False

    def replay(self, fn, perturbed: Tensor):
        self.dirty = self.owners.get(id(perturbed), set())
        return self._run(fn)


def check_module(
    model,
    loss_fn: Callable[[object], Tensor],
    coords_per_group: int = 10,
    eps: float = 1e-4,
    rtol: float = 1e-2,
    floor: float = 1e-6,
    seed: int = 0,
    corrupt: Optional[Callable[[str, np.ndarray], np.ndarray]] = None,
    memo: bool = True,
) -> GradcheckReport:
    """Compare parameter gradients of ``loss_fn(model)`` with central differences.

    ``coords_per_group`` coordinates are sampled from every parameter tensor.
    The model is deep-copied and cast to float64; the original is untouched.
    ``corrupt`` lets tests inject a broken analytic gradient.  With ``memo``
    the perturbed forwards reuse submodule outputs that the perturbation
    cannot reach (see ForwardMemo).
    """
    rng = np.random.default_rng(seed)
    work = copy.deepcopy(model).astype(np.float64)
    with default_dtype(np.float64):
        work.zero_grad()
        loss = loss_fn(work)
        backward(loss)
        cache = None
        if memo:
            cache = ForwardMemo(work)
            cache.record(lambda: loss_fn(work))

        def evaluate(p) -> float:
            if cache is not None:
                return float(cache.replay(lambda: loss_fn(work), p).data)
            with no_grad():
                return float(loss_fn(work).data)

        groups = []
        for name, p in work.named_parameters():
            grad = p.grad if p.grad is not None else np.zeros_like(p.data)
            if corrupt is not None:
                grad = corrupt(name, grad)
            n = min(coords_per_group, p.size)
            flat = rng.choice(p.size, size=n, replace=False)
            result = GroupResult(name, 0.0)
            for f in flat:
                idx = np.unravel_index(f, p.shape)
                orig = p.data[idx]
                p.data[idx] = orig + eps
                plus = evaluate(p)
                p.data[idx] = orig - eps
                minus = evaluate(p)
                p.data[idx] = orig
                numeric = (plus - minus) / (2 * eps)
                analytic = float(grad[idx])
                err = rel_error(analytic, numeric, floor)
                result.max_error = max(result.max_error, err)
                if err >= rtol:
                    result.failures.append((idx, analytic, numeric, err))
            groups.append(result)
    return GradcheckReport(groups, rtol)
