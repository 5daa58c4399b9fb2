"""Deep-supervised binary cross-entropy."""

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from ..tensor import Tensor, ops


@dataclass
class LossBreakdown:
    components: List[Tensor]  # 6 side terms (deepest first) then the final output
    total: Tensor

    def values(self) -> List[float]:
        return [c.item() for c in self.components]


def _as_target(gt) -> Tensor:
    arr = gt.data if isinstance(gt, Tensor) else np.asarray(gt)
    if not np.isin(arr, (0, 1)).all():
        raise ValueError("ground truth must be binary (0/1)")
    return gt if isinstance(gt, Tensor) else Tensor(arr)


def bce_loss(logits: Tensor, gt) -> Tensor:
    """Mean of -[y log p + (1-y) log(1-p)] with p = sigmoid(logits)."""
    return ops.bce_with_logits(logits, _as_target(gt))


def total_loss(sides: Sequence[Tensor], final: Tensor, gt) -> LossBreakdown:
    target = _as_target(gt)
    maps = list(sides) + [final]
    for m in maps:
        if m.shape != target.shape:
            raise ValueError(f"loss map {m.shape} does not match ground truth {target.shape}")
    comps = [ops.bce_with_logits(m, target) for m in maps]
    total = comps[0]
    for c in comps[1:]:
        total = total + c
    return LossBreakdown(comps, total)
