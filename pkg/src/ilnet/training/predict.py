"""Batched inference to probability maps."""

from __future__ import annotations

from typing import List, Sequence

import numpy as np

from ..tensor import Tensor, no_grad, ops


def predict(model, images: Sequence[np.ndarray], batch_size: int = 8, with_sides: bool = False):
    """Sigmoid probabilities ``[H,W]`` per ``[3,H,W]`` image, in eval mode without a graph.

    With ``with_sides`` also returns the six side-output probability stacks ``[6,H,W]``.
    """
    was_training = model.training
    model.eval()
    probs: List[np.ndarray] = []
    sides: List[np.ndarray] = []
    try:
        with no_grad():
            for lo in range(0, len(images), batch_size):
                x = Tensor(np.stack(images[lo : lo + batch_size]).astype(np.float32))
                logits, side = model(x)
                probs.extend(ops.sigmoid(logits).data[:, 0])
                if with_sides:
                    stack = np.concatenate([ops.sigmoid(s).data for s in side.sup_maps], axis=1)
                    sides.extend(stack)
    finally:
        model.train(was_training)
    return (probs, sides) if with_sides else probs
