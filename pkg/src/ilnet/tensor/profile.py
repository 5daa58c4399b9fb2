"""Parameter and FLOP counting."""

from __future__ import annotations

import numpy as np

from .core import Tensor, flop_counter, no_grad
from .nn import Module, ParamStore


def count_params(store) -> int:
    if isinstance(store, Module):
        store = store.param_store()
    if not isinstance(store, ParamStore):
        store = ParamStore(store)
    return store.count()


def count_flops(model: Module, input_shape, forward=None) -> int:
    """FLOPs of one inference forward pass at ``input_shape`` (eval mode, no graph)."""
    was_training = model.training
    model.eval()
    x = Tensor(np.zeros(input_shape))
    try:
        with no_grad(), flop_counter() as counter:
            (forward or model)(x)
    finally:
        model.train(was_training)
    return counter[0]
