"""Dense float tensors with reverse-mode autodiff, sized for the ILNet op set."""

from . import ops
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .core import (
    GraphError,
    NonFiniteError,
    Tensor,
    backward,
    default_dtype,
    flop_counter,
    get_default_dtype,
    is_grad_enabled,
    no_grad,
)
from .gradcheck import ForwardMemo, GradcheckReport, check_module, check_op
from .nn import (
    BatchNorm2d,
    Conv1d,
    Conv2d,
    ConvBNReLU,
    ConvLNReLU,
    LayerNorm2d,
    Module,
    ModuleList,
    Parameter,
    ParamStore,
)
from .profile import count_flops, count_params

__all__ = [
    "ops", "Tensor", "backward", "no_grad", "default_dtype", "get_default_dtype", "is_grad_enabled",
    "flop_counter", "GraphError", "NonFiniteError", "save_checkpoint", "load_checkpoint",
    "CheckpointError", "check_op", "check_module", "ForwardMemo", "GradcheckReport", "Module", "ModuleList",
    "Parameter", "ParamStore", "Conv2d", "Conv1d", "BatchNorm2d", "LayerNorm2d", "ConvBNReLU",
    "ConvLNReLU", "count_params", "count_flops",
]
