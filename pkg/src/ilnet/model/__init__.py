"""The ILNet network and its building blocks."""

from .config import PRESETS, STAGE_NAMES, ConfigError, ModelConfig, parse_triples
from .doda import DODA, doda_kernel_size, doda_num_layers
from .ipof import IPOF, ChannelAttention, SpatialAttention, attention_pool, intermediate_channels
from .network import ILNet, SideOutputs, StageFeatures, build_model, stage_blocks
from .rb import RepresentativeBlock, rb_channels
from .rsu import RSU

__all__ = [
    "PRESETS", "STAGE_NAMES", "ConfigError", "ModelConfig", "parse_triples", "DODA", "doda_kernel_size",
    "doda_num_layers", "IPOF", "ChannelAttention", "SpatialAttention", "attention_pool",
    "intermediate_channels", "ILNet", "SideOutputs", "StageFeatures", "build_model", "stage_blocks",
    "RepresentativeBlock", "rb_channels", "RSU",
]
