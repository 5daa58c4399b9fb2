"""ILNet assembly: RSU encoders/decoders, IPOF fusion, side heads and the representative block."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from ..tensor import Conv2d, Module, ModuleList, Tensor, ops
from .config import STAGE_NAMES, ModelConfig
from .ipof import IPOF
from .rb import RepresentativeBlock, rb_channels
from .rsu import RSU

# (depth, dilated) for encoder0..4 at scales 1..16; each decoder mirrors the encoder at its scale
ENCODER_BLOCKS = [(7, False), (6, False), (5, False), (4, False), (4, True)]
# decoder4 (1/32, below the last encoder), decoder3 .. decoder0, decoderO (full resolution)
DECODER_BLOCKS = [(4, True), (4, True), (4, False), (5, False), (6, False), (7, False)]
ENCODER_SCALES = (1, 2, 4, 8, 16)
DECODER_SCALES = (32, 16, 8, 4, 2, 1)


@dataclass
class StageFeatures:
    encoder_outs: List[Tensor]  # E0..E4
    decoder_outs: List[Tensor]  # D4, D3, D2, D1, D0, DO
    fused: List[Tensor]  # what reached the skip path at stages 4..0 (IPOF output or E_k)
    encoder_scales: Tuple[int, ...] = ENCODER_SCALES
    decoder_scales: Tuple[int, ...] = DECODER_SCALES


@dataclass
class SideOutputs:
    edge_maps: List[Tensor]  # deepest (decoder4) first, all at input resolution
    sup_maps: List[Tensor]  # one-channel logits, same order
    gamma: Optional[Tensor] = None
    features: Optional[StageFeatures] = field(default=None, repr=False)


class SideHead(Module):
    def __init__(self, cin: int, edge_channels: int, rng=None):
        super().__init__()
        self.edge = Conv2d(cin, edge_channels, 3, padding=1, rng=rng)
        self.sup = Conv2d(edge_channels, 1, 1, rng=rng)

    def forward(self, x, out_hw):
        edge = ops.upsample_bilinear(self.edge(x), *out_hw)
        return edge, self.sup(edge)


class ILNet(Module):
    def __init__(self, config: ModelConfig, seed: Optional[int] = None):
        super().__init__()
        self.config = config
        rng = np.random.default_rng(config.seed if seed is None else seed)
        ch = config.stage_channels
        self.encoders = ModuleList(
            RSU(depth, *ch[i], dilated=dil, rng=rng) for i, (depth, dil) in enumerate(ENCODER_BLOCKS)
        )
        self.decoders = ModuleList(
            RSU(depth, *ch[5 + j], dilated=dil, rng=rng) for j, (depth, dil) in enumerate(DECODER_BLOCKS)
        )
        # fusion at stage k pairs E_k with D_k up-sampled to E_k's scale; when fewer than
        # five are enabled the deepest stages keep theirs
        self.fused_stages = tuple(k for k in range(5) if k >= 5 - config.num_ipof_stages)
        self.ipof = ModuleList()
        self._ipof_index = {}
        for k in sorted(self.fused_stages, reverse=True):
            c = ch[k][2]
            self._ipof_index[k] = len(self.ipof)
            self.ipof.append(IPOF(c, c, config.n, config.b, rng=rng))
        self.edge_channels = [rb_channels(i, config.t) for i in range(6)]
        self.heads = ModuleList(
            SideHead(ch[5 + j][2], self.edge_channels[j], rng=rng) for j in range(6)
        )
        if config.use_rb:
            self.rb = RepresentativeBlock(self.edge_channels, rng=rng)
        else:
            self.plain_fuse = Conv2d(6, 1, 1, rng=rng)

    def fuse_stage(self, k: int, e: Tensor, d: Tensor) -> Tensor:
        """IPOF output for an enabled stage, otherwise the encoder map passes through."""
        if k in self._ipof_index:
            return self.ipof[self._ipof_index[k]](e, d)
        return e

    def forward(self, x: Tensor):
        """``x[N,3,H,W] -> (logits[N,1,H,W], SideOutputs)``."""
        if x.ndim != 4 or x.shape[1] != 3:
            raise ValueError(f"ILNet expects [N,3,H,W] input, got {x.shape}")
        h, w = x.shape[2:]
        if h % 16 or w % 16:
            raise ValueError(f"input size {h}x{w} is not divisible by 16")

        enc = []
        hx = x
        for k, block in enumerate(self.encoders):
            if k:
                hx = ops.maxpool2(hx)
            hx = block(hx)
            enc.append(hx)

        decs = [self.decoders[0](ops.maxpool2(enc[4]))]
        fused = []
        for k in range(4, -1, -1):
            up = ops.upsample_bilinear(decs[-1], *enc[k].shape[2:])
            skip = self.fuse_stage(k, enc[k], up)
            fused.append(skip)
            decs.append(self.decoders[5 - k](ops.concat([up, skip], axis=1)))

        edges, sups = [], []
        for head, d in zip(self.heads, decs):
            edge, sup = head(d, (h, w))
            edges.append(edge)
            sups.append(sup)

        gamma = None
        if self.config.use_rb:
            logits, gamma = self.rb(edges)
        else:
            logits = self.plain_fuse(ops.concat(sups, axis=1))
        side = SideOutputs(edges, sups, gamma, StageFeatures(enc, decs, fused))
        return logits, side


def build_model(config: ModelConfig, seed: Optional[int] = None) -> ILNet:
    """Construct ILNet with deterministic initialisation from ``seed`` (default ``config.seed``)."""
    return ILNet(config, seed)


def stage_blocks(model: ILNet):
    """(stage name, RSU block) pairs in table order."""
    blocks = list(model.encoders) + list(model.decoders)
    return list(zip(STAGE_NAMES, blocks))
