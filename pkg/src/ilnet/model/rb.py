"""Representative block: shallow side outputs gate the up-sampled deep ones, then all are fused."""

from __future__ import annotations

import math
from typing import List, Sequence

from ..tensor import Conv2d, Module, Tensor, ops


def rb_channels(i: int, t: float) -> int:
    """Edge channels of side output ``i`` (0 = deepest): ceil(t * 2**(i-1))."""
    if i < 0 or not t > 0:
        raise ValueError("rb_channels needs i >= 0 and t > 0")
    return math.ceil(t * 2.0 ** (i - 1))


def split_index(num_stages: int) -> int:
    """First shallow index; stages below it are the deep half that gets gated."""
    return num_stages // 2


def _check_resolution(maps: Sequence[Tensor], what: str) -> None:
    hw = {m.shape[2:] for m in maps}
    if len(hw) != 1:
        raise ValueError(f"{what}: maps have mismatched resolutions {sorted(hw)}")


class RepresentativeBlock(Module):
    def __init__(self, edge_channels: Sequence[int], rng=None):
        super().__init__()
        self.edge_channels = list(edge_channels)
        self.split = split_index(len(edge_channels))
        self.gate_conv = Conv2d(sum(self.edge_channels[self.split :]), 1, 1, rng=rng)
        self.fuse_conv = Conv2d(sum(self.edge_channels), 1, 1, rng=rng)

    def gate(self, shallow: Sequence[Tensor]) -> Tensor:
        _check_resolution(shallow, "rb gate")
        return ops.sigmoid(self.gate_conv(ops.concat(list(shallow), axis=1)))

    def enhance(self, edges: Sequence[Tensor], gamma: Tensor) -> List[Tensor]:
        return [ops.spatial_scale(e, gamma) if i < self.split else e for i, e in enumerate(edges)]

    def fuse(self, feats: Sequence[Tensor]) -> Tensor:
        _check_resolution(feats, "rb fuse")
        return self.fuse_conv(ops.concat(list(feats), axis=1))

    def forward(self, edges: Sequence[Tensor]):
        gamma = self.gate(edges[self.split :])
        return self.fuse(self.enhance(edges, gamma)), gamma
