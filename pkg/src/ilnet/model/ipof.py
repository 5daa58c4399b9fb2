"""Interactive polarized orthogonal fusion of an encoder map E and decoder map D.

Both branches collapse one dimension: the spatial branch squeezes channels to
a single map (gating E), the channel branch squeezes space to a channel vector
(gating D).  Their gated outputs are summed and projected by conv-BN-ReLU.
"""

from __future__ import annotations

from ..tensor import Conv2d, ConvBNReLU, ConvLNReLU, LayerNorm2d, Module, ops
from .doda import DODA


def intermediate_channels(c: int) -> int:
    return max(c // 2, 1)


def attention_pool(weights, values):
    """Channel-weighted sum ``sum_c weights[:,c] * values[:,c]`` -> ``[N,1,H,W]``."""
    return ops.sum(ops.channel_scale(values, weights), axis=1, keepdims=True)


class SpatialAttention(Module):
    def __init__(self, c: int, n: int = 2, b: int = 2, rng=None):
        super().__init__()
        cp = intermediate_channels(c)
        self.query = ConvBNReLU(c, cp, k=1, rng=rng)
        self.value = ConvBNReLU(c, cp, k=1, rng=rng)
        self.doda = DODA(cp, n, b, rng=rng)
        self.out = ConvLNReLU(1, 1, rng=rng)

    def spatial_map(self, e, d):
        q = ops.softmax(ops.global_avg_pool(self.query(e)), axis=1)
        raw = attention_pool(q, self.value(d))
        n, _, h, w = raw.shape
        seq = self.doda(raw.reshape(n, 1, h * w)).reshape(n, 1, h, w)
        return ops.sigmoid(self.out(seq))

    def forward(self, e, d):
        if e.shape != d.shape:
            raise ValueError(f"spatial attention: E {e.shape} and D {d.shape} differ")
        return ops.spatial_scale(e, self.spatial_map(e, d))


class ChannelAttention(Module):
    def __init__(self, c: int, n: int = 2, b: int = 2, rng=None):
        super().__init__()
        cp = intermediate_channels(c)
        self.key = ConvBNReLU(c, cp, k=1, rng=rng)
        self.value = ConvBNReLU(c, cp, k=1, rng=rng)
        self.doda = DODA(cp, n, b, rng=rng)
        self.restore = Conv2d(cp, c, 1, rng=rng)
        self.norm = LayerNorm2d(c)

    def channel_weights(self, e):
        g = ops.global_avg_pool(self.key(e))
        n, cp = g.shape[:2]
        seq = self.doda(g.reshape(n, 1, cp)).reshape(n, cp, 1, 1)
        return ops.softmax(seq, axis=1)

    def gate(self, e, d):
        scaled = ops.channel_scale(self.value(d), self.channel_weights(e))
        return ops.sigmoid(self.norm(self.restore(scaled)))

    def forward(self, e, d):
        if e.shape != d.shape:
            raise ValueError(f"channel attention: E {e.shape} and D {d.shape} differ")
        return self.gate(e, d) * d


class IPOF(Module):
    def __init__(self, c: int, cout: int, n: int = 2, b: int = 2, rng=None):
        super().__init__()
        self.spatial = SpatialAttention(c, n, b, rng=rng)
        self.channel = ChannelAttention(c, n, b, rng=rng)
        self.fuse = ConvBNReLU(c, cout, k=1, rng=rng)

    def forward(self, e, d):
        if e.shape != d.shape:
            raise ValueError(f"IPOF: E {e.shape} and D {d.shape} differ")
        return self.fuse(self.channel(e, d) + self.spatial(e, d))
