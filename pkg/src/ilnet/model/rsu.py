"""Residual U-blocks: each encoder/decoder stage is a small U-net with a residual skip."""

from __future__ import annotations

from ..tensor import ConvBNReLU, Module, ModuleList, ops


class RSU(Module):
    """Residual U-block of the given depth.

    The entry conv maps to ``cout``; ``depth - 1`` convs at ``cmid`` run with 2x
    max-pooling between them, a dilated conv sits at the bottom, and the up path
    mirrors the down path with concatenation skips.  The up-path result is added
    to the entry conv output.

    With ``dilated=True`` the block never pools; instead the down path uses
    dilations 1, 2, 4 and the bottom 8 (the "4F" flavour, depth fixed at 4).
    """

    def __init__(self, depth: int, cin: int, cmid: int, cout: int, dilated: bool = False, rng=None):
        super().__init__()
        if depth < 2:
            raise ValueError(f"RSU depth must be >= 2, got {depth}")
        self.depth, self.dilated = depth, dilated
        self.cin, self.cmid, self.cout = cin, cmid, cout
        self.entry = ConvBNReLU(cin, cout, rng=rng)
        down_dil = [2 ** i if dilated else 1 for i in range(depth - 1)]
        bottom_dil = 2 ** (depth - 1) if dilated else 2
        self.down = ModuleList(
            ConvBNReLU(cout if i == 0 else cmid, cmid, dilation=down_dil[i], rng=rng) for i in range(depth - 1)
        )
        self.bottom = ConvBNReLU(cmid, cmid, dilation=bottom_dil, rng=rng)
        # up[j] consumes the skip from down[depth-2-j]
        self.up = ModuleList(
            ConvBNReLU(2 * cmid, cout if j == depth - 2 else cmid, dilation=down_dil[depth - 2 - j], rng=rng)
            for j in range(depth - 1)
        )

    def min_size(self) -> int:
        return 1 if self.dilated else 2 ** (self.depth - 2)

    def forward(self, x):
        h, w = x.shape[2:]
        if min(h, w) < self.min_size():
            raise ValueError(f"RSU depth {self.depth} needs spatial size >= {self.min_size()}, got {h}x{w}")
        hin = self.entry(x)
        skips = []
        hx = hin
        for i, conv in enumerate(self.down):
            hx = conv(hx)
            skips.append(hx)
            if not self.dilated and i < len(self.down) - 1:
                hx = ops.maxpool2(hx)
        hx = self.bottom(hx)
        for j, conv in enumerate(self.up):
            skip = skips[len(skips) - 1 - j]
            if hx.shape[2:] != skip.shape[2:]:
                hx = ops.upsample_bilinear(hx, *skip.shape[2:])
            hx = conv(ops.concat([hx, skip], axis=1))
        return hx + hin
