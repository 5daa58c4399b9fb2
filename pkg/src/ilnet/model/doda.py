"""Dynamic one-dimensional aggregation: a stack of 1-D convs sized by the channel width."""

from __future__ import annotations

import math

from ..tensor import Conv1d, Module, ModuleList, ops


def _exact_log2(c: int):
    """log2(c) as an int when c is a power of two, else a float."""
    return c.bit_length() - 1 if c & (c - 1) == 0 else math.log2(c)


def doda_num_layers(c_prime: int, n: int = 2, b: int = 2) -> int:
    """Number of 1-D conv layers: ceil(1 - b/(2n) + log2(sqrt(C'))/n), at least 1."""
    if c_prime < 1:
        raise ValueError(f"C' must be >= 1, got {c_prime}")
    lg = _exact_log2(c_prime)
    # (2n - b + log2 C') / (2n), exact when log2 C' is an integer
    if isinstance(lg, int):
        num = 2 * n - b + lg
        layers = -(-num // (2 * n))
    else:
        layers = math.ceil((2 * n - b + lg) / (2 * n))
    return max(1, layers)


def doda_kernel_size(c_prime: int) -> int:
    """Odd kernel nearest to (1 + log2 C')/2; exact ties round up to the larger odd."""
    if c_prime < 1:
        raise ValueError(f"C' must be >= 1, got {c_prime}")
    lg = _exact_log2(c_prime)
    # nearest odd 2m+1 to x=(1+lg)/2  <=>  m = floor((lg + 1)/4)
    m = (lg + 1) // 4 if isinstance(lg, int) else math.floor((lg + 1) / 4)
    return max(1, 2 * int(m) + 1)


class DODA(Module):
    def __init__(self, c_prime: int, n: int = 2, b: int = 2, rng=None):
        super().__init__()
        self.c_prime = c_prime
        self.kernel_size = doda_kernel_size(c_prime)
        self.layers = ModuleList(Conv1d(self.kernel_size, rng=rng) for _ in range(doda_num_layers(c_prime, n, b)))

    def forward(self, seq):
        """``seq[N,1,L] -> [N,1,L]``; ReLU between layers, none after the last."""
        for i, conv in enumerate(self.layers):
            if conv.k != self.kernel_size:
                raise ValueError("DODA layer kernel does not match its channel width")
            seq = conv(seq)
            if i < len(self.layers) - 1:
                seq = ops.relu(seq)
        return seq
