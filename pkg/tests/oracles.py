"""Independent reference implementations the library is checked against.

Everything here is written the slow, obvious way: explicit loops, exact
arithmetic where it matters, no shared code with the package.
"""

from __future__ import annotations

import itertools
import math
from collections import deque
from fractions import Fraction

import mpmath
import numpy as np

mpmath.mp.dps = 50


# ------------------------------------------------------------ formulas


def _half_log2(c: int):
    """log2(sqrt(c)): an exact Fraction for powers of two (the only values where
    ceilings and roundings can tie), a 50-digit mpf otherwise."""
    e = c.bit_length() - 1
    if c == 1 << e:
        return Fraction(e, 2)
    return mpmath.log(mpmath.sqrt(c), 2)


def layers_by_formula(c_prime: int, n: int = 2, b: int = 2) -> int:
    """ceil(1 - b/(2n) + log2(sqrt(C'))/n)."""
    h = _half_log2(c_prime)
    if isinstance(h, Fraction):
        return max(1, math.ceil(1 - Fraction(b, 2 * n) + h / n))
    return max(1, int(mpmath.ceil(1 - mpmath.mpf(b) / (2 * n) + h / n)))


def layers_by_inverse(c_prime: int, n: int = 2, b: int = 2) -> int:
    """Smallest L >= 1 whose capacity 2**(2n(L-1)+b) covers C'."""
    L = 1
    while 2 ** (2 * n * (L - 1) + b) < c_prime:
        L += 1
    return L


def kernel_by_inverse(c_prime: int) -> int:
    """Invert C' = 2**(2k-1) for k, then take the nearest odd integer >= 1 (ties go up)."""
    h = _half_log2(c_prime)
    x = (1 + 2 * h) / 2
    best = None
    for k in range(1, 64, 2):
        d = abs(k - x)
        if best is None or d < best[0] or (d == best[0] and k > best[1]):
            best = (d, k)
    return best[1]


def edge_channels(i: int, t) -> int:
    return math.ceil(Fraction(str(t)) * Fraction(2) ** (i - 1))


# ------------------------------------------------------------ tensor ops


def conv2d_loops(x, w, b=None, stride=1, padding=0, dilation=1):
    n, cin, h, wd = x.shape
    cout, _, k, _ = w.shape
    ho = (h + 2 * padding - dilation * (k - 1) - 1) // stride + 1
    wo = (wd + 2 * padding - dilation * (k - 1) - 1) // stride + 1
    out = np.zeros((n, cout, ho, wo))
    for ni, co, i, j in itertools.product(range(n), range(cout), range(ho), range(wo)):
        s = 0.0 if b is None else float(b[co])
        for ci, di, dj in itertools.product(range(cin), range(k), range(k)):
            r = i * stride - padding + di * dilation
            c = j * stride - padding + dj * dilation
            if 0 <= r < h and 0 <= c < wd:
                s += x[ni, ci, r, c] * w[co, ci, di, dj]
        out[ni, co, i, j] = s
    return out


def bce_pixels(logits, gt) -> float:
    total = 0.0
    flat_l, flat_g = np.ravel(logits), np.ravel(gt)
    for z, y in zip(flat_l, flat_g):
        p = 1.0 / (1.0 + math.exp(-float(z)))
        total += -(y * math.log(p) + (1 - y) * math.log(1 - p))
    return total / flat_l.size


# ------------------------------------------------------------ metrics


def flood_fill(mask) -> list:
    """Components as sorted lists of (row, col), discovered in row-major order."""
    h, w = mask.shape
    seen = [[False] * w for _ in range(h)]
    comps = []
    for r in range(h):
        for c in range(w):
            if not mask[r][c] or seen[r][c]:
                continue
            seen[r][c] = True
            queue, pixels = deque([(r, c)]), []
            while queue:
                y, x = queue.popleft()
                pixels.append((y, x))
                for dy in (-1, 0, 1):
                    for dx in (-1, 0, 1):
                        yy, xx = y + dy, x + dx
                        if 0 <= yy < h and 0 <= xx < w and mask[yy][xx] and not seen[yy][xx]:
                            seen[yy][xx] = True
                            queue.append((yy, xx))
            comps.append(sorted(pixels))
    return comps


def pixel_counts(pred, gt):
    tp = fp = npred = ngt = total = 0
    for p, g in zip(np.ravel(pred), np.ravel(gt)):
        total += 1
        npred += bool(p)
        ngt += bool(g)
        tp += bool(p) and bool(g)
        fp += bool(p) and not bool(g)
    return tp, npred, ngt, fp, total


def iou_loops(preds, gts) -> float:
    inter = union = 0
    for p, g in zip(preds, gts):
        tp, npred, ngt, _, _ = pixel_counts(p, g)
        inter += tp
        union += npred + ngt - tp
    return 1.0 if union == 0 else inter / union


def fa_loops(preds, gts) -> float:
    fp = total = 0
    for p, g in zip(preds, gts):
        _, _, _, f, t = pixel_counts(p, g)
        fp += f
        total += t
    return fp / total


def centroids(mask):
    return [(np.mean([c for _, c in comp]), np.mean([r for r, _ in comp])) for comp in flood_fill(mask)]


def best_matching(pred_c, gt_c, max_dist=3.0) -> int:
    """Maximum number of one-to-one pairs closer than ``max_dist`` by exhaustive search."""
    best = 0
    k = min(len(pred_c), len(gt_c))
    for perm in itertools.permutations(range(len(pred_c)), k):
        for gts in itertools.combinations(range(len(gt_c)), k):
            hits = sum(math.dist(pred_c[p], gt_c[g]) < max_dist for p, g in zip(perm, gts))
            best = max(best, hits)
    return best
