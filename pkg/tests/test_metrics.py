import json
import math

import numpy as np
import pytest

from ilnet.metrics import (
    component_centroids,
    evaluate,
    evaluate_masks,
    fa,
    iou_dataset,
    label_components,
    match_targets,
    niou_dataset,
    pd,
    roc_csv,
    roc_sweep,
    roc_thresholds,
)
from oracles import best_matching, centroids, flood_fill

rng = np.random.default_rng(21)


def blank(h=20, w=20):
    return np.zeros((h, w), dtype=bool)


def square(mask, r, c, s=3):
    mask[r : r + s, c : c + s] = True
    return mask


class TestComponents:
    def test_empty(self):
        assert label_components(blank()) == []
        assert component_centroids(blank()).shape == (0, 2)

    def test_diagonal_touch_is_one_component(self):
        m = blank(3, 3)
        m[0, 0] = m[1, 1] = True
        comps = label_components(m)
        assert len(comps) == 1 and comps[0].area == 2
        assert comps[0].centroid == (0.5, 0.5)

    def test_order_by_first_pixel(self):
        m = blank(6, 6)
        m[4, 0] = True
        m[0, 5] = True
        m[2, 2] = m[3, 3] = True
        firsts = [tuple(c.pixels[0]) for c in label_components(m)]
        assert firsts == [(0, 5), (2, 2), (4, 0)]

    def test_matches_flood_fill(self):
        for density in (0.2, 0.45, 0.6):
            m = rng.random((32, 32)) < density
            got = [sorted(map(tuple, c.pixels.tolist())) for c in label_components(m)]
            assert got == flood_fill(m)
            np.testing.assert_allclose(component_centroids(m), centroids(m))

    def test_invariants(self):
        m = rng.random((16, 16)) < 0.4
        comps = label_components(m)
        assert sum(c.area for c in comps) == m.sum()
        for c in comps:
            assert c.area == len(c.pixels) >= 1
            assert c.centroid == pytest.approx((c.pixels[:, 1].mean(), c.pixels[:, 0].mean()))


class TestPixelMetrics:
    def test_perfect_and_disjoint(self):
        g = square(blank(), 5, 5)
        assert iou_dataset([g], [g]) == 1.0
        assert iou_dataset([square(blank(), 12, 12)], [g]) == 0.0

    def test_dataset_sums(self):
        # (TP, T, P) = (2, 3, 3) and (0, 1, 1)
        p1, g1 = blank(4, 4), blank(4, 4)
        p1[0, :3] = True
        g1[0, 1:4] = True
        p2, g2 = blank(4, 4), blank(4, 4)
        p2[3, 3] = True
        g2[2, 0] = True
        assert iou_dataset([p1, p2], [g1, g2]) == pytest.approx(2 / 6)

    def test_niou_mean(self):
        g = blank(4, 4)
        g[0, :2] = True
        half = blank(4, 4)
        half[0, 0] = True
        assert niou_dataset([g, half], [g, g]) == pytest.approx(0.75)

    def test_single_image_niou_equals_iou(self):
        p, g = rng.random((8, 8)) < 0.3, rng.random((8, 8)) < 0.3
        assert niou_dataset([p], [g]) == pytest.approx(iou_dataset([p], [g]))

    def test_iou_and_niou_differ_when_one_image_dominates(self):
        big_g = square(blank(30, 30), 0, 0, 20)
        big_p = square(blank(30, 30), 0, 0, 19)
        small_g = square(blank(30, 30), 5, 5, 2)
        small_p = blank(30, 30)
        small_p[5, 5] = True
        iou = iou_dataset([big_p, small_p], [big_g, small_g])
        niou = niou_dataset([big_p, small_p], [big_g, small_g])
        assert iou == pytest.approx((361 + 1) / (400 + 4))
        assert niou == pytest.approx((361 / 400 + 1 / 4) / 2)
        assert iou != pytest.approx(niou)

    def test_empty_vs_empty(self):
        assert iou_dataset([blank()], [blank()]) == 1.0
        assert niou_dataset([blank(), square(blank(), 1, 1)], [blank(), square(blank(), 1, 1)]) == 1.0

    def test_symmetry(self):
        p, g = rng.random((10, 10)) < 0.3, rng.random((10, 10)) < 0.3
        assert iou_dataset([p], [g]) == iou_dataset([g], [p])

    def test_fa_counts(self):
        g = blank(100, 100)
        p = blank(100, 100)
        p[0, :5] = True
        assert fa([p], [g]) == pytest.approx(5e-4)
        assert fa([blank(100, 100)], [square(blank(100, 100), 3, 3)]) == 0
        assert fa([g], [g]) == 0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            iou_dataset([blank(4, 4)], [blank(4, 5)])
        with pytest.raises(ValueError):
            fa([blank()], [])


class TestPd:
    def _pair(self, dy, dx):
        g = square(blank(30, 30), 10, 10)
        p = square(blank(30, 30), 10 + dy, 10 + dx)
        return p, g

    def test_offset_root8_detected(self):
        assert pd(*map(lambda m: [m], self._pair(2, 2))) == 1.0

    def test_offset_3_missed(self):
        assert pd(*map(lambda m: [m], self._pair(0, 3))) == 0.0

    def test_half_detected(self):
        g = square(square(blank(30, 30), 2, 2), 20, 20)
        p = square(blank(30, 30), 2, 2)
        assert pd([p], [g]) == 0.5

    def test_no_targets_is_nan_with_warning(self):
        with pytest.warns(RuntimeWarning):
            assert math.isnan(pd([blank()], [blank()]))

    def test_no_double_counting(self):
        # one prediction sits between two targets: only one can claim it
        g = blank(30, 30)
        g[10, 10] = g[10, 13] = True
        p = blank(30, 30)
        p[10, 11] = p[10, 12] = True
        assert pd([p], [g]) == 0.5
        assert match_targets(np.array([[11.5, 10.0]]), np.array([[10.0, 10.0], [13.0, 10.0]])) == 1

    def test_greedy_equals_exhaustive_on_separated_targets(self):
        for _ in range(40):
            g, p = blank(48, 48), blank(48, 48)
            k = rng.integers(1, 6)
            spots = rng.permutation(25)[:k]
            for s in spots:
                r, c = 2 + 9 * (s // 5), 2 + 9 * (s % 5)
                square(g, r, c, 2)
                if rng.random() < 0.8:
                    dr, dc = rng.integers(-2, 3, size=2)
                    square(p, r + dr, c + dc, 2)
            gc, pc = centroids(g), centroids(p)
            expected = best_matching(pc, gc) / len(gc)
            assert pd([p], [g]) == pytest.approx(expected)


class TestRoc:
    def test_extremes(self):
        g = square(blank(), 4, 4)
        prob = rng.random((20, 20)) * 0.99
        hi, lo = roc_sweep([prob], [g], [1.5, 0.0])
        assert (hi.pd, hi.fa) == (0.0, 0.0)
        assert lo.fa == pytest.approx(1 - g.mean())

    def test_all_foreground_detects_centred_target(self):
        # a single all-covering component has its centroid at the image centre
        g = blank(21, 21)
        g[9:12, 9:12] = True
        (pt,) = roc_sweep([np.full((21, 21), 0.2)], [g], [0.0])
        assert pt.pd == 1.0

    def test_fa_monotone_on_random_maps(self):
        probs = [rng.random((24, 24)) for _ in range(3)]
        gts = [rng.random((24, 24)) < 0.05 for _ in range(3)]
        pts = roc_sweep(probs, gts, list(np.linspace(1, 0, 21)))
        fas = [p.fa for p in pts]
        assert all(b >= a for a, b in zip(fas, fas[1:]))

    def test_half_threshold_matches_binary_metrics(self):
        probs = [rng.random((24, 24)) for _ in range(3)]
        gts = [rng.random((24, 24)) < 0.1 for _ in range(3)]
        (pt,) = roc_sweep(probs, gts, [0.5])
        preds = [p >= 0.5 for p in probs]
        assert pt.pd == pytest.approx(pd(preds, gts))
        assert pt.fa == pytest.approx(fa(preds, gts))

    def test_bad_thresholds(self):
        with pytest.raises(ValueError):
            roc_sweep([blank()], [blank()], [])
        with pytest.raises(ValueError):
            roc_sweep([blank()], [blank()], [0.2, 0.5])

    def test_threshold_list(self):
        ts = roc_thresholds(3)
        assert len(ts) == 3 and ts[0] > 1.0 and ts[1:] == [0.5, 0.0]


class TestReport:
    def test_gt_as_prediction(self):
        gts = [square(blank(), 3, 3), square(square(blank(), 1, 1), 12, 12)]
        rep = evaluate_masks(gts, gts)
        d = rep.to_dict()
        assert d["IoU"] == 100.0 and d["nIoU"] == 100.0 and d["Pd"] == 100.0 and d["Fa"] == 0.0
        assert d["TP_sum"] == d["T_sum"] == 3 and d["FP_pixels"] == 0 and d["ALL_pixels"] == 800

    def test_units_and_ranges(self):
        probs = [rng.random((16, 16)) for _ in range(2)]
        gts = [square(blank(16, 16), 2, 2), square(blank(16, 16), 8, 8)]
        rep = evaluate(probs, gts, roc_thresholds_list=roc_thresholds(5))
        d = json.loads(rep.to_json())
        for key in ("IoU", "nIoU", "Pd"):
            assert 0 <= d[key] <= 100
            assert d[key] == pytest.approx(100 * d["raw"][key], abs=1e-4)
        assert d["Fa"] == pytest.approx(1e6 * d["raw"]["Fa"], rel=1e-6)
        assert len(d["roc"]) == 5 and len(d["per_image_IoU"]) == 2

    def test_roc_csv_format(self):
        text = roc_csv(roc_sweep([np.full((4, 4), 0.3)], [blank(4, 4)], [0.5, 0.25]))
        assert text == "threshold,Pd,Fa\n0.500000,nan,0.000000\n0.250000,nan,1.000000\n"
