"""Similarity metrics against a from-scratch windowed reference."""
import math

import numpy as np
import pytest

from freqshield.metrics import (SimilarityReport, accuracy, l1, ms_ssim, mse,
                                psnr, similarity_suite, ssim)


def loop_gaussian(size, sigma=1.5):
    w = np.zeros((size, size))
    half = (size - 1) / 2.0
    for i in range(size):
        for j in range(size):
            w[i, j] = math.exp(-((i - half) ** 2 + (j - half) ** 2) / (2 * sigma ** 2))
    return w / w.sum()


def loop_ssim_terms(x, y, size):
    """Windowed similarity terms via explicit per-position loops."""
    c1 = (0.01 * 255.0) ** 2
    c2 = (0.03 * 255.0) ** 2
    win = loop_gaussian(size)
    h, w = x.shape
    lums, css = [], []
    for i in range(h - size + 1):
        for j in range(w - size + 1):
            px = x[i:i + size, j:j + size]
            py = y[i:i + size, j:j + size]
            mx = float((px * win).sum())
            my = float((py * win).sum())
            vx = float((px * px * win).sum()) - mx * mx
            vy = float((py * py * win).sum()) - my * my
            cov = float((px * py * win).sum()) - mx * my
            lums.append((2 * mx * my + c1) / (mx * mx + my * my + c1))
            css.append((2 * cov + c2) / (vx + vy + c2))
    lums = np.array(lums)
    css = np.array(css)
    return float((lums * css).mean()), float(css.mean())


def loop_ssim(a, b):
    size = min(11, min(a.shape))
    if size % 2 == 0:
        size -= 1
    return loop_ssim_terms(a * 255.0, b * 255.0, size)[0]


def loop_ms_ssim(a, b):
    """Reference multi-scale score following the documented contract."""
    weights = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333]
    short = min(a.shape)
    n = min(5, int(math.floor(math.log2(short / 8))) + 1)
    w = np.array(weights[:n])
    w = w / w.sum()
    x, y = a * 255.0, b * 255.0
    score = 1.0
    for level in range(n):
        size = min(11, min(x.shape))
        if size % 2 == 0:
            size -= 1
        lum_cs, cs = loop_ssim_terms(x, y, size)
        term = lum_cs if level == n - 1 else cs
        score *= max(term, 0.0) ** w[level]
        if level < n - 1:
            hh, ww = x.shape[0] // 2, x.shape[1] // 2
            x = x[:2 * hh, :2 * ww].reshape(hh, 2, ww, 2).mean(axis=(1, 3))
            y = y[:2 * hh, :2 * ww].reshape(hh, 2, ww, 2).mean(axis=(1, 3))
    return score


@pytest.fixture
def pair(rng):
    a = rng.uniform(size=(32, 32))
    b = np.clip(a + rng.normal(0, 0.1, size=(32, 32)), 0, 1)
    return a, b


class TestPointwise:
    def test_known_constant_offset(self):
        a = np.zeros((1, 8, 8))
        b = np.full((1, 8, 8), 0.1)
        assert np.isclose(mse(a, b), 650.25)  # (0.1 * 255)^2
        assert np.isclose(l1(a, b), 25.5)
        assert np.isclose(psnr(a, b), 20.0, atol=1e-9)  # 10*log10(255^2/650.25)

    def test_identical_images(self, rng):
        a = rng.uniform(size=(3, 16, 16))
        assert mse(a, a) == 0.0
        assert l1(a, a) == 0.0
        assert psnr(a, a) == math.inf

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            mse(np.zeros((8, 8)), np.zeros((8, 9)))

    def test_accepts_2d_and_3d(self, rng):
        a2 = rng.uniform(size=(8, 8))
        assert np.isclose(mse(a2, a2 * 0.5), mse(a2[None], a2[None] * 0.5))


class TestSsim:
    def test_matches_loop_reference(self, pair):
        a, b = pair
        assert abs(ssim(a, b) - loop_ssim(a, b)) < 1e-6

    def test_small_image_window_shrinks(self, rng):
        a = rng.uniform(size=(8, 8))
        b = np.clip(a + rng.normal(0, 0.2, size=(8, 8)), 0, 1)
        assert abs(ssim(a, b) - loop_ssim(a, b)) < 1e-6

    def test_self_similarity_is_one(self, rng):
        a = rng.uniform(size=(3, 32, 32))
        assert abs(ssim(a, a) - 1.0) < 1e-9

    def test_opposite_constants_near_zero(self):
        a = np.zeros((16, 16))
        b = np.ones((16, 16))
        assert ssim(a, b) < 1e-3

    def test_multichannel_is_channel_mean(self, rng):
        a = rng.uniform(size=(3, 16, 16))
        b = np.clip(a + rng.normal(0, 0.1, size=a.shape), 0, 1)
        per = [ssim(a[c], b[c]) for c in range(3)]
        assert np.isclose(ssim(a, b), np.mean(per), atol=1e-12)

    def test_degrades_with_noise(self, rng):
        a = rng.uniform(size=(32, 32))
        scores = []
        for sigma in (0.02, 0.1, 0.3):
            b = np.clip(a + rng.normal(0, sigma, size=a.shape), 0, 1)
            scores.append(ssim(a, b))
        assert scores[0] > scores[1] > scores[2]


class TestMsSsim:
    def test_matches_loop_reference(self, pair):
        a, b = pair
        assert abs(ms_ssim(a, b) - loop_ms_ssim(a, b)) < 1e-6

    def test_uses_three_scales_at_32(self, pair):
        # 32 -> 16 -> 8: the documented depth rule gives exactly 3 levels
        assert min(5, int(math.floor(math.log2(32 / 8))) + 1) == 3

    def test_self_similarity_is_one(self, rng):
        a = rng.uniform(size=(32, 32))
        assert abs(ms_ssim(a, a) - 1.0) < 1e-9

    def test_rejects_tiny_images(self):
        with pytest.raises(ValueError):
            ms_ssim(np.zeros((4, 4)), np.zeros((4, 4)))

    def test_eight_pixel_images_use_single_scale(self, rng):
        a = rng.uniform(size=(8, 8))
        b = np.clip(a + rng.normal(0, 0.1, size=a.shape), 0, 1)
        assert abs(ms_ssim(a, b) - loop_ms_ssim(a, b)) < 1e-6

    def test_degrades_with_noise(self, rng):
        a = rng.uniform(size=(32, 32))
        prev = 1.1
        for sigma in (0.02, 0.1, 0.3):
            b = np.clip(a + rng.normal(0, sigma, size=a.shape), 0, 1)
            score = ms_ssim(a, b)
            assert score < prev
            prev = score


class TestAccuracy:
    def test_basic(self):
        logits = np.array([[0.9, 0.1], [0.2, 0.8], [0.6, 0.4], [0.3, 0.7]])
        assert accuracy(logits, np.array([0, 1, 1, 1])) == 75.0

    def test_ties_go_to_lowest_index(self):
        logits = np.zeros((2, 3))
        assert accuracy(logits, np.array([0, 0])) == 100.0
        assert accuracy(logits, np.array([1, 1])) == 0.0

    def test_validation(self):
        with pytest.raises(ValueError):
            accuracy(np.zeros((2, 3)), np.array([0, 1, 0]))


class TestSuite:
    def test_averages_over_pairs(self, rng):
        a = rng.uniform(size=(3, 16, 16))
        b = np.clip(a + 0.1, 0, 1)
        c = rng.uniform(size=(3, 16, 16))
        rep = similarity_suite([(a, b), (c, c)])
        assert np.isclose(rep.mse, (mse(a, b) + 0.0) / 2)
        assert rep.psnr == math.inf  # the identical pair dominates
        assert np.isclose(rep.ssim, (ssim(a, b) + 1.0) / 2)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            similarity_suite([])

    def test_worse_than_counts_metrics(self):
        good = SimilarityReport(mse=10.0, l1=2.0, ssim=0.9, ms_ssim=0.95, psnr=30.0)
        bad = SimilarityReport(mse=50.0, l1=6.0, ssim=0.5, ms_ssim=0.60, psnr=18.0)
        assert bad.worse_than(good) == 5
        assert good.worse_than(bad) == 0
        mixed = SimilarityReport(mse=5.0, l1=1.0, ssim=0.95, ms_ssim=0.5, psnr=35.0)
        assert mixed.worse_than(good) == 1
