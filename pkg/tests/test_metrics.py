import math

import numpy as np
import pytest

from fw_oracle import all_binary_maps, fw_batch, kernel
from latent_affordance.metrics import (
    MetricConfig,
    gaussian_kernel,
    per_affordance_scores,
    pixel_f1,
    position_error,
    weighted_fbeta,
)

# 2x2 rectangle: every background pixel has a unique nearest foreground pixel
GT4 = np.zeros((4, 4), dtype=np.uint8)
GT4[1:3, 0:2] = 1


@pytest.fixture(scope="module")
def exhaustive():
    maps = all_binary_maps()
    lib = np.array([weighted_fbeta(m, GT4) for m in maps])
    return maps, lib


def test_kernel_matches_oracle():
    np.testing.assert_allclose(gaussian_kernel(7, 5.0), kernel(7, 5.0), atol=1e-15)


def test_default_constants():
    cfg = MetricConfig()
    assert (cfg.beta, cfg.sigma, cfg.kernel_size) == (1.0, 5.0, 7)
    assert cfg.alpha == pytest.approx(math.log(0.5) / 5)


def test_exhaustive_agreement_with_oracle(exhaustive):
    maps, lib = exhaustive
    ref = fw_batch(maps, GT4)
    assert np.max(np.abs(lib - ref)) < 1e-10


def test_soft_maps_agree_with_oracle():
    rng = np.random.default_rng(0)
    maps = rng.uniform(0, 1, (500, 4, 4))
    lib = np.array([weighted_fbeta(m, GT4) for m in maps])
    assert np.max(np.abs(lib - fw_batch(maps, GT4))) < 1e-10


def test_monotone_under_improvement(exhaustive):
    maps, lib = exhaustive
    gt_code = int(sum(int(b) << k for k, b in enumerate(GT4.ravel())))
    codes = np.arange(len(maps))
    for k in range(16):
        wrong = ((codes >> k) & 1) != ((gt_code >> k) & 1)
        fixed = codes[wrong] ^ (1 << k)
        assert np.all(lib[fixed] >= lib[codes[wrong]] - 1e-12)


def test_perfect_is_exactly_one():
    assert weighted_fbeta(GT4.astype(float), GT4) == 1.0
    rng = np.random.default_rng(1)
    for _ in range(20):
        g = rng.random((16, 16)) < 0.3
        if g.any():
            assert weighted_fbeta(g.astype(float), g) == 1.0


def test_inverse_prediction_scores_low():
    g = np.zeros((32, 32), dtype=bool)
    g[8:20, 10:22] = True
    assert weighted_fbeta(1.0 - g, g) < 0.05


def test_empty_ground_truth():
    z = np.zeros((5, 5))
    assert weighted_fbeta(z, z) == 1.0
    z2 = z.copy()
    z2[0, 0] = 0.5
    assert weighted_fbeta(z2, z) == 0.0


def test_shape_mismatch():
    with pytest.raises(ValueError):
        weighted_fbeta(np.zeros((4, 4)), np.zeros((4, 5)))


def test_per_affordance_scores():
    g = np.zeros((8, 8, 7), dtype=np.uint8)
    g[2:5, 2:5, :] = 1
    scores, avg = per_affordance_scores(g.astype(float), g)
    assert scores == [1.0] * 7 and avg == 1.0
    rng = np.random.default_rng(2)
    p = rng.random((8, 8, 7))
    scores, avg = per_affordance_scores(p, g)
    assert len(scores) == 7
    assert avg == pytest.approx(np.mean(scores), abs=1e-12)
    with pytest.raises(ValueError):
        per_affordance_scores(p[..., :3], g)


def test_pixel_f1():
    g = np.zeros((4, 4))
    g[:2] = 1
    assert pixel_f1(g, g) == 1.0
    assert pixel_f1(np.zeros((4, 4)), np.zeros((4, 4))) == 1.0
    p = np.zeros((4, 4))
    p[0] = 0.9
    assert pixel_f1(p, g) == pytest.approx(2 * 4 / (4 + 8))


def test_position_error():
    e = position_error([0.03, 0.04, 0.5], [0, 0, 0])
    assert e == pytest.approx({"err": 0.05, "x_err": 0.03, "y_err": 0.04})
    assert position_error([1, 2, 3], [1, 2, 3]) == {"err": 0.0, "x_err": 0.0, "y_err": 0.0}
    rng = np.random.default_rng(3)
    for _ in range(100):
        a, b, t = rng.normal(size=(3, 3))
        e1, e2, e3 = position_error(a, b), position_error(b, a), position_error(a + t, b + t)
        assert e1["err"] == pytest.approx(e2["err"]) == pytest.approx(e3["err"])
        assert e1["err"] >= max(e1["x_err"], e1["y_err"])
