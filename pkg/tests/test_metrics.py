import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from revisp.errors import DimensionError
from revisp.metrics import gaussian_window, psnr, ssim, ssim_map
from revisp.raw import DIHEDRAL_INDICES, dihedral_spatial

from helpers import naive_ssim


def test_psnr_identical_is_inf(rng):
    a = rng.random((4, 4, 4))
    assert psnr(a, a) == math.inf


def test_psnr_constant_offset():
    a = np.full((16, 16, 4), 0.2)
    value = psnr(a + 0.1, a)
    # 0.1 is not exact in binary; the MSE lands within rounding of 0.01
    assert abs(value - 20.0) <= 1e-9
    assert f"{value:.2f}" == "20.00"


def test_psnr_two_pass_oracle(rng):
    a, b = rng.random((8, 9, 4)), rng.random((8, 9, 4))
    total = 0.0
    for x, y in zip(a.ravel(), b.ravel()):
        total += (x - y) ** 2
    mse = total / a.size
    assert psnr(a, b) == pytest.approx(10 * math.log10(1 / mse), abs=1e-10)


def test_psnr_symmetric_and_monotone(rng):
    a, b = rng.random((6, 6, 4)), rng.random((6, 6, 4))
    assert psnr(a, b) == psnr(b, a)
    base = np.full((4, 4, 4), 0.3)
    values = [psnr(base + d, base) for d in (0.01, 0.05, 0.1, 0.3)]
    assert all(x > y for x, y in zip(values, values[1:]))


def test_psnr_shape_mismatch():
    with pytest.raises(DimensionError):
        psnr(np.zeros((2, 2, 4)), np.zeros((2, 3, 4)))


def test_ssim_self_is_one(rng):
    x = rng.random((16, 20, 4))
    assert ssim(x, x) == 1.0


def test_ssim_identical_constants():
    a = np.full((12, 12, 4), 0.5)
    assert ssim(a, a.copy()) == 1.0


def test_ssim_constant_images_closed_form():
    a, b = np.full((12, 12, 1), 0.2), np.full((12, 12, 1), 0.6)
    c1 = 0.01 ** 2
    expect = (2 * 0.2 * 0.6 + c1) / (0.2 ** 2 + 0.6 ** 2 + c1)
    assert ssim(a, b) == pytest.approx(expect, abs=1e-12)


def test_ssim_matches_naive_oracle(rng):
    for _ in range(2):
        a = rng.random((13, 14, 2))
        b = np.clip(a + 0.2 * rng.normal(size=a.shape), 0, 1)
        assert abs(ssim(a, b) - naive_ssim(a, b)) <= 1e-6


def test_ssim_window_and_errors():
    w = gaussian_window()
    assert w.size == 11 and abs(w.sum() - 1) < 1e-15
    assert ssim_map(np.zeros((11, 13)), np.zeros((11, 13))).shape == (1, 3, 1)
    with pytest.raises(DimensionError):
        ssim(np.zeros((10, 20, 4)), np.zeros((10, 20, 4)))
    with pytest.raises(DimensionError):
        ssim(np.zeros((12, 12, 4)), np.zeros((12, 13, 4)))


@given(st.integers(0, 2 ** 32 - 1))
def test_ssim_bounded(seed):
    rng = np.random.default_rng(seed)
    a, b = rng.random((12, 12, 2)), rng.random((12, 12, 2))
    v = ssim(a, b)
    assert -1.0 <= v <= 1.0


@pytest.mark.parametrize("t", DIHEDRAL_INDICES)
def test_metrics_dihedral_invariance(t, rng):
    a, b = rng.random((14, 14, 4)), rng.random((14, 14, 4))
    ta, tb = dihedral_spatial(a, t), dihedral_spatial(b, t)
    assert abs(psnr(ta, tb) - psnr(a, b)) <= 1e-12
    assert abs(ssim(ta, tb) - ssim(a, b)) <= 1e-6
