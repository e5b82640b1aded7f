"""Data builders shared by the model, TTA and acceptance tests."""

import math

import numpy as np

from revisp.isp import srgb_decode, srgb_encode
from revisp.model import PatchPair, ReverseModel, Samples, _solve_candidate_map, blend, image_samples
from revisp.raw import bayer_sites


def interior_model(rng, gammas, weights=None):
    """Random model whose responses stay inside (0, 1) for any input in [0, 1]."""
    K = len(gammas)
    A = rng.uniform(0.05, 0.3, (K, 3, 3))
    b = rng.uniform(0.02, 0.08, (K, 3))
    w = rng.dirichlet(np.ones(K)) if weights is None else weights
    return ReverseModel(gammas, A, b, w)


def random_samples(rng, n):
    x = rng.uniform(0.0, 1.0, (n, 3))
    color = rng.integers(0, 3, n)
    return Samples(x, color, rng.uniform(0.05, 0.95, n))


def linear_pair(rng, A, b, size=16):
    """Unquantized RGB patch whose co-sited RAW is exactly ``A @ x_lin + b``."""
    rgb = rng.uniform(0.05, 0.95, (2 * size, 2 * size, 3))
    sites = bayer_sites(srgb_decode(rgb))
    color = np.array([0, 1, 1, 2])
    raw = np.einsum("hwcj,hwcj->hwc", sites, A[color][None, None]) + b[color]
    return PatchPair(rgb, raw)


def self_consistent_samples(rng, gammas, weights, n_images=4, size=16, iters=200):
    """Samples generated by a K-candidate model that is its own least-squares fit.

    Starting from random maps, alternate ``y = blend(model)`` with refitting
    each candidate map on ``y`` until the maps stop moving, so refitting the
    final targets reproduces the generator's maps.
    """
    xs, cs = [], []
    for _ in range(n_images):
        img = srgb_encode(rng.uniform(0.03, 0.9, (2 * size, 2 * size, 3)))
        x, c, _ = image_samples(img)
        xs.append(x)
        cs.append(c)
    x, c = np.concatenate(xs), np.concatenate(cs)
    model = interior_model(rng, gammas, np.asarray(weights, dtype=float))
    for k in range(model.K):
        model.A[k] = 0.85 * np.eye(3) + 0.05
    for _ in range(iters):
        y = blend(model, x, c)
        for k, g in enumerate(model.gammas):
            model.A[k], model.b[k] = _solve_candidate_map(x ** g, c, y, g, k)
    return model, Samples(x, c, blend(model, x, c))


def noiseless_matrix_pairs(rng, M, n=3, size=8):
    """RGB whose 2x2 block means decode exactly to ``M @ raw`` (no demosaic, no rounding)."""
    inv = np.linalg.inv(M)
    pairs = []
    for _ in range(n):
        lin = rng.uniform(0.05, 0.9, (size, size, 3))
        raw3 = lin @ inv.T
        lo, hi = raw3.min(), raw3.max()
        raw3 = 0.05 + 0.9 * (raw3 - lo) / (hi - lo)
        lin = raw3 @ M.T
        assert lin.min() >= 0 and lin.max() <= 1
        rgb = srgb_encode(np.repeat(np.repeat(lin, 2, 0), 2, 1))
        pairs.append(PatchPair(rgb, raw3[..., [0, 1, 1, 2]]))
    return pairs


def naive_ssim(a, b):
    """Direct loop over every 11x11 window and channel."""
    size, sigma = 11, 1.5
    ax = [i - 5 for i in range(size)]
    g = [[math.exp(-(x * x + y * y) / (2 * sigma * sigma)) for y in ax] for x in ax]
    total_w = sum(sum(row) for row in g)
    c1, c2 = 0.01 ** 2, 0.03 ** 2
    h, w, ch = a.shape
    per_channel = []
    for c in range(ch):
        vals = []
        for i in range(h - size + 1):
            for j in range(w - size + 1):
                ma = mb = saa = sbb = sab = 0.0
                for di in range(size):
                    for dj in range(size):
                        wt = g[di][dj] / total_w
                        x, y = a[i + di, j + dj, c], b[i + di, j + dj, c]
                        ma += wt * x
                        mb += wt * y
                        saa += wt * x * x
                        sbb += wt * y * y
                        sab += wt * x * y
                va, vb, cov = saa - ma * ma, sbb - mb * mb, sab - ma * mb
                vals.append((2 * ma * mb + c1) * (2 * cov + c2) / ((ma * ma + mb * mb + c1) * (va + vb + c2)))
        per_channel.append(sum(vals) / len(vals))
    return sum(per_channel) / ch
