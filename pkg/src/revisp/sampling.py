"""Brightness-stratified patch selection.

RAW pixel values are heavily skewed toward dark levels, so drawing patches
uniformly over-represents shadows. Patches are binned by the mean of their
packed RAW samples into equal-width bins over [0, 1] and drawn evenly across
bins.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .errors import EmptyDatasetError


def patch_luminance(raw_patch: np.ndarray) -> float:
    """Mean over all packed samples (R, G1, G2, B equally weighted)."""
    return float(np.mean(raw_patch))


def brightness_bin(value: float, bins: int) -> int:
    return min(int(np.floor(value * bins)), bins - 1) if value > 0 else 0


def allocate(available, n: int) -> list[int]:
    """Per-bin draw counts for a total of ``n`` over bins with given capacity.

    Targets are ``ceil(n / bins)`` for the first ``n % bins`` bins and
    ``floor(n / bins)`` for the rest. Bins short of their target give all
    they have; the deficit is handed out one at a time, cycling over bins
    ordered by spare capacity (largest first, ties by bin index).
    """
    bins = len(available)
    base, extra = divmod(n, bins)
    counts = [min(base + (1 if i < extra else 0), available[i]) for i in range(bins)]
    deficit = n - sum(counts)
    order = sorted(range(bins), key=lambda i: (-(available[i] - counts[i]), i))
    while deficit > 0:
        progressed = False
        for i in order:
            if deficit == 0:
                break
            if counts[i] < available[i]:
                counts[i] += 1
                deficit -= 1
                progressed = True
        if not progressed:
            break
    return counts


def stratified_sample(pairs, n: int, bins: int, seed: int = 0):
    """Draw ``n`` patch pairs spread evenly over ``bins`` brightness bins.

    Returned pairs carry their bin in ``stratum``; order is by bin, then
    draw order. Deterministic for a fixed seed.
    """
    pairs = list(pairs)
    if not pairs:
        raise EmptyDatasetError("empty dataset: nothing to sample")
    if not n >= bins >= 1:
        raise ValueError(f"need n >= bins >= 1, got n={n}, bins={bins}")
    members = [[] for _ in range(bins)]
    for idx, pair in enumerate(pairs):
        members[brightness_bin(patch_luminance(pair.raw_patch), bins)].append(idx)
    counts = allocate([len(m) for m in members], n)

    rng = np.random.default_rng(seed)
    out = []
    for b, (idx, count) in enumerate(zip(members, counts)):
        if count == 0:
            continue
        chosen = rng.choice(len(idx), size=count, replace=False)
        out.extend(dataclasses.replace(pairs[idx[c]], stratum=b) for c in chosen)
    return out
