"""Synthetic RAW/RGB pairs rendered with the simulated ISP."""

from __future__ import annotations

from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .dataio import DevicePair, Manifest, save_manifest, save_metadata, write_raw16, write_rgb
from .isp import IspMetadata, bilinear_demosaic, forward_isp, linear_color
from .raw import quantize12, unpack_rggb

RAW_LO, RAW_HI = 0.02, 0.98
# headroom kept between rendered linear RGB and the clamp limits
LINEAR_MARGIN = 0.01

TARGET_DEVICES = ("iPhoneX", "SamsungS9")
OOF_DEVICES = ("SamsungS21", "VivoX90")


def default_metadata() -> IspMetadata:
    """A plausible daylight camera: red/blue WB gains and a CCM with unit row sums."""
    return IspMetadata(
        wb_gains=[1.9, 1.0, 1.6],
        ccm=[[1.60, -0.45, -0.15],
             [-0.20, 1.45, -0.25],
             [0.05, -0.50, 1.45]],
    )


def smooth_raw(rng: np.random.Generator, h: int, w: int, sigma: float | None = None) -> np.ndarray:
    """Band-limited packed RAW in [0.02, 0.98] with correlated color planes."""
    sigma = max(h, w) / 24.0 if sigma is None else sigma
    lum = gaussian_filter(rng.standard_normal((h, w)), sigma, mode="wrap")
    chroma = gaussian_filter(rng.standard_normal((h, w, 3)), (sigma, sigma, 0), mode="wrap")
    field = lum[..., None] / lum.std() + 0.5 * chroma / chroma.std()
    field = (field - field.min()) / (field.max() - field.min())
    rgb = RAW_LO + (RAW_HI - RAW_LO) * field
    return np.stack([rgb[..., 0], rgb[..., 1], rgb[..., 1], rgb[..., 2]], axis=-1)


def fit_into_gamut(raw: np.ndarray, meta: IspMetadata) -> np.ndarray:
    """Contract ``raw`` toward a mid-gray anchor until rendering never clips.

    Demosaicing and color correction are linear and preserve constants, so
    contracting RAW about an anchor contracts the rendered linear RGB about
    the anchor's rendering by the same factor.
    """
    m = meta.combined
    anchor3 = np.clip(np.linalg.solve(m, np.full(3, 0.5)), RAW_LO, RAW_HI)
    anchor_lin = m @ anchor3
    lo, hi = LINEAR_MARGIN, 1.0 - LINEAR_MARGIN
    if not np.all((anchor_lin > lo) & (anchor_lin < hi)):
        raise ValueError("metadata maps every in-range gray outside the display gamut")
    lin = linear_color(bilinear_demosaic(unpack_rggb(raw)), meta, "forward")
    dev = lin - anchor_lin
    with np.errstate(divide="ignore", invalid="ignore"):
        limit = np.where(dev > 0, (hi - anchor_lin) / dev, np.where(dev < 0, (lo - anchor_lin) / dev, np.inf))
    scale = min(1.0, float(limit.min()))
    if scale >= 1.0:
        return raw
    anchor = anchor3[[0, 1, 1, 2]]
    return anchor + scale * (raw - anchor)


def make_pair(rng: np.random.Generator, size: int, meta: IspMetadata):
    """One ``(rgb, raw)`` pair: RAW quantized to 12 bits, RGB rendered from it."""
    raw = quantize12(fit_into_gamut(smooth_raw(rng, size, size), meta))
    return forward_isp(raw, meta), raw


def synth_dataset(out_dir, n: int, meta: IspMetadata | None = None, seed: int = 0,
                  size: int = 512, n_oof: int | None = None, split: str = "test") -> Manifest:
    """Write ``n`` synthetic pairs, their metadata and a manifest into ``out_dir``.

    The first ``n - n_oof`` entries are tagged as target devices, the rest as
    OOF devices (default ``n_oof = n // 3``, a 2:1 target/OOF split).
    Returns the manifest; output bytes depend only on the arguments.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    meta = default_metadata() if meta is None else meta
    n_oof = n // 3 if n_oof is None else n_oof
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta_path = out / "metadata.json"
    save_metadata(meta_path, meta)

    children = np.random.SeedSequence(seed).spawn(n)
    entries = []
    for i in range(n):
        rgb, raw = make_pair(np.random.default_rng(children[i]), size, meta)
        is_oof = i >= n - n_oof
        devices = OOF_DEVICES if is_oof else TARGET_DEVICES
        entry = DevicePair(
            id=f"{i:04d}", device=devices[i % 2],
            rgb_path=str(out / f"{i:04d}.png"), raw_path=str(out / f"{i:04d}.raw16"),
            meta_path=str(meta_path))
        write_rgb(entry.rgb_path, rgb)
        write_raw16(entry.raw_path, raw)
        entries.append(entry)
    manifest = Manifest(entries, split=split)
    save_manifest(out / "manifest.json", manifest)
    return manifest
