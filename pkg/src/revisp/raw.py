"""Mosaiced and packed RGGB RAW representations.

Arrays are plain ``numpy`` float arrays with samples in [0, 1]:

* mosaic: ``(H, W)`` single-plane Bayer data, H and W even
* packed: ``(H/2, W/2, 4)`` with channels ordered ``[R, G1, G2, B]``, i.e.
  the raster order of each 2x2 RGGB block
* rgb: ``(H, W, 3)`` sRGB-encoded image

Packed samples represent 12-bit codes as ``code / 4095``.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, DomainError

#: packed channel order, one entry per (row parity, col parity) site
CHANNELS = ("R", "G1", "G2", "B")
#: RGB color index sampled at each packed channel
CHANNEL_COLOR = np.array([0, 1, 1, 2])
#: (row, col) offset of each packed channel inside its 2x2 block
CHANNEL_SITE = ((0, 0), (0, 1), (1, 0), (1, 1))

RAW_MAX_CODE = 4095
SUPPORTED_PATTERNS = ("RGGB",)


def _check_unit_range(x: np.ndarray, what: str) -> None:
    if not np.all(np.isfinite(x)):
        raise DomainError(f"{what} contains non-finite samples")
    if x.size and (x.min() < 0.0 or x.max() > 1.0):
        raise DomainError(f"{what} samples must lie in [0, 1]")


def check_mosaic(m: np.ndarray, pattern: str = "RGGB") -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if pattern not in SUPPORTED_PATTERNS:
        raise DimensionError(f"unsupported Bayer pattern {pattern!r}; only RGGB is accepted")
    if m.ndim != 2 or m.shape[0] == 0 or m.shape[1] == 0:
        raise DimensionError(f"mosaic must be a non-empty 2-D array, got shape {m.shape}")
    if m.shape[0] % 2 or m.shape[1] % 2:
        raise DimensionError(f"mosaic dimensions must be even, got {m.shape}")
    _check_unit_range(m, "mosaic")
    return m


def check_packed(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    if p.ndim != 3 or p.shape[2] != 4 or p.shape[0] == 0 or p.shape[1] == 0:
        raise DimensionError(f"packed RAW must have shape (h, w, 4), got {p.shape}")
    _check_unit_range(p, "packed RAW")
    return p


def check_rgb(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3 or img.shape[0] == 0 or img.shape[1] == 0:
        raise DimensionError(f"RGB image must have shape (H, W, 3), got {img.shape}")
    _check_unit_range(img, "RGB image")
    return img


def pack_rggb(m: np.ndarray, pattern: str = "RGGB") -> np.ndarray:
    """Group each 2x2 RGGB block of ``m`` into one 4-channel pixel."""
    m = check_mosaic(m, pattern)
    return np.stack([m[r::2, c::2] for r, c in CHANNEL_SITE], axis=-1)


def unpack_rggb(p: np.ndarray) -> np.ndarray:
    """Inverse of :func:`pack_rggb`."""
    p = check_packed(p)
    h, w, _ = p.shape
    m = np.empty((2 * h, 2 * w), dtype=np.float64)
    for ch, (r, c) in enumerate(CHANNEL_SITE):
        m[r::2, c::2] = p[..., ch]
    return m


def bayer_sites(img: np.ndarray) -> np.ndarray:
    """Return the full RGB triple found at each RGGB site.

    Output shape is ``(H/2, W/2, 4, 3)``: axis 2 follows the packed channel
    order, axis 3 is the RGB triple of the co-sited full-resolution pixel.
    """
    if img.shape[0] % 2 or img.shape[1] % 2:
        raise DimensionError(f"image dimensions must be even, got {img.shape[:2]}")
    return np.stack([img[r::2, c::2] for r, c in CHANNEL_SITE], axis=2)


def subsample_rggb(img: np.ndarray) -> np.ndarray:
    """Sample an RGB image at its RGGB sites, giving packed RAW (no interpolation)."""
    sites = bayer_sites(img)
    return np.stack([sites[:, :, ch, CHANNEL_COLOR[ch]] for ch in range(4)], axis=-1)


# --- dihedral group -------------------------------------------------------
#
# Index bits: 1 = horizontal flip, 2 = vertical flip, 4 = transpose.
# Application order is transpose, then horizontal flip, then vertical flip.

DIHEDRAL_INDICES = tuple(range(8))
IDENTITY = 0
HFLIP = 1
VFLIP = 2
TRANSPOSE = 4
# rotations by 90 degrees swap the flip bits when inverted
_INVERSE = (0, 1, 2, 3, 4, 6, 5, 7)


def _check_index(t: int) -> int:
    if t not in DIHEDRAL_INDICES:
        raise ValueError(f"dihedral index must be in 0..7, got {t!r}")
    return int(t)


def dihedral_inverse(t: int) -> int:
    return _INVERSE[_check_index(t)]


def dihedral_spatial(x: np.ndarray, t: int) -> np.ndarray:
    """Apply dihedral transform ``t`` to the two leading (spatial) axes."""
    t = _check_index(t)
    if t & TRANSPOSE:
        x = np.swapaxes(x, 0, 1)
    if t & HFLIP:
        x = x[:, ::-1]
    if t & VFLIP:
        x = x[::-1]
    return np.ascontiguousarray(x)


def dihedral_compose(s: int, t: int) -> int:
    """Index ``u`` such that applying ``s`` then ``t`` equals applying ``u``."""
    return _COMPOSE[_check_index(s)][_check_index(t)]


def _build_compose_table():
    probe = np.arange(6).reshape(2, 3)
    images = [dihedral_spatial(probe, u) for u in DIHEDRAL_INDICES]
    table = []
    for s in DIHEDRAL_INDICES:
        row = []
        for t in DIHEDRAL_INDICES:
            out = dihedral_spatial(dihedral_spatial(probe, s), t)
            row.append(next(u for u, im in enumerate(images)
                            if im.shape == out.shape and np.array_equal(im, out)))
        table.append(tuple(row))
    return tuple(table)


_COMPOSE = _build_compose_table()

# The 2x2 block of packed channel indices moves with the image; reading it
# back after the transform gives the channel permutation.
_CHANNEL_PERM = tuple(
    dihedral_spatial(np.array([[0, 1], [2, 3]]), t).ravel() for t in DIHEDRAL_INDICES
)


def dihedral_rgb(img: np.ndarray, t: int) -> np.ndarray:
    """Dihedral transform of an RGB image (all channels moved identically)."""
    return dihedral_spatial(check_rgb(img), t)


def dihedral_packed(p: np.ndarray, t: int, validate: bool = True) -> np.ndarray:
    """Bayer-aware dihedral transform of packed RAW.

    The result equals ``pack_rggb`` of the transformed full-resolution
    mosaic: besides moving pixels, each transform relabels which packed
    channel a Bayer site lands in (e.g. a horizontal flip maps
    ``[R, G1, G2, B]`` to ``[G1, R, B, G2]``).
    """
    if validate:
        p = check_packed(p)
    return dihedral_spatial(p, t)[..., _CHANNEL_PERM[_check_index(t)]]


def channel_permutation(t: int) -> tuple[int, ...]:
    """Source channel for each output channel under ``dihedral_packed``."""
    return tuple(int(c) for c in _CHANNEL_PERM[_check_index(t)])


# --- 12-bit quantization ---------------------------------------------------

def to_codes12(x: np.ndarray) -> np.ndarray:
    """Map [0, 1] samples to integer 12-bit codes (uint16).

    Out-of-range input is clamped first. Ties round away from zero, which
    for non-negative values is ``floor(v + 0.5)``.
    """
    x = np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0)
    return np.floor(x * RAW_MAX_CODE + 0.5).astype(np.uint16)


def quantize12(x: np.ndarray) -> np.ndarray:
    """Round samples to the nearest normalized 12-bit level ``code / 4095``."""
    return dequantize12(to_codes12(x))


def dequantize12(codes: np.ndarray) -> np.ndarray:
    codes = np.asarray(codes)
    if codes.size and (codes.min() < 0 or codes.max() > RAW_MAX_CODE):
        raise DomainError("12-bit codes must lie in [0, 4095]")
    return codes.astype(np.float64) / RAW_MAX_CODE
