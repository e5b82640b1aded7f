"""Simulated camera ISP and its metadata-based inverse.

The forward path is a documented stand-in for a phone ISP so that exact
round-trip oracles exist::

    packed RAW -> black/white normalize -> unpack -> bilinear demosaic
      -> WB gains + CCM -> clamp -> sRGB encode -> 8-bit quantize

The inverse path undoes every step except demosaicing, which it replaces
by sampling each 2x2 block at its RGGB sites.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, DomainError, SingularMatrixError
from .raw import (
    RAW_MAX_CODE,
    check_mosaic,
    check_packed,
    check_rgb,
    quantize12,
    subsample_rggb,
    unpack_rggb,
)

DET_EPS = 1e-10

# sRGB piecewise transfer constants
_SRGB_DECODE_KNEE = 0.04045
_SRGB_ENCODE_KNEE = 0.0031308
_SRGB_SLOPE = 12.92
_SRGB_A = 0.055
_SRGB_GAMMA = 2.4


@dataclass(frozen=True)
class IspMetadata:
    """White-balance gains, color correction matrix and sensor levels."""

    wb_gains: np.ndarray = field(default_factory=lambda: np.ones(3))
    ccm: np.ndarray = field(default_factory=lambda: np.eye(3))
    black_level: int = 0
    white_level: int = RAW_MAX_CODE

    def __post_init__(self):
        gains = np.array(self.wb_gains, dtype=np.float64).reshape(-1)
        ccm = np.array(self.ccm, dtype=np.float64)
        if gains.shape != (3,):
            raise DimensionError(f"wb_gains needs 3 values, got {gains.size}")
        if ccm.shape != (3, 3):
            raise DimensionError(f"ccm must be 3x3, got shape {ccm.shape}")
        if not (np.all(np.isfinite(gains)) and np.all(gains > 0)):
            raise DomainError("wb_gains must be finite and strictly positive")
        if not np.all(np.isfinite(ccm)):
            raise DomainError("ccm must be finite")
        if abs(np.linalg.det(ccm)) <= DET_EPS:
            raise SingularMatrixError("ccm is singular (|det| <= 1e-10)")
        if not 0 <= self.black_level < self.white_level <= RAW_MAX_CODE:
            raise DomainError(
                f"need 0 <= black_level < white_level <= {RAW_MAX_CODE}, "
                f"got {self.black_level}/{self.white_level}")
        gains.flags.writeable = False
        ccm.flags.writeable = False
        object.__setattr__(self, "wb_gains", gains)
        object.__setattr__(self, "ccm", ccm)
        object.__setattr__(self, "black_level", int(self.black_level))
        object.__setattr__(self, "white_level", int(self.white_level))

    @classmethod
    def identity(cls) -> "IspMetadata":
        return cls()

    @property
    def combined(self) -> np.ndarray:
        """Camera-RGB to display-RGB matrix ``ccm @ diag(wb_gains)``."""
        return self.ccm * self.wb_gains[np.newaxis, :]

    @property
    def default_levels(self) -> bool:
        return self.black_level == 0 and self.white_level == RAW_MAX_CODE


@dataclass(frozen=True)
class ColorTransform:
    """A single invertible 3x3 matrix mapping linear RAW RGB to linear sRGB."""

    m: np.ndarray

    def __post_init__(self):
        m = np.array(self.m, dtype=np.float64)
        if m.shape != (3, 3):
            raise DimensionError(f"color transform must be 3x3, got {m.shape}")
        if not np.all(np.isfinite(m)) or abs(np.linalg.det(m)) <= DET_EPS:
            raise SingularMatrixError("color transform is singular (|det| <= 1e-10)")
        m.flags.writeable = False
        object.__setattr__(self, "m", m)

    def as_metadata(self) -> IspMetadata:
        return IspMetadata(wb_gains=np.ones(3), ccm=self.m)


# --- transfer curves -------------------------------------------------------

def srgb_decode(x):
    """sRGB-encoded values to linear light. Input is clamped to [0, 1]."""
    x = np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0)
    low = x / _SRGB_SLOPE
    high = ((x + _SRGB_A) / (1.0 + _SRGB_A)) ** _SRGB_GAMMA
    return np.where(x <= _SRGB_DECODE_KNEE, low, high)


def srgb_encode(x):
    """Linear light to sRGB encoding. Input is clamped to [0, 1]."""
    x = np.clip(np.asarray(x, dtype=np.float64), 0.0, 1.0)
    low = x * _SRGB_SLOPE
    high = (1.0 + _SRGB_A) * x ** (1.0 / _SRGB_GAMMA) - _SRGB_A
    return np.where(x <= _SRGB_ENCODE_KNEE, low, high)


def srgb_transfer(x, direction: str):
    if direction == "decode":
        return srgb_decode(x)
    if direction == "encode":
        return srgb_encode(x)
    raise ValueError(f"direction must be 'encode' or 'decode', got {direction!r}")


def power_gamma(x, gamma: float, direction: str = "apply"):
    """Pure power curve ``x**gamma`` (``apply``) or ``x**(1/gamma)`` (``invert``)."""
    if not gamma > 0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    x = np.asarray(x, dtype=np.float64)
    if np.any(x < 0):
        raise DomainError("power_gamma is undefined for negative input")
    if direction == "apply":
        return x ** gamma
    if direction == "invert":
        return x ** (1.0 / gamma)
    raise ValueError(f"direction must be 'apply' or 'invert', got {direction!r}")


# --- color -----------------------------------------------------------------

def linear_color(pixels, meta: IspMetadata, direction: str = "forward") -> np.ndarray:
    """Apply WB gains then CCM (``forward``) or undo both (``inverse``).

    ``pixels`` is any array whose last axis holds linear RGB triples.
    """
    pixels = np.asarray(pixels, dtype=np.float64)
    if pixels.shape[-1] != 3:
        raise DimensionError(f"last axis must hold RGB triples, got {pixels.shape}")
    if direction == "forward":
        return (pixels * meta.wb_gains) @ meta.ccm.T
    if direction == "inverse":
        try:
            ccm_inv = np.linalg.inv(meta.ccm)
        except np.linalg.LinAlgError as exc:
            raise SingularMatrixError("ccm is singular") from exc
        return (pixels @ ccm_inv.T) / meta.wb_gains
    raise ValueError(f"direction must be 'forward' or 'inverse', got {direction!r}")


# --- demosaic ----------------------------------------------------------------

def bilinear_demosaic(m: np.ndarray) -> np.ndarray:
    """Bilinear RGGB demosaic with mirror padding.

    Missing colors are averages of the nearest same-color neighbors. Mirror
    padding (edge sample not repeated) keeps the Bayer phase at the
    borders, so every site uses the interior stencil. Neighbor sums are
    paired so a constant mosaic reproduces its value bit-exactly.
    """
    m = check_mosaic(m)
    if m.shape[0] < 4 or m.shape[1] < 4:
        raise DimensionError(f"demosaic needs at least a 4x4 mosaic, got {m.shape}")
    p = np.pad(m, 1, mode="reflect")
    up, down = p[:-2, 1:-1], p[2:, 1:-1]
    left, right = p[1:-1, :-2], p[1:-1, 2:]
    vert = up + down
    horiz = left + right
    cross = (vert + horiz) * 0.25
    diag = ((p[:-2, :-2] + p[2:, 2:]) + (p[:-2, 2:] + p[2:, :-2])) * 0.25
    vert *= 0.5
    horiz *= 0.5

    out = np.empty(m.shape + (3,), dtype=np.float64)
    r, g, b = out[..., 0], out[..., 1], out[..., 2]
    # R sites
    s = np.s_[0::2, 0::2]
    r[s], g[s], b[s] = m[s], cross[s], diag[s]
    # G1 sites: red to the left/right, blue above/below
    s = np.s_[0::2, 1::2]
    r[s], g[s], b[s] = horiz[s], m[s], vert[s]
    # G2 sites: red above/below, blue to the left/right
    s = np.s_[1::2, 0::2]
    r[s], g[s], b[s] = vert[s], m[s], horiz[s]
    # B sites
    s = np.s_[1::2, 1::2]
    r[s], g[s], b[s] = diag[s], cross[s], m[s]
    return out


# --- full pipelines ------------------------------------------------------------

def _normalize_levels(p: np.ndarray, meta: IspMetadata) -> np.ndarray:
    if meta.default_levels:
        return p
    span = meta.white_level - meta.black_level
    return np.clip((p * RAW_MAX_CODE - meta.black_level) / span, 0.0, 1.0)


def _denormalize_levels(x: np.ndarray, meta: IspMetadata) -> np.ndarray:
    if meta.default_levels:
        return x
    span = meta.white_level - meta.black_level
    return (meta.black_level + x * span) / RAW_MAX_CODE


def quantize8(x: np.ndarray) -> np.ndarray:
    """Round to the nearest ``code / 255`` level (ties away from zero)."""
    x = np.clip(x, 0.0, 1.0)
    return np.floor(x * 255.0 + 0.5) / 255.0


def forward_isp(p: np.ndarray, meta: IspMetadata, quantize: bool = True) -> np.ndarray:
    """Render packed RAW to an sRGB image of twice its spatial size."""
    p = _normalize_levels(check_packed(p), meta)
    rgb_lin = linear_color(bilinear_demosaic(unpack_rggb(p)), meta, "forward")
    img = srgb_encode(np.clip(rgb_lin, 0.0, 1.0))
    return quantize8(img) if quantize else img


def inverse_isp_linear(img: np.ndarray, meta: IspMetadata) -> np.ndarray:
    """Unquantized inverse ISP; :func:`inverse_isp` rounds this to 12 bits."""
    img = check_rgb(img)
    raw_lin = np.clip(linear_color(srgb_decode(img), meta, "inverse"), 0.0, 1.0)
    return _denormalize_levels(subsample_rggb(raw_lin), meta)


def inverse_isp(img: np.ndarray, meta: IspMetadata) -> np.ndarray:
    """Recover packed RAW from sRGB using known ISP metadata."""
    return quantize12(inverse_isp_linear(img, meta))
