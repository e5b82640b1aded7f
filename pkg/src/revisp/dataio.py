"""File formats, manifests and aligned cropping.

raw16 container (all integers little-endian)::

    offset  size        field
    0       4           magic b"RAW2"
    4       4           uint32 height
    8       4           uint32 width
    12      4           uint32 channels (always 4)
    16      h*w*4*2     uint16 codes in [0, 4095], row-major, channels interleaved

RGB images are 8-bit-per-channel PNG or PPM files. Metadata and manifests
are JSON documents.
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import (
    AlignmentError,
    ArityError,
    BadMagicError,
    ChannelCountError,
    CodeRangeError,
    DimensionError,
    DomainError,
    FormatError,
    MetadataError,
    MissingKeyError,
    SingularMatrixError,
    SingularMetadataError,
    TruncatedPayloadError,
    UnsupportedImageError,
)
from .isp import IspMetadata
from .model import PatchPair
from .raw import RAW_MAX_CODE, check_packed, check_rgb, dequantize12, to_codes12

RAW16_MAGIC = b"RAW2"
_RAW16_HEADER = struct.Struct("<4sIII")
MANIFEST_FORMAT_VERSION = 1

DEVICE_GROUPS = {
    "iPhoneX": "target",
    "SamsungS9": "target",
    "SamsungS21": "oof",
    "VivoX90": "oof",
}
GROUPS = ("target", "oof")
SPLITS = ("train", "test")


# --- raw16 -----------------------------------------------------------------

def encode_raw16(p: np.ndarray) -> bytes:
    """Serialize packed RAW, quantizing to 12-bit codes."""
    p = check_packed(p)
    h, w, c = p.shape
    codes = to_codes12(p).astype("<u2")
    return _RAW16_HEADER.pack(RAW16_MAGIC, h, w, c) + codes.tobytes(order="C")


def decode_raw16_codes(data: bytes) -> np.ndarray:
    """Parse a raw16 container into a ``(h, w, 4)`` uint16 code array."""
    if len(data) < _RAW16_HEADER.size:
        if data[:4] != RAW16_MAGIC[:len(data[:4])]:
            raise BadMagicError("not a raw16 file (bad magic)")
        raise TruncatedPayloadError(f"raw16 header needs {_RAW16_HEADER.size} bytes, got {len(data)}")
    magic, h, w, c = _RAW16_HEADER.unpack_from(data)
    if magic != RAW16_MAGIC:
        raise BadMagicError(f"not a raw16 file (magic {magic!r})")
    if c != 4:
        raise ChannelCountError(f"raw16 must have 4 channels, header says {c}")
    expected = _RAW16_HEADER.size + h * w * c * 2
    if len(data) < expected:
        raise TruncatedPayloadError(f"raw16 payload truncated: need {expected} bytes, got {len(data)}")
    if len(data) > expected:
        raise FormatError(f"raw16 has {len(data) - expected} unexpected trailing bytes")
    codes = np.frombuffer(data, dtype="<u2", count=h * w * c, offset=_RAW16_HEADER.size)
    if codes.size and codes.max() > RAW_MAX_CODE:
        raise CodeRangeError(f"raw16 code {int(codes.max())} exceeds {RAW_MAX_CODE}")
    return codes.reshape(h, w, c).astype(np.uint16)


def decode_raw16(data: bytes) -> np.ndarray:
    return dequantize12(decode_raw16_codes(data))


def write_raw16(path, p: np.ndarray) -> None:
    Path(path).write_bytes(encode_raw16(p))


def read_raw16(path) -> np.ndarray:
    return decode_raw16(Path(path).read_bytes())


# --- RGB ---------------------------------------------------------------------

def to_codes8(img: np.ndarray) -> np.ndarray:
    img = np.clip(check_rgb(img), 0.0, 1.0)
    return np.floor(img * 255.0 + 0.5).astype(np.uint8)


def write_rgb(path, img: np.ndarray) -> None:
    """Write an 8-bit lossless RGB file; format follows the suffix (.png, .ppm)."""
    path = Path(path)
    fmt = {".png": "PNG", ".ppm": "PPM"}.get(path.suffix.lower())
    if fmt is None:
        raise UnsupportedImageError(f"unsupported RGB file type {path.suffix!r}; use .png or .ppm")
    # fast lossless compression; the level does not affect decoded pixels
    options = {"compress_level": 1} if fmt == "PNG" else {}
    Image.fromarray(to_codes8(img)).save(path, format=fmt, **options)


def read_rgb(path) -> np.ndarray:
    try:
        with Image.open(path) as im:
            rawmode = im.tile[0].args if im.tile else im.mode
            if im.mode != "RGB" or not isinstance(rawmode, str) or "16" in rawmode:
                raise UnsupportedImageError(
                    f"{path}: only 8-bit RGB images are supported (mode {im.mode}, raw {rawmode})")
            codes = np.asarray(im, dtype=np.uint8)
    except UnidentifiedImageError as exc:
        raise FormatError(f"{path}: not a readable image") from exc
    except (OSError, SyntaxError) as exc:
        raise FormatError(f"{path}: corrupt image ({exc})") from exc
    return codes.astype(np.float64) / 255.0


# --- metadata --------------------------------------------------------------------

def metadata_to_dict(meta: IspMetadata) -> dict:
    return {
        "wb_gains": [float(v) for v in meta.wb_gains],
        "ccm": [float(v) for v in meta.ccm.ravel()],
        "black_level": meta.black_level,
        "white_level": meta.white_level,
    }


def parse_metadata(doc: dict) -> IspMetadata:
    """Validate a metadata mapping; keys other than the four known ones are ignored."""
    for key in ("wb_gains", "ccm", "black_level", "white_level"):
        if key not in doc:
            raise MissingKeyError(f"metadata is missing key {key!r}")
    try:
        gains = np.asarray(doc["wb_gains"], dtype=np.float64).ravel()
        ccm = np.asarray(doc["ccm"], dtype=np.float64).ravel()
    except (TypeError, ValueError) as exc:
        raise MetadataError(f"metadata arrays must be numeric: {exc}") from exc
    if gains.size != 3:
        raise ArityError(f"wb_gains needs 3 numbers, got {gains.size}")
    if ccm.size != 9:
        raise ArityError(f"ccm needs 9 numbers (row-major 3x3), got {ccm.size}")
    try:
        return IspMetadata(gains, ccm.reshape(3, 3), int(doc["black_level"]), int(doc["white_level"]))
    except SingularMatrixError as exc:
        raise SingularMetadataError(str(exc)) from exc
    except (DomainError, DimensionError, TypeError, ValueError) as exc:
        raise MetadataError(str(exc)) from exc


def load_metadata(path) -> IspMetadata:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise MetadataError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise MetadataError(f"{path}: expected a JSON object")
    return parse_metadata(doc)


def save_metadata(path, meta: IspMetadata) -> None:
    Path(path).write_text(json.dumps(metadata_to_dict(meta), indent=2) + "\n", encoding="utf-8")


# --- manifests ---------------------------------------------------------------------

@dataclass
class DevicePair:
    id: str
    device: str
    rgb_path: str
    raw_path: str
    group: str = ""
    meta_path: str | None = None

    def __post_init__(self):
        if not self.group:
            self.group = DEVICE_GROUPS.get(self.device, "oof")
        if self.group not in GROUPS:
            raise FormatError(f"entry {self.id!r}: group must be one of {GROUPS}, got {self.group!r}")

    def load_rgb(self) -> np.ndarray:
        return read_rgb(self.rgb_path)

    def load_raw(self) -> np.ndarray:
        return read_raw16(self.raw_path)

    def load_meta(self) -> IspMetadata | None:
        return None if self.meta_path is None else load_metadata(self.meta_path)


@dataclass
class Manifest:
    entries: list = field(default_factory=list)
    split: str = "test"
    format_version: int = MANIFEST_FORMAT_VERSION

    def __post_init__(self):
        if self.split not in SPLITS:
            raise FormatError(f"split must be one of {SPLITS}, got {self.split!r}")
        seen = set()
        for e in self.entries:
            if e.id in seen:
                raise FormatError(f"duplicate manifest id {e.id!r}")
            seen.add(e.id)

    def __len__(self):
        return len(self.entries)

    def by_id(self) -> dict:
        return {e.id: e for e in self.entries}


def _rel(path, base: Path) -> str:
    return Path(os.path.relpath(path, base)).as_posix()


def save_manifest(path, manifest: Manifest) -> None:
    """Write a manifest; entry paths are stored relative to its directory."""
    path = Path(path)
    base = path.parent.resolve()
    entries = []
    for e in manifest.entries:
        doc = {"id": e.id, "device": e.device, "group": e.group,
               "rgb_path": _rel(Path(e.rgb_path).resolve(), base),
               "raw_path": _rel(Path(e.raw_path).resolve(), base)}
        if e.meta_path is not None:
            doc["meta_path"] = _rel(Path(e.meta_path).resolve(), base)
        entries.append(doc)
    doc = {"format_version": manifest.format_version, "split": manifest.split, "entries": entries}
    path.write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def load_manifest(path) -> Manifest:
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from exc
    if doc.get("format_version") != MANIFEST_FORMAT_VERSION:
        raise FormatError(f"{path}: unsupported manifest format_version {doc.get('format_version')!r}")
    base = path.parent

    def resolve(p):
        return None if p is None else str(base / p)

    entries = []
    for item in doc.get("entries", []):
        try:
            entries.append(DevicePair(
                id=str(item["id"]), device=str(item["device"]),
                rgb_path=resolve(item["rgb_path"]), raw_path=resolve(item["raw_path"]),
                group=item.get("group", ""), meta_path=resolve(item.get("meta_path"))))
        except KeyError as exc:
            raise FormatError(f"{path}: manifest entry missing {exc}") from exc
    return Manifest(entries, split=doc.get("split", "test"))


def partition(manifest: Manifest) -> dict:
    """Split entries by group tag, keeping manifest order within each group."""
    out = {g: [] for g in GROUPS}
    for e in manifest.entries:
        out[e.group].append(e)
    return out


# --- aligned crops -----------------------------------------------------------------

def tile_starts(length: int, size: int, stride: int) -> list[int]:
    """Tile origins along one axis; a final tile is snapped to the border."""
    starts = list(range(0, length - size + 1, stride))
    if starts[-1] + size < length:
        starts.append(length - size)
    return starts


def crop_aligned(rgb: np.ndarray, raw: np.ndarray, raw_size: int, stride: int | None = None):
    """Cut co-registered patch pairs: RAW ``(i, j, s, s)`` with RGB ``(2i, 2j, 2s, 2s)``."""
    stride = raw_size if stride is None else stride
    h, w = raw.shape[:2]
    if rgb.shape[:2] != (2 * h, 2 * w):
        raise AlignmentError(f"RGB {rgb.shape[:2]} is not aligned with RAW {raw.shape[:2]} (need 2x)")
    if not 1 <= raw_size <= min(h, w):
        raise ValueError(f"patch size {raw_size} does not fit RAW of size {h}x{w}")
    if stride < 1:
        raise ValueError("stride must be positive")
    pairs = []
    for i in tile_starts(h, raw_size, stride):
        for j in tile_starts(w, raw_size, stride):
            pairs.append(PatchPair(
                rgb_patch=rgb[2 * i:2 * (i + raw_size), 2 * j:2 * (j + raw_size)],
                raw_patch=raw[i:i + raw_size, j:j + raw_size],
                origin=(i, j)))
    return pairs
