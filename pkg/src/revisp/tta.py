"""Test-time augmentation over dihedral transforms.

Each transform ``t`` is applied to the RGB input, the model predicts packed
RAW for the transformed image, and the prediction is mapped back with the
inverse transform. Results are averaged in the unquantized domain and
rounded to 12 bits once.

Two back-mappings are available:

``spatial`` (default)
    Move the four packed planes back spatially, keeping channel labels. The
    R plane always holds red predictions; under flips each block's samples
    come from a neighboring site of the same 2x2 block.
``mosaic``
    :func:`~revisp.raw.dihedral_packed` with the inverse transform, i.e. the
    exact inverse of the full-resolution mosaic transform. Sites line up
    exactly but channels are relabeled, so e.g. after a horizontal flip the
    R plane receives green predictions.
"""

from __future__ import annotations

from .raw import (
    DIHEDRAL_INDICES,
    HFLIP,
    IDENTITY,
    VFLIP,
    dihedral_inverse,
    dihedral_packed,
    dihedral_rgb,
    dihedral_spatial,
    quantize12,
)

TTA_SETS = {
    "none": (IDENTITY,),
    "flip2": (IDENTITY, HFLIP, VFLIP),
    "dihedral8": DIHEDRAL_INDICES,
}
BACKMAPS = ("spatial", "mosaic")


def transforms_for(tta: str) -> tuple:
    try:
        return TTA_SETS[tta]
    except KeyError:
        raise ValueError(f"unknown TTA mode {tta!r}; choose from {tuple(TTA_SETS)}") from None


def map_back(pred, t: int, backmap: str = "spatial"):
    inv = dihedral_inverse(t)
    if backmap == "spatial":
        return dihedral_spatial(pred, inv)
    if backmap == "mosaic":
        return dihedral_packed(pred, inv, validate=False)
    raise ValueError(f"unknown back-mapping {backmap!r}; choose from {BACKMAPS}")


def predict_tta_linear(predict_linear, img, tta: str = "none", backmap: str = "spatial"):
    """Average of back-mapped unquantized predictions over the TTA set."""
    transforms = transforms_for(tta)
    acc = None
    for t in transforms:
        out = map_back(predict_linear(dihedral_rgb(img, t)), t, backmap)
        acc = out if acc is None else acc + out
    return acc / len(transforms)


def predict_tta(predict_linear, img, tta: str = "none", backmap: str = "spatial"):
    """12-bit packed RAW prediction with test-time augmentation.

    ``predict_linear`` maps an RGB image to unquantized packed RAW, e.g.
    ``model.predict_linear``. With ``tta="none"`` the result is bit-identical
    to quantizing a single plain prediction.
    """
    return quantize12(predict_tta_linear(predict_linear, img, tta, backmap))
