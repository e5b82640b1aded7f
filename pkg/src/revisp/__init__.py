"""Reverse ISP toolkit: Bayer RAW utilities, a simulated camera pipeline,
parametric RGB-to-RAW models, metrics and a small benchmark CLI."""

__version__ = "0.1.0"

from .errors import RevispError
from .isp import ColorTransform, IspMetadata, forward_isp, inverse_isp
from .model import FitConfig, GlobalMatrixModel, PatchPair, ReverseModel, fit, fit_global_matrix
from .metrics import psnr, ssim
from .raw import dihedral_packed, pack_rggb, quantize12, unpack_rggb

__all__ = [
    "ColorTransform", "FitConfig", "GlobalMatrixModel", "IspMetadata", "PatchPair",
    "ReverseModel", "RevispError", "dihedral_packed", "fit", "fit_global_matrix",
    "forward_isp", "inverse_isp", "pack_rggb", "psnr", "quantize12", "ssim", "unpack_rggb",
]
