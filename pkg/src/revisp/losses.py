"""Pixel, color and matrix losses for RAW reconstruction, with per-method combinations.

Each combined loss is a weighted sum of the terms below with the constants
in :class:`LossWeights`. Terms that need pretrained networks (LPIPS,
perceptual) or an externally defined mask loss are not provided; the
combinations drop them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError
from .isp import power_gamma
from .metrics import ssim


@dataclass(frozen=True)
class LossWeights:
    # ULite: L1, color ratio, transform matrix
    lambda_l1: float = 1.0
    lambda_color: float = 0.001
    lambda_m: float = 0.1
    # UNAFNet: MSE + SSIM + hard log
    w_mse: float = 1.0
    w_ssim: float = 0.05
    w_hardlog: float = 0.1
    # GAR2Net: L1 + L2
    lambda1: float = 1.0
    lambda2: float = 1.0
    # DualRAW: weights of the mask and LPIPS terms (both omitted here)
    tau1: float = 0.2
    tau2: float = 0.5
    # TDMFNet perceptual weight (perceptual term omitted)
    lambda_p: float = 0.01
    eps_hardlog: float = 1e-6
    eps_color: float = 1e-4
    eps_log: float = 1e-3


DEFAULT_WEIGHTS = LossWeights()
TEAMS = ("ulite", "unafnet", "gar2net", "dualraw", "tdmf")


def _pair(pred, target):
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise DimensionError(f"shape mismatch: {pred.shape} vs {target.shape}")
    return pred, target


def _mean(x: np.ndarray) -> float:
    # exactly rounded sum: independent of element order, so losses are
    # invariant under any permutation of the samples
    return math.fsum(x.ravel()) / x.size


def l1(pred, target) -> float:
    pred, target = _pair(pred, target)
    return _mean(np.abs(pred - target))


def mse(pred, target) -> float:
    pred, target = _pair(pred, target)
    return _mean((pred - target) ** 2)


def color_loss(pred, target, eps: float = DEFAULT_WEIGHTS.eps_color) -> float:
    """Mean ``|pred / (target + eps) - 1|``."""
    pred, target = _pair(pred, target)
    return _mean(np.abs(pred / (target + eps) - 1.0))


def matrix_loss(m_pred, m_true, kind: str = "abs") -> float:
    """Mean absolute (default) or squared difference of two 3x3 matrices."""
    m_pred = np.asarray(getattr(m_pred, "m", m_pred), dtype=np.float64)
    m_true = np.asarray(getattr(m_true, "m", m_true), dtype=np.float64)
    if m_pred.shape != m_true.shape:
        raise DimensionError(f"shape mismatch: {m_pred.shape} vs {m_true.shape}")
    d = m_pred - m_true
    if kind == "abs":
        return _mean(np.abs(d))
    if kind == "mse":
        return _mean(d * d)
    raise ValueError(f"kind must be 'abs' or 'mse', got {kind!r}")


def hard_log_loss(pred, target, eps: float = DEFAULT_WEIGHTS.eps_hardlog) -> float:
    """Mean ``-log(1 - min(|pred - target|, 1) + eps)``.

    Equals ``-log(1 + eps)``, slightly below zero, at a perfect match.
    """
    pred, target = _pair(pred, target)
    return _mean(-np.log(1.0 - np.minimum(np.abs(pred - target), 1.0) + eps))


def log_l2_loss(pred, target, eps: float = DEFAULT_WEIGHTS.eps_log) -> float:
    """Squared error between ``ln(x + eps)`` of both arguments."""
    pred, target = _pair(pred, target)
    if np.any(pred < 0) or np.any(target < 0):
        raise DomainError("log-L2 loss needs nonnegative inputs")
    d = np.log(pred + eps) - np.log(target + eps)
    return _mean(d * d)


def clipped_l1_loss(pred, target) -> float:
    pred, target = _pair(pred, target)
    return _mean(np.abs(np.clip(pred, 0.0, 1.0) - target))


def ssim_loss(pred, target) -> float:
    return 1.0 - ssim(pred, target)


def loss_terms(team: str, pred, target, *, m_pred=None, m_true=None, paths=None,
               gamma: float = 2.2, weights: LossWeights = DEFAULT_WEIGHTS) -> list[tuple[str, float, float]]:
    """Named ``(term, weight, value)`` triples making up a team's loss.

    ``ulite`` includes the matrix term only when both matrices are given.
    ``tdmf`` needs ``paths``: the three path outputs, where path 2 predicts
    the RAW target in the inverse-gamma domain ``target**(1/gamma)``;
    ``pred`` is the fused output.
    """
    if team == "ulite":
        terms = [("l1", weights.lambda_l1, l1(pred, target)),
                 ("color", weights.lambda_color, color_loss(pred, target, weights.eps_color))]
        if m_pred is not None and m_true is not None:
            terms.append(("matrix", weights.lambda_m, matrix_loss(m_pred, m_true)))
        return terms
    if team == "unafnet":
        return [("mse", weights.w_mse, mse(pred, target)),
                ("ssim", weights.w_ssim, ssim_loss(pred, target)),
                ("hardlog", weights.w_hardlog, hard_log_loss(pred, target, weights.eps_hardlog))]
    if team == "gar2net":
        return [("l1", weights.lambda1, l1(pred, target)),
                ("l2", weights.lambda2, mse(pred, target))]
    if team == "dualraw":
        return [("log_l2", 1.0, log_l2_loss(pred, target, weights.eps_log)),
                ("clipped_l1", 1.0, clipped_l1_loss(pred, target))]
    if team == "tdmf":
        if paths is None or len(paths) != 3:
            raise ValueError("tdmf loss needs three path predictions")
        _, target = _pair(pred, target)
        target_inv = power_gamma(target, gamma, "invert")
        return [("path0", 1.0, l1(paths[0], target)),
                ("path1", 1.0, l1(paths[1], target)),
                ("path2", 1.0, l1(paths[2], target_inv)),
                ("fusion", 1.0, l1(pred, target))]
    raise ValueError(f"unknown loss selector {team!r}; choose from {TEAMS}")


def combined_loss(team: str, pred, target, **kwargs) -> float:
    total = 0.0
    for _, weight, value in loss_terms(team, pred, target, **kwargs):
        total += weight * value
    return total
