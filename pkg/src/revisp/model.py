"""Metadata-free parametric reverse ISP.

A :class:`ReverseModel` holds ``K`` gamma candidates. Candidate ``k`` maps
linearized sRGB into its own gamma domain, applies an affine color map and
relinearizes::

    r_k   = clamp(A_k @ x_lin**gamma_k + b_k, 0, 1)
    yhat  = sum_k w_k * r_k**gamma_k            (w on the probability simplex)

Only the row of ``A_k``/``b_k`` belonging to a Bayer site's color is ever
evaluated, so the model is fitted and applied on co-sited samples: one
linear RGB triple, one color index and one RAW value per packed sample.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, DomainError, FormatError, IllConditionedFitError
from .isp import ColorTransform, inverse_isp, inverse_isp_linear, srgb_decode
from .raw import CHANNEL_COLOR, bayer_sites, check_packed, check_rgb, quantize12

log = logging.getLogger(__name__)

DEFAULT_GAMMAS = (1.0, 2.2, 2.4)
MODEL_FORMAT_VERSION = 1
FIT_LOSSES = ("mse", "l1", "gar2net", "hardlog")
HARDLOG_EPS = 1e-6


@dataclass
class ReverseModel:
    gammas: np.ndarray
    A: np.ndarray
    b: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.gammas = np.array(self.gammas, dtype=np.float64).reshape(-1)
        K = self.gammas.size
        self.A = np.array(self.A, dtype=np.float64).reshape(K, 3, 3)
        self.b = np.array(self.b, dtype=np.float64).reshape(K, 3)
        self.weights = np.array(self.weights, dtype=np.float64).reshape(K)
        if K < 1:
            raise DimensionError("a model needs at least one gamma candidate")
        if not np.all(self.gammas > 0):
            raise DomainError("gammas must be strictly positive")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-9:
            raise DomainError("weights must be nonnegative and sum to 1")

    @property
    def K(self) -> int:
        return self.gammas.size

    @classmethod
    def identity(cls, gammas=(1.0,)) -> "ReverseModel":
        """Identity maps with uniform weights."""
        K = len(gammas)
        return cls(gammas, np.tile(np.eye(3), (K, 1, 1)), np.zeros((K, 3)), np.full(K, 1.0 / K))

    def copy(self) -> "ReverseModel":
        return ReverseModel(self.gammas.copy(), self.A.copy(), self.b.copy(), self.weights.copy())

    def predict_linear(self, img: np.ndarray) -> np.ndarray:
        return predict_linear(self, img)

    def predict(self, img: np.ndarray) -> np.ndarray:
        return predict(self, img)


@dataclass(frozen=True)
class GlobalMatrixModel:
    """Single-matrix model: RAW = M^-1 applied to linearized sRGB."""

    transform: ColorTransform

    def predict_linear(self, img: np.ndarray) -> np.ndarray:
        return inverse_isp_linear(img, self.transform.as_metadata())

    def predict(self, img: np.ndarray) -> np.ndarray:
        return inverse_isp(img, self.transform.as_metadata())


@dataclass
class FitConfig:
    max_outer_iters: int = 500
    weight_step: float = 1.0
    tol: float = 1e-12
    seed: int = 0
    loss: str = "mse"
    max_samples: int = 200_000

    def __post_init__(self):
        if self.max_outer_iters < 1:
            raise ValueError("max_outer_iters must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not self.weight_step > 0:
            raise ValueError("weight_step must be positive")
        if self.loss not in FIT_LOSSES:
            raise ValueError(f"unknown fit loss {self.loss!r}; choose from {FIT_LOSSES}")


@dataclass
class PatchPair:
    """An RGB crop and the RAW crop it covers (RGB is exactly twice the size)."""

    rgb_patch: np.ndarray
    raw_patch: np.ndarray
    stratum: int = -1
    origin: tuple = field(default=(0, 0))

    def __post_init__(self):
        if self.rgb_patch.shape[:2] != (2 * self.raw_patch.shape[0], 2 * self.raw_patch.shape[1]):
            raise DimensionError(
                f"RGB patch {self.rgb_patch.shape[:2]} is not twice RAW patch {self.raw_patch.shape[:2]}")


@dataclass
class Samples:
    """Co-sited training samples.

    ``x_lin`` holds linearized sRGB triples ``(N, 3)``, ``color`` the RGB
    index each RAW sample measures and ``target`` the RAW values.
    """

    x_lin: np.ndarray
    color: np.ndarray
    target: np.ndarray

    def __len__(self):
        return self.target.size

    def subset(self, idx) -> "Samples":
        return Samples(self.x_lin[idx], self.color[idx], self.target[idx])


@dataclass
class ModelGradient:
    weights: np.ndarray
    A: np.ndarray
    b: np.ndarray


def image_samples(img: np.ndarray) -> tuple[np.ndarray, np.ndarray, tuple]:
    """Linearized co-sited triples for every packed sample of ``img``."""
    sites = bayer_sites(srgb_decode(img))
    h, w = sites.shape[:2]
    return sites.reshape(-1, 3), np.tile(CHANNEL_COLOR, h * w), (h, w, 4)


def collect_samples(pairs) -> Samples:
    if not pairs:
        raise ValueError("need at least one patch pair")
    xs, cs, ys = [], [], []
    for pair in pairs:
        raw = check_packed(pair.raw_patch)
        x, c, shape = image_samples(check_rgb(pair.rgb_patch))
        if shape != raw.shape:
            raise DimensionError(f"RGB patch does not cover RAW patch {raw.shape}")
        xs.append(x)
        cs.append(c)
        ys.append(raw.reshape(-1))
    return Samples(np.concatenate(xs), np.concatenate(cs), np.concatenate(ys))


# --- forward evaluation --------------------------------------------------------

def _candidate(model: ReverseModel, k: int, x_lin, color):
    """Gamma-domain features, pre-clamp response and relinearized output of candidate k."""
    g = x_lin ** model.gammas[k]
    u = np.einsum("nj,nj->n", g, model.A[k][color]) + model.b[k][color]
    r = np.clip(u, 0.0, 1.0)
    return g, u, r, r ** model.gammas[k]


def blend(model: ReverseModel, x_lin: np.ndarray, color: np.ndarray) -> np.ndarray:
    """Blended RAW estimate for co-sited samples (no quantization)."""
    out = None
    for k in range(model.K):
        term = model.weights[k] * _candidate(model, k, x_lin, color)[3]
        out = term if out is None else out + term
    return out


def predict_linear(model: ReverseModel, img: np.ndarray) -> np.ndarray:
    x, color, shape = image_samples(check_rgb(img))
    return blend(model, x, color).reshape(shape)


def predict(model: ReverseModel, img: np.ndarray) -> np.ndarray:
    """Packed RAW estimate of an sRGB image, quantized to 12 bits."""
    return quantize12(predict_linear(model, img))


# --- objective -------------------------------------------------------------------

def pointwise_loss(d: np.ndarray, loss: str):
    """Per-sample loss values and their derivatives w.r.t. the residual ``d``."""
    if loss == "mse":
        return d * d, 2.0 * d
    if loss == "l1":
        return np.abs(d), np.sign(d)
    if loss == "gar2net":
        return np.abs(d) + d * d, np.sign(d) + 2.0 * d
    if loss == "hardlog":
        a = np.minimum(np.abs(d), 1.0)
        inner = 1.0 - a + HARDLOG_EPS
        return -np.log(inner), np.where(np.abs(d) < 1.0, np.sign(d) / inner, 0.0)
    raise ValueError(f"unknown fit loss {loss!r}; choose from {FIT_LOSSES}")


def objective(model: ReverseModel, samples: Samples, loss: str = "mse") -> float:
    d = blend(model, samples.x_lin, samples.color) - samples.target
    return float(np.mean(pointwise_loss(d, loss)[0]))


def objective_and_gradient(model: ReverseModel, samples: Samples, loss: str = "mse"):
    """Mean loss between blended output and targets, with its analytic gradient.

    Clamped responses get zero subgradient. The weight gradient is the
    unconstrained one; callers project onto the simplex themselves.
    """
    n = len(samples)
    if n == 0:
        raise ValueError("objective needs a nonempty sample")
    x, color = samples.x_lin, samples.color
    parts = [_candidate(model, k, x, color) for k in range(model.K)]
    yhat = None
    for k, (_, _, _, yk) in enumerate(parts):
        term = model.weights[k] * yk
        yhat = term if yhat is None else yhat + term
    values, dvalues = pointwise_loss(yhat - samples.target, loss)
    dy = dvalues / n

    gw = np.empty(model.K)
    gA = np.zeros_like(model.A)
    gb = np.zeros_like(model.b)
    for k, (g, u, r, yk) in enumerate(parts):
        gamma = model.gammas[k]
        gw[k] = dy @ yk
        interior = (u > 0.0) & (u < 1.0)
        du = np.zeros(n)
        du[interior] = dy[interior] * model.weights[k] * gamma * r[interior] ** (gamma - 1.0)
        for c in range(3):
            sel = color == c
            if np.any(sel):
                gA[k, c] = du[sel] @ g[sel]
                gb[k, c] = du[sel].sum()
    return float(np.mean(values)), ModelGradient(gw, gA, gb)


# --- fitting -------------------------------------------------------------------------

def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {w : w >= 0, sum(w) = 1} by sort-and-threshold."""
    v = np.asarray(v, dtype=np.float64)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / ind > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    w = np.maximum(v - theta, 0.0)
    # exact renormalization keeps the sum within rounding of 1
    return w / w.sum()


def _solve_candidate_map(g, color, target, gamma, k):
    """Least-squares affine map for one candidate, one regression per color row."""
    A = np.zeros((3, 3))
    b = np.zeros(3)
    t = np.clip(target, 0.0, 1.0) ** (1.0 / gamma)
    for c in range(3):
        sel = color == c
        design = np.column_stack([g[sel], np.ones(int(sel.sum()))])
        if design.shape[0] < 4:
            raise IllConditionedFitError(
                f"candidate {k} (gamma={gamma:g}): only {design.shape[0]} samples for color {c}", k)
        coef, _, rank, sv = np.linalg.lstsq(design, t[sel], rcond=None)
        if rank < 4 or sv[-1] <= sv[0] * 1e-10:
            raise IllConditionedFitError(
                f"candidate {k} (gamma={gamma:g}): rank-deficient design for color {c}", k)
        A[c], b[c] = coef[:3], coef[3]
    return A, b


def fit(pairs, K: int, gammas, cfg: FitConfig | None = None, init_weights=None, samples=None):
    """Fit a gamma-mixture model by least squares plus projected gradient.

    Each outer iteration has two blocks:

    (a) maps: every candidate's affine map is solved by least squares,
        regressing the gamma-domain target ``y**(1/gamma_k)`` on
        ``x_lin**gamma_k`` separately for each color row. Each candidate is
        supervised against the RAW target on its own, so this block does
        not depend on the weights; its solution is computed once and reused.
    (b) weights: one projected-gradient step on the configured loss of the
        blended output, with backtracking and simplex projection. Accepted
        steps strictly decrease the objective; the step length grows after
        each success.

    Stops when an iteration lowers the objective by no more than ``cfg.tol``
    or after ``cfg.max_outer_iters``. Returns ``(model, history)`` where
    ``history`` is the non-increasing objective sequence of accepted
    iterates and the model is the one with the lowest objective seen.
    """
    cfg = cfg or FitConfig()
    gammas = np.asarray(gammas, dtype=np.float64).reshape(-1)
    if gammas.size != K:
        raise ValueError(f"expected {K} gammas, got {gammas.size}")
    if samples is None:
        samples = collect_samples(pairs)
    if len(samples) > cfg.max_samples:
        rng = np.random.default_rng(cfg.seed)
        samples = samples.subset(np.sort(rng.choice(len(samples), cfg.max_samples, replace=False)))

    x, color, y = samples.x_lin, samples.color, samples.target
    A = np.empty((K, 3, 3))
    b = np.empty((K, 3))
    for k in range(K):
        A[k], b[k] = _solve_candidate_map(x ** gammas[k], color, y, gammas[k], k)
    w = np.full(K, 1.0 / K) if init_weights is None else project_simplex(init_weights)
    model = ReverseModel(gammas, A, b, w)

    # candidate outputs are fixed once the maps are, so the weight block
    # only needs this (N, K) matrix
    outputs = np.column_stack([_candidate(model, k, x, color)[3] for k in range(K)])

    def weight_objective(wv):
        vals, dvals = pointwise_loss(outputs @ wv - y, cfg.loss)
        return float(np.mean(vals)), outputs.T @ dvals / y.size

    obj, grad = weight_objective(model.weights)
    history = [obj]
    step = cfg.weight_step
    for it in range(cfg.max_outer_iters):
        if K == 1:
            break
        accepted = False
        while step > 1e-14:
            cand = project_simplex(model.weights - step * grad)
            cand_obj, cand_grad = weight_objective(cand)
            if cand_obj < obj:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        decrease = obj - cand_obj
        model.weights, obj, grad = cand, cand_obj, cand_grad
        history.append(obj)
        step *= 2.0
        log.debug("outer iteration %d: objective %.6e", it, obj)
        if decrease <= cfg.tol:
            break
    return model, history


def fit_global_matrix(pairs=None, samples: tuple | None = None) -> ColorTransform:
    """Least-squares M with ``srgb_decode(rgb) ~= M @ raw`` per 2x2 block.

    RAW triples use the mean of G1 and G2; the RGB side is the block mean of
    the decoded image so both sides describe the same footprint.
    """
    if samples is None:
        raw_rgb, lin_rgb = block_color_samples(pairs)
    else:
        raw_rgb, lin_rgb = samples
    coef, _, rank, sv = np.linalg.lstsq(raw_rgb, lin_rgb, rcond=None)
    if rank < 3 or sv[-1] <= sv[0] * 1e-10:
        raise IllConditionedFitError("global matrix fit: RAW colors do not span 3 dimensions")
    return ColorTransform(coef.T)


def block_color_samples(pairs):
    if not pairs:
        raise ValueError("need at least one patch pair")
    raws, rgbs = [], []
    for pair in pairs:
        raw = check_packed(pair.raw_patch)
        lin = srgb_decode(check_rgb(pair.rgb_patch))
        h, w, _ = raw.shape
        raws.append(np.stack([raw[..., 0], 0.5 * (raw[..., 1] + raw[..., 2]), raw[..., 3]],
                             axis=-1).reshape(-1, 3))
        rgbs.append(lin.reshape(h, 2, w, 2, 3).mean(axis=(1, 3)).reshape(-1, 3))
    return np.concatenate(raws), np.concatenate(rgbs)


# --- serialization ------------------------------------------------------------------------

def model_to_dict(model) -> dict:
    if isinstance(model, GlobalMatrixModel):
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "kind": "global-matrix",
            "M": [float(v) for v in model.transform.m.ravel()],
        }
    return {
        "format_version": MODEL_FORMAT_VERSION,
        "kind": "gamma-mixture",
        "K": model.K,
        "gammas": [float(v) for v in model.gammas],
        "maps": [
            {"A": [float(v) for v in model.A[k].ravel()], "b": [float(v) for v in model.b[k]]}
            for k in range(model.K)
        ],
        "weights": [float(v) for v in model.weights],
    }


def model_from_dict(doc: dict):
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise FormatError(f"unsupported model format_version {doc.get('format_version')!r}")
    kind = doc.get("kind")
    try:
        if kind == "global-matrix":
            return GlobalMatrixModel(ColorTransform(np.array(doc["M"], dtype=np.float64).reshape(3, 3)))
        if kind == "gamma-mixture":
            K = int(doc["K"])
            maps = doc["maps"]
            if len(maps) != K or len(doc["gammas"]) != K or len(doc["weights"]) != K:
                raise FormatError("model arrays disagree with K")
            return ReverseModel(
                doc["gammas"],
                [np.array(m["A"], dtype=np.float64).reshape(3, 3) for m in maps],
                [np.array(m["b"], dtype=np.float64).reshape(3) for m in maps],
                doc["weights"],
            )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"malformed model document: {exc}") from exc
    raise FormatError(f"unknown model kind {kind!r}")


def dumps_model(model) -> str:
    # repr-based float output is the shortest string that round-trips exactly
    return json.dumps(model_to_dict(model), indent=2) + "\n"


def loads_model(text: str):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"model file is not valid JSON: {exc}") from exc
    return model_from_dict(doc)


def save_model(model, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_model(model))


def load_model(path):
    with open(path, encoding="utf-8") as fh:
        return loads_model(fh.read())
