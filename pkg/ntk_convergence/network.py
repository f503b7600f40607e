"""Two-layer network f(x) = (1/sqrt(m)) sum_r a_r sigma(w_r . x) with fixed signs a_r."""

import logging
import math
from typing import Union

import numpy as np

from .exceptions import UnsupportedDerivativeError, ValidationError
from .interfaces import ActivationKind, ModelParams

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


def make_rng(seed: int, *stream: int) -> np.random.Generator:
    """Philox counter-based generator keyed by ``seed`` and optional stream tags."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF, *[int(s) for s in stream]]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def init_params(
    m: int, d_aug: int, activation: ActivationKind, seed: int, variance: float = 1.0,
) -> ModelParams:
    """w_r ~ N(0, variance I) and a_r ~ Unif{-1, +1}, deterministic in ``seed``."""
    if m < 1:
        raise ValidationError(f"hidden width must be at least 1, got {m}")
    if d_aug < 2:
        raise ValidationError(f"augmented dimension must be at least 2, got {d_aug}")
    if not variance > 0.0:
        raise ValidationError(f"initialization variance must be positive, got {variance}")
    rng = make_rng(seed)
    weights = rng.standard_normal((m, d_aug)) * math.sqrt(variance)
    signs = 2.0 * rng.integers(0, 2, size=m) - 1.0
    return ModelParams(weights=weights, signs=signs, activation=ActivationKind.parse(activation))


def activation_eval(kind: ActivationKind, order: int, z: ArrayLike) -> ArrayLike:
    """sigma^(order)(z) for order 0..3; the indicator is closed at zero."""
    kind = ActivationKind.parse(kind)
    if order < 0 or order > 3:
        raise UnsupportedDerivativeError(kind.value, order)
    z = np.asarray(z, dtype=np.float64)
    on = z >= 0.0

    if kind is ActivationKind.RELU:
        if order > 1:
            raise UnsupportedDerivativeError(kind.value, order)
        out = np.where(on, z, 0.0) if order == 0 else on.astype(np.float64)
    elif kind is ActivationKind.RELU_CUBED:
        zp = np.where(on, z, 0.0)
        if order == 0:
            out = zp ** 3
        elif order == 1:
            out = 3.0 * zp ** 2
        elif order == 2:
            out = 6.0 * zp
        else:
            out = 6.0 * on.astype(np.float64)
    else:
        t = np.tanh(z)
        sech2 = 1.0 - t * t
        if order == 0:
            out = t
        elif order == 1:
            out = sech2
        elif order == 2:
            out = -2.0 * t * sech2
        else:
            out = (6.0 * t * t - 2.0) * sech2
    return float(out) if out.ndim == 0 else out


def _check_points(params: ModelParams, x: np.ndarray) -> np.ndarray:
    pts = np.asarray(x, dtype=np.float64)
    if pts.shape[-1] != params.d_aug:
        raise ValidationError(
            f"point dimension {pts.shape[-1]} does not match d_aug = {params.d_aug}",
            details={"expected": params.d_aug, "got": int(pts.shape[-1])},
        )
    return pts


def preactivations(params: ModelParams, points: np.ndarray) -> np.ndarray:
    """z[i, r] = w_r . x_i for a batch of augmented points."""
    return _check_points(params, np.atleast_2d(points)) @ params.weights.T


def forward_batch(params: ModelParams, points: np.ndarray) -> np.ndarray:
    z = preactivations(params, points)
    return activation_eval(params.activation, 0, z) @ params.signs / np.sqrt(params.m)


def forward(params: ModelParams, x: np.ndarray) -> float:
    pts = _check_points(params, x)
    if pts.ndim != 1:
        raise ValidationError("forward expects a single augmented point")
    return float(forward_batch(params, pts[None, :])[0])


def output_jacobian(params: ModelParams, points: np.ndarray) -> np.ndarray:
    """Rows of d f(x_i) / d w, each of length m * d_aug (neuron-major blocks)."""
    pts = _check_points(params, np.atleast_2d(points))
    slope = activation_eval(params.activation, 1, pts @ params.weights.T)
    coeff = slope * params.signs / np.sqrt(params.m)
    return (coeff[:, :, None] * pts[:, None, :]).reshape(pts.shape[0], -1)


def output_grad(params: ModelParams, x: np.ndarray) -> np.ndarray:
    """Block r equals (a_r / sqrt(m)) sigma'(w_r . x) x."""
    pts = _check_points(params, x)
    if pts.ndim != 1:
        raise ValidationError("output_grad expects a single augmented point")
    return output_jacobian(params, pts[None, :])[0]
