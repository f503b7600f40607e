"""L2 regression with a two-layer ReLU network trained by gradient descent."""

import logging
from dataclasses import dataclass
from typing import Any, Dict, Optional, Union

import numpy as np

from .exceptions import DegenerateDatasetError, DivergenceError, UnsupportedActivationError, ValidationError
from .interfaces import ActivationKind, GramReport, ModelParams, TrainRecord, TrainTrace
from .network import forward_batch, make_rng, output_jacobian
from .numerics import sym_eig_extremes

logger = logging.getLogger(__name__)

NORM_TOL = 1e-12
PARALLEL_TOL = 1e-12
MAX_RESAMPLES = 100
DIVERGENCE_FACTOR = 1e6
ETA_FRACTION = 0.5

EtaMode = Union[str, float]


@dataclass(frozen=True)
class Diagnostics:
    recursion: bool = True
    drift: bool = True
    gram_spectrum: bool = False


@dataclass(frozen=True, eq=False)
class RegressionDataset:
    points: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        points = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        targets = np.asarray(self.targets, dtype=np.float64).ravel()
        if targets.shape[0] != points.shape[0]:
            raise ValidationError("one target per point is required")
        points.setflags(write=False)
        targets.setflags(write=False)
        object.__setattr__(self, "points", points)
        object.__setattr__(self, "targets", targets)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def d_aug(self) -> int:
        return self.points.shape[1]

    def validate(self) -> None:
        """Check the augmented-input, target-range and no-parallel-pair assumptions."""
        validate_points(self.points)
        if np.any(np.abs(self.targets) > 1.0 + NORM_TOL):
            raise ValidationError("targets must satisfy |y_i| <= 1")

    def to_dict(self) -> Dict[str, Any]:
        return {"points": self.points.tolist(), "targets": self.targets.tolist()}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "RegressionDataset":
        return cls(points=data["points"], targets=data["targets"])


def validate_points(points: np.ndarray) -> None:
    """Augmented layout, norm at most sqrt(2), and no two parallel points."""
    if not np.all(np.isfinite(points)):
        raise ValidationError("points must be finite")
    if not np.allclose(points[:, -1], 1.0, rtol=0.0, atol=NORM_TOL):
        raise ValidationError("augmented points must end with a constant 1")
    norms = np.linalg.norm(points, axis=1)
    if np.any(norms > np.sqrt(2.0) + NORM_TOL):
        worst = int(np.argmax(norms))
        raise ValidationError(
            f"point {worst} has norm {norms[worst]:.6f} > sqrt(2)",
            details={"index": worst, "norm": float(norms[worst])},
        )
    unit = points / norms[:, None]
    cosines = unit @ unit.T
    np.fill_diagonal(cosines, 0.0)
    i, j = np.unravel_index(np.argmax(np.abs(cosines)), cosines.shape)
    if points.shape[0] > 1 and abs(cosines[i, j]) >= 1.0 - PARALLEL_TOL:
        raise ValidationError(
            f"points {min(i, j)} and {max(i, j)} are parallel",
            details={"pair": [int(min(i, j)), int(max(i, j))]},
        )


def make_regression_dataset(n: int, d: int, seed: int) -> RegressionDataset:
    """Inputs uniform on the unit sphere of R^d (augmented norm sqrt(2)), targets in [-1, 1]."""
    if n < 1 or d < 1:
        raise ValidationError("n and d must be positive")
    rng = make_rng(seed, 1)
    last_error = ""
    for attempt in range(1, MAX_RESAMPLES + 1):
        raw = rng.standard_normal((n, d))
        raw /= np.linalg.norm(raw, axis=1, keepdims=True)
        points = np.hstack([raw, np.ones((n, 1))])
        targets = rng.uniform(-1.0, 1.0, size=n)
        data = RegressionDataset(points=points, targets=targets)
        try:
            data.validate()
            return data
        except ValidationError as e:
            last_error = str(e)
            logger.debug("Resampling regression dataset (attempt %d): %s", attempt, e)
    raise DegenerateDatasetError(MAX_RESAMPLES, last_error)


def _check_dims(params: ModelParams, data: RegressionDataset) -> None:
    if params.d_aug != data.d_aug:
        raise ValidationError(
            f"model d_aug {params.d_aug} does not match dataset d_aug {data.d_aug}"
        )


def predict(params: ModelParams, data: RegressionDataset) -> np.ndarray:
    _check_dims(params, data)
    return forward_batch(params, data.points)


def regression_loss(params: ModelParams, data: RegressionDataset) -> float:
    residual = predict(params, data) - data.targets
    return 0.5 * float(residual @ residual)


def gram_finite(params: ModelParams, data: RegressionDataset) -> np.ndarray:
    """H_ij = (1/m) x_i.x_j #{r : w_r.x_i >= 0 and w_r.x_j >= 0}."""
    if params.activation is not ActivationKind.RELU:
        raise UnsupportedActivationError("gram_finite", params.activation.value)
    _check_dims(params, data)
    active = (data.points @ params.weights.T >= 0.0).astype(np.float64)
    gram = (data.points @ data.points.T) * (active @ active.T) / params.m
    return 0.5 * (gram + gram.T)


def relu_kernel(points: np.ndarray) -> np.ndarray:
    """x_i.x_j (pi - theta_ij) / (2 pi) with the arccos argument clamped."""
    inner = points @ points.T
    norms = np.linalg.norm(points, axis=1)
    cosine = np.clip(inner / np.outer(norms, norms), -1.0, 1.0)
    np.fill_diagonal(cosine, 1.0)
    kernel = inner * (np.pi - np.arccos(cosine)) / (2.0 * np.pi)
    return 0.5 * (kernel + kernel.T)


def gram_inf_relu(data: RegressionDataset, params: Optional[ModelParams] = None) -> GramReport:
    """Closed-form infinite-width Gram matrix; with ``params`` also ||H(0) - H_inf||_F."""
    data.validate()
    h_inf = relu_kernel(data.points)
    spectrum = sym_eig_extremes(h_inf)
    concentration = None
    if params is not None:
        concentration = float(np.linalg.norm(gram_finite(params, data) - h_inf))
    report = GramReport(
        h_inf=h_inf,
        lambda0=spectrum.lambda_min,
        spectral_norm_hinf=spectrum.spectral_norm,
        suggested_eta=ETA_FRACTION / spectrum.spectral_norm,
        concentration_error=concentration,
    )
    logger.info(
        "H_inf (closed form): lambda0=%.6e, ||H_inf||_2=%.6e, eta=%.6e",
        report.lambda0, report.spectral_norm_hinf, report.suggested_eta,
    )
    return report


def gd_step(params: ModelParams, data: RegressionDataset, eta: float) -> ModelParams:
    """w_r <- w_r - eta (a_r/sqrt(m)) sum_i (f(x_i) - y_i) x_i 1{w_r.x_i >= 0}."""
    if eta < 0:
        raise ValidationError("learning rate must be non-negative")
    residual = predict(params, data) - data.targets
    grad = output_jacobian(params, data.points).T @ residual
    return params.with_weights(params.weights - eta * grad.reshape(params.weights.shape))


def _resolve_eta(eta_mode: EtaMode, gram: Optional[GramReport]) -> float:
    if eta_mode == "auto":
        return gram.suggested_eta
    eta = float(eta_mode)
    if eta < 0 or not np.isfinite(eta):
        raise ValidationError(f"fixed learning rate must be a non-negative number, got {eta_mode!r}")
    return eta


def guard_divergence(trace: TrainTrace, record: TrainRecord, initial: float) -> None:
    """Abort on a non-finite loss or one above DIVERGENCE_FACTOR times the initial loss."""
    loss, k = record.loss, record.k
    if not np.isfinite(loss) or (initial > 0 and loss > DIVERGENCE_FACTOR * initial):
        trace.records.append(record)
        trace.diverged = True
        logger.error("Divergence at iteration %d: loss=%r (initial %r)", k, loss, initial)
        raise DivergenceError(k, loss, trace=trace)


def _drift(weights: np.ndarray, weights0: np.ndarray) -> float:
    return float(np.max(np.linalg.norm(weights - weights0, axis=1)))


def train_gd(
    params0: ModelParams,
    data: RegressionDataset,
    eta_mode: EtaMode = "auto",
    iters: int = 500,
    diagnostics: Diagnostics = Diagnostics(),
    gram: Optional[GramReport] = None,
) -> TrainTrace:
    """Full-batch GD on the regression loss with recursion and drift diagnostics.

    Record k holds the loss at w(k); its step fields (step_ratio, i1_norm, i2_gap)
    describe the update w(k) -> w(k+1), so the final record leaves them empty.
    """
    if iters < 1:
        raise ValidationError("iters must be at least 1")
    _check_dims(params0, data)
    if gram is None and eta_mode == "auto":
        gram = gram_inf_relu(data, params=params0 if params0.activation is ActivationKind.RELU else None)
    eta = _resolve_eta(eta_mode, gram)
    logger.info("Regression GD: n=%d, m=%d, eta=%.6e, iters=%d", data.n, params0.m, eta, iters)

    trace = TrainTrace(
        problem="regression", optimizer="gd", eta=eta, m=params0.m,
        n_samples=data.n, activation=params0.activation, gram=gram,
    )
    y = data.targets
    params = params0
    u = predict(params, data)
    initial_loss = 0.5 * float((u - y) @ (u - y))

    for k in range(iters + 1):
        residual = y - u
        res_sq = float(residual @ residual)
        record = TrainRecord(k=k, loss=0.5 * res_sq, res_norm=float(np.sqrt(res_sq)))
        if diagnostics.drift:
            record.drift_max = _drift(params.weights, params0.weights)
        guard_divergence(trace, record, initial_loss)

        if diagnostics.gram_spectrum or k < iters:
            G = output_jacobian(params, data.points)
        if diagnostics.gram_spectrum:
            record.lambda_min_h = sym_eig_extremes(G @ G.T).lambda_min
        if k == iters:
            trace.records.append(record)
            break

        delta = -eta * (G.T @ (-residual))
        new_params = params.with_weights(params.weights + delta.reshape(params.weights.shape))
        u_new = predict(new_params, data)
        new_res_sq = float((y - u_new) @ (y - u_new))
        if res_sq > 0:
            record.step_ratio = new_res_sq / res_sq
        if diagnostics.recursion:
            # I2 from the applied weight step against I2 from the indicator-form H(k).
            i2_direct = G @ (new_params.weights - params.weights).ravel()
            if params.activation is ActivationKind.RELU:
                gram_k = gram_finite(params, data)
            else:
                gram_k = G @ G.T
            i2_gram = eta * (gram_k @ residual)
            record.i1_norm = float(np.linalg.norm(u_new - u - i2_gram))
            scale = float(np.linalg.norm(i2_gram))
            record.i2_gap = float(np.linalg.norm(i2_direct - i2_gram)) / scale if scale > 0 else 0.0
        trace.records.append(record)
        if k % 50 == 0:
            logger.debug("iter %d: loss=%.6e ratio=%s", k, record.loss, record.step_ratio)
        params, u = new_params, u_new

    trace.final_params = params
    return trace
