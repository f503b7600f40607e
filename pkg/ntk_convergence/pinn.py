"""Physics-informed two-layer networks for the heat-type equation u_t - Laplace(u) = f.

Collocation points use the layout (x0 time, x1..xd space, 1 bias) and the loss is
normalized per point set, L = (||s||^2 + ||h||^2) / 2 with s = interior residuals
scaled by 1/sqrt(n1) and h = boundary residuals scaled by 1/sqrt(n2).
"""

import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, Dict, Optional, Tuple

import numpy as np

from .exceptions import (
    CatalogError,
    DegenerateDatasetError,
    RankDeficiencyError,
    SingularSystemError,
    UnsupportedActivationError,
    ValidationError,
)
from .interfaces import ActivationKind, GramReport, ModelParams, TrainRecord, TrainTrace
from .network import activation_eval, forward_batch, make_rng
from .numerics import solve_spd, sym_eig_extremes
from .regression import (
    ETA_FRACTION,
    MAX_RESAMPLES,
    Diagnostics,
    EtaMode,
    guard_divergence,
    validate_points,
)

logger = logging.getLogger(__name__)

DEFAULT_N_MC = 50_000
JACKKNIFE_GROUPS = 100
MC_CHUNK = 2_000
NGD_DEFAULT_ETA = 0.5
LOSS_FLOOR = 1e-24
NGD_CORRECTIONS = 3

Field = Callable[[np.ndarray], np.ndarray]


@dataclass(frozen=True)
class PdeInstance:
    """Manufactured solution u* on [0, T] x [0, side]^d with its exact u*_t and Laplacian."""
    name: str
    d: int
    T: float
    side: float
    solution: Field
    time_derivative: Field
    laplacian: Field

    def _coords(self, points: np.ndarray) -> np.ndarray:
        return np.atleast_2d(np.asarray(points, dtype=np.float64))[:, : self.d + 1]

    def source(self, points: np.ndarray) -> np.ndarray:
        """f = u*_t - Laplace(u*)."""
        x = self._coords(points)
        return self.time_derivative(x) - self.laplacian(x)

    def boundary_data(self, points: np.ndarray) -> np.ndarray:
        return self.solution(self._coords(points))


def _space_sum(x: np.ndarray) -> np.ndarray:
    return np.sum(x[:, 1:], axis=1)


def _poly_sine(d: int) -> Tuple[Field, Field, Field]:
    return (
        lambda x: x[:, 0] + np.sin(_space_sum(x)),
        lambda x: np.ones(x.shape[0]),
        lambda x: -d * np.sin(_space_sum(x)),
    )


def _zero(d: int) -> Tuple[Field, Field, Field]:
    zeros = lambda x: np.zeros(x.shape[0])  # noqa: E731
    return zeros, zeros, zeros


def _quadratic(d: int) -> Tuple[Field, Field, Field]:
    beta = 1.2
    return (
        lambda x: 1.0 + np.sum(x[:, 1:] ** 2, axis=1) + beta * x[:, 0],
        lambda x: np.full(x.shape[0], beta),
        lambda x: np.full(x.shape[0], 2.0 * d),
    )


def _heat_mode(d: int) -> Tuple[Field, Field, Field]:
    rate = d * np.pi ** 2

    def u(x):
        return np.exp(-rate * x[:, 0]) * np.prod(np.sin(np.pi * x[:, 1:]), axis=1)

    return u, lambda x: -rate * u(x), lambda x: -rate * u(x)


CATALOG: Dict[str, Callable[[int], Tuple[Field, Field, Field]]] = {
    "poly-sine": _poly_sine,
    "zero": _zero,
    "quadratic": _quadratic,
    "heat-mode": _heat_mode,
}


def make_instance(name: str, d: int) -> PdeInstance:
    """Built-in instance on the box scaled so that ||(x0, x)||_2 <= 1."""
    if name not in CATALOG:
        raise CatalogError(name, sorted(CATALOG))
    if d < 1:
        raise ValidationError(f"spatial dimension must be at least 1, got {d}")
    side = 1.0 / math.sqrt(d + 1)
    u, u_t, lap = CATALOG[name](d)
    return PdeInstance(name=name, d=d, T=side, side=side, solution=u, time_derivative=u_t, laplacian=lap)


@dataclass(frozen=True, eq=False)
class PinnDataset:
    interior: np.ndarray
    boundary: np.ndarray
    f_values: np.ndarray
    g_values: np.ndarray
    instance: str = "custom"
    seed: Optional[int] = None

    def __post_init__(self):
        interior = np.atleast_2d(np.asarray(self.interior, dtype=np.float64))
        boundary = np.atleast_2d(np.asarray(self.boundary, dtype=np.float64))
        f_values = np.asarray(self.f_values, dtype=np.float64).ravel()
        g_values = np.asarray(self.g_values, dtype=np.float64).ravel()
        if interior.shape[1] != boundary.shape[1] or interior.shape[1] < 3:
            raise ValidationError("interior and boundary points need the same layout (x0, x, 1)")
        if f_values.shape[0] != interior.shape[0] or g_values.shape[0] != boundary.shape[0]:
            raise ValidationError("f_values / g_values must match the point counts")
        for name, arr in (("interior", interior), ("boundary", boundary),
                          ("f_values", f_values), ("g_values", g_values)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n1(self) -> int:
        return self.interior.shape[0]

    @property
    def n2(self) -> int:
        return self.boundary.shape[0]

    @property
    def n_total(self) -> int:
        return self.n1 + self.n2

    @property
    def d_aug(self) -> int:
        return self.interior.shape[1]

    @property
    def d(self) -> int:
        return self.d_aug - 2

    def validate(self) -> None:
        """Augmented norms at most sqrt(2) and no two parallel points across both sets."""
        if self.n1 < 1 or self.n2 < 1:
            raise ValidationError("a PINN dataset needs interior and boundary points")
        validate_points(np.vstack([self.interior, self.boundary]))

    def to_dict(self) -> Dict[str, Any]:
        return {
            "instance": self.instance,
            "seed": self.seed,
            "interior": self.interior.tolist(),
            "boundary": self.boundary.tolist(),
            "f_values": self.f_values.tolist(),
            "g_values": self.g_values.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "PinnDataset":
        return cls(
            interior=data["interior"],
            boundary=data["boundary"],
            f_values=data["f_values"],
            g_values=data["g_values"],
            instance=data.get("instance", "custom"),
            seed=data.get("seed"),
        )


def _augment(coords: np.ndarray) -> np.ndarray:
    return np.hstack([coords, np.ones((coords.shape[0], 1))])


def sample_dataset(instance: PdeInstance, n1: int, n2: int, seed: int) -> PinnDataset:
    """Uniform interior points and measure-proportional boundary points.

    The initial slice {0} x Omega has measure side^d and the lateral boundary
    [0, T] x dOmega has measure 2d side^d, so the initial slice receives
    round-half-up(n2 / (1 + 2d)) points.
    """
    if n1 < 1 or n2 < 1:
        raise ValidationError("n1 and n2 must be at least 1")
    d, side, T = instance.d, instance.side, instance.T
    n_init = int(math.floor(n2 / (1 + 2 * d) + 0.5))
    n_lateral = n2 - n_init
    rng = make_rng(seed, 2)
    last_error = ""
    for attempt in range(1, MAX_RESAMPLES + 1):
        interior = np.hstack([rng.uniform(0.0, T, (n1, 1)), rng.uniform(0.0, side, (n1, d))])

        initial = np.hstack([np.zeros((n_init, 1)), rng.uniform(0.0, side, (n_init, d))])
        lateral = np.hstack([rng.uniform(0.0, T, (n_lateral, 1)), rng.uniform(0.0, side, (n_lateral, d))])
        faces = rng.integers(0, 2 * d, size=n_lateral)
        lateral[np.arange(n_lateral), 1 + faces // 2] = (faces % 2) * side
        boundary = np.vstack([initial, lateral])

        data = PinnDataset(
            interior=_augment(interior),
            boundary=_augment(boundary),
            f_values=instance.source(interior),
            g_values=instance.boundary_data(boundary),
            instance=instance.name,
            seed=seed,
        )
        try:
            data.validate()
            return data
        except ValidationError as e:
            last_error = str(e)
            logger.debug("Resampling PINN dataset (attempt %d): %s", attempt, e)
    raise DegenerateDatasetError(MAX_RESAMPLES, last_error)


@dataclass(frozen=True)
class ResidualPair:
    s: np.ndarray
    h: np.ndarray

    @property
    def stacked(self) -> np.ndarray:
        return np.concatenate([self.s, self.h])

    @property
    def loss(self) -> float:
        return 0.5 * (float(self.s @ self.s) + float(self.h @ self.h))


def _require_smooth(params_or_kind, operation: str) -> ActivationKind:
    kind = params_or_kind.activation if isinstance(params_or_kind, ModelParams) else params_or_kind
    kind = ActivationKind.parse(kind)
    if kind is ActivationKind.RELU:
        raise UnsupportedActivationError(operation, kind.value)
    return kind


def _row_scales(data: PinnDataset, normalized: bool) -> Tuple[float, float]:
    if not normalized:
        return 1.0, 1.0
    return 1.0 / math.sqrt(data.n1), 1.0 / math.sqrt(data.n2)


def _check_dims(params: ModelParams, data: PinnDataset) -> None:
    if params.d_aug != data.d_aug:
        raise ValidationError(
            f"model d_aug {params.d_aug} does not match dataset d_aug {data.d_aug}"
        )


def residuals(params: ModelParams, data: PinnDataset, normalized: bool = True) -> ResidualPair:
    """s_p = (phi_t - Laplace(phi) - f)(x_p) / sqrt(n1), h_j = (phi - g)(y_j) / sqrt(n2).

    ``normalized=False`` drops the 1 / sqrt(n1) and 1 / sqrt(n2) factors.
    """
    kind = _require_smooth(params, "residuals")
    _check_dims(params, data)
    W, d = params.weights, data.d
    z = data.interior @ W.T
    scale = params.signs / np.sqrt(params.m)
    phi_t = (activation_eval(kind, 1, z) * W[:, 0]) @ scale
    laplace = (activation_eval(kind, 2, z) * np.sum(W[:, 1:d + 1] ** 2, axis=1)) @ scale
    interior_scale, boundary_scale = _row_scales(data, normalized)
    s = (phi_t - laplace - data.f_values) * interior_scale
    h = (forward_batch(params, data.boundary) - data.g_values) * boundary_scale
    return ResidualPair(s=s, h=h)


def pinn_loss(params: ModelParams, data: PinnDataset) -> float:
    return residuals(params, data).loss


def _interior_blocks(kind: ActivationKind, W: np.ndarray, X: np.ndarray, d: int) -> np.ndarray:
    """Per-neuron gradients of phi_t - Laplace(phi) without the a_r / sqrt(m) factor.

    block[p, r] = s2 w_r0 x_p + s1 e_time - s3 |w_r1|^2 x_p - 2 s2 (0, w_r1, 0)
    with s_k = sigma^(k)(w_r . x_p) and w_r1 the spatial weights only.
    """
    z = X @ W.T
    s1 = activation_eval(kind, 1, z)
    s2 = activation_eval(kind, 2, z)
    s3 = activation_eval(kind, 3, z)
    spatial = W[:, 1:d + 1]
    coeff = s2 * W[:, 0] - s3 * np.sum(spatial ** 2, axis=1)
    blocks = coeff[:, :, None] * X[:, None, :]
    blocks[:, :, 0] += s1
    blocks[:, :, 1:d + 1] -= 2.0 * s2[:, :, None] * spatial[None, :, :]
    return blocks


def _boundary_blocks(kind: ActivationKind, W: np.ndarray, Y: np.ndarray) -> np.ndarray:
    return activation_eval(kind, 1, Y @ W.T)[:, :, None] * Y[:, None, :]


def jacobian(params: ModelParams, data: PinnDataset, normalized: bool = True) -> np.ndarray:
    """(n1 + n2) x m(d+2) Jacobian of the stacked residual (s; h)."""
    kind = _require_smooth(params, "jacobian")
    _check_dims(params, data)
    W = params.weights
    signs = params.signs[None, :, None] / np.sqrt(params.m)
    interior_scale, boundary_scale = _row_scales(data, normalized)
    interior = _interior_blocks(kind, W, data.interior, data.d) * signs * interior_scale
    boundary = _boundary_blocks(kind, W, data.boundary) * signs * boundary_scale
    return np.concatenate([interior, boundary], axis=0).reshape(data.n_total, -1)


def gram_pinn(J: np.ndarray) -> np.ndarray:
    """H = J J^T, identical to D^T D with D = J^T."""
    J = np.asarray(J, dtype=np.float64)
    gram = J @ J.T
    return 0.5 * (gram + gram.T)


def gram_inf_mc(
    data: PinnDataset,
    activation: ActivationKind,
    n_mc: int = DEFAULT_N_MC,
    seed: int = 0,
    params: Optional[ModelParams] = None,
    normalized: bool = True,
) -> GramReport:
    """Monte Carlo estimate of H_inf = E_{w ~ N(0, I)} H(w) with a jackknife stderr on lambda0.

    Draws are split into contiguous groups; the delete-a-group jackknife over those
    groups gives the standard error reported in ``estimator_stderr``. With
    ``normalized=False`` the rows carry no 1 / sqrt(n1), 1 / sqrt(n2) factors, so for
    n1 = n2 = n the unnormalized matrix is n times the normalized one.
    """
    kind = _require_smooth(activation, "gram_inf_mc")
    if n_mc < 100:
        raise ValidationError(f"n_mc must be at least 100, got {n_mc}")
    rng = make_rng(seed, 3)
    n, d_aug = data.n_total, data.d_aug
    interior_scale, boundary_scale = _row_scales(data, normalized)
    row_scale = np.concatenate([np.full(data.n1, interior_scale), np.full(data.n2, boundary_scale)])
    groups = min(JACKKNIFE_GROUPS, n_mc)
    sizes = [n_mc // groups + (1 if g < n_mc % groups else 0) for g in range(groups)]
    sums = np.zeros((groups, n, n))
    for g, size in enumerate(sizes):
        remaining = size
        while remaining > 0:
            chunk = min(MC_CHUNK, remaining)
            W = rng.standard_normal((chunk, d_aug))
            blocks = np.concatenate([
                _interior_blocks(kind, W, data.interior, data.d),
                _boundary_blocks(kind, W, data.boundary),
            ], axis=0) * row_scale[:, None, None]
            flat = blocks.reshape(n, -1)
            sums[g] += flat @ flat.T
            remaining -= chunk

    total = sums.sum(axis=0)
    h_inf = total / n_mc
    h_inf = 0.5 * (h_inf + h_inf.T)
    spectrum = sym_eig_extremes(h_inf)

    sizes_arr = np.asarray(sizes, dtype=np.float64)
    leave_out = np.array([
        sym_eig_extremes(0.5 * ((total - sums[g]) + (total - sums[g]).T) / (n_mc - sizes_arr[g])).lambda_min
        for g in range(groups)
    ])
    stderr = float(np.sqrt((groups - 1) / groups * np.sum((leave_out - leave_out.mean()) ** 2)))

    concentration = None
    if params is not None:
        concentration = float(np.linalg.norm(gram_pinn(jacobian(params, data, normalized)) - h_inf))
    report = GramReport(
        h_inf=h_inf,
        lambda0=spectrum.lambda_min,
        spectral_norm_hinf=spectrum.spectral_norm,
        suggested_eta=ETA_FRACTION / spectrum.spectral_norm,
        concentration_error=concentration,
        estimator_stderr=stderr,
        method="monte-carlo",
        n_mc=n_mc,
    )
    if not report.reliable:
        message = (
            f"lambda0 estimate {report.lambda0:.3e} is within 3 standard errors "
            f"({stderr:.3e}) of zero"
        )
        report.warnings.append(message)
        logger.warning(message)
    logger.info(
        "H_inf (Monte Carlo, n_mc=%d, normalized=%s): lambda0=%.6e +/- %.2e, ||H_inf||_2=%.6e",
        n_mc, normalized, report.lambda0, stderr, report.spectral_norm_hinf,
    )
    return report


def gd_step_pinn(params: ModelParams, data: PinnDataset, eta: float) -> ModelParams:
    """w <- w - eta J^T (s; h)."""
    if eta < 0:
        raise ValidationError("learning rate must be non-negative")
    r = residuals(params, data).stacked
    grad = jacobian(params, data).T @ r
    return params.with_weights(params.weights - eta * grad.reshape(params.weights.shape))


@dataclass(frozen=True)
class NgdStepInfo:
    lambda_min: Optional[float]
    ridge_fallback: bool
    ridge: float
    lin_defect: float


def _ngd_delta(J: np.ndarray, r: np.ndarray, eta: float) -> Tuple[np.ndarray, NgdStepInfo]:
    """delta = -eta J^T (J J^T)^{-1} r, refined against J until J delta + eta r stops shrinking."""
    if not np.any(r):
        return np.zeros(J.shape[1]), NgdStepInfo(None, False, 0.0, 0.0)
    gram = gram_pinn(J)
    lambda_min = sym_eig_extremes(gram).lambda_min
    try:
        solution = solve_spd(gram, r)
    except SingularSystemError:
        raise RankDeficiencyError(lambda_min)
    delta = -eta * (J.T @ solution.x)
    defect_vec = J @ delta + eta * r
    defect = float(np.linalg.norm(defect_vec))
    # J J^T loses accuracy in its small eigendirections; correct against J itself.
    for _ in range(NGD_CORRECTIONS):
        if defect == 0.0:
            break
        try:
            correction = solve_spd(gram, defect_vec, ridge=solution.ridge)
        except SingularSystemError:
            break
        candidate = delta - J.T @ correction.x
        candidate_vec = J @ candidate + eta * r
        candidate_defect = float(np.linalg.norm(candidate_vec))
        if candidate_defect >= defect:
            break
        delta, defect_vec, defect = candidate, candidate_vec, candidate_defect
    if solution.fallback:
        logger.warning("NGD step used ridge fallback %.3e (lambda_min=%.3e)", solution.ridge, lambda_min)
    return delta, NgdStepInfo(lambda_min, solution.fallback, solution.ridge, defect)


def ngd_step(params: ModelParams, data: PinnDataset, eta: float) -> Tuple[ModelParams, NgdStepInfo]:
    """w <- w - eta J^T (J J^T)^{-1} (s; h)."""
    if not 0.0 < eta <= 1.0:
        raise ValidationError(f"NGD learning rate must lie in (0, 1], got {eta}")
    r = residuals(params, data).stacked
    delta, info = _ngd_delta(jacobian(params, data), r, eta)
    return params.with_weights(params.weights + delta.reshape(params.weights.shape)), info


def train(
    params0: ModelParams,
    data: PinnDataset,
    optimizer: str = "gd",
    eta_mode: EtaMode = "auto",
    iters: int = 200,
    diagnostics: Diagnostics = Diagnostics(),
    gram: Optional[GramReport] = None,
    n_mc: int = DEFAULT_N_MC,
    mc_seed: int = 0,
) -> TrainTrace:
    """GD or NGD on the PINN loss.

    Record k holds the loss at w(k); step fields describe w(k) -> w(k+1). In NGD
    mode the loop stops once the loss drops below LOSS_FLOOR.
    """
    if optimizer not in ("gd", "ngd"):
        raise ValidationError(f"optimizer must be 'gd' or 'ngd', got {optimizer!r}")
    if iters < 1:
        raise ValidationError("iters must be at least 1")
    _require_smooth(params0, "train")
    _check_dims(params0, data)

    if eta_mode == "auto":
        if optimizer == "gd":
            if gram is None:
                gram = gram_inf_mc(data, params0.activation, n_mc=n_mc, seed=mc_seed, params=params0)
            eta = gram.suggested_eta
        else:
            eta = NGD_DEFAULT_ETA
    else:
        eta = float(eta_mode)
    if optimizer == "ngd" and not 0.0 < eta <= 1.0:
        raise ValidationError(f"NGD learning rate must lie in (0, 1], got {eta}")
    if optimizer == "gd" and (eta < 0 or not np.isfinite(eta)):
        raise ValidationError(f"GD learning rate must be non-negative, got {eta}")
    logger.info(
        "PINN %s: n1=%d, n2=%d, m=%d, activation=%s, eta=%.6e, iters=%d",
        optimizer.upper(), data.n1, data.n2, params0.m, params0.activation.value, eta, iters,
    )

    trace = TrainTrace(
        problem="pinn", optimizer=optimizer, eta=eta, m=params0.m,
        n_samples=data.n_total, activation=params0.activation, gram=gram,
    )
    params = params0
    r = residuals(params, data).stacked
    initial_loss = 0.5 * float(r @ r)

    for k in range(iters + 1):
        res_sq = float(r @ r)
        record = TrainRecord(k=k, loss=0.5 * res_sq, res_norm=float(np.sqrt(res_sq)))
        if diagnostics.drift:
            record.drift_max = float(np.max(np.linalg.norm(params.weights - params0.weights, axis=1)))
        guard_divergence(trace, record, initial_loss)
        if optimizer == "ngd" and record.loss < LOSS_FLOOR:
            trace.records.append(record)
            trace.stopped_at_floor = True
            logger.info("NGD reached the loss floor at iteration %d", k)
            break
        if k == iters and not diagnostics.gram_spectrum:
            trace.records.append(record)
            break

        J = jacobian(params, data)
        if optimizer == "gd" and diagnostics.gram_spectrum:
            record.lambda_min_h = sym_eig_extremes(gram_pinn(J)).lambda_min
        if k == iters:
            trace.records.append(record)
            break

        if optimizer == "gd":
            delta = -eta * (J.T @ r)
        else:
            delta, info = _ngd_delta(J, r, eta)
            record.lin_defect = info.lin_defect
            record.lambda_min_h = info.lambda_min
            record.ridge_fallback = info.ridge_fallback
        new_params = params.with_weights(params.weights + delta.reshape(params.weights.shape))
        r_new = residuals(new_params, data).stacked
        if res_sq > 0:
            record.step_ratio = float(r_new @ r_new) / res_sq
        if optimizer == "gd" and diagnostics.recursion:
            # I2 from the applied weight step against I2 from the assembled H(k).
            i2_direct = J @ (new_params.weights - params.weights).ravel()
            i2_gram = -eta * (gram_pinn(jacobian(params, data)) @ r)
            record.i1_norm = float(np.linalg.norm(r_new - r - i2_direct))
            scale = float(np.linalg.norm(i2_gram))
            record.i2_gap = float(np.linalg.norm(i2_direct - i2_gram)) / scale if scale > 0 else 0.0
        trace.records.append(record)
        if k % 50 == 0:
            logger.debug("iter %d: loss=%.6e ratio=%s", k, record.loss, record.step_ratio)
        params, r = new_params, r_new

    trace.final_params = params
    return trace


def width_requirements(
    d: int, lambda0: float, n_total: int, m: int, delta: float = 0.01, eta: float = NGD_DEFAULT_ETA,
) -> Dict[str, Optional[float]]:
    """Width scalings of the convergence guarantees evaluated with unit constants.

    The universal constants are unknown, so these are only comparable with each
    other and across configurations, never against m directly.
    """
    if lambda0 <= 0:
        raise ValidationError("lambda0 must be positive to evaluate width requirements")
    log_md = math.log(m * d / delta)
    log_n = math.log(n_total / delta)
    gd = d ** 12 / lambda0 ** 4 * log_md ** 6 * log_n
    smooth = d ** 6 / lambda0 ** 3 * log_md ** 2 * log_n
    return {
        "gram_concentration": d ** 4 / lambda0 ** 2 * log_n,
        "gd": gd,
        "ngd_relu3": gd / (1.0 - eta) ** 2 if eta < 1.0 else None,
        "ngd_smooth": smooth / (1.0 - eta) if eta < 1.0 else None,
        "ngd_quadratic": smooth,
    }
