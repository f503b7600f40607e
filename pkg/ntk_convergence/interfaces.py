from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Optional, Sequence, Union

import numpy as np

from .exceptions import ValidationError


class ActivationKind(str, Enum):
    RELU = "relu"
    RELU_CUBED = "relu3"
    SMOOTH_TANH = "tanh"

    @classmethod
    def parse(cls, value: Union[str, "ActivationKind"]) -> "ActivationKind":
        if isinstance(value, cls):
            return value
        aliases = {"relu^3": "relu3", "relucubed": "relu3", "smoothtanh": "tanh"}
        key = str(value).strip().lower()
        try:
            return cls(aliases.get(key, key))
        except ValueError:
            choices = ", ".join(kind.value for kind in cls)
            raise ValidationError(f"unknown activation {value!r}; expected one of {choices}")


class Verdict(str, Enum):
    PASS = "pass"
    FAIL = "fail"
    REPORT_ONLY = "report-only"


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Hidden weights (m x d_aug), fixed output signs and the activation."""
    weights: np.ndarray
    signs: np.ndarray
    activation: ActivationKind

    def __post_init__(self):
        weights = np.array(self.weights, dtype=np.float64)
        signs = np.array(self.signs, dtype=np.float64)
        if weights.ndim != 2 or weights.shape[0] < 1:
            raise ValidationError("weights must be an m x d_aug matrix with m >= 1")
        if signs.shape != (weights.shape[0],):
            raise ValidationError("signs must hold one entry per hidden neuron")
        if not np.all(np.isfinite(weights)):
            raise ValidationError("weights must be finite")
        if not np.all(np.abs(signs) == 1.0):
            raise ValidationError("signs must be -1 or +1")
        weights.setflags(write=False)
        signs.setflags(write=False)
        # We need to use object.__setattr__ because the class is frozen
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "signs", signs)
        object.__setattr__(self, "activation", ActivationKind.parse(self.activation))

    @property
    def m(self) -> int:
        return self.weights.shape[0]

    @property
    def d_aug(self) -> int:
        return self.weights.shape[1]

    def with_weights(self, weights: np.ndarray) -> "ModelParams":
        return ModelParams(weights=weights, signs=self.signs, activation=self.activation)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "ModelParams":
        m, d_aug = int(data["m"]), int(data["d_aug"])
        return cls(
            weights=np.asarray(data["weights"], dtype=np.float64).reshape(m, d_aug),
            signs=data["signs"],
            activation=data["activation"],
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "m": self.m,
            "d_aug": self.d_aug,
            "activation": self.activation.value,
            "weights": self.weights.ravel().tolist(),
            "signs": [int(s) for s in self.signs],
        }


@dataclass(frozen=True)
class SpectrumSummary:
    lambda_min: float
    lambda_max: float
    spectral_norm: float


@dataclass
class GramReport:
    """Infinite-width Gram estimate and the quantities derived from it."""
    h_inf: np.ndarray
    lambda0: float
    spectral_norm_hinf: float
    suggested_eta: float
    concentration_error: Optional[float] = None
    estimator_stderr: float = 0.0
    method: str = "closed-form"
    n_mc: Optional[int] = None
    warnings: List[str] = field(default_factory=list)

    @property
    def reliable(self) -> bool:
        return self.lambda0 > 3.0 * self.estimator_stderr

    def to_dict(self) -> Dict[str, Any]:
        return {
            "method": self.method,
            "n_mc": self.n_mc,
            "lambda0": self.lambda0,
            "spectral_norm_hinf": self.spectral_norm_hinf,
            "suggested_eta": self.suggested_eta,
            "concentration_error": self.concentration_error,
            "estimator_stderr": self.estimator_stderr,
            "warnings": list(self.warnings),
            "h_inf": self.h_inf.tolist(),
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "GramReport":
        return cls(
            h_inf=np.asarray(data["h_inf"], dtype=np.float64),
            lambda0=data["lambda0"],
            spectral_norm_hinf=data["spectral_norm_hinf"],
            suggested_eta=data["suggested_eta"],
            concentration_error=data.get("concentration_error"),
            estimator_stderr=data.get("estimator_stderr", 0.0),
            method=data.get("method", "closed-form"),
            n_mc=data.get("n_mc"),
            warnings=list(data.get("warnings", [])),
        )


@dataclass
class TrainRecord:
    """One iteration of a training run; step quantities describe k -> k+1."""
    k: int
    loss: float
    res_norm: float
    step_ratio: Optional[float] = None
    i1_norm: Optional[float] = None
    i2_gap: Optional[float] = None
    lin_defect: Optional[float] = None
    drift_max: Optional[float] = None
    lambda_min_h: Optional[float] = None
    ridge_fallback: Optional[bool] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "iter": self.k,
            "loss": self.loss,
            "res_norm": self.res_norm,
            "step_ratio": self.step_ratio,
            "i1_norm": self.i1_norm,
            "i2_gap": self.i2_gap,
            "lin_defect": self.lin_defect,
            "drift_max": self.drift_max,
            "lambda_min_h": self.lambda_min_h,
            "ridge_fallback": self.ridge_fallback,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrainRecord":
        return cls(k=data["iter"], **{k: v for k, v in data.items() if k != "iter"})


REGRESSION_COLUMNS = (
    "iter", "loss", "res_norm", "step_ratio", "i1_norm", "drift_max", "lambda_min_h",
)
PINN_COLUMNS = (
    "iter", "loss", "res_norm", "step_ratio", "i1_norm", "lin_defect", "drift_max",
    "lambda_min_h",
)


@dataclass
class TrainTrace:
    problem: str  # "regression" or "pinn"
    optimizer: str  # "gd" or "ngd"
    eta: float
    m: int
    n_samples: int
    activation: ActivationKind
    records: List[TrainRecord] = field(default_factory=list)
    gram: Optional[GramReport] = None
    diverged: bool = False
    stopped_at_floor: bool = False
    final_params: Optional[ModelParams] = field(default=None, repr=False)

    @property
    def columns(self) -> Sequence[str]:
        return REGRESSION_COLUMNS if self.problem == "regression" else PINN_COLUMNS

    @property
    def iterations(self) -> int:
        return max(len(self.records) - 1, 0)

    def losses(self) -> np.ndarray:
        return np.array([r.loss for r in self.records], dtype=np.float64)

    def residual_norms(self) -> np.ndarray:
        return np.array([r.res_norm for r in self.records], dtype=np.float64)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "problem": self.problem,
            "optimizer": self.optimizer,
            "eta": self.eta,
            "m": self.m,
            "n_samples": self.n_samples,
            "activation": self.activation.value,
            "diverged": self.diverged,
            "stopped_at_floor": self.stopped_at_floor,
            "gram": self.gram.to_dict() if self.gram is not None else None,
            "records": [r.to_dict() for r in self.records],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TrainTrace":
        gram = data.get("gram")
        return cls(
            problem=data["problem"],
            optimizer=data["optimizer"],
            eta=data["eta"],
            m=data["m"],
            n_samples=data["n_samples"],
            activation=ActivationKind.parse(data["activation"]),
            records=[TrainRecord.from_dict(r) for r in data["records"]],
            gram=GramReport.from_dict(gram) if gram is not None else None,
            diverged=data.get("diverged", False),
            stopped_at_floor=data.get("stopped_at_floor", False),
        )


@dataclass
class CheckReport:
    """Measured quantity against a bound for one verification check."""
    check_name: str
    measured: Union[float, List[float]]
    bound: Union[float, List[float]]
    margin: float
    verdict: Verdict
    context: Dict[str, Any] = field(default_factory=dict)

    @property
    def gated(self) -> bool:
        return self.verdict is not Verdict.REPORT_ONLY

    @property
    def failed(self) -> bool:
        return self.verdict is Verdict.FAIL

    def to_dict(self) -> Dict[str, Any]:
        return {
            "check_name": self.check_name,
            "measured": self.measured,
            "bound": self.bound,
            "margin": self.margin,
            "verdict": self.verdict.value,
            "context": self.context,
        }
