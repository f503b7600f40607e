"""Run configuration: a flat ``key = value`` document with a declarative schema.

Lines starting with ``#`` and blank lines are ignored, lists are comma-separated and
booleans are ``true``/``false``. Defaults that depend on the mode (problem kind,
activation, iteration count, check list, grids) are resolved once and written back,
so ``RunConfig.to_document()`` always echoes the exact run.
"""

import logging
import os
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Any, Callable, Dict, List, Mapping, Optional, Tuple

from .exceptions import ConfigError
from .interfaces import ActivationKind
from .pinn import CATALOG, DEFAULT_N_MC

logger = logging.getLogger(__name__)

THREADS_ENV = "NTK_CONVERGENCE_THREADS"

MODES = ("regression-gd", "pinn-gd", "pinn-ngd", "gram-report", "check-suite")
PROBLEMS = ("regression", "pinn")
REGRESSION_CHECKS = (
    "gram_concentration", "gram_stability", "gd_convergence", "weight_drift",
    "initial_scale", "learning_rate_sweep",
)
PINN_CHECKS = (
    "gram_concentration", "gram_stability", "jacobian_stability", "jacobian_width_curve",
    "gd_convergence", "ngd_linear", "ngd_quadratic", "weight_drift", "initial_scale",
)
GD_CHECK_MIN_ITERS = 50


@dataclass(frozen=True)
class FieldSpec:
    name: str
    kind: str  # int, float, str, bool, ints, floats, strs
    doc: str
    default: Any = None
    choices: Optional[Tuple[str, ...]] = None
    minimum: Optional[float] = None


SCHEMA: Tuple[FieldSpec, ...] = (
    FieldSpec("mode", "str", "pipeline to run", choices=MODES),
    FieldSpec("problem", "str", "regression or pinn (derived from the mode when omitted)", choices=PROBLEMS),
    FieldSpec("n", "int", "regression sample count", minimum=1),
    FieldSpec("n1", "int", "PINN interior collocation points", minimum=1),
    FieldSpec("n2", "int", "PINN boundary collocation points", minimum=1),
    FieldSpec("d", "int", "input (regression) or spatial (PINN) dimension", minimum=1),
    FieldSpec("instance", "str", "PINN catalog instance", choices=tuple(sorted(CATALOG))),
    FieldSpec("activation", "str", "relu, relu3 or tanh", choices=tuple(k.value for k in ActivationKind)),
    FieldSpec("m", "int", "hidden width", minimum=1),
    FieldSpec("seed", "int", "master seed", minimum=0),
    FieldSpec("eta_mode", "str", "auto or fixed", default="auto", choices=("auto", "fixed")),
    FieldSpec("eta", "float", "learning rate when eta_mode = fixed", minimum=0.0),
    FieldSpec("iters", "int", "training iterations", minimum=1),
    FieldSpec("diag_recursion", "bool", "record the residual recursion terms", default=True),
    FieldSpec("diag_drift", "bool", "record the maximum weight drift", default=True),
    FieldSpec("diag_gram", "bool", "record lambda_min of the finite-width Gram matrix", default=False),
    FieldSpec("n_mc", "int", "Monte Carlo draws for the PINN H_inf estimate", default=DEFAULT_N_MC, minimum=100),
    FieldSpec("out_dir", "str", "output directory", default="out"),
    FieldSpec("threads", "int", "workers for independent check trials", default=1, minimum=1),
    FieldSpec("checks", "strs", "checks run by check-suite"),
    FieldSpec("m_grid", "ints", "widths for the concentration check"),
    FieldSpec("r_grid", "floats", "perturbation radii for the stability checks"),
    FieldSpec("trials", "int", "independent initializations per grid point", default=5, minimum=1),
    FieldSpec("perturbations", "int", "random perturbations per radius", default=20, minimum=1),
    FieldSpec("size_grid", "ints", "sample counts for the regression initial-scale check"),
    FieldSpec("d_grid", "ints", "spatial dimensions for the PINN initial-scale check"),
    FieldSpec("drift_widths", "ints", "widths for the PINN weight-drift sweep"),
)
FIELDS: Dict[str, FieldSpec] = {f.name: f for f in SCHEMA}

DERIVED_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "regression": {
        "activation": "relu",
        "iters": 500,
        "checks": list(REGRESSION_CHECKS),
        "m_grid": [2 ** k for k in range(7, 15)],
        "r_grid": [0.01, 0.05],
        "size_grid": [16, 64, 256],
    },
    "pinn": {
        "instance": "poly-sine",
        "activation": "relu3",
        "iters": 200,
        "checks": list(PINN_CHECKS),
        "m_grid": [2 ** k for k in range(7, 15)],
        "r_grid": [0.005, 0.01, 0.02, 0.04],
        "d_grid": [1, 2, 3],
        "drift_widths": [1024, 4096, 16384],
    },
}


@dataclass
class RunConfig:
    mode: str
    problem: str
    m: int
    seed: int
    n: Optional[int] = None
    n1: Optional[int] = None
    n2: Optional[int] = None
    d: Optional[int] = None
    instance: Optional[str] = None
    activation: str = "relu"
    eta_mode: str = "auto"
    eta: Optional[float] = None
    iters: int = 500
    diag_recursion: bool = True
    diag_drift: bool = True
    diag_gram: bool = False
    n_mc: int = DEFAULT_N_MC
    out_dir: str = "out"
    threads: int = 1
    checks: Optional[List[str]] = None
    m_grid: Optional[List[int]] = None
    r_grid: Optional[List[float]] = None
    trials: int = 5
    perturbations: int = 20
    size_grid: Optional[List[int]] = None
    d_grid: Optional[List[int]] = None
    drift_widths: Optional[List[int]] = None

    @property
    def activation_kind(self) -> ActivationKind:
        return ActivationKind.parse(self.activation)

    @property
    def eta_setting(self):
        """``"auto"`` or the fixed learning rate, as the trainers expect it."""
        return "auto" if self.eta_mode == "auto" else self.eta

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def to_document(self) -> str:
        """Resolved config in the input format; re-parses to an equal RunConfig."""
        lines = ["# resolved ntk-convergence run configuration"]
        for spec in SCHEMA:
            value = getattr(self, spec.name)
            if value is None:
                continue
            lines.append(f"{spec.name} = {_format_value(spec.kind, value)}")
        return "\n".join(lines) + "\n"


def _format_value(kind: str, value: Any) -> str:
    if kind == "bool":
        return "true" if value else "false"
    if kind == "float":
        return repr(float(value))
    if kind in ("ints", "floats", "strs"):
        return ", ".join(repr(float(v)) if kind == "floats" else str(v) for v in value)
    return str(value)


def _scalar(kind: str) -> Callable[[str], Any]:
    if kind == "int":
        return int
    if kind == "float":
        return float
    if kind == "bool":
        def parse_bool(text: str) -> bool:
            lowered = text.lower()
            if lowered not in ("true", "false"):
                raise ValueError(f"expected true or false, got {text!r}")
            return lowered == "true"
        return parse_bool
    return str


def _convert(spec: FieldSpec, raw: Any, line: Optional[int]) -> Any:
    try:
        if spec.kind in ("ints", "floats", "strs"):
            parse = _scalar(spec.kind[:-1])
            items = raw if isinstance(raw, (list, tuple)) else [p.strip() for p in str(raw).split(",")]
            value = [parse(str(item)) for item in items if str(item) != ""]
            if not value:
                raise ValueError("list must not be empty")
        elif isinstance(raw, str):
            value = _scalar(spec.kind)(raw.strip())
        else:
            value = _scalar(spec.kind)(raw) if spec.kind != "bool" else bool(raw)
    except ValueError as e:
        raise ConfigError(spec.name, f"expected {spec.kind}: {e}", line)

    values = value if isinstance(value, list) else [value]
    if spec.choices is not None and any(v not in spec.choices for v in values):
        raise ConfigError(spec.name, f"must be one of {', '.join(spec.choices)}, got {raw!r}", line)
    if spec.minimum is not None and any(v < spec.minimum for v in values):
        raise ConfigError(spec.name, f"must be at least {spec.minimum}, got {raw!r}", line)
    return value


def parse_document(text: str, overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """Parse and resolve a configuration document; overrides win over file values."""
    values: Dict[str, Any] = {}
    lines: Dict[str, int] = {}
    for number, raw_line in enumerate(text.splitlines(), start=1):
        content = raw_line.split("#", 1)[0].strip()
        if not content:
            continue
        if "=" not in content:
            raise ConfigError(content, "expected 'key = value'", number)
        key, _, raw = content.partition("=")
        key = key.strip()
        if key not in FIELDS:
            raise ConfigError(key, "unknown key", number)
        if key in values:
            raise ConfigError(key, f"duplicate key (first set on line {lines[key]})", number)
        values[key] = _convert(FIELDS[key], raw.strip(), number)
        lines[key] = number

    for key, raw in (overrides or {}).items():
        if raw is None:
            continue
        if key not in FIELDS:
            raise ConfigError(key, "unknown override")
        values[key] = _convert(FIELDS[key], raw, None)
        lines.pop(key, None)

    threads = os.environ.get(THREADS_ENV)
    if threads:
        values["threads"] = _convert(FIELDS["threads"], threads, None)
        lines.pop("threads", None)

    return _resolve(values, lines)


def parse_config(path, overrides: Optional[Mapping[str, Any]] = None) -> RunConfig:
    config_path = Path(path)
    if not config_path.is_file():
        raise ConfigError("config", f"config file {config_path} does not exist")
    return parse_document(config_path.read_text(encoding="utf-8"), overrides)


def _require(values: Dict[str, Any], key: str, reason: str) -> None:
    if values.get(key) is None:
        raise ConfigError(key, f"missing required key ({reason})")


def _resolve(values: Dict[str, Any], lines: Dict[str, int]) -> RunConfig:
    _require(values, "mode", "every run")
    mode = values["mode"]
    derived = {"regression-gd": "regression", "pinn-gd": "pinn", "pinn-ngd": "pinn"}.get(mode)
    if derived is not None:
        if values.get("problem", derived) != derived:
            raise ConfigError("problem", f"mode {mode} implies problem {derived}", lines.get("problem"))
        values["problem"] = derived
    _require(values, "problem", f"mode {mode} runs on either problem")
    problem = values["problem"]

    for key in ("m", "seed", "d"):
        _require(values, key, "every run")
    for key in (("n",) if problem == "regression" else ("n1", "n2")):
        _require(values, key, f"{problem} problems")
    foreign = ("n1", "n2", "instance", "d_grid", "drift_widths") if problem == "regression" else ("n", "size_grid")
    for key in foreign:
        if key in values:
            raise ConfigError(key, f"not used by {problem} problems", lines.get(key))

    for key, default in DERIVED_DEFAULTS[problem].items():
        values.setdefault(key, list(default) if isinstance(default, list) else default)
    for spec in SCHEMA:
        if spec.default is not None:
            values.setdefault(spec.name, spec.default)

    kind = ActivationKind.parse(values["activation"])
    if problem == "regression" and kind is not ActivationKind.RELU:
        raise ConfigError("activation", "regression uses the ReLU network", lines.get("activation"))
    if problem == "pinn" and kind is ActivationKind.RELU:
        raise ConfigError("activation", "PINNs need a twice-differentiable activation", lines.get("activation"))

    if values["eta_mode"] == "fixed":
        _require(values, "eta", "eta_mode is fixed")
        if mode == "pinn-ngd" and not 0.0 < values["eta"] <= 1.0:
            raise ConfigError("eta", "NGD learning rate must lie in (0, 1]", lines.get("eta"))
    elif "eta" in values:
        raise ConfigError("eta", "only allowed with eta_mode = fixed", lines.get("eta"))

    allowed = REGRESSION_CHECKS if problem == "regression" else PINN_CHECKS
    unknown = [c for c in values["checks"] if c not in allowed]
    if unknown:
        raise ConfigError("checks", f"unknown {problem} checks: {', '.join(unknown)}", lines.get("checks"))
    if mode == "check-suite" and "gd_convergence" in values["checks"] and values["iters"] < GD_CHECK_MIN_ITERS:
        raise ConfigError(
            "iters", f"gd_convergence needs at least {GD_CHECK_MIN_ITERS} iterations", lines.get("iters"),
        )
    if len(values["m_grid"]) < 4 or sorted(set(values["m_grid"])) != values["m_grid"]:
        raise ConfigError("m_grid", "needs at least 4 ascending widths", lines.get("m_grid"))
    if any(not 0.0 < r <= 1.0 for r in values["r_grid"]):
        raise ConfigError("r_grid", "radii must lie in (0, 1]", lines.get("r_grid"))

    known = {f.name for f in fields(RunConfig)}
    config = RunConfig(**{k: v for k, v in values.items() if k in known})
    logger.debug("Resolved configuration: %s", config)
    return config
