#!/usr/bin/env python3
import argparse
import asyncio
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from . import __version__
from . import theory
from .artifacts import ArtifactWriter
from .config import MODES, RunConfig, parse_config
from .exceptions import ConfigError, ConvergenceLabError, DivergenceError, ErrorResponse, NumericalError
from .interfaces import ActivationKind, CheckReport, GramReport, ModelParams, TrainTrace, Verdict
from .network import init_params
from .pinn import (
    PinnDataset,
    gram_inf_mc,
    make_instance,
    sample_dataset,
    train,
    width_requirements,
)
from .regression import Diagnostics, RegressionDataset, gram_inf_relu, make_regression_dataset, train_gd

logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s"
)
logger = logging.getLogger("ntk-convergence")

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CHECK_FAILED = 2
EXIT_CONFIG = 3
EXIT_NUMERICAL = 4


@dataclass
class RunManifest:
    config: RunConfig
    version: str = __version__
    duration_seconds: float = 0.0
    outputs: List[Dict[str, Any]] = field(default_factory=list)
    seeds: Dict[str, int] = field(default_factory=dict)
    status: str = "ok"
    exit_code: int = EXIT_OK
    error: Optional[Dict[str, Any]] = None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "version": self.version,
            "config": self.config.to_dict(),
            "resolved_config": self.config.to_document(),
            "duration_seconds": self.duration_seconds,
            "outputs": self.outputs,
            "seeds": self.seeds,
            "status": self.status,
            "exit_code": self.exit_code,
            "error": self.error,
        }


Dataset = Union[RegressionDataset, PinnDataset]


class ExperimentRunner:
    """Runs one configured pipeline and writes every output through an ArtifactWriter."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.writer = ArtifactWriter(Path(config.out_dir))
        self.diagnostics = Diagnostics(
            recursion=config.diag_recursion, drift=config.diag_drift, gram_spectrum=config.diag_gram,
        )
        self._gram: Optional[GramReport] = None
        self._traces: Dict[str, TrainTrace] = {}

    @property
    def activation(self) -> ActivationKind:
        return self.config.activation_kind

    def build_problem(self) -> Tuple[Dataset, ModelParams]:
        c = self.config
        if c.problem == "regression":
            data = make_regression_dataset(c.n, c.d, c.seed)
            return data, init_params(c.m, c.d + 1, ActivationKind.RELU, c.seed)
        data = sample_dataset(make_instance(c.instance, c.d), c.n1, c.n2, c.seed)
        return data, init_params(c.m, c.d + 2, self.activation, c.seed)

    def gram(self, data: Dataset, params0: ModelParams) -> GramReport:
        if self._gram is None:
            if isinstance(data, RegressionDataset):
                self._gram = gram_inf_relu(data, params=params0)
            else:
                self._gram = gram_inf_mc(
                    data, self.activation, n_mc=self.config.n_mc, seed=self.config.seed, params=params0,
                )
        return self._gram

    async def write_gram(self, data: Dataset, params0: ModelParams) -> GramReport:
        gram = self.gram(data, params0)
        document = gram.to_dict()
        if isinstance(data, PinnDataset) and gram.lambda0 > 0:
            document["width_requirements"] = width_requirements(
                data.d, gram.lambda0, data.n_total, params0.m,
            )
        await self.writer.write_json("gram.json", document)
        return gram

    async def training_run(
        self, data: Dataset, params0: ModelParams, optimizer: str, stem: str,
        eta_mode=None, gram: Optional[GramReport] = None,
    ) -> TrainTrace:
        c = self.config
        eta_mode = c.eta_setting if eta_mode is None else eta_mode
        if isinstance(data, RegressionDataset):
            trace = train_gd(params0, data, eta_mode=eta_mode, iters=c.iters,
                             diagnostics=self.diagnostics, gram=gram)
        else:
            trace = train(params0, data, optimizer=optimizer, eta_mode=eta_mode, iters=c.iters,
                          diagnostics=self.diagnostics, gram=gram, n_mc=c.n_mc, mc_seed=c.seed)
        await self.writer.write_trace(trace, stem)
        logger.info(
            "%s finished: %d iterations, loss %.6e -> %.6e",
            stem, trace.iterations, trace.records[0].loss, trace.records[-1].loss,
        )
        return trace

    async def run_training(self, optimizer: str) -> List[CheckReport]:
        data, params0 = self.build_problem()
        await self.writer.write_json("dataset.json", data.to_dict())
        await self.writer.write_json("params0.json", params0.to_dict())
        gram = None
        if optimizer == "gd" and self.config.eta_mode == "auto":
            gram = await self.write_gram(data, params0)
        await self.training_run(data, params0, optimizer, "trace", gram=gram)
        return []

    async def run_gram_report(self) -> List[CheckReport]:
        data, params0 = self.build_problem()
        await self.writer.write_json("dataset.json", data.to_dict())
        await self.write_gram(data, params0)
        return []

    async def _trace(self, key: str, factory) -> TrainTrace:
        if key not in self._traces:
            self._traces[key] = await factory()
        return self._traces[key]

    async def run_check(self, name: str, data: Dataset, params0: ModelParams, gram: GramReport) -> CheckReport:
        c = self.config
        workers = c.threads
        regression = isinstance(data, RegressionDataset)

        if name == "gram_concentration":
            return theory.check_gram_concentration(
                data, c.m_grid, c.trials, c.seed, activation=self.activation, gram=gram,
                n_mc=c.n_mc, workers=workers,
            )
        if name == "gram_stability":
            return theory.check_gram_stability(params0, data, c.r_grid, c.perturbations, c.seed, workers=workers)
        if name == "jacobian_stability":
            return theory.check_jacobian_stability(params0, data, c.r_grid, c.perturbations, c.seed, workers=workers)
        if name == "jacobian_width_curve":
            return theory.jacobian_width_curve(
                data, self.activation, c.drift_widths, c.r_grid[-1], c.perturbations, c.seed, workers=workers,
            )
        if name == "gd_convergence":
            trace = await self._trace("gd", lambda: self.training_run(data, params0, "gd", "trace_gd", gram=gram))
            return theory.check_gd_convergence(trace, gram)
        if name == "ngd_linear":
            eta = c.eta if c.eta_mode == "fixed" and c.eta < 1.0 else 0.5
            trace = await self._trace(
                f"ngd_{eta!r}", lambda: self.training_run(data, params0, "ngd", "trace_ngd", eta_mode=eta),
            )
            return theory.check_ngd_linear(trace, eta)
        if name == "ngd_quadratic":
            if self.activation is not ActivationKind.SMOOTH_TANH:
                logger.warning("ngd_quadratic needs the tanh activation; reporting it as skipped")
                return CheckReport(
                    "ngd_quadratic", [], theory.QUADRATIC_MIN_SLOPE, 0.0, Verdict.REPORT_ONLY,
                    {"skipped": f"activation {self.activation.value} is not tanh"},
                )
            trace = await self._trace(
                "ngd_1.0", lambda: self.training_run(data, params0, "ngd", "trace_ngd_quadratic", eta_mode=1.0),
            )
            return theory.check_ngd_quadratic(trace)
        if name == "weight_drift":
            if regression:
                trace = await self._trace("gd", lambda: self.training_run(data, params0, "gd", "trace_gd", gram=gram))
                return theory.check_weight_drift(trace, gram, data)
            sweep = []
            for width in c.drift_widths:
                start = init_params(width, data.d_aug, self.activation, c.seed)
                sweep.append(await self.training_run(data, start, "gd", f"trace_drift_m{width}", gram=gram))
            return theory.check_weight_drift(sweep, gram, data)
        if name == "initial_scale":
            if regression:
                return theory.check_initial_scale(
                    "regression", c.size_grid, max(c.trials, 5), c.seed, d=c.d, m=c.m, workers=workers,
                )
            return theory.check_initial_scale(
                "pinn", c.d_grid, max(c.trials, 5), c.seed, m=c.m, n1=c.n1, n2=c.n2,
                instance=c.instance, activation=self.activation, workers=workers,
            )
        if name == "learning_rate_sweep":
            return theory.sweep_learning_rate(params0, data, gram=gram)
        raise ConfigError("checks", f"unknown check {name!r}")

    async def run_check_suite(self) -> List[CheckReport]:
        data, params0 = self.build_problem()
        await self.writer.write_json("dataset.json", data.to_dict())
        await self.writer.write_json("params0.json", params0.to_dict())
        gram = await self.write_gram(data, params0)

        reports = []
        for name in self.config.checks:
            report = await self.run_check(name, data, params0, gram)
            logger.info("check %s: %s (margin %.3e)", name, report.verdict.value, report.margin)
            await self.writer.write_json(f"check_{name}.json", report.to_dict())
            reports.append(report)

        rollup = theory.summarize(reports)
        rollup["config"] = self.config.to_dict()
        await self.writer.write_json("rollup.json", rollup)
        return reports

    async def pipeline(self) -> List[CheckReport]:
        mode = self.config.mode
        if mode == "regression-gd" or mode == "pinn-gd":
            return await self.run_training("gd")
        if mode == "pinn-ngd":
            return await self.run_training("ngd")
        if mode == "gram-report":
            return await self.run_gram_report()
        return await self.run_check_suite()

    async def run(self) -> RunManifest:
        manifest = RunManifest(config=self.config, seeds={"seed": self.config.seed, "mc_seed": self.config.seed})
        start = time.monotonic()
        logger.info("Starting %s run (out_dir=%s)", self.config.mode, self.config.out_dir)
        try:
            reports = await self.pipeline()
            if any(r.failed for r in reports):
                manifest.status, manifest.exit_code = "check-failed", EXIT_CHECK_FAILED
        except NumericalError as e:
            logger.error(f"Numerical failure: {e}", exc_info=True)
            manifest.status, manifest.exit_code = "numerical-error", EXIT_NUMERICAL
            manifest.error = ErrorResponse(e).to_dict()
            if isinstance(e, DivergenceError) and e.trace is not None:
                await self.writer.write_trace(e.trace, "trace_partial")
        except ConfigError as e:
            logger.error(f"Invalid configuration: {e}")
            manifest.status, manifest.exit_code = "config-error", EXIT_CONFIG
            manifest.error = ErrorResponse(e).to_dict()
        except ConvergenceLabError as e:
            logger.error(f"Run failed: {e}", exc_info=True)
            manifest.status, manifest.exit_code = "error", EXIT_ERROR
            manifest.error = ErrorResponse(e).to_dict()
        manifest.duration_seconds = time.monotonic() - start
        manifest.outputs = self.writer.listing(exclude=("manifest.json",))
        await self.writer.write_json("manifest.json", manifest.to_dict())
        logger.info("Run finished: %s (exit %d)", manifest.status, manifest.exit_code)
        return manifest


async def run_async(config: RunConfig) -> RunManifest:
    return await ExperimentRunner(config).run()


def run(config: RunConfig) -> RunManifest:
    return asyncio.run(run_async(config))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ntk-convergence",
        description="Train two-layer networks and PINNs and check them against convergence bounds",
    )
    parser.add_argument("mode", choices=MODES, help="Pipeline to run")
    parser.add_argument("--config", type=str, required=True, help="Path to a key = value config file")
    parser.add_argument("--out", type=str, help="Output directory (overrides out_dir)")
    parser.add_argument("--seed", type=int, help="Master seed (overrides seed)")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = parse_config(args.config, overrides={"mode": args.mode, "out_dir": args.out, "seed": args.seed})
    except ConfigError as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_CONFIG

    try:
        return run(config).exit_code
    except KeyboardInterrupt:
        logger.info("Interrupted")
        return EXIT_ERROR
    except ConfigError as e:
        logger.error(f"Invalid configuration: {e}")
        return EXIT_CONFIG
    except Exception as e:
        logger.error(f"Fatal error: {e}", exc_info=True)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
