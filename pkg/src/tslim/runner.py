"""
Experiment runner: turns an ExperimentConfig into plot-data tables and a JSON summary
in the output folder.

Sweeps over independent points (seeds of the finite regression, inverse temperatures
of the asymptotic regression) run in a ProcessPoolExecutor in multicore mode. Worker
processes log through a queue to the CLI handler of the parent. Results keep the
order of the sweep points, so the output does not depend on the number of cores.
"""

import math
import multiprocessing
import time
from collections.abc import Callable, Sequence
from concurrent.futures import ProcessPoolExecutor
from logging import getLogger
from pathlib import Path
from typing import Any

import numpy as np

from tslim import _logging
from tslim._logging import log, start_logging_listener
from tslim.analysis import (
    analyze_trajectory,
    report_series,
    weight_triplet_trace,
)
from tslim.archive import TrajectoryArchive
from tslim.constants import (
    DEFAULT_VERBOSITY,
    FLAG_ENTROPY_ERROR,
    MAX_CORE_WORKERS,
    NORMALIZATION_PER_SAMPLE,
    SUMMARY_FILE,
    TSV_SUFFIX,
)
from tslim.core import (
    GaussianMeasure,
    PowerLawSpec,
    QuadraticPotential,
    SpectralModel,
    SpeedLimitReport,
    build_power_law_spectrum,
    validate_gaussian,
)
from tslim.dynamics import (
    IntegratorConfig,
    ensemble_moments,
    euler_maruyama_moments,
    propagate_gaussian_ou,
    simulate_langevin,
)
from tslim.experiment import ExperimentConfig, ExperimentKind
from tslim.linreg import (
    AsymptoticTerms,
    LimitKind,
    MPParams,
    asymptotic_terms,
    generate_teacher_problem,
    tsl_asymptotic,
    tsl_finite,
    tsl_limits,
)
from tslim.ntk import (
    fit_sweep_slopes,
    predicted_exponents,
    scaling_sweep,
)
from tslim.output.plot_data import emit_plot_data, write_tsv
from tslim.output.summary import write_summary
from tslim.thermo import (
    entropy_dynamic_gaussian,
    entropy_equilibrium,
    equilibrium_terms,
    w2_gaussian,
)
from tslim.utils import log_end_time

logger = getLogger(__name__)

type FiniteSeedPoint = tuple[int, int, float, float, float, int]
type AsymptoticPoint = tuple[MPParams, bool, int]


def finite_seed_report(point: FiniteSeedPoint) -> SpeedLimitReport:
    d, n, lam, beta, alpha, seed = point
    logger.debug(f"finite linear regression d={d} n={n} seed={seed}")
    return tsl_finite(generate_teacher_problem(d, n, lam, beta, alpha, seed))


def asymptotic_point(point: AsymptoticPoint) -> AsymptoticTerms:
    mp, mean_shift, mp_nodes = point
    logger.debug(f"asymptotic linear regression at beta={mp.beta:.6g}")
    return asymptotic_terms(mp, mean_shift, mp_nodes)


class ExperimentRunner:
    def __init__(
        self,
        cfg: ExperimentConfig,
        multicore: bool = False,
        verbosity: int = DEFAULT_VERBOSITY,
    ) -> None:
        self.cfg: ExperimentConfig = cfg
        self.multicore: bool = multicore
        self.verbosity: int = verbosity
        self.written: list[Path] = []

    @property
    def params(self) -> dict[str, Any]:
        return self.cfg.parameters

    def run(self) -> list[Path]:
        start_time = time.time()
        self.cfg.output_dir.mkdir(parents=True, exist_ok=True)
        logger.info(f"Running {self.cfg.kind} into {self.cfg.output_dir}")
        match self.cfg.kind:
            case ExperimentKind.NTK_SCALING:
                self.run_ntk_scaling()
            case ExperimentKind.NTK_INEFFICIENCY:
                self.run_ntk_inefficiency()
            case ExperimentKind.LINREG_FINITE:
                self.run_linreg_finite()
            case ExperimentKind.LINREG_ASYMPTOTIC:
                self.run_linreg_asymptotic()
            case ExperimentKind.LANGEVIN_SIM:
                self.run_langevin_sim()
            case ExperimentKind.ANALYZE_TRAJECTORY:
                self.run_analyze_trajectory()
        for path in self.written:
            log(f"Output in {path}")
        log_end_time(start_time, self.cfg.kind.subcommand)
        return self.written

    def output_path(self, name: str) -> Path:
        return self.cfg.output_dir / name

    def emit(
        self,
        reports: Sequence[SpeedLimitReport],
        extra: dict[str, Any],
    ) -> None:
        """Write the report series as <kind>.tsv and the run summary."""
        path = self.output_path(self.cfg.kind.value + TSV_SUFFIX)
        self.written.append(emit_plot_data(reports, path))
        self.written.append(
            write_summary(self.output_path(SUMMARY_FILE), self.cfg, reports, extra)
        )

    def table(self, name: str, header: Sequence[str], rows: list[list[Any]]) -> None:
        path = self.output_path(name + TSV_SUFFIX)
        self.written.append(write_tsv(path, header, rows))

    def map_sweep[P, R](self, worker: Callable[[P], R], points: Sequence[P]) -> list[R]:
        if not self.multicore or len(points) < 2:
            return [worker(point) for point in points]
        max_workers = min(MAX_CORE_WORKERS, len(points))
        logger.info(f"{len(points)} sweep points on {max_workers} processes")
        with multiprocessing.Manager() as manager:
            logging_queue = manager.Queue()
            queue_listener = start_logging_listener(logging_queue)
            try:
                with ProcessPoolExecutor(
                    max_workers=max_workers,
                    initializer=_logging.ini_worker_for_multiprocessing,
                    initargs=(logging_queue, self.verbosity),
                ) as process_executor:
                    return list(process_executor.map(worker, points))
            finally:
                queue_listener.stop()

    def ntk_sweep(self, model: SpectralModel) -> list[SpeedLimitReport]:
        ts = np.geomspace(
            self.params["t_min"], self.params["t_max"], self.params["n_points"]
        )
        return scaling_sweep(model, ts, self.params["n_quad"])

    def run_ntk_scaling(self) -> None:
        p = self.params
        spec = PowerLawSpec(
            scale=p["scale"],
            alpha=p["alpha"],
            residue_scale=p["residue_scale"],
            delta=p["delta"],
            k_star=p["k_star"],
            n=p["n_modes"],
        )
        reports = self.ntk_sweep(build_power_law_spectrum(spec))
        prediction = predicted_exponents(spec.alpha, spec.delta)
        slopes = fit_sweep_slopes(reports)
        predicted = {
            "w2_sq": prediction.w2_exponent,
            "entropy": prediction.entropy_exponent,
            "t_sl": prediction.tsl_exponent,
            "l_gamma": prediction.length_exponent,
            "l_geo": prediction.length_exponent,
        }
        self.table(
            "slopes",
            ["quantity", "fitted [1]", "predicted [1]"],
            [[name, slope, predicted[name]] for name, slope in slopes.items()],
        )
        logger.info(
            f"regime {prediction.regime}: fitted T_SL exponent {slopes['t_sl']:.4g}, "
            f"predicted {prediction.tsl_exponent:.4g}"
        )
        self.emit(
            reports,
            {"prediction": prediction, "fitted_slopes": slopes},
        )

    def spectral_model(self) -> SpectralModel:
        spectrum = self.params["spectrum"]
        if "power_law" in spectrum:
            return build_power_law_spectrum(PowerLawSpec(**spectrum["power_law"]))
        return SpectralModel(
            eigenvalues=np.asarray(spectrum["eigenvalues"]),
            residues_sq=np.asarray(spectrum["residues_sq"]),
        )

    def run_ntk_inefficiency(self) -> None:
        reports = self.ntk_sweep(self.spectral_model())
        ratios = [
            None if report.inefficiency is None else 1 / report.inefficiency
            for report in reports
        ]
        self.emit(reports, {"t_sl_over_t": ratios})

    def run_linreg_finite(self) -> None:
        p = self.params
        seeds = [self.cfg.seed + i for i in range(p["n_seeds"])]
        points = [
            (p["d"], p["n"], p["lambda"], p["beta"], p["alpha"], seed)
            for seed in seeds
        ]
        reports = self.map_sweep(finite_seed_report, points)
        t_sl = [report.t_sl for report in reports if report.t_sl is not None]
        mean_tsl = math.fsum(t_sl) / len(t_sl) if t_sl else None
        self.table(
            "seeds",
            ["seed", "w2_sq [weight^2]", "entropy [loss]", "t_sl [time]"],
            [
                [seed, report.w2_sq, report.entropy, report.t_sl]
                for seed, report in zip(seeds, reports, strict=True)
            ],
        )
        mp = MPParams(
            gamma=p["d"] / p["n"], lam=p["lambda"], beta=p["beta"], alpha=p["alpha"]
        )
        asymptotic = tsl_asymptotic(mp)
        logger.info(
            f"mean T_SL {mean_tsl} over {len(seeds)} seeds, asymptotic {asymptotic:.6g}"
        )
        self.emit(
            reports,
            {"seeds": seeds, "mean_t_sl": mean_tsl, "asymptotic_t_sl": asymptotic},
        )

    def run_linreg_asymptotic(self) -> None:
        p = self.params
        betas = p["beta"] if isinstance(p["beta"], list) else [p["beta"]]
        grid = [
            MPParams(gamma=p["gamma"], lam=p["lambda"], beta=beta, alpha=p["alpha"])
            for beta in betas
        ]
        terms = self.map_sweep(
            asymptotic_point, [(mp, p["mean_shift"], p["mp_nodes"]) for mp in grid]
        )
        reports = [
            SpeedLimitReport.from_transport(
                horizon_t=None,
                w2_sq=term.numerator,
                entropy=term.denominator,
                entropy_normalization=NORMALIZATION_PER_SAMPLE,
            )
            for term in terms
        ]
        self.table(
            "grid",
            ["beta [1]", "numerator [weight^2]", "denominator [loss]", "t_sl [time]"],
            [
                [mp.beta, term.numerator, term.denominator, report.t_sl]
                for mp, term, report in zip(grid, terms, reports, strict=True)
            ],
        )
        limits = {
            kind.value: tsl_limits(grid[0], kind, p["mean_shift"]) for kind in LimitKind
        }
        self.emit(reports, {"betas": betas, "limits": limits})

    def run_langevin_sim(self) -> None:
        p = self.params
        pot = QuadraticPotential(A=np.asarray(p["A"]), b=np.asarray(p["b"]), c=p["c"])
        init = validate_gaussian(p["init_mean"], p["init_cov"])
        beta_inv = p["beta_inv"]
        integrator = IntegratorConfig(
            dt=p["dt"],
            T=p["T"],
            seed=self.cfg.seed,
            n_realizations=p["n_realizations"],
            beta_inv=beta_inv,
            max_checkpoints=p["n_points"],
        )
        ensemble = simulate_langevin(pot, init, integrator)
        times = ensemble[0].times
        if init.is_degenerate:
            logger.warning(
                "init_cov is singular: the entropy production from this initial "
                "measure diverges and T_SL is reported as undefined"
            )
        reports: list[SpeedLimitReport] = []
        rows: list[list[Any]] = []
        for index, t in enumerate(times):
            exact = propagate_gaussian_ou(pot, init, beta_inv, float(t))
            empirical = ensemble_moments(ensemble, index)
            discrete = euler_maruyama_moments(
                pot, init, beta_inv, integrator.step, float(t)
            )
            w2_exact = w2_gaussian(init, exact)
            reports.append(
                self.langevin_report(pot, init, beta_inv, float(t), w2_exact)
            )
            rows.append(
                [
                    float(t),
                    w2_exact,
                    w2_gaussian(init, discrete),
                    w2_gaussian(init, empirical),
                    w2_gaussian(empirical, exact),
                ]
            )
        self.table(
            "ensemble",
            [
                "t [time]",
                "w2_sq_exact [weight^2]",
                "w2_sq_discrete [weight^2]",
                "w2_sq_ensemble [weight^2]",
                "w2_sq_ensemble_to_exact [weight^2]",
            ],
            rows,
        )
        self.emit(reports, {"stationary": self.stationary_report(pot, init, beta_inv)})

    @staticmethod
    def langevin_report(
        pot: QuadraticPotential,
        init: GaussianMeasure,
        beta_inv: float,
        t: float,
        w2_sq: float,
    ) -> SpeedLimitReport:
        # A singular init has no entropy production integral for t > 0
        if t > 0 and init.is_degenerate:
            return SpeedLimitReport.from_transport(
                t, w2_sq, None, flags=(FLAG_ENTROPY_ERROR,)
            )
        entropy = entropy_dynamic_gaussian(pot, init, beta_inv, t)
        return SpeedLimitReport.from_transport(t, w2_sq, entropy.value)

    @staticmethod
    def stationary_report(
        pot: QuadraticPotential, init: GaussianMeasure, beta_inv: float
    ) -> SpeedLimitReport:
        """Report for the full relaxation from init to the Gibbs measure of pot."""
        gibbs = propagate_gaussian_ou(pot, init, beta_inv, math.inf)
        if init.is_degenerate:
            return SpeedLimitReport.from_transport(
                None, w2_gaussian(init, gibbs), None, flags=(FLAG_ENTROPY_ERROR,)
            )
        terms = equilibrium_terms(pot, init, beta_inv)
        entropy = entropy_equilibrium(
            terms.ln_z_final, terms.ln_z_init, terms.mean_initial_loss, beta_inv
        )
        return SpeedLimitReport.from_transport(
            horizon_t=None, w2_sq=w2_gaussian(init, gibbs), entropy=entropy.value
        )

    def run_analyze_trajectory(self) -> None:
        p = self.params
        archive = TrajectoryArchive(p["archive"])
        traj = archive.read()
        warm_start = p["warm_start"]
        if warm_start is None:
            warm_start = archive.read_manifest().get("warm_start_index")
        cold, warm = analyze_trajectory(traj, warm_start)
        self.written.append(
            emit_plot_data(
                report_series(traj), self.output_path(self.cfg.kind.value + TSV_SUFFIX)
            )
        )
        if warm_start is not None and warm_start < traj.m - 1:
            self.written.append(
                emit_plot_data(
                    report_series(traj, warm_start),
                    self.output_path("warm" + TSV_SUFFIX),
                )
            )
        for triplet in p["triplets"]:
            trace = weight_triplet_trace(traj, triplet)
            i, j, k = triplet
            self.table(
                f"triplets_{i}_{j}_{k}",
                ["t [time]", f"w_{i} [weight]", f"w_{j} [weight]", f"w_{k} [weight]"],
                [
                    [float(t), *map(float, row)]
                    for t, row in zip(traj.times, trace, strict=True)
                ],
            )
        reports = [cold] if warm is None else [cold, warm]
        self.written.append(
            write_summary(
                self.output_path(SUMMARY_FILE),
                self.cfg,
                reports,
                {"warm_start_index": warm_start, "checkpoints": traj.m},
            )
        )


def run_experiment(
    cfg: ExperimentConfig,
    multicore: bool = False,
    verbosity: int = DEFAULT_VERBOSITY,
) -> list[Path]:
    """Run one experiment and return the paths written, summary.json last."""
    return ExperimentRunner(cfg, multicore, verbosity).run()
