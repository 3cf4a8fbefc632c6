"""
Monte Carlo harness comparing the thresholded factor estimator with the
sample covariance over a grid of dimensions.

Every replication is a pure function of (seed, p, replication index): it
builds its own child generator and runs with BLAS pinned to one thread, so
summaries do not depend on the worker count or completion order.
"""

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from threadpoolctl import threadpool_limits
from tqdm import tqdm

from config.settings import get_settings, write_key_value_file
from src.adaptive_threshold import adaptive_threshold, invert_spd, residual_moments, threshold_level
from src.covariance_assembly import (
    FactorCovEstimate,
    assemble_sigma,
    error_report,
    woodbury_precision,
)
from src.exceptions import ConfigurationError, DomainError, FactorCovError
from src.factor_regression import fit_factor_model, sample_cov
from src.matrix_norms import eigenvalues, is_positive_definite, operator_norm
from src.simulation import CalibrationParams, child_rng, simulate_market
from utils.logger import setup_logger
from utils.validators import validate_output_directory

logger = setup_logger(__name__)

ESTIMATORS = ("thresholded", "sample")
METRICS = ("sigma_norm", "max_norm", "inv_operator_norm")
SUMMARY_COLUMNS = ["p", "estimator", "metric", "mean", "sd", "n_effective"]


def parse_p_grid(text: str) -> Tuple[int, ...]:
    """
    Parse ``start:stop:step`` (inclusive stop) or a comma-separated list.

    Examples:
        "20:600:20" -> (20, 40, ..., 600)
        "20,60,100" -> (20, 60, 100)
    """
    text = text.strip()
    try:
        if ":" in text:
            parts = [int(part) for part in text.split(":")]
            if len(parts) not in (2, 3):
                raise ValueError(text)
            start, stop = parts[0], parts[1]
            step = parts[2] if len(parts) == 3 else 1
            if step < 1:
                raise ValueError(text)
            grid = tuple(range(start, stop + 1, step))
        else:
            grid = tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise ConfigurationError(f"Cannot parse p grid '{text}'")
    if not grid:
        raise ConfigurationError(f"p grid '{text}' is empty")
    return grid


@dataclass
class ExperimentConfig:
    """Resolved settings of one Monte Carlo sweep."""

    t: int = 500
    p_grid: Tuple[int, ...] = tuple(range(20, 601, 20))
    reps: int = 200
    seed: int = 20120101
    calib: CalibrationParams = field(default_factory=CalibrationParams)
    inverse_p_cap: int = 300
    threads: int = 1
    output_dir: Path = Path("results")
    burn_in: int = 500
    max_attempts: int = 1000

    INT_KEYS = ("t", "reps", "seed", "inverse_p_cap", "threads", "burn_in", "max_attempts")

    def validate(self) -> None:
        if self.reps < 1:
            raise ConfigurationError(f"reps must be at least 1, got {self.reps}")
        if self.t < 2:
            raise ConfigurationError(f"t must be at least 2, got {self.t}")
        if not self.p_grid or min(self.p_grid) < 2:
            raise ConfigurationError(f"Every p in the grid must be at least 2, got {self.p_grid}")
        if self.threads < 1:
            raise ConfigurationError(f"threads must be at least 1, got {self.threads}")
        self.calib.validate()

    @classmethod
    def from_sources(
        cls,
        file_values: Optional[Dict[str, str]] = None,
        overrides: Optional[Dict[str, object]] = None,
    ) -> "ExperimentConfig":
        """
        Resolve defaults < config file < explicit overrides < FACTORCOV_THREADS.

        Args:
            file_values: Raw strings from a key-value file (may also hold
                calibration keys)
            overrides: Values from CLI flags; ``None`` entries are ignored
        """
        file_values = dict(file_values or {})
        settings = get_settings()
        file_values.setdefault("threshold_c", repr(settings.threshold_c))
        kwargs: Dict[str, object] = {"output_dir": settings.output_dir}
        try:
            for key in cls.INT_KEYS:
                if key in file_values:
                    kwargs[key] = int(file_values[key])
        except ValueError as e:
            raise ConfigurationError(f"Malformed experiment value: {e}") from e
        if "p_grid" in file_values:
            kwargs["p_grid"] = parse_p_grid(file_values["p_grid"])
        if "output_dir" in file_values:
            kwargs["output_dir"] = Path(file_values["output_dir"])
        kwargs["calib"] = CalibrationParams.from_mapping(file_values)

        for key, value in (overrides or {}).items():
            if value is None:
                continue
            if key == "p_grid" and isinstance(value, str):
                value = parse_p_grid(value)
            if key == "output_dir":
                value = Path(value)
            kwargs[key] = value

        if settings.threads is not None:
            kwargs["threads"] = settings.threads

        config = cls(**kwargs)
        config.validate()
        return config

    def to_mapping(self) -> Dict[str, str]:
        values = {key: str(getattr(self, key)) for key in self.INT_KEYS}
        values["p_grid"] = ",".join(str(p) for p in self.p_grid)
        values["output_dir"] = str(self.output_dir)
        values.update(self.calib.to_mapping())
        return values


@dataclass
class ReplicationRecord:
    """Error metrics of one replication; NaN marks a metric that was not computed."""

    p: int
    rep: int
    thresholded_sigma_norm: float = math.nan
    thresholded_max_norm: float = math.nan
    thresholded_inv_operator_norm: float = math.nan
    sample_sigma_norm: float = math.nan
    sample_max_norm: float = math.nan
    sample_inv_operator_norm: float = math.nan
    idio_operator_norm: float = math.nan
    omega: float = math.nan
    m_t: int = -1
    idio_pd: bool = False
    sigma_pd: bool = False
    sample_min_eigenvalue: float = math.nan
    sample_operator_norm: float = math.nan
    failure: str = ""

    def metric(self, estimator: str, metric: str) -> float:
        return getattr(self, f"{estimator}_{metric}")


@dataclass(frozen=True)
class SummaryRow:
    """Mean and standard deviation of one metric at one dimension."""

    p: int
    estimator: str
    metric: str
    mean: float
    sd: float
    n_effective: int


def _tag(stage: str, error: Exception) -> str:
    return f"{stage}:{type(error).__name__}"


def run_replication(config: ExperimentConfig, p: int, rep_index: int) -> ReplicationRecord:
    """
    Simulate one market and score both estimators against the truth.

    Library errors are caught and recorded in ``failure``; the metrics that
    could still be computed are kept.
    """
    with threadpool_limits(limits=1, user_api="blas"):
        return _run_replication(config, p, rep_index)


def _run_replication(config: ExperimentConfig, p: int, rep_index: int) -> ReplicationRecord:
    record = ReplicationRecord(p=p, rep=rep_index)
    failures: List[str] = []
    rng = child_rng(config.seed, p, rep_index)
    params = config.calib
    with_inverse = p <= config.inverse_p_cap

    try:
        truth, panel = simulate_market(
            params, p, config.t, rng, burn_in=config.burn_in, max_attempts=config.max_attempts
        )
    except FactorCovError as e:
        logger.warning(f"Replication p={p} rep={rep_index}: data generation failed: {e}")
        record.failure = _tag("generation", e)
        return record
    record.m_t = truth.m_t

    try:
        fit = fit_factor_model(panel)
        omega = threshold_level(params.threshold_c, panel.K, p, config.t)
        idio = adaptive_threshold(residual_moments(fit.residuals), omega)
        est = FactorCovEstimate(loadings=fit.loadings, factor_cov=fit.factor_cov, idio_cov=idio)
        sigma_hat = assemble_sigma(est)
        record.omega = omega
        record.idio_operator_norm = operator_norm(idio.matrix - truth.sigma_u)
        record.idio_pd = is_positive_definite(idio.matrix)
        record.sigma_pd = is_positive_definite(sigma_hat)

        precision = None
        if with_inverse:
            try:
                precision = woodbury_precision(est)
            except FactorCovError as e:
                logger.warning(f"Replication p={p} rep={rep_index}: no thresholded inverse: {e}")
                failures.append(_tag("thresholded_inverse", e))
        report = error_report(sigma_hat, precision, truth.sigma_full)
        record.thresholded_sigma_norm = report.sigma_norm_err
        record.thresholded_max_norm = report.max_norm_err
        if report.operator_norm_inv_err is not None:
            record.thresholded_inv_operator_norm = report.operator_norm_inv_err
    except FactorCovError as e:
        logger.warning(f"Replication p={p} rep={rep_index}: thresholded estimator failed: {e}")
        failures.append(_tag("thresholded", e))

    try:
        s = sample_cov(panel.y)
        vals = eigenvalues(s)
        record.sample_min_eigenvalue = float(vals[0])
        record.sample_operator_norm = float(np.max(np.abs(vals)))
        s_inv = None
        if with_inverse:
            try:
                s_inv = invert_spd(s)
            except FactorCovError:
                logger.debug(f"Replication p={p} rep={rep_index}: sample covariance is singular")
        report = error_report(s, s_inv, truth.sigma_full)
        record.sample_sigma_norm = report.sigma_norm_err
        record.sample_max_norm = report.max_norm_err
        if report.operator_norm_inv_err is not None:
            record.sample_inv_operator_norm = report.operator_norm_inv_err
    except FactorCovError as e:
        logger.warning(f"Replication p={p} rep={rep_index}: sample estimator failed: {e}")
        failures.append(_tag("sample", e))

    record.failure = ";".join(failures)
    return record


def run_replications(config: ExperimentConfig, show_progress: bool = False) -> List[ReplicationRecord]:
    """
    Run every (p, replication) task on a bounded worker pool.

    Records come back in grid order regardless of the worker count.
    """
    config.validate()
    tasks = [(p, rep) for p in config.p_grid for rep in range(config.reps)]
    logger.info(
        f"Running {len(tasks)} replication(s): p grid {config.p_grid[0]}..{config.p_grid[-1]} "
        f"({len(config.p_grid)} points), T={config.t}, reps={config.reps}, threads={config.threads}"
    )
    results = Parallel(n_jobs=config.threads, return_as="generator")(
        delayed(run_replication)(config, p, rep) for p, rep in tasks
    )
    records = list(tqdm(results, total=len(tasks), desc="replications", disable=not show_progress))

    failed = sum(1 for record in records if record.failure)
    if failed:
        logger.warning(f"{failed}/{len(records)} replication(s) recorded a failure")
    not_pd = sum(1 for record in records if record.m_t >= 0 and not record.idio_pd)
    if not_pd:
        logger.warning(
            f"{not_pd}/{len(records)} thresholded idiosyncratic estimate(s) not positive definite "
            f"at threshold_c={config.calib.threshold_c:g}; a larger constant drops more null entries"
        )
    return records


def _mean_sd(values: Sequence[float]) -> Tuple[float, float]:
    arr = np.asarray(values, dtype=float)
    if arr.size == 1:
        return float(arr[0]), 0.0
    return float(arr.mean()), float(arr.std(ddof=1))


def summarize(records: Iterable[ReplicationRecord], config: ExperimentConfig) -> List[SummaryRow]:
    """
    Aggregate replication records into per-(p, estimator, metric) rows.

    Non-finite values (skipped or failed metrics) are excluded and lower
    ``n_effective``; combinations with no usable value produce no row.
    """
    by_p: Dict[int, List[ReplicationRecord]] = {}
    for record in records:
        by_p.setdefault(record.p, []).append(record)

    rows: List[SummaryRow] = []
    for p in config.p_grid:
        for estimator in ESTIMATORS:
            for metric in METRICS:
                values = [r.metric(estimator, metric) for r in by_p.get(p, [])]
                values = [v for v in values if math.isfinite(v)]
                if not values:
                    continue
                mean, sd = _mean_sd(values)
                rows.append(SummaryRow(p, estimator, metric, mean, sd, len(values)))
    rows.sort(key=lambda row: (row.metric, row.estimator, row.p))
    return rows


def run_experiment(config: ExperimentConfig, show_progress: bool = False) -> List[SummaryRow]:
    """
    Run the full sweep and return the summary rows.

    Raises:
        OSError: when the output directory is not writable (checked before
            any computation)
    """
    is_valid, error_msg = validate_output_directory(str(config.output_dir))
    if not is_valid:
        raise OSError(error_msg)
    return summarize(run_replications(config, show_progress=show_progress), config)


def summary_frame(rows: Sequence[SummaryRow]) -> pd.DataFrame:
    return pd.DataFrame([asdict(row) for row in rows], columns=SUMMARY_COLUMNS)


def curve_frame(rows: Sequence[SummaryRow], metric: str) -> pd.DataFrame:
    """Plot-ready columns p, <estimator>_mean, <estimator>_sd for one metric."""
    frame = summary_frame([row for row in rows if row.metric == metric])
    curve = pd.DataFrame({"p": sorted(frame["p"].unique())})
    for estimator in ESTIMATORS:
        part = frame[frame["estimator"] == estimator][["p", "mean", "sd"]]
        part = part.rename(columns={"mean": f"{estimator}_mean", "sd": f"{estimator}_sd"})
        curve = curve.merge(part, on="p", how="left")
    return curve


def emit_outputs(rows: Sequence[SummaryRow], config: ExperimentConfig) -> List[Path]:
    """
    Write summary.csv, one curve_<metric>.csv per metric and config_resolved.txt.

    Returns:
        Paths of the written files
    """
    if not rows:
        raise DomainError("No summary rows to write")
    out_dir = Path(config.output_dir)
    is_valid, error_msg = validate_output_directory(str(out_dir))
    if not is_valid:
        raise OSError(error_msg)

    written: List[Path] = []
    try:
        summary_path = out_dir / "summary.csv"
        summary_frame(rows).to_csv(summary_path, index=False, float_format="%.17g")
        written.append(summary_path)

        for metric in METRICS:
            if not any(row.metric == metric for row in rows):
                continue
            curve_path = out_dir / f"curve_{metric}.csv"
            curve_frame(rows, metric).to_csv(curve_path, index=False, float_format="%.17g")
            written.append(curve_path)

        config_path = out_dir / "config_resolved.txt"
        write_key_value_file(str(config_path), config.to_mapping())
        written.append(config_path)
    except OSError as e:
        raise OSError(f"Failed writing outputs to {out_dir}: {e}") from e

    logger.info(f"Wrote {len(written)} file(s) to {out_dir}")
    return written


def write_replication_log(records: Sequence[ReplicationRecord], output_dir: Path) -> Path:
    """Dump every replication record to replications.csv."""
    path = Path(output_dir) / "replications.csv"
    frame = pd.DataFrame([asdict(record) for record in records])
    frame.to_csv(path, index=False, float_format="%.17g")
    return path


def read_summary_csv(path: Path) -> List[SummaryRow]:
    """Parse a summary.csv written by :func:`emit_outputs`."""
    frame = pd.read_csv(path)
    return [
        SummaryRow(
            p=int(row.p),
            estimator=str(row.estimator),
            metric=str(row.metric),
            mean=float(row.mean),
            sd=float(row.sd),
            n_effective=int(row.n_effective),
        )
        for row in frame.itertuples(index=False)
    ]
