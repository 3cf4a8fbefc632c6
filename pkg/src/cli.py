"""CLI interface for factor-model covariance estimation and the Monte Carlo study."""

import sys

import click
import numpy as np

from config.settings import get_settings, load_key_value_file
from src import __version__
from src.covariance_assembly import assemble_sigma, estimate_factor_covariance, woodbury_precision
from src.data_io import load_panel, load_sur_manifest, write_mask_csv, write_matrix_csv
from src.exceptions import FactorCovError
from src.experiment import (
    ExperimentConfig,
    emit_outputs,
    run_replications,
    summarize,
    write_replication_log,
)
from src.matrix_norms import is_positive_definite
from src.simulation import CalibrationParams, calibration_report
from src.sur_gls import run_feasible_gls
from utils.logger import setup_logger
from utils.validators import validate_output_directory

logger = setup_logger(__name__)


@click.group()
@click.version_option(version=__version__)
def cli():
    """Factor-model covariance estimation with adaptive thresholding."""
    try:
        is_valid, error_msg = get_settings().validate()
    except FactorCovError as e:
        is_valid, error_msg = False, str(e)
    if not is_valid:
        click.echo(click.style(f"Configuration error: {error_msg}", fg='red'), err=True)
        logger.error(f"Configuration error: {error_msg}")
        sys.exit(1)


@cli.command()
@click.argument('y_csv', type=click.Path(exists=True, dir_okay=False))
@click.argument('f_csv', type=click.Path(exists=True, dir_okay=False))
@click.option('--threshold-c', type=float, default=None, help='Constant C in omega = C K sqrt(log p / T)')
@click.option('--out', 'out_prefix', default='factorcov', show_default=True, help='Output file prefix')
@click.option('--header', is_flag=True, help='Skip the first line of each CSV')
def estimate(y_csv, f_csv, threshold_c, out_prefix, header):
    """Estimate the covariance and precision of Y (p x T) given factors F (K x T)."""
    try:
        threshold_c = threshold_c if threshold_c is not None else get_settings().threshold_c
        panel = load_panel(y_csv, f_csv, header=header)
        est = estimate_factor_covariance(panel, threshold_c=threshold_c)
        sigma = assemble_sigma(est)

        written = [
            write_matrix_csv(f"{out_prefix}_sigma.csv", sigma),
            write_matrix_csv(f"{out_prefix}_idio.csv", est.idio_cov.matrix),
            write_matrix_csv(f"{out_prefix}_loadings.csv", est.loadings),
            write_mask_csv(f"{out_prefix}_mask.csv", est.idio_cov.kept_mask),
        ]

        click.echo(f"p={panel.p}  K={panel.K}  T={panel.T}  omega={est.idio_cov.omega:.6g}")
        click.echo(f"Off-diagonal entries kept: {est.idio_cov.offdiag_kept}")

        if is_positive_definite(est.idio_cov.matrix):
            written.append(write_matrix_csv(f"{out_prefix}_precision.csv", woodbury_precision(est)))
        else:
            click.echo(click.style(
                "Warning: thresholded idiosyncratic covariance is not positive definite; "
                "precision not written. Try a larger --threshold-c.",
                fg='yellow'
            ))

        click.echo(click.style(f"✓ Wrote {len(written)} file(s)", fg='green'))
        for path in written:
            click.echo(f"  - {path}")

    except (FactorCovError, OSError) as e:
        click.echo(click.style(f"Error: {e}", fg='red'), err=True)
        logger.exception("Error in estimate command")
        sys.exit(1)


@cli.command()
@click.option('--config', 'config_path', type=click.Path(exists=True, dir_okay=False),
              help='Key-value file with experiment and calibration settings')
@click.option('--seed', type=int, default=None, help='Master seed')
@click.option('--p-grid', default=None, help="Dimensions, e.g. '20:600:20' or '20,60,100'")
@click.option('--reps', type=int, default=None, help='Replications per dimension')
@click.option('--threads', type=int, default=None, help='Worker count (FACTORCOV_THREADS overrides)')
@click.option('--t', 't', type=int, default=None, help='Sample size T')
@click.option('--inverse-p-cap', type=int, default=None, help='Largest p for inverse errors')
@click.option('--threshold-c', type=float, default=None, help='Threshold constant C')
@click.option('--out-dir', default=None, help='Output directory')
@click.option('--no-progress', is_flag=True, help='Hide the progress bar')
def simulate(config_path, seed, p_grid, reps, threads, t, inverse_p_cap, threshold_c, out_dir, no_progress):
    """Run the Monte Carlo comparison against the sample covariance."""
    try:
        file_values = load_key_value_file(config_path) if config_path else {}
        if threshold_c is not None:
            file_values["threshold_c"] = repr(threshold_c)
        config = ExperimentConfig.from_sources(file_values, {
            "seed": seed,
            "p_grid": p_grid,
            "reps": reps,
            "threads": threads,
            "t": t,
            "inverse_p_cap": inverse_p_cap,
            "output_dir": out_dir,
        })

        is_valid, error_msg = validate_output_directory(str(config.output_dir))
        if not is_valid:
            raise OSError(error_msg)

        records = run_replications(config, show_progress=not no_progress)
        write_replication_log(records, config.output_dir)
        rows = summarize(records, config)
        written = emit_outputs(rows, config)

        failed = sum(1 for record in records if record.failure)
        if failed:
            click.echo(click.style(f"{failed}/{len(records)} replication(s) recorded a failure", fg='yellow'))

        click.echo(click.style(f"✓ Simulation finished: {len(rows)} summary row(s)", fg='green'))
        for path in written:
            click.echo(f"  - {path}")

    except (FactorCovError, OSError) as e:
        click.echo(click.style(f"Error: {e}", fg='red'), err=True)
        logger.exception("Error in simulate command")
        sys.exit(1)


@cli.command()
@click.argument('manifest', type=click.Path(exists=True, dir_okay=False))
@click.option('--threshold-c', type=float, default=None, help='Threshold constant C')
@click.option('--paper-literal-weight', '--literal-weight', 'literal_weight', is_flag=True,
              help='Weight by the covariance instead of the precision (comparison only)')
@click.option('--out', 'out_path', default=None, help='Write stacked coefficients to this CSV')
@click.option('--header', is_flag=True, help='Skip the first line of each CSV')
def gls(manifest, threshold_c, literal_weight, out_path, header):
    """Feasible GLS for a seemingly unrelated regression system."""
    try:
        threshold_c = threshold_c if threshold_c is not None else get_settings().threshold_c
        model = load_sur_manifest(manifest, header=header)
        ols_fit, thresholded, gls_fit = run_feasible_gls(
            model, threshold_c=threshold_c, literal_weight=literal_weight
        )
        if literal_weight:
            click.echo(click.style("Using the literal covariance weight (comparison only)", fg='yellow'))

        click.echo(f"p={model.p}  T={model.T}  K_max={model.k_max}  omega={thresholded.omega:.6g}")
        click.echo("=" * 70)
        for i, (b_ols, b_gls) in enumerate(zip(ols_fit.coefficients, gls_fit.coefficients)):
            click.echo(f"Equation {i}:")
            click.echo(f"  OLS: {np.array2string(b_ols, precision=6)}")
            click.echo(f"  GLS: {np.array2string(b_gls, precision=6)}")
        click.echo("=" * 70)

        if out_path:
            table = np.column_stack([ols_fit.coefficient_vector, gls_fit.coefficient_vector])
            write_matrix_csv(out_path, table)
            click.echo(f"Coefficients written to {out_path}")

    except (FactorCovError, OSError) as e:
        click.echo(click.style(f"Error: {e}", fg='red'), err=True)
        logger.exception("Error in gls command")
        sys.exit(1)


@cli.command()
@click.option('--config', 'config_path', type=click.Path(exists=True, dir_okay=False),
              help='Key-value file with calibration settings')
def check_calibration(config_path):
    """Check stationarity and positive definiteness of the calibration."""
    try:
        params = CalibrationParams.from_file(config_path) if config_path else CalibrationParams()
        report = calibration_report(params)

        click.echo(f"Spectral radius of Phi: {report['phi_spectral_radius']:.6f}")
        eig = ", ".join(f"{v:.6f}" for v in report['innovation_cov_eigenvalues'])
        click.echo(f"Innovation covariance eigenvalues: {eig}")
        for key in ('innovation_cov_pd', 'sigma_b_pd', 'cov_f_pd'):
            ok = report[key]
            click.echo(click.style(f"  {key}: {ok}", fg='green' if ok else 'red'))

        if not all(report[key] for key in ('innovation_cov_pd', 'sigma_b_pd', 'cov_f_pd')):
            sys.exit(1)

    except (FactorCovError, OSError) as e:
        click.echo(click.style(f"Error: {e}", fg='red'), err=True)
        logger.exception("Error in check-calibration command")
        sys.exit(1)


if __name__ == '__main__':
    cli()
