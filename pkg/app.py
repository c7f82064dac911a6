import logging
import sys
from pathlib import Path
from typing import Callable, Dict, List, Optional

import click

import SRC.logger.logger  # noqa: F401  configures file logging
from SRC.exception import IndependenceTestException, InvalidParameterError, MissingNullTableError, RejectedInputError
from SRC.pipeline import calibration, ldlab, synthgen
from SRC.pipeline.partition import CubicPartition
from SRC.pipeline.statistics import resolve_ids
from SRC.schemas import RunConfig, SlopeComparison
from SRC.utils import io_utils
from SRC.utils.config import (
    DEFAULT_GRID_CELLS,
    DEFAULT_PERMUTATIONS,
    DEFAULT_SEED,
    DEFAULT_TABLE_DRAWS,
    DEFAULT_THREADS,
)

logger = logging.getLogger(__name__)


def _split(values) -> List[str]:
    return [v.strip() for item in values for v in str(item).split(",") if v.strip()]


# ------------------------------------------------------------------ runners


def run_test(config: RunConfig) -> None:
    sample = io_utils.read_sample_csv(config.input_path, config.d, config.d_prime)
    if config.table_path:
        table = io_utils.read_null_table(config.table_path)
        report = calibration.table_test(sample, table)
        report.config = config.embedded()
        io_utils.write_json(report, config.output)
        return

    requested = config.statistics or ["vn"]
    ids = resolve_ids(requested, sample.d, sample.d_prime)
    if config.grid_cells:
        partition = CubicPartition.unit_grid(config.grid_cells, sample.d, sample.d_prime)
    else:
        partition = CubicPartition.from_sample(
            sample, config.width_x, config.width_y, config.origin_x or (), config.origin_y or ()
        )
    reports = []
    for statistic_id in ids:
        report = calibration.permutation_pvalue(
            sample,
            statistic_id,
            B=config.replicates,
            seed=config.seed,
            partition=partition,
            threads=config.threads,
            progress=config.progress,
        )
        report.config = config.embedded()
        reports.append(report)
    single = len(reports) == 1 and "all" not in requested
    io_utils.write_json(reports[0] if single else reports, config.output)


def _generator(config: RunConfig, family: str = "independent_uniform", theta: float = 0.0) -> synthgen.GeneratorSpec:
    return synthgen.GeneratorSpec(synthgen.AlternativeSpec(family, theta, config.d, config.d_prime), config.marginal)


def run_nulltable(config: RunConfig) -> None:
    if not config.output:
        raise InvalidParameterError("nulltable needs --output for the binary table")
    statistic_id = config.statistics[0]
    table = calibration.mc_null_table(
        statistic_id,
        config.n,
        config.replicates,
        _generator(config),
        seed=config.seed,
        grid_cells=config.grid_cells,
        threads=config.threads,
        progress=config.progress,
    )
    io_utils.write_null_table(table, config.output)
    if config.csv_output:
        io_utils.export_null_table_csv(table, config.csv_output)


def run_ldcurve(config: RunConfig) -> None:
    curve = ldlab.rate_curve(
        config.statistics[0],
        config.lambdas,
        config.n_grid,
        config.replicates,
        seed=config.seed,
        generator=_generator(config),
        grid_cells=config.grid_cells,
        threads=config.threads,
        progress=config.progress,
    )
    if all(all(row) for row in curve.censored):
        raise InvalidParameterError(
            "every (n, lambda) tail estimate is censored; lower the lambda grid or raise --N"
        )
    curve.config = config.embedded()
    io_utils.write_json(curve, config.output)
    if config.csv_output:
        io_utils.write_rows_csv(ldlab.plot_rows(curve), config.csv_output)


def _load_tables(config: RunConfig, statistic_id: str) -> Dict[int, calibration.NullTable]:
    tables = {}
    for n in config.n_grid:
        path = Path(config.tables_dir or ".") / io_utils.null_table_filename(statistic_id, n)
        if not path.exists():
            raise MissingNullTableError(
                f"missing null table {path}; create it with: "
                f"l1indep nulltable --stat {statistic_id} --n {n} --N {DEFAULT_TABLE_DRAWS} "
                f"--grid {config.grid_cells} --seed {config.seed} --output {path}"
            )
        tables[n] = io_utils.read_null_table(path)
    return tables


def run_slope(config: RunConfig) -> None:
    alt = synthgen.AlternativeSpec(config.family, config.theta, config.d, config.d_prime)
    reports = []
    for statistic_id in config.statistics:
        reports.append(
            ldlab.empirical_slope(
                statistic_id,
                alt,
                config.n_grid,
                config.reps,
                _load_tables(config, statistic_id),
                seed=config.seed,
                marginal=config.marginal,
                threads=config.threads,
                progress=config.progress,
            )
        )
    ratio = None
    if len(reports) == 2:
        try:
            ratio = ldlab.efficiency_ratio(reports[0], reports[1])
        except InvalidParameterError as e:
            logger.warning(f"efficiency ratio not reported: {e.error_message}")
    io_utils.write_json(SlopeComparison(reports=reports, efficiency_ratio=ratio, config=config.embedded()), config.output)


def run_simulate(config: RunConfig) -> None:
    spec = _generator(config, config.family, config.theta)
    io_utils.write_sample_csv(synthgen.sample(spec, config.n, config.seed), config.output)


RUNNERS: Dict[str, Callable[[RunConfig], None]] = {
    "test": run_test,
    "nulltable": run_nulltable,
    "ldcurve": run_ldcurve,
    "slope": run_slope,
    "simulate": run_simulate,
}


def execute(config: RunConfig) -> None:
    """Run a resolved config, mapping library errors to exit codes (0 ok, 1 internal, 2 invalid input)."""
    try:
        logger.info(f"running {config.subcommand} with {config.embedded()}")
        RUNNERS[config.subcommand](config)
    except IndependenceTestException as e:
        logger.error(str(e))
        click.echo(f"error: {e.error_message}", err=True)
        sys.exit(e.exit_code)
    except Exception as e:
        logger.exception("internal error")
        click.echo(f"internal error: {e}", err=True)
        sys.exit(1)


# --------------------------------------------------------------------- click

seed_option = click.option("--seed", type=int, default=DEFAULT_SEED, show_default=True)
threads_option = click.option("--threads", type=int, default=DEFAULT_THREADS, show_default=True, help="Worker cap.")
progress_option = click.option("--progress/--no-progress", default=False, help="Show progress bars.")
dims_options = [
    click.option("--d", "d", type=int, default=1, show_default=True, help="Number of X columns."),
    click.option("--dprime", "d_prime", type=int, default=1, show_default=True, help="Number of Y columns."),
]
grid_option = click.option(
    "--grid", "grid_cells", type=int, default=DEFAULT_GRID_CELLS, show_default=True, help="Cells per side of the fixed unit-cube partition."
)


def _with(options):
    def decorate(fn):
        for option in reversed(options):
            fn = option(fn)
        return fn

    return decorate


@click.group()
def cli():
    """Histogram L1 independence test, competing statistics and Bahadur-efficiency lab."""


@cli.command("test")
@click.argument("input_path", type=click.Path(dir_okay=False))
@_with(dims_options)
@click.option("--stat", "stats", multiple=True, default=("vn",), show_default=True, help="Statistic id(s) or 'all'.")
@click.option("--B", "B", type=int, default=DEFAULT_PERMUTATIONS, show_default=True, help="Permutations.")
@click.option("--width-x", type=float, default=None)
@click.option("--width-y", type=float, default=None)
@click.option("--origin-x", type=str, default=None, help="Comma-separated origin of the X cells.")
@click.option("--origin-y", type=str, default=None, help="Comma-separated origin of the Y cells.")
@click.option("--fixed-grid", "fixed_grid", type=int, default=None, help="Use the unit-cube grid with this many cells per side.")
@click.option("--table", "table_path", type=click.Path(dir_okay=False), default=None, help="Calibrate against a null table instead.")
@seed_option
@threads_option
@progress_option
@click.option("--output", type=click.Path(dir_okay=False), default=None)
def test_command(input_path, d, d_prime, stats, B, width_x, width_y, origin_x, origin_y, fixed_grid, table_path, seed, threads, progress, output):
    """Test independence of the X and Y columns of a CSV sample."""
    execute(
        RunConfig(
            subcommand="test",
            input_path=input_path,
            d=d,
            d_prime=d_prime,
            statistics=_split(stats),
            replicates=B,
            seed=seed,
            width_x=width_x,
            width_y=width_y,
            origin_x=[float(v) for v in _split([origin_x])] if origin_x else None,
            origin_y=[float(v) for v in _split([origin_y])] if origin_y else None,
            grid_cells=fixed_grid,
            table_path=table_path,
            output=output,
            threads=threads,
            progress=progress,
        )
    )


@cli.command("nulltable")
@click.option("--stat", "stat", default="vn", show_default=True)
@click.option("--n", "n", type=int, required=True)
@click.option("--N", "N", type=int, default=DEFAULT_TABLE_DRAWS, show_default=True)
@_with(dims_options)
@click.option("--marginal", type=click.Choice(synthgen.MARGINALS), default="uniform", show_default=True)
@grid_option
@seed_option
@threads_option
@progress_option
@click.option("--output", type=click.Path(dir_okay=False), required=True)
@click.option("--csv", "csv_output", type=click.Path(dir_okay=False), default=None, help="Also export the draws as CSV.")
def nulltable_command(stat, n, N, d, d_prime, marginal, grid_cells, seed, threads, progress, output, csv_output):
    """Simulate and store a Monte Carlo null table."""
    execute(
        RunConfig(
            subcommand="nulltable",
            statistics=[stat],
            n=n,
            replicates=N,
            d=d,
            d_prime=d_prime,
            marginal=marginal,
            grid_cells=grid_cells,
            seed=seed,
            output=output,
            csv_output=csv_output,
            threads=threads,
            progress=progress,
        )
    )


@cli.command("ldcurve")
@click.option("--stat", "stat", default="vn", show_default=True)
@click.option("--lambdas", default="0.2,0.3,0.4", show_default=True)
@click.option("--ns", default="50,100,200,400", show_default=True)
@click.option("--N", "N", type=int, default=100000, show_default=True)
@_with(dims_options)
@grid_option
@seed_option
@threads_option
@progress_option
@click.option("--output", type=click.Path(dir_okay=False), default=None)
@click.option("--csv", "csv_output", type=click.Path(dir_okay=False), default=None, help="Plot-ready CSV.")
def ldcurve_command(stat, lambdas, ns, N, d, d_prime, grid_cells, seed, threads, progress, output, csv_output):
    """Estimate tail probabilities of a statistic under independence and fit the rate."""
    execute(
        RunConfig(
            subcommand="ldcurve",
            statistics=[stat],
            lambdas=[float(v) for v in _split([lambdas])],
            n_grid=[int(v) for v in _split([ns])],
            replicates=N,
            d=d,
            d_prime=d_prime,
            grid_cells=grid_cells,
            seed=seed,
            output=output,
            csv_output=csv_output,
            threads=threads,
            progress=progress,
        )
    )


@cli.command("slope")
@click.option("--stat", "stat", default="vn", show_default=True)
@click.option("--pair", default=None, help="Two statistic ids, e.g. vn,tau; overrides --stat.")
@click.option("--family", type=click.Choice(synthgen.FAMILIES), default="fgm", show_default=True)
@click.option("--theta", type=float, default=0.5, show_default=True)
@click.option("--ns", default="50,100,200,400", show_default=True)
@click.option("--reps", type=int, default=50, show_default=True)
@click.option("--tables-dir", type=click.Path(file_okay=False), default=".", show_default=True)
@click.option("--marginal", type=click.Choice(synthgen.MARGINALS), default="uniform", show_default=True)
@grid_option
@seed_option
@threads_option
@progress_option
@click.option("--output", type=click.Path(dir_okay=False), default=None)
def slope_command(stat, pair, family, theta, ns, reps, tables_dir, marginal, grid_cells, seed, threads, progress, output):
    """Estimate Bahadur slopes (and their ratio for a pair) under an alternative."""
    statistics = _split([pair]) if pair else [stat]
    if pair and len(statistics) != 2:
        raise click.BadParameter("--pair takes exactly two statistic ids", param_hint="--pair")
    execute(
        RunConfig(
            subcommand="slope",
            statistics=statistics,
            family=family,
            theta=theta,
            n_grid=[int(v) for v in _split([ns])],
            reps=reps,
            tables_dir=tables_dir,
            marginal=marginal,
            grid_cells=grid_cells,
            seed=seed,
            output=output,
            threads=threads,
            progress=progress,
        )
    )


@cli.command("simulate")
@click.option("--family", type=click.Choice(synthgen.FAMILIES), default="independent_uniform", show_default=True)
@click.option("--theta", type=float, default=0.0, show_default=True)
@click.option("--n", "n", type=int, required=True)
@_with(dims_options)
@click.option("--marginal", type=click.Choice(synthgen.MARGINALS), default="uniform", show_default=True)
@seed_option
@click.option("--output", type=click.Path(dir_okay=False), default=None)
def simulate_command(family, theta, n, d, d_prime, marginal, seed, output):
    """Export a generated sample in the CSV sample format."""
    execute(
        RunConfig(
            subcommand="simulate",
            family=family,
            theta=theta,
            n=n,
            d=d,
            d_prime=d_prime,
            marginal=marginal,
            seed=seed,
            output=output,
        )
    )


@cli.command("replay")
@click.argument("report_path", type=click.Path(dir_okay=False, exists=True))
@threads_option
@click.option("--output", type=click.Path(dir_okay=False), default=None)
@click.option("--csv", "csv_output", type=click.Path(dir_okay=False), default=None)
def replay_command(report_path, threads, output, csv_output):
    """Re-run the configuration embedded in a JSON report."""
    document = io_utils.read_json(report_path)
    embedded: Optional[Dict] = None
    if isinstance(document, list) and document and isinstance(document[0], dict):
        embedded = document[0].get("config")
    elif isinstance(document, dict):
        embedded = document.get("config")
    if not embedded:
        click.echo("error: report carries no embedded config", err=True)
        sys.exit(RejectedInputError.exit_code)
    config = RunConfig.model_validate({**embedded, "threads": threads, "output": output, "csv_output": csv_output})
    execute(config)


if __name__ == "__main__":
    cli()
