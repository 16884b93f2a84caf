"""Command-line entry point: `python -m app.cli run|converge|stability|table1|ic-check`."""
import logging
import sys

import click
import pandas as pd
from dotenv import load_dotenv
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from core.config import RunConfig, env_log_level, env_output_dir, load_run_config, parse_run_config
from core.errors import WaveSheetError
from core.runner import EXIT_CODES, run
from core.studies import STABILITY_REFERENCE, convergence_study, ic_check_all, stability_study

logger = logging.getLogger("wavesheet")
console = Console()

# Load environment variables from .env file
load_dotenv()


def setup_logging(level: str) -> None:
    logging.basicConfig(level=level.upper(), format="%(message)s", datefmt="[%X]",
                        handlers=[RichHandler(console=console, rich_tracebacks=True)], force=True)


def _frame_table(df: pd.DataFrame, title: str, index: bool = True) -> Table:
    table = Table(title=title)
    if index:
        table.add_column(str(df.index.name or ""))
    for col in df.columns:
        table.add_column(str(col), justify="right")
    for idx, row in df.iterrows():
        cells = [f"{v:.4g}" if isinstance(v, float) else str(v) for v in row]
        table.add_row(*([str(idx)] if index else []), *cells)
    return table


def _load_config(path: str | None, overrides: dict) -> RunConfig:
    """Config from a TOML file (or the defaults), with the command-line flags laid over it."""
    base = load_run_config(path) if path else RunConfig()
    data = base.model_dump(mode="json", exclude_none=True)
    for key, value in overrides.items():
        if value is None:
            continue
        node = data
        *parents, leaf = key.split(".")
        for part in parents:
            node = node.setdefault(part, {})
        node[leaf] = value
    return parse_run_config(data)


@click.group()
@click.option("--log-level", default=None, help="Logging level (defaults to WAVESHEET_LOG_LEVEL or INFO).")
def cli(log_level):
    """Periodic boundary-integral water-wave simulator."""
    setup_logging(log_level or env_log_level())


def _common_options(fn):
    options = [
        click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None,
                     help="TOML run-config file."),
        click.option("--formulation", type=click.Choice(["vortex", "dipole"]), default=None),
        click.option("--scenario", type=click.Choice(["linear_wave", "stokes2", "cnoidal", "breaking"]),
                     default=None),
        click.option("-n", "--points", type=int, default=None, help="Surface points N."),
        click.option("--dt", type=float, default=None, help="Fixed time step (overrides the CFL choice)."),
        click.option("--cfl", type=float, default=None, help="CFL target used to choose dt."),
        click.option("--regularizer", type=click.Choice(["none", "filter", "offset"]), default=None),
        click.option("--oec/--no-oec", default=None, help="Odd-even smoothing of the dipole density rate."),
        click.option("--end-time", type=float, default=None),
        click.option("--output-dir", type=click.Path(file_okay=False), default=None),
    ]
    for option in reversed(options):
        fn = option(fn)
    return fn


def _overrides(formulation, scenario, points, dt, cfl, regularizer, oec, end_time, output_dir) -> dict:
    return {"scenario.formulation": formulation, "scenario.kind": scenario, "scenario.n_surface": points,
            "step.dt": dt, "step.cfl_target": cfl, "regularizer": regularizer, "step.oec_enabled": oec,
            "end_time": end_time, "output_dir": output_dir}


@cli.command("run")
@_common_options
@click.option("--name", default=None, help="Run directory name.")
def run_cmd(config_path, formulation, scenario, points, dt, cfl, regularizer, oec, end_time, output_dir, name):
    """Run one simulation; the exit code tells how it ended."""
    try:
        overrides = _overrides(formulation, scenario, points, dt, cfl, regularizer, oec, end_time, output_dir)
        overrides["name"] = name
        cfg = _load_config(config_path, overrides)
        artifacts = run(cfg)
    except (WaveSheetError, FileNotFoundError) as e:
        logger.error("%s", e)
        sys.exit(EXIT_CODES["error"])
    console.print(f"[bold]{artifacts.termination}[/bold] at t={artifacts.final_time:.6g} "
                  f"after {artifacts.steps} steps; output in {artifacts.directory}")
    sys.exit(artifacts.exit_code)


@cli.command("converge")
@_common_options
@click.option("--resolutions", default="128,256,512,1024", help="Comma-separated N list.")
@click.option("--reference", "reference_n", type=int, default=2048, help="Reference N.")
@click.option("--times", default="1.0", help="Comma-separated comparison times.")
@click.option("--workers", type=int, default=None)
def converge_cmd(config_path, formulation, scenario, points, dt, cfl, regularizer, oec, end_time, output_dir,
                 resolutions, reference_n, times, workers):
    """Hausdorff error against a reference resolution, with fitted orders."""
    try:
        cfg = _load_config(config_path, _overrides(formulation, scenario, points, dt, cfl, regularizer, oec,
                                                    end_time, output_dir))
        result = convergence_study(cfg, [int(n) for n in resolutions.split(",")], reference_n,
                                   [float(t) for t in times.split(",")], output_dir=cfg.output_dir or env_output_dir(),
                                   workers=workers)
    except (WaveSheetError, FileNotFoundError, ValueError) as e:
        logger.error("%s", e)
        sys.exit(EXIT_CODES["error"])
    console.print(_frame_table(result.table, "Hausdorff error", index=False))
    for t, order in result.orders.items():
        console.print(f"t={t:g}: order {order:.3f}")


@cli.command("stability")
@click.option("--resolutions", default="256,512,1024,2048", help="Comma-separated N list.")
@click.option("--end-time", type=float, default=5.0)
@click.option("--output-dir", type=click.Path(file_okay=False), default=None)
@click.option("--workers", type=int, default=None)
def stability_cmd(resolutions, end_time, output_dir, workers):
    """Breaking-wave runs for every method and N; prints times before the runs stopped."""
    ns = [int(n) for n in resolutions.split(",")]
    result = stability_study(ns, output_dir=output_dir, workers=workers, end_time=end_time)
    console.print(_frame_table(result.times, "Final time before instability"))
    console.print(_frame_table(result.terminations, "How each run stopped"))
    reference = STABILITY_REFERENCE.reindex(ns)
    console.print(_frame_table(reference, "Reference times"))


cli.add_command(stability_cmd, name="table1")


@cli.command("ic-check")
@click.option("-n", "--points", type=int, default=256)
def ic_check_cmd(points):
    """Scenario -> boundary solve -> normal-trace round trip for every built-in scenario."""
    result = ic_check_all(points)
    console.print(_frame_table(result, f"Normal-trace reconstruction, N={points}", index=False))
    if result["relative_error"].isna().any():
        sys.exit(EXIT_CODES["error"])


if __name__ == '__main__':
    cli()
