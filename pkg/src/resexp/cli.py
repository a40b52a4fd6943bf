"""CLI interface for resexp."""

import math
from pathlib import Path

import click
from rich.console import Console

from resexp import __version__
from resexp.core.config import INIT_POLICIES, OUTPUT_FORMATS, REFINE_ITERS, ExperimentConfig
from resexp.models.report import TrialReport
from resexp.services.experiment_service import ExperimentService, quartic_sweep
from resexp.services.file_service import ResultFileService
from resexp.utils.progress import print_summary_table, print_verdict_table

console = Console(stderr=True)


def experiment_options(mu0: float = 0.1, T: int = 30, trials: int = 20):
    """Options shared by every experiment subcommand, with per-problem defaults."""

    def decorate(fn):
        options = [
            click.option(
                "--mu0", default=mu0, show_default=True, help="Initial ADMM penalty in (0, 1]"
            ),
            click.option(
                "--T", "T", default=T, show_default=True, help="Schedule length (iterations)"
            ),
            click.option("--trials", default=trials, show_default=True, help="Number of trials"),
            click.option(
                "--seed", default=0, show_default=True, help="Base seed; trial i uses seed + i"
            ),
            click.option(
                "--init",
                type=click.Choice(INIT_POLICIES),
                default="random",
                show_default=True,
                help="Initialization of the RE arm (k-means)",
            ),
            click.option(
                "--out",
                "-o",
                type=click.Path(dir_okay=False, path_type=Path),
                help="Write per-trial reports here (stdout if omitted)",
            ),
            click.option(
                "--format",
                "fmt",
                type=click.Choice(OUTPUT_FORMATS),
                default="jsonl",
                show_default=True,
                help="Report format",
            ),
            click.option(
                "--workers", default=1, show_default=True, help="Parallel worker processes"
            ),
            click.option(
                "--refine-iters",
                default=REFINE_ITERS,
                show_default=True,
                help="Plain alternating iterations after the schedule",
            ),
            click.option(
                "--data",
                "data_path",
                type=click.Path(exists=True, dir_okay=False, path_type=Path),
                help="Input data file instead of synthetic data",
            ),
            click.option(
                "--limit",
                type=click.IntRange(min=1),
                help="Use only the first N points of --data",
            ),
            click.option(
                "--trace-out",
                type=click.Path(dir_okay=False, path_type=Path),
                help="Write per-iteration objectives of every arm here",
            ),
            click.option("--quiet", "-q", is_flag=True, help="Hide progress and summary"),
        ]
        for option in reversed(options):
            fn = option(fn)
        return fn

    return decorate


def _save(service: ExperimentService, reports: list[TrialReport]) -> None:
    config = service.config
    if config.out is None:
        click.echo(service.files.render(reports), nl=False)
    service.save(reports)
    if config.out is not None:
        console.print(f"[green]✓[/green] Wrote {len(reports)} reports to {config.out}")
    if config.trace_out is not None:
        console.print(
            f"[green]✓[/green] Wrote {len(service.traces)} trace rows to {config.trace_out}"
        )
    if config.signals_out is not None:
        console.print(
            f"[green]✓[/green] Wrote {len(service.signals)} recovered signals "
            f"to {config.signals_out}"
        )


def _run(quiet: bool, title: str, **settings) -> None:
    try:
        service = ExperimentService(ExperimentConfig(**settings))
        reports = service.run(show_progress=not quiet)
        if not quiet:
            print_summary_table(service.summarize(reports), title)
        _save(service, reports)
    except Exception as e:
        console.print(f"[red]Error: {e}[/red]")
        raise click.Abort()


@click.group()
@click.version_option(version=__version__, prog_name="resexp")
def cli():
    """Residual expansion benchmarks for nonconvex least squares."""
    pass


@cli.command()
@experiment_options(mu0=0.01, T=300)
@click.option("--n", "n", default=1000, show_default=True, help="Number of synthetic points")
@click.option("--d", "d", default=2, show_default=True, help="Dimension of synthetic points")
@click.option("--k", "k", default=10, show_default=True, help="Number of clusters")
@click.option(
    "--separation",
    default=12.0,
    show_default=True,
    help="Minimum distance between blob centers, in blob standard deviations",
)
@click.option(
    "--balance", default=0.6, show_default=True, help="Size ratio between consecutive blobs"
)
def kmeans(quiet: bool, **settings):
    """K-means: k-means++, random Lloyd, Hartigan and RE arms."""
    _run(quiet, "K-means (relative to k-means++)", problem="kmeans", **settings)


@cli.command()
@experiment_options(mu0=0.1, T=30)
@click.option("--n", "n", default=500, show_default=True, help="Points in the synthetic cloud")
@click.option(
    "--angle",
    "angles_deg",
    multiple=True,
    type=float,
    default=(60.0, 75.0, 90.0),
    show_default=True,
    help="Ground-truth rotation angle in degrees (repeatable)",
)
@click.option("--sigma", default=0.03, show_default=True, help="Target noise per coordinate")
@click.option("--partial", is_flag=True, help="Keep only part of the target cloud")
@click.option("--overlap", default=0.6, show_default=True, help="Kept fraction with --partial")
@click.option(
    "--fit-only-expansion",
    is_flag=True,
    help="Match correspondences with the unexpanded transform; expand only the fit",
)
@click.option(
    "--success-threshold",
    default=1.0,
    show_default=True,
    help="A run succeeds when its final objective is below this",
)
def register(quiet: bool, angles_deg: tuple[float, ...], **settings):
    """Rigid registration: plain ICP and RE-ICP per rotation angle."""
    angles = tuple(math.radians(a) for a in angles_deg)
    _run(quiet, "Registration", problem="register", angles=angles, **settings)


@cli.command()
@experiment_options(mu0=0.5, T=100, trials=5)
@click.option("--n", "n", default=10_000, show_default=True, help="Number of synthetic vectors")
@click.option("--d", "d", default=32, show_default=True, help="Dimension of synthetic vectors")
@click.option("--subspaces", "-M", default=4, show_default=True, help="Number of subspaces")
@click.option("--codebook-size", "-k", default=16, show_default=True, help="Codewords per subspace")
@click.option("--random-rotation", is_flag=True, help="Start from a random orthogonal rotation")
def opq(quiet: bool, **settings):
    """Optimized product quantization: alternating and RE arms."""
    _run(quiet, "OPQ", problem="opq", **settings)


@cli.command()
@experiment_options(mu0=0.1, T=30, trials=5)
@click.option("--n", "n", default=128, show_default=True, help="Signal length")
@click.option("--kernel-length", "-L", default=9, show_default=True, help="Blur kernel length")
@click.option("--kernel-width", default=2.0, show_default=True, help="Gaussian kernel sigma")
@click.option("--noise", default=0.01, show_default=True, help="Noise relative to signal RMS")
@click.option("--gamma-x", default=0.05, show_default=True, help="Signal smoothness weight")
@click.option("--gamma-k", default=0.01, show_default=True, help="Kernel ridge weight")
@click.option(
    "--signals-out",
    type=click.Path(file_okay=False, path_type=Path),
    help="Write recovered signals and kernels as CSV files into this directory",
)
def deconv(quiet: bool, **settings):
    """Blind 1-D deconvolution: alg1 and alg2 arms."""
    _run(quiet, "Blind deconvolution", problem="deconv", **settings)


@cli.command()
@experiment_options(mu0=0.1, T=50)
@click.option(
    "--instances",
    default=1000,
    show_default=True,
    help="Instances for the RE-constant check (0 to skip)",
)
@click.option(
    "--sweep-out",
    type=click.Path(dir_okay=False, path_type=Path),
    help="Write the per-instance check as CSV",
)
def quartic(quiet: bool, instances: int, sweep_out: Path | None, **settings):
    """Quartic toy problem: RE-constant check and alternating vs RE runs."""
    if instances:
        try:
            records = quartic_sweep(instances, rng_seed=settings["seed"])
            if sweep_out is not None:
                ResultFileService.emit_quartic_records(records, sweep_out)
        except Exception as e:
            console.print(f"[red]Error: {e}[/red]")
            raise click.Abort()
        if not quiet:
            print_verdict_table(records)
    _run(quiet, "Quartic", problem="quartic", **settings)


if __name__ == "__main__":
    cli()
