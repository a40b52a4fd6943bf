"""Rich progress bars and result tables."""

from collections import Counter
from contextlib import contextmanager

from rich.console import Console
from rich.progress import (
    BarColumn,
    MofNCompleteColumn,
    Progress,
    SpinnerColumn,
    TextColumn,
    TimeElapsedColumn,
    TimeRemainingColumn,
)
from rich.table import Table

from resexp.models.problems import Verdict
from resexp.models.report import ArmSummary, QuarticRecord

console = Console(stderr=True)


@contextmanager
def create_trial_progress(disable: bool = False):
    """
    Create a Rich progress bar for trial jobs.

    Yields:
        Progress object

    Example:
        with create_trial_progress() as progress:
            task = progress.add_task("kmeans", total=len(jobs))
            for job in jobs:
                progress.update(task, advance=1)
    """
    progress = Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}"),
        BarColumn(),
        MofNCompleteColumn(),
        TimeElapsedColumn(),
        TimeRemainingColumn(),
        console=console,
        disable=disable,
    )

    with progress:
        yield progress


def _fmt(value: float | None, digits: int = 4) -> str:
    if value is None:
        return "-"
    return f"{value:.{digits}g}"


def print_summary_table(summaries: list[ArmSummary], title: str) -> None:
    """
    Print mean/min/max per arm and setting.

    Relative-error columns are shown when any arm has them, success counts when any arm
    reports success.
    """
    show_rel = any(s.mean_relative_error is not None for s in summaries)
    show_success = any(s.successes is not None for s in summaries)

    table = Table(title=title)
    table.add_column("Arm", style="cyan", no_wrap=True)
    table.add_column("Setting")
    if show_rel:
        table.add_column("Rel. mean", justify="right")
        table.add_column("Rel. min", justify="right")
        table.add_column("Rel. max", justify="right")
    table.add_column("Objective mean", justify="right")
    table.add_column("Objective min", justify="right")
    table.add_column("Objective max", justify="right")
    if show_success:
        table.add_column("Successes", justify="right", style="green")
    table.add_column("Iters", justify="right")
    table.add_column("ms", justify="right")

    for s in summaries:
        row = [s.arm, s.setting or "-"]
        if show_rel:
            row += [
                _fmt(s.mean_relative_error),
                _fmt(s.min_relative_error),
                _fmt(s.max_relative_error),
            ]
        row += [_fmt(s.mean_objective), _fmt(s.min_objective), _fmt(s.max_objective)]
        if show_success:
            row.append("-" if s.successes is None else f"{s.successes}/{s.trials}")
        row += [f"{s.mean_iterations:.1f}", f"{s.mean_wall_ms:.0f}"]
        table.add_row(*row)

    console.print(table)

    failures = sum(s.failures for s in summaries)
    if failures:
        console.print(
            f"[yellow]Warning: {failures} trial run(s) failed; see the error field[/yellow]"
        )


def print_verdict_table(records: list[QuarticRecord]) -> None:
    """Print how many sampled quartic instances fall under each verdict."""
    counts = Counter(r.verdict for r in records)
    table = Table(title="Quartic RE-constant check")
    table.add_column("Verdict", style="cyan")
    table.add_column("Instances", justify="right")

    styles = {
        Verdict.HOLDS: "green",
        Verdict.VIOLATED: "red",
        Verdict.COINCIDENT: "yellow",
        Verdict.NOT_APPLICABLE: "dim",
    }
    for verdict in Verdict:
        style = styles[verdict]
        table.add_row(f"[{style}]{verdict.value}[/{style}]", str(counts.get(verdict, 0)))

    console.print(table)
