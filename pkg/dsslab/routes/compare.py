import logging
from pathlib import Path

import typer
from rich.console import Console
from rich.table import Table

from dsslab.core.experiment import compare_runs
from dsslab.errors import DssError
from dsslab.storage.repository import ArtifactRepository


logger = logging.getLogger(__name__)
router = typer.Typer()
console = Console()


def _fmt(value) -> str:
    if value is None:
        return "-"
    return f"{value:.6g}" if isinstance(value, float) else str(value)


@router.command("compare", help="Сравнить предельные нормы нескольких запусков")
def compare_command(
    summaries: list[Path] = typer.Argument(..., help="summary.json или каталоги запусков"),
):
    """Код 1, если наблюдаемая норма превысила прогноз γ_ε хотя бы в одном запуске."""
    try:
        report = compare_runs([ArtifactRepository.load_summary(p) for p in summaries])
    except DssError as e:
        logger.error(f"Compare error: {e.detail}")
        typer.echo(e.detail, err=True)
        raise typer.Exit(code=e.exit_code)

    table = Table(title="Предельные нормы")
    for column in ("run", "delta_q", "ultimate maxnorm", "maxnorm^2", "gamma_eps", "bound"):
        table.add_column(column, justify="right")
    for row in report.rows:
        table.add_row(row["name"], _fmt(row["delta_q"]), _fmt(row["ultimate_maxnorm"]),
                      _fmt(row["ultimate_maxnorm_sq"]), _fmt(row["gamma_eps"]), _fmt(row["bound_ok"]))
    console.print(table)
    console.print(f"ordering (largest first): {' > '.join(report.ordering)}")
    console.print(f"strictly decreasing in resolution: {report.strictly_decreasing}")
    console.print(f"gamma ratios: {', '.join(_fmt(r) for r in report.gamma_ratios)}")

    violated = any(row["bound_ok"] is False for row in report.rows)
    raise typer.Exit(code=1 if violated else 0)
