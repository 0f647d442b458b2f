import logging
from pathlib import Path

import typer

from dsslab.core.experiment import load_config, restart_check
from dsslab.errors import DssError


logger = logging.getLogger(__name__)
router = typer.Typer()


@router.command("restart-check", help="Сравнить непрерывный счёт со счётом через снимок состояния")
def restart_check_command(
    config: Path = typer.Argument(..., help="Файл конфигурации эксперимента"),
    split: float = typer.Option(..., "--split", help="Момент сохранения снимка"),
):
    try:
        report = restart_check(load_config(config), split)
    except DssError as e:
        logger.error(f"Restart check error for {config}: {e.detail}")
        typer.echo(e.detail, err=True)
        raise typer.Exit(code=e.exit_code)

    typer.echo(f"max |diff| = {report.max_abs_diff:.3e} (tol {report.tol:.0e}, "
               f"grid aligned: {report.grid_aligned}, alpha = {report.alpha:.6g})")
    raise typer.Exit(code=0 if report.agree else 1)
