import logging
from pathlib import Path
from typing import Optional

import typer

from dsslab.core.experiment import load_config, run
from dsslab.errors import DssError


logger = logging.getLogger(__name__)
router = typer.Typer()


@router.command("run", help="Запустить эксперимент по JSON-конфигурации")
def run_command(
    config: Path = typer.Argument(..., help="Файл конфигурации эксперимента"),
    out: Optional[Path] = typer.Option(None, "--out", help="Каталог артефактов"),
    checks: Optional[str] = typer.Option(None, "--checks", help="Проверки через запятую"),
    seed: Optional[int] = typer.Option(None, "--seed", help="Зерно случайных возмущений"),
):
    """Запуск эксперимента + проверки + запись артефактов."""
    logger.info(f"Run request: {config}")
    try:
        cfg = load_config(config)
        selected = [c.strip() for c in checks.split(",") if c.strip()] if checks else None
        result = run(cfg, out_dir=out, checks=selected, seed=seed)
    except DssError as e:
        logger.error(f"Run error for {config}: {e.detail}")
        typer.echo(e.detail, err=True)
        raise typer.Exit(code=e.exit_code)

    for name, outcome in result.summary.checks.items():
        typer.echo(f"{name:15s} {outcome.status:13s} {outcome.detail}")
    typer.echo(f"artifacts: {result.out_dir}")
    raise typer.Exit(code=result.exit_code)
