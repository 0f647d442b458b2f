import logging
from pathlib import Path

import typer

from dsslab.config import settings
from dsslab.core.experiment import run_batch
from dsslab.errors import DssError


logger = logging.getLogger(__name__)
router = typer.Typer()


@router.command("run-batch", help="Запустить пакет экспериментов параллельно")
def run_batch_command(
    configs: list[Path] = typer.Argument(..., help="Файлы конфигураций"),
    workers: int = typer.Option(settings.SEARCH_WORKERS, "--workers", min=1, help="Число процессов"),
):
    """Код завершения - наибольший из кодов отдельных запусков."""
    logger.info(f"Batch request: {len(configs)} configs, {workers} workers")
    try:
        results = run_batch(configs, workers=workers)
    except DssError as e:
        logger.error(f"Batch error: {e.detail}")
        typer.echo(e.detail, err=True)
        raise typer.Exit(code=e.exit_code)

    for path, result in zip(configs, results):
        typer.echo(f"{result.exit_code}  {path}  ->  {result.out_dir}")
    raise typer.Exit(code=max(r.exit_code for r in results))
