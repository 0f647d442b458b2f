import logging
from pathlib import Path
from typing import Optional

import typer
from rich.console import Console
from rich.table import Table

from dsslab.core.certificate import certificate_report, derive_constants, search_certificate
from dsslab.core.experiment import build_system, load_config
from dsslab.errors import DssError


logger = logging.getLogger(__name__)
router = typer.Typer()
console = Console()


@router.command("search-cert", help="Найти сертификат устойчивости для системы из конфигурации")
def search_cert_command(
    config: Path = typer.Argument(..., help="Файл конфигурации эксперимента"),
    budget: Optional[int] = typer.Option(None, "--budget", min=1, help="Бюджет вычислений λ_min(Ω)"),
    workers: Optional[int] = typer.Option(None, "--workers", min=1, help="Число потоков поиска"),
):
    try:
        cfg = load_config(config)
        sys, ctl, _ = build_system(cfg)
        ccfg = cfg.certificate
        report = search_certificate(sys, ctl, budget=budget or ccfg.budget, seed=cfg.seed,
                                    workers=workers, chi_beta=ccfg.chi_beta,
                                    cross_block=ccfg.omega_cross_block)
        values = {}
        if report.feasible:
            dc = derive_constants(sys, ctl.with_alpha(report.params.alpha), report.params,
                                  ccfg.chi_beta, ccfg.omega_cross_block)
            values = certificate_report(report.params, dc, sys.n)
    except DssError as e:
        logger.error(f"Certificate search error for {config}: {e.detail}")
        typer.echo(e.detail, err=True)
        raise typer.Exit(code=e.exit_code)

    table = Table(title=f"Сертификат: {cfg.name}")
    table.add_column("Параметр")
    table.add_column("Значение", justify="right")
    table.add_row("feasible", str(report.feasible))
    table.add_row("best ||D(H+BK)D^-1||", f"{report.best_norm:.6g}")
    table.add_row("best min eig", f"{report.best_min_eig:.6g}")
    table.add_row("evaluations", str(report.evaluations))
    if report.obstruction:
        table.add_row("obstruction", report.obstruction)
    for key, value in values.items():
        table.add_row(key, f"{value:.6g}" if isinstance(value, float) else str(value))
    console.print(table)
    raise typer.Exit(code=0 if report.feasible else 1)
