import logging

import typer

from dsslab.config import settings
from dsslab.routes.batch import router as batch_router
from dsslab.routes.certificate import router as certificate_router
from dsslab.routes.compare import router as compare_router
from dsslab.routes.restart import router as restart_router
from dsslab.routes.run import router as run_router


logging.basicConfig(
    level=getattr(logging, settings.LOG_LEVEL.upper(), logging.INFO),
    format="%(asctime)s - %(levelname)s - %(message)s"
)
logger = logging.getLogger(__name__)


app = typer.Typer(
    help="Моделирование гиперболических систем с граничным управлением и проверка оценок устойчивости",
    no_args_is_help=True,
)


app.add_typer(run_router)
app.add_typer(batch_router)
app.add_typer(certificate_router)
app.add_typer(compare_router)
app.add_typer(restart_router)


if __name__ == "__main__":
    app()
