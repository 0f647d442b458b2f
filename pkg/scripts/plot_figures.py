"""Графики запуска: X₁(z,t), X₂(z,t) и η(t) по артефактам field.csv и boundary.csv."""
import csv
import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
import typer


logging.basicConfig(level=logging.INFO, format="%(asctime)s - %(levelname)s - %(message)s")
logger = logging.getLogger(__name__)

app = typer.Typer(help="Построение графиков по каталогу запуска")


def read_csv(path: Path) -> tuple[list[str], np.ndarray]:
    with path.open(encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader)
        rows = [[float(v) if v != "" else np.nan for v in row] for row in reader]
    return header, np.array(rows, dtype=float)


def field_surfaces(header: list[str], data: np.ndarray):
    """Разложить строки (t, z, X_1..X_n) в сетку t × z для каждой компоненты."""
    times = np.unique(data[:, 0])
    z = np.unique(data[:, 1])
    n = len(header) - 2
    surfaces = []
    for i in range(n):
        values = data[:, 2 + i].reshape(times.size, z.size)
        surfaces.append(values)
    return times, z, surfaces


def plot_field(run_dir: Path, out_dir: Path) -> list[Path]:
    header, data = read_csv(run_dir / "field.csv")
    times, z, surfaces = field_surfaces(header, data)
    tt, zz = np.meshgrid(times, z, indexing="ij")

    paths = []
    for i, values in enumerate(surfaces):
        fig = plt.figure(figsize=(7, 5))
        ax = fig.add_subplot(projection="3d")
        ax.plot_surface(zz, tt, values, cmap="viridis", linewidth=0, antialiased=False)
        ax.set_xlabel("z")
        ax.set_ylabel("t")
        ax.set_zlabel(f"X_{i + 1}(z,t)")
        path = out_dir / f"X{i + 1}.png"
        fig.savefig(path, dpi=150, bbox_inches="tight")
        plt.close(fig)
        paths.append(path)
    return paths


def plot_controller(run_dir: Path, out_dir: Path) -> Path:
    header, data = read_csv(run_dir / "boundary.csv")
    fig, ax = plt.subplots(figsize=(7, 4))
    for j, name in enumerate(header):
        if name.startswith("eta_"):
            ax.plot(data[:, 0], data[:, j], label=name)
    ax.set_xlabel("t")
    ax.set_ylabel("η(t)")
    ax.grid(True, alpha=0.3)
    ax.legend()
    path = out_dir / "eta.png"
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


@app.command()
def main(
    run_dir: Path = typer.Argument(..., help="Каталог запуска с field.csv и boundary.csv"),
    out: Path = typer.Option(None, "--out", help="Каталог для PNG (по умолчанию - каталог запуска)"),
):
    out_dir = out or run_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    try:
        paths = plot_field(run_dir, out_dir)
        paths.append(plot_controller(run_dir, out_dir))
    except FileNotFoundError as e:
        logger.error(f"Нет артефакта: {e.filename}")
        raise typer.Exit(code=2)
    for path in paths:
        logger.info(f"Saved {path}")


if __name__ == "__main__":
    app()
