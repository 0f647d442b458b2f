import csv
import json
import logging
from pathlib import Path
from typing import Iterable, Sequence

from pydantic import ValidationError

from dsslab.errors import StorageError
from dsslab.schemas import SolverSnapshot, Summary


logger = logging.getLogger(__name__)


class ArtifactRepository:
    """Каталог артефактов одного запуска: JSON-отчёты и CSV-журналы."""

    CERTIFICATE = "certificate.json"
    FIELD = "field.csv"
    BOUNDARY = "boundary.csv"
    MONITOR = "monitor.csv"
    SUMMARY = "summary.json"

    def __init__(self, out_dir: str | Path):
        self.out_dir = Path(out_dir)
        try:
            self.out_dir.mkdir(parents=True, exist_ok=True)
        except OSError as e:
            logger.error(f"Не удалось создать каталог {self.out_dir}: {e}")
            raise StorageError(f"Не удалось создать каталог {self.out_dir}")

    def _write_text(self, name: str, text: str) -> Path:
        path = self.out_dir / name
        try:
            path.write_text(text, encoding="utf-8")
        except OSError as e:
            logger.error(f"Ошибка записи {path}: {e}")
            raise StorageError(f"Ошибка записи {path}")
        return path

    def _write_csv(self, name: str, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
        path = self.out_dir / name
        try:
            with path.open("w", newline="", encoding="utf-8") as f:
                writer = csv.writer(f)
                writer.writerow(header)
                writer.writerows(rows)
        except OSError as e:
            logger.error(f"Ошибка записи {path}: {e}")
            raise StorageError(f"Ошибка записи {path}")
        return path

    # ===== JSON REPORTS =====
    def write_certificate(self, report: dict) -> Path:
        return self._write_text(self.CERTIFICATE, json.dumps(report, indent=2))

    def write_summary(self, summary: Summary) -> Path:
        return self._write_text(self.SUMMARY, summary.model_dump_json(indent=2))

    @staticmethod
    def load_summary(path: str | Path) -> Summary:
        """Прочитать summary.json (путь к файлу или к каталогу запуска)."""
        path = Path(path)
        if path.is_dir():
            path = path / ArtifactRepository.SUMMARY
        try:
            return Summary.model_validate_json(path.read_text(encoding="utf-8"))
        except FileNotFoundError:
            logger.error(f"Сводка не найдена: {path}")
            raise StorageError(f"Сводка не найдена: {path}")
        except ValidationError as e:
            logger.error(f"Некорректная сводка {path}: {e}")
            raise StorageError(f"Некорректная сводка {path}")

    # ===== CSV LOGS =====
    def write_field(self, rows: Iterable[Sequence[float]], n: int) -> Path:
        header = ["t", "z"] + [f"X_{i + 1}" for i in range(n)]
        return self._write_csv(self.FIELD, header, rows)

    def write_boundary(self, rows: Iterable[Sequence[float]], n: int, m: int) -> Path:
        header = (
            ["t"]
            + [f"X1_{i + 1}" for i in range(n)]
            + [f"eta_{i + 1}" for i in range(n)]
            + [f"u_{i + 1}" for i in range(m)]
            + [f"d_{i + 1}" for i in range(n)]
        )
        return self._write_csv(self.BOUNDARY, header, rows)

    def write_monitor(self, rows: Iterable[Sequence]) -> Path:
        header = ["t", "V1", "V2", "V3", "V", "maxnorm", "d_norm",
                  "in_SM", "in_SDelta", "dss_rhs", "dss_slack"]
        return self._write_csv(self.MONITOR, header, rows)

    # ===== SNAPSHOTS =====
    def save_snapshot(self, snapshot: SolverSnapshot, name: str = "snapshot.json") -> Path:
        return self._write_text(name, snapshot.model_dump_json())

    def load_snapshot(self, name: str = "snapshot.json") -> SolverSnapshot:
        path = self.out_dir / name
        try:
            return SolverSnapshot.model_validate_json(path.read_text(encoding="utf-8"))
        except (FileNotFoundError, ValidationError) as e:
            logger.error(f"Не удалось прочитать снимок {path}: {e}")
            raise StorageError(f"Не удалось прочитать снимок {path}")
