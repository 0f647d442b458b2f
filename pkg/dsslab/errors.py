class DssError(Exception):
    """Базовая ошибка dsslab. exit_code уходит в код завершения CLI."""

    exit_code: int = 1

    def __init__(self, detail: str):
        super().__init__(detail)
        self.detail = detail


class InvalidInputError(DssError, ValueError):
    """Некорректная матрица, вектор или параметр."""

    exit_code = 2


class ConfigurationError(DssError):
    exit_code = 2


class CertificateInfeasibleError(DssError):
    """Сертификат не проходит условие сжатия или положительности Ω."""

    exit_code = 1


class BlowUpError(DssError):
    exit_code = 3

    def __init__(self, t: float, magnitude: float):
        super().__init__(f"Решение разрушилось при t={t:.6g}: |X|={magnitude:.3e}")
        self.t = t
        self.magnitude = magnitude


class StorageError(DssError):
    """Ошибка чтения или записи артефактов."""

    exit_code = 2
