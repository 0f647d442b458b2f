import math
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

from dsslab.errors import InvalidInputError


# допуск привязки к узлу сетки floor-квантователя
SNAP_TOL = 1e-12


@dataclass(frozen=True)
class QuantizerSpec:
    """
    Статический квантователь

    kind="floor": q(x) = ⌊ℓx⌋/ℓ, Δ_q = 1/ℓ, диапазон не ограничен.
    kind="range_sensitivity": равномерная сетка с центрами ячеек шага 2Δ_q,
    диапазон M_q, вне диапазона выдаётся символ переполнения.
    """

    kind: Literal["floor", "range_sensitivity"]
    delta_q: float
    M_q: float
    ell: Optional[float] = None

    @classmethod
    def floor(cls, ell: float) -> "QuantizerSpec":
        if not (ell > 0 and math.isfinite(ell)):
            raise InvalidInputError(f"ell должен быть положительным, получено {ell}")
        return cls(kind="floor", delta_q=1.0 / ell, M_q=math.inf, ell=ell)

    @classmethod
    def range_sensitivity(cls, delta_q: float, M_q: float) -> "QuantizerSpec":
        if not (delta_q > 0 and M_q > 0):
            raise InvalidInputError("delta_q и M_q должны быть положительными")
        if M_q < delta_q:
            raise InvalidInputError("Диапазон M_q меньше чувствительности delta_q")
        return cls(kind="range_sensitivity", delta_q=delta_q, M_q=M_q)

    @property
    def half_levels(self) -> int:
        """K: индексы ячеек по оси лежат в [−K, K]."""
        if self.kind == "floor":
            raise InvalidInputError("У floor-квантователя нет конечного алфавита")
        return max(math.ceil((self.M_q - self.delta_q) / (2.0 * self.delta_q) - 1e-12), 0)

    @property
    def levels(self) -> int:
        """Нечётное число ячеек по одной оси."""
        return 2 * self.half_levels + 1

    @property
    def rate(self) -> float:
        """(M_q/Δ_q)², левая часть условия допустимости."""
        return (self.M_q / self.delta_q) ** 2


@dataclass(frozen=True)
class QuantizedValue:
    value: NDArray
    overflow: bool
    codeword: int


def quantize(spec: QuantizerSpec, x: ArrayLike) -> QuantizedValue:
    """
    Проквантовать вектор

    Args:
        spec: Параметры квантователя
        x: Вектор измерения

    Returns:
        QuantizedValue: Значение, флаг переполнения и номер кодового слова
        (0 для переполнения, 1..N внутри диапазона; для floor - 0)
    """
    v = np.atleast_1d(np.asarray(x, dtype=float))
    if not np.all(np.isfinite(v)):
        raise InvalidInputError("Квантователь получил нечисловое значение")

    if spec.kind == "floor":
        scaled = spec.ell * v
        nearest = np.rint(scaled)
        on_node = np.abs(scaled - nearest) <= SNAP_TOL * np.maximum(1.0, np.abs(scaled))
        k = np.where(on_node, nearest, np.floor(scaled))
        return QuantizedValue(value=k / spec.ell, overflow=False, codeword=0)

    big_k = spec.half_levels
    overflow = bool(np.max(np.abs(v)) > spec.M_q)
    clipped = np.clip(v, -spec.M_q, spec.M_q)
    step = 2.0 * spec.delta_q
    k = np.clip(np.floor(clipped / step + 0.5), -big_k, big_k)
    value = k * step

    if overflow:
        return QuantizedValue(value=value, overflow=True, codeword=0)

    codeword = 0
    for idx in (k + big_k).astype(int):
        codeword = codeword * spec.levels + int(idx)
    return QuantizedValue(value=value, overflow=False, codeword=codeword + 1)


def error_bound(spec: QuantizerSpec, n: int) -> float:
    """Евклидова оценка ошибки внутри диапазона: √n·Δ_q."""
    return math.sqrt(n) * spec.delta_q


def alphabet_size(spec: QuantizerSpec, n: int) -> int:
    """N = Lⁿ без символа переполнения."""
    return spec.levels ** n
