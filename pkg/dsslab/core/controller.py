import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

from dsslab.core.system import ControllerParams
from dsslab.errors import InvalidInputError
from dsslab.utils.quantizers import QuantizerSpec, quantize
from dsslab.utils.signals import Signal, ZeroSignal


def advance_eta(eta: ArrayLike, y_now: ArrayLike, y_next: ArrayLike,
                alpha: float, dt: float) -> NDArray:
    """
    Точный шаг η̇ = −α(η − y) при линейной интерполяции y на шаге

    Args:
        eta: η(t)
        y_now: y(t)
        y_next: y(t+Δt)
        alpha: Скорость регулятора α > 0
        dt: Шаг Δt > 0

    Returns:
        NDArray: η(t+Δt) = e^{−αΔt}η + (a − b)·y_now + b·y_next,
        a = 1 − e^{−αΔt}, b = 1 − a/(αΔt)
    """
    if dt <= 0:
        raise InvalidInputError(f"Шаг по времени должен быть положительным, получено {dt}")
    x = alpha * dt
    decay = math.exp(-x)
    a = -math.expm1(-x)
    b = 1.0 - a / x
    eta = np.asarray(eta, dtype=float)
    return decay * eta + (a - b) * np.asarray(y_now, dtype=float) + b * np.asarray(y_next, dtype=float)


def control(ctl: ControllerParams, eta: ArrayLike) -> NDArray:
    """u = Kη."""
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    if eta.shape != (ctl.K.shape[1],):
        raise InvalidInputError(f"eta длины {eta.size} не согласован с K {ctl.K.shape}")
    return ctl.K @ eta


@dataclass(frozen=True, eq=False)
class Measurement:
    y_now: NDArray
    y_next: NDArray
    d: NDArray
    overflow: bool = False


class MeasurementSource:
    """
    Источник измерения y для регулятора

    additive: y = X(1,t) + d(t), d интегрируется как непрерывное справа
    в начале шага и как левый предел в конце шага.
    quantized: y = q(X(1,t)) с фиксацией на шаге.
    """

    def __init__(self, disturbance: Optional[Signal] = None,
                 quantizer: Optional[QuantizerSpec] = None):
        self.disturbance = disturbance
        self.quantizer = quantizer

    @property
    def kind(self) -> str:
        return "quantized" if self.quantizer is not None else "additive"

    def measure(self, t: float, dt: float, x1_now: NDArray, x1_next: NDArray) -> Measurement:
        if self.quantizer is not None:
            q = quantize(self.quantizer, x1_now)
            return Measurement(y_now=q.value, y_next=q.value, d=q.value - x1_now,
                               overflow=q.overflow)

        signal = self.disturbance if self.disturbance is not None else ZeroSignal(x1_now.size)
        d_now = signal.sample(t)
        d_next = signal.value_left(t + dt)
        if d_now.shape != x1_now.shape:
            raise InvalidInputError(
                f"Размерность возмущения {d_now.shape} не совпадает с {x1_now.shape}"
            )
        return Measurement(y_now=x1_now + d_now, y_next=x1_next + d_next, d=d_now)
