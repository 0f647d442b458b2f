import math
from abc import ABC, abstractmethod

import numpy as np
from numpy.typing import ArrayLike, NDArray

from dsslab.errors import InvalidInputError


# допуск при определении номера интервала постоянства
EDGE_TOL = 1e-9


def _unit(n: int) -> NDArray:
    return np.ones(n) / math.sqrt(n)


class Signal(ABC):
    """
    Возмущение d(t) ∈ ℝⁿ

    sample() возвращает значение справа (d(t⁺)) и обновляет running_sup,
    value_left() возвращает левый предел и ничего не меняет.
    """

    kind: str = "abstract"

    def __init__(self, n: int):
        if n < 1:
            raise InvalidInputError(f"Размерность сигнала должна быть ≥ 1, получено {n}")
        self.n = n
        self.running_sup = 0.0

    @abstractmethod
    def value(self, t: float) -> NDArray:
        ...

    def value_left(self, t: float) -> NDArray:
        return self.value(t)

    def sample(self, t: float) -> NDArray:
        if t < 0:
            raise InvalidInputError(f"Время должно быть неотрицательным, получено {t}")
        v = self.value(t)
        self.running_sup = max(self.running_sup, float(np.linalg.norm(v)))
        return v


class ZeroSignal(Signal):
    kind = "zero"

    def value(self, t: float) -> NDArray:
        return np.zeros(self.n)


class ConstantSignal(Signal):
    kind = "constant"

    def __init__(self, vector: ArrayLike):
        c = np.atleast_1d(np.asarray(vector, dtype=float))
        super().__init__(c.size)
        self.vector = c

    @classmethod
    def with_norm(cls, n: int, amplitude: float) -> "ConstantSignal":
        return cls(amplitude * _unit(n))

    def value(self, t: float) -> NDArray:
        return self.vector.copy()


class StepSignal(Signal):
    """d(t) = 0 при t < t_on и вектор нормы amplitude после."""

    kind = "step"

    def __init__(self, n: int, amplitude: float, t_on: float = 1.0):
        super().__init__(n)
        self.vector = amplitude * _unit(n)
        self.t_on = t_on

    def value(self, t: float) -> NDArray:
        if t >= self.t_on - EDGE_TOL:
            return self.vector.copy()
        return np.zeros(self.n)

    def value_left(self, t: float) -> NDArray:
        if t > self.t_on + EDGE_TOL:
            return self.vector.copy()
        return np.zeros(self.n)


class DecayingSignal(Signal):
    kind = "decaying"

    def __init__(self, n: int, amplitude: float, rate: float = 1.0):
        super().__init__(n)
        if rate <= 0:
            raise InvalidInputError(f"Скорость затухания должна быть положительной, получено {rate}")
        self.vector = amplitude * _unit(n)
        self.rate = rate

    def value(self, t: float) -> NDArray:
        return self.vector * math.exp(-self.rate * t)


class RandomSignal(Signal):
    """
    Кусочно-постоянный шум: на каждом интервале [k·dwell, (k+1)·dwell)
    случайное направление с нормой amplitude. Значение зависит только от (seed, k).
    """

    kind = "random"

    def __init__(self, n: int, amplitude: float, seed: int = 0, dwell: float = 0.05):
        super().__init__(n)
        if dwell <= 0:
            raise InvalidInputError(f"dwell должен быть положительным, получено {dwell}")
        self.amplitude = amplitude
        self.seed = seed
        self.dwell = dwell

    def _interval_value(self, k: int) -> NDArray:
        rng = np.random.default_rng([self.seed, k])
        v = rng.standard_normal(self.n)
        norm = np.linalg.norm(v)
        if norm == 0.0:
            return np.zeros(self.n)
        return self.amplitude * v / norm

    def value(self, t: float) -> NDArray:
        return self._interval_value(int(math.floor(t / self.dwell + EDGE_TOL)))

    def value_left(self, t: float) -> NDArray:
        k = int(math.ceil(t / self.dwell - EDGE_TOL)) - 1
        return self._interval_value(max(k, 0))


def make_signal(kind: str, n: int, amplitude: float = 0.0, rate: float = 1.0,
                seed: int = 0, dwell: float = 0.05, t_on: float = 1.0) -> Signal:
    """
    Собрать сигнал по ключам конфигурации disturbance.*

    Args:
        kind: zero | constant | step | decaying | random
        n: Размерность
        amplitude: Норма |d|
        rate: Скорость затухания (decaying)
        seed: Зерно (random)
        dwell: Длина интервала постоянства (random)
        t_on: Момент включения (step)

    Returns:
        Signal: Новый экземпляр с нулевым running_sup
    """
    if kind == "zero":
        return ZeroSignal(n)
    if kind == "constant":
        return ConstantSignal.with_norm(n, amplitude)
    if kind == "step":
        return StepSignal(n, amplitude, t_on)
    if kind == "decaying":
        return DecayingSignal(n, amplitude, rate)
    if kind == "random":
        return RandomSignal(n, amplitude, seed, dwell)
    raise InvalidInputError(f"Неизвестный вид возмущения: {kind}")
