import logging
import math
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from functools import reduce
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

from dsslab.config import settings
from dsslab.core.controller import MeasurementSource, Measurement, advance_eta, control
from dsslab.core.system import (
    ControllerParams,
    HyperbolicSystem,
    InitialProfile,
    check_compatibility,
)
from dsslab.errors import BlowUpError, ConfigurationError, DssError
from dsslab.schemas import SolverSnapshot
from dsslab.utils.quantizers import QuantizerSpec
from dsslab.utils.signals import Signal


logger = logging.getLogger(__name__)

# допуск совпадения позиции в истории с узлом
SLOT_TOL = 1e-7
MIN_GRID = 16


class Mode(str, Enum):
    EXACT = "exact"
    UPWIND = "upwind"


@dataclass(frozen=True, eq=False)
class FieldState:
    t: float
    z: NDArray
    X: NDArray
    eta: NDArray
    Xz: NDArray


@dataclass(frozen=True, eq=False)
class Trace:
    x1: NDArray
    x1_t: NDArray
    x0: NDArray


@dataclass(frozen=True, eq=False)
class StepRecord:
    """Граничные величины в начале шага: t, X(1,t), η, u, d, переполнение."""

    t: float
    x1: NDArray
    eta: NDArray
    u: NDArray
    d: NDArray
    overflow: bool


class HistoryBuffer:
    """
    Кольцевой буфер граничных значений X_i(0, kΔt) одной компоненты

    Слот с глобальным номером шага s хранится в data[s % depth];
    доступны номера от newest − depth + 1 до newest.
    """

    def __init__(self, data: ArrayLike, newest: int):
        self.data = np.array(data, dtype=float)
        self.depth = self.data.size
        self.newest = newest

    @classmethod
    def prefilled(cls, values: NDArray) -> "HistoryBuffer":
        """values[j] - значение в слоте −j, j = 0..depth−1."""
        depth = values.size
        buf = cls(np.zeros(depth), newest=0)
        slots = -np.arange(depth)
        buf.data[slots % depth] = values
        return buf

    @property
    def oldest(self) -> int:
        return self.newest - self.depth + 1

    def push(self, value: float) -> None:
        self.newest += 1
        self.data[self.newest % self.depth] = value

    def _locate(self, positions: NDArray) -> tuple[NDArray, NDArray, NDArray]:
        p = np.asarray(positions, dtype=float)
        nearest = np.rint(p)
        on_node = np.abs(p - nearest) < SLOT_TOL
        j = np.where(on_node, nearest, np.floor(p)).astype(np.int64)
        if np.any(j < self.oldest) or np.any(j > self.newest):
            raise DssError(
                f"Позиция вне истории [{self.oldest}, {self.newest}]: "
                f"[{p.min():.3f}, {p.max():.3f}]"
            )
        return j, np.where(on_node, 0.0, p - j), on_node

    def interpolate(self, positions: ArrayLike) -> NDArray:
        j, w, on_node = self._locate(positions)
        v0 = self.data[j % self.depth]
        nxt = np.minimum(j + 1, self.newest)
        v1 = self.data[nxt % self.depth]
        return np.where(on_node, v0, v0 + w * (v1 - v0))

    def slope(self, positions: ArrayLike) -> NDArray:
        """Наклон кусочно-линейной истории (на узле - левый отрезок), в единицах на слот."""
        j, _, on_node = self._locate(positions)
        left = np.where(on_node, j - 1, j)
        if np.any(left < self.oldest):
            raise DssError("Недостаточная глубина истории для производной")
        v0 = self.data[left % self.depth]
        v1 = self.data[(left + 1) % self.depth]
        return v1 - v0


def aligned_time_step(speeds: ArrayLike, M: int, max_denominator: int = 16,
                      max_ratio: int = 64) -> Optional[float]:
    """
    Подобрать Δt = Δz/L так, чтобы все L/λᵢ были целыми

    Returns:
        Optional[float]: Δt или None, если скорости не рациональны с малыми знаменателями
    """
    fracs = []
    for lam in np.atleast_1d(np.asarray(speeds, dtype=float)):
        f = Fraction(float(lam)).limit_denominator(max_denominator)
        if abs(float(f) - lam) > 1e-12 * lam:
            return None
        fracs.append(f)
    big_l = reduce(math.lcm, (f.numerator for f in fracs))
    if big_l / max(float(f) for f in fracs) > max_ratio:
        return None
    return 1.0 / (M * big_l)


class TransportSolver:
    """
    Замкнутая система «гиперболическая PDE + динамический регулятор»

    exact: каждая компонента - линия задержки X_i(z,t) = X_i(0, t − z/λ_i),
    граничные значения хранятся в HistoryBuffer.
    upwind: явная схема первого порядка, CFL ≤ 1.
    """

    def __init__(self, sys: HyperbolicSystem, ctl: ControllerParams, M: int, dt: float,
                 mode: Mode, eta: NDArray, step_index: int = 0,
                 buffers: Optional[list[HistoryBuffer]] = None,
                 X: Optional[NDArray] = None):
        self.sys = sys
        self.ctl = ctl
        self.F = sys.B @ ctl.K
        self.M = M
        self.dt = dt
        self.dz = 1.0 / M
        self.mode = Mode(mode)
        self.z = np.linspace(0.0, 1.0, M + 1)
        self.eta = np.array(eta, dtype=float)
        self.k = step_index
        self.buffers = buffers
        self.X = X
        self.warnings: list[str] = []
        self.delay_slots = 1.0 / (sys.speeds * dt)

    @staticmethod
    def _check_grid(sys: HyperbolicSystem, M: int, dt: float, mode: Mode) -> None:
        if M < MIN_GRID:
            raise ConfigurationError(f"Сетка слишком грубая: M={M} < {MIN_GRID}")
        if not (dt > 0 and math.isfinite(dt)):
            raise ConfigurationError(f"Шаг по времени должен быть положительным, получено {dt}")
        lam_max = float(np.max(sys.speeds))
        if mode == Mode.UPWIND:
            cfl = lam_max * dt * M
            if cfl > 1.0 + 1e-12:
                raise ConfigurationError(f"Нарушено условие CFL: {cfl:.4g} > 1")
        elif lam_max * dt > 1.0:
            raise ConfigurationError(f"Шаг {dt} больше наименьшей задержки {1.0 / lam_max}")

    @classmethod
    def init(cls, sys: HyperbolicSystem, ctl: ControllerParams, profile: InitialProfile,
             M: Optional[int] = None, dt: Optional[float] = None,
             mode: Mode = Mode.EXACT) -> "TransportSolver":
        """
        Начальное состояние по профилю X⁰ и η⁰

        Args:
            sys: Система
            ctl: Регулятор
            profile: Начальный профиль
            M: Число интервалов сетки (по умолчанию settings.GRID_M)
            dt: Шаг по времени (по умолчанию Δz/max λ)
            mode: exact | upwind

        Returns:
            TransportSolver: Состояние в t = 0
        """
        M = settings.GRID_M if M is None else M
        mode = Mode(mode)
        if dt is None:
            dt = 1.0 / (M * float(np.max(sys.speeds)))
        cls._check_grid(sys, M, dt, mode)

        compat = check_compatibility(sys, ctl, profile)
        solver = cls(sys, ctl, M, dt, mode, eta=ctl.eta0)
        if not compat.ok:
            msg = f"Initial data incompatible with boundary condition, residual {compat.residual:.3e}"
            logger.warning(msg)
            solver.warnings.append(msg)

        if mode == Mode.EXACT:
            solver.buffers = []
            for i, lam in enumerate(sys.speeds):
                depth = math.ceil(solver.delay_slots[i]) + 2
                z_back = np.clip(lam * dt * np.arange(depth), 0.0, 1.0)
                solver.buffers.append(HistoryBuffer.prefilled(profile.evaluate(z_back)[:, i]))
        else:
            solver.X = profile.evaluate(solver.z)
        return solver

    @classmethod
    def resume(cls, sys: HyperbolicSystem, ctl: ControllerParams,
               snapshot: SolverSnapshot) -> "TransportSolver":
        """Восстановить решатель из снимка; продолжение совпадает с непрерывным счётом."""
        mode = Mode(snapshot.mode)
        cls._check_grid(sys, snapshot.M, snapshot.dt, mode)
        buffers = None
        X = None
        if mode == Mode.EXACT:
            buffers = [HistoryBuffer(data, snapshot.history_newest) for data in snapshot.history]
        else:
            X = np.array(snapshot.field, dtype=float)
        return cls(sys, ctl, snapshot.M, snapshot.dt, mode, eta=np.array(snapshot.eta),
                   step_index=snapshot.step, buffers=buffers, X=X)

    def snapshot(self) -> SolverSnapshot:
        return SolverSnapshot(
            mode=self.mode.value,
            M=self.M,
            dt=self.dt,
            step=self.k,
            eta=self.eta.tolist(),
            history=[b.data.tolist() for b in self.buffers] if self.buffers else [],
            history_newest=self.buffers[0].newest if self.buffers else 0,
            field=self.X.tolist() if self.X is not None else None,
        )

    @property
    def t(self) -> float:
        return self.k * self.dt

    @property
    def grid_aligned(self) -> bool:
        if self.mode == Mode.UPWIND:
            return True
        per_node = self.delay_slots / self.M
        return bool(np.all(np.abs(per_node - np.rint(per_node)) < SLOT_TOL))

    def _boundary_out(self, step_index: int) -> NDArray:
        """X(1, s·Δt) по истории."""
        return np.array([
            float(b.interpolate([step_index - self.delay_slots[i]])[0])
            for i, b in enumerate(self.buffers)
        ])

    def _x1(self) -> NDArray:
        if self.mode == Mode.EXACT:
            return self._boundary_out(self.k)
        return self.X[-1].copy()

    def _measure(self, source: MeasurementSource, x1_now: NDArray, x1_next: NDArray) -> Measurement:
        return source.measure(self.t, self.dt, x1_now, x1_next)

    def _source(self, disturbance: Optional[Signal],
                quantizer: Optional[QuantizerSpec]) -> MeasurementSource:
        return MeasurementSource(disturbance=disturbance, quantizer=quantizer)

    def _check_blowup(self, values: NDArray) -> None:
        magnitude = float(np.max(np.abs(values))) if values.size else 0.0
        if not math.isfinite(magnitude) or magnitude > settings.BLOWUP_THRESHOLD:
            logger.error(f"Blow-up at t={self.t:.6g}, |X|={magnitude:.3e}")
            raise BlowUpError(self.t, magnitude)

    def step(self, disturbance: Optional[Signal] = None,
             quantizer: Optional[QuantizerSpec] = None,
             source: Optional[MeasurementSource] = None) -> StepRecord:
        """
        Продвинуть состояние на Δt

        Returns:
            StepRecord: Граничные величины в начале шага
        """
        source = source or self._source(disturbance, quantizer)
        t_now = self.t
        eta_now = self.eta.copy()

        if self.mode == Mode.EXACT:
            x1_now = self._boundary_out(self.k)
            x1_next = self._boundary_out(self.k + 1)
            meas = self._measure(source, x1_now, x1_next)
            self.eta = advance_eta(self.eta, meas.y_now, meas.y_next, self.ctl.alpha, self.dt)
            x0_next = self.sys.H @ x1_next + self.F @ self.eta
            self.k += 1
            self._check_blowup(np.concatenate([x0_next, self.eta]))
            for i, b in enumerate(self.buffers):
                b.push(float(x0_next[i]))
        else:
            x1_now = self.X[-1].copy()
            c = self.sys.speeds * self.dt / self.dz
            new = np.empty_like(self.X)
            new[1:] = (1.0 - c) * self.X[1:] + c * self.X[:-1]
            x1_next = new[-1].copy()
            meas = self._measure(source, x1_now, x1_next)
            self.eta = advance_eta(self.eta, meas.y_now, meas.y_next, self.ctl.alpha, self.dt)
            new[0] = self.sys.H @ x1_next + self.F @ self.eta
            self.k += 1
            self._check_blowup(np.concatenate([new.ravel(), self.eta]))
            self.X = new

        return StepRecord(t=t_now, x1=x1_now, eta=eta_now, u=control(self.ctl, eta_now),
                          d=meas.d, overflow=meas.overflow)

    def record(self, disturbance: Optional[Signal] = None,
               quantizer: Optional[QuantizerSpec] = None,
               source: Optional[MeasurementSource] = None) -> StepRecord:
        """Граничные величины в текущий момент без продвижения."""
        source = source or self._source(disturbance, quantizer)
        x1 = self._x1()
        meas = self._measure(source, x1, x1)
        return StepRecord(t=self.t, x1=x1, eta=self.eta.copy(), u=control(self.ctl, self.eta),
                          d=meas.d, overflow=meas.overflow)

    def field_values(self) -> NDArray:
        """X на узлах сетки, форма (M+1, n)."""
        if self.mode == Mode.UPWIND:
            return self.X.copy()
        columns = []
        for i, b in enumerate(self.buffers):
            positions = self.k - np.arange(self.M + 1) * (self.delay_slots[i] / self.M)
            columns.append(b.interpolate(positions))
        return np.column_stack(columns)

    def gradient_field(self, X: Optional[NDArray] = None) -> NDArray:
        """∂X/∂z: центральные разности внутри, односторонние второго порядка на концах."""
        X = self.field_values() if X is None else X
        return np.gradient(X, self.dz, axis=0, edge_order=2)

    def field(self) -> FieldState:
        X = self.field_values()
        return FieldState(t=self.t, z=self.z.copy(), X=X, eta=self.eta.copy(),
                          Xz=self.gradient_field(X))

    def trace(self) -> Trace:
        """Следы на границах: X(1,t), X_t(1,t), X(0,t)."""
        if self.mode == Mode.UPWIND:
            x1 = self.X[-1].copy()
            x1_t = -self.sys.speeds * (self.X[-1] - self.X[-2]) / self.dz
            return Trace(x1=x1, x1_t=x1_t, x0=self.X[0].copy())

        x1 = self._boundary_out(self.k)
        x1_t = np.array([
            float(b.slope([self.k - self.delay_slots[i]])[0]) / self.dt
            for i, b in enumerate(self.buffers)
        ])
        x0 = np.array([float(b.data[b.newest % b.depth]) for b in self.buffers])
        return Trace(x1=x1, x1_t=x1_t, x0=x0)
