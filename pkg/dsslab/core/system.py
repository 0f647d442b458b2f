import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray

from dsslab.config import settings
from dsslab.errors import InvalidInputError


logger = logging.getLogger(__name__)


def _array(value: ArrayLike) -> NDArray:
    return np.array(value, dtype=float)


@dataclass(frozen=True, eq=False)
class HyperbolicSystem:
    """
    Линейная гиперболическая система X_t + ΛX_z = 0 на z ∈ [0, 1]
    с граничным условием X(0,t) = H X(1,t) + B u(t).
    """

    Lambda: NDArray
    H: NDArray
    B: NDArray

    def __post_init__(self):
        object.__setattr__(self, "Lambda", np.atleast_2d(_array(self.Lambda)))
        object.__setattr__(self, "H", np.atleast_2d(_array(self.H)))
        object.__setattr__(self, "B", np.atleast_2d(_array(self.B)))

    @classmethod
    def from_speeds(cls, speeds: ArrayLike, H: ArrayLike, B: ArrayLike) -> "HyperbolicSystem":
        return cls(Lambda=np.diag(np.atleast_1d(_array(speeds))), H=H, B=B)

    @property
    def n(self) -> int:
        return self.Lambda.shape[0]

    @property
    def m(self) -> int:
        return self.B.shape[1]

    @property
    def speeds(self) -> NDArray:
        return np.diag(self.Lambda).copy()


@dataclass(frozen=True, eq=False)
class ControllerParams:
    """Динамический регулятор η̇ = −α(η − y), u = Kη."""

    K: NDArray
    alpha: float
    eta0: NDArray

    def __post_init__(self):
        object.__setattr__(self, "K", np.atleast_2d(_array(self.K)))
        object.__setattr__(self, "eta0", np.atleast_1d(_array(self.eta0)))
        object.__setattr__(self, "alpha", float(self.alpha))

    def with_alpha(self, alpha: float) -> "ControllerParams":
        return ControllerParams(K=self.K, alpha=alpha, eta0=self.eta0)

    def with_eta0(self, eta0: ArrayLike) -> "ControllerParams":
        return ControllerParams(K=self.K, alpha=self.alpha, eta0=eta0)


@dataclass(frozen=True, eq=False)
class InitialProfile:
    """
    Начальные данные X⁰: z ∈ [0,1] → ℝⁿ

    Либо аналитическое замыкание func (z-вектор → k×n), либо отсчёты
    на равномерной сетке с линейной интерполяцией.
    """

    n: int
    func: Optional[Callable[[NDArray], NDArray]] = None
    samples: Optional[NDArray] = None
    derivative: Optional[Callable[[NDArray], NDArray]] = field(default=None, compare=False)

    def __post_init__(self):
        if (self.func is None) == (self.samples is None):
            raise InvalidInputError("Профиль задаётся либо функцией, либо отсчётами")
        if self.samples is not None:
            s = np.array(self.samples, dtype=float)
            if s.ndim == 1:
                s = s.reshape(-1, 1)
            if s.shape[0] < 2 or s.shape[1] != self.n:
                raise InvalidInputError(
                    f"Нужно не меньше 2 отсчётов размерности {self.n}, получено {s.shape}"
                )
            if not np.all(np.isfinite(s)):
                raise InvalidInputError("Профиль содержит нечисловые значения")
            object.__setattr__(self, "samples", s)

    @classmethod
    def from_function(cls, func: Callable[[NDArray], NDArray], n: int,
                      derivative: Optional[Callable[[NDArray], NDArray]] = None) -> "InitialProfile":
        return cls(n=n, func=func, derivative=derivative)

    @classmethod
    def from_samples(cls, samples: ArrayLike) -> "InitialProfile":
        s = np.array(samples, dtype=float)
        if s.ndim == 1:
            s = s.reshape(-1, 1)
        return cls(n=s.shape[1], samples=s)

    @classmethod
    def zero(cls, n: int) -> "InitialProfile":
        return cls.from_function(lambda z: np.zeros((np.size(z), n)), n,
                                 derivative=lambda z: np.zeros((np.size(z), n)))

    @classmethod
    def cosine(cls, modes: ArrayLike, amplitude: float = 1.0) -> "InitialProfile":
        """Xᵢ⁰(z) = a(cos(2πkᵢz) − 1)."""
        k = np.atleast_1d(_array(modes))

        def func(z):
            z = np.atleast_1d(z)[:, None]
            return amplitude * (np.cos(2 * np.pi * k * z) - 1.0)

        def derivative(z):
            z = np.atleast_1d(z)[:, None]
            return -amplitude * 2 * np.pi * k * np.sin(2 * np.pi * k * z)

        return cls.from_function(func, k.size, derivative=derivative)

    @classmethod
    def ramp(cls, slope: ArrayLike, offset: ArrayLike) -> "InitialProfile":
        a = np.atleast_1d(_array(slope))
        b = np.atleast_1d(_array(offset)) * np.ones_like(a)

        def func(z):
            return np.atleast_1d(z)[:, None] * a + b

        return cls.from_function(func, a.size,
                                 derivative=lambda z: np.ones((np.size(z), 1)) * a)

    def evaluate(self, z: ArrayLike) -> NDArray:
        """Значения профиля в точках z, форма (len(z), n)."""
        zz = np.atleast_1d(np.asarray(z, dtype=float))
        if self.func is not None:
            values = np.asarray(self.func(zz), dtype=float).reshape(zz.size, self.n)
        else:
            grid = np.linspace(0.0, 1.0, self.samples.shape[0])
            values = np.column_stack([
                np.interp(zz, grid, self.samples[:, i]) for i in range(self.n)
            ])
        if not np.all(np.isfinite(values)):
            raise InvalidInputError("Профиль дал нечисловое значение")
        return values

    def at(self, z: float) -> NDArray:
        return self.evaluate([z])[0]


@dataclass(frozen=True)
class CompatibilityReport:
    ok: bool
    residual: float


def closed_loop_boundary(sys: HyperbolicSystem, ctl: ControllerParams,
                         x1: ArrayLike, eta: ArrayLike) -> NDArray:
    """
    Граничное условие замкнутой системы

    Args:
        sys: Система
        ctl: Регулятор
        x1: X(1,t)
        eta: η(t)

    Returns:
        NDArray: X(0,t) = H·x1 + B·K·η
    """
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    if x1.shape != (sys.n,) or eta.shape != (ctl.K.shape[1],) or ctl.K.shape[0] != sys.m:
        raise InvalidInputError(
            f"Несогласованные размерности: x1 {x1.shape}, eta {eta.shape}, "
            f"K {ctl.K.shape}, n={sys.n}, m={sys.m}"
        )
    return sys.H @ x1 + sys.B @ (ctl.K @ eta)


def check_compatibility(sys: HyperbolicSystem, ctl: ControllerParams,
                        profile: InitialProfile, tol: Optional[float] = None) -> CompatibilityReport:
    """Невязка |X⁰(0) − H X⁰(1) − BKη⁰| условия согласования."""
    tol = settings.COMPAT_TOL if tol is None else tol
    ends = profile.evaluate([0.0, 1.0])
    residual = float(np.linalg.norm(ends[0] - closed_loop_boundary(sys, ctl, ends[1], ctl.eta0)))
    return CompatibilityReport(ok=residual <= tol, residual=residual)


def validate(sys: HyperbolicSystem, ctl: ControllerParams) -> list[str]:
    """
    Проверить инварианты системы и регулятора

    Returns:
        list[str]: Нарушения вида "поле: правило"; пустой список - всё корректно
    """
    violations = []
    lam = sys.Lambda
    n = lam.shape[0]

    if lam.shape[0] != lam.shape[1]:
        violations.append(f"Lambda: must be square, got {lam.shape}")
    elif not np.all(np.isfinite(lam)):
        violations.append("Lambda: entries must be finite")
    elif np.any(lam - np.diag(np.diag(lam)) != 0.0):
        violations.append("Lambda: must be diagonal")
    elif np.any(np.diag(lam) <= 0.0):
        violations.append("Lambda: diagonal entries must be strictly positive")

    if sys.H.shape != (n, n):
        violations.append(f"H: must be {n}x{n}, got {sys.H.shape}")
    elif not np.all(np.isfinite(sys.H)):
        violations.append("H: entries must be finite")

    m = sys.B.shape[1]
    if sys.B.shape[0] != n:
        violations.append(f"B: must have {n} rows, got {sys.B.shape[0]}")
    elif not np.all(np.isfinite(sys.B)):
        violations.append("B: entries must be finite")

    if ctl.K.shape != (m, n):
        violations.append(f"K: must be {m}x{n}, got {ctl.K.shape}")
    elif not np.all(np.isfinite(ctl.K)):
        violations.append("K: entries must be finite")

    if not (np.isfinite(ctl.alpha) and ctl.alpha > 0):
        violations.append(f"alpha: must be positive, got {ctl.alpha}")

    if ctl.eta0.shape != (n,):
        violations.append(f"eta0: must have length {n}, got {ctl.eta0.shape}")
    elif not np.all(np.isfinite(ctl.eta0)):
        violations.append("eta0: entries must be finite")

    return violations


def solve_eta0(sys: HyperbolicSystem, ctl: ControllerParams,
               profile: InitialProfile) -> tuple[NDArray, float]:
    """
    Подобрать η⁰ из BKη⁰ = X⁰(0) − HX⁰(1) методом наименьших квадратов

    Returns:
        tuple[NDArray, float]: (η⁰, невязка условия согласования)
    """
    ends = profile.evaluate([0.0, 1.0])
    rhs = ends[0] - sys.H @ ends[1]
    F = sys.B @ ctl.K
    eta0, *_ = np.linalg.lstsq(F, rhs, rcond=None)
    residual = float(np.linalg.norm(F @ eta0 - rhs))
    if residual > settings.COMPAT_TOL:
        logger.warning(f"No compatible eta0 exists, least-squares residual {residual:.3e}")
    return eta0, residual
