import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.integrate import trapezoid

from dsslab.config import settings
from dsslab.core.certificate import (
    CertificateParams,
    DerivedConstants,
    quantizer_rate_bound,
    ultimate_bound,
)
from dsslab.core.solver import FieldState
from dsslab.errors import InvalidInputError
from dsslab.utils.quantizers import QuantizerSpec


logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SetLevels:
    """Уровни V для множеств S_M и S_Δ."""

    sm: float
    sdelta: float


@dataclass(frozen=True)
class LyapunovSample:
    t: float
    V1: float
    V2: float
    V3: float
    V: float
    maxnorm: float
    eta_norm: float
    h1: float
    Mx0: float
    in_SM: bool = False
    in_SDelta: bool = False


@dataclass(frozen=True)
class SandwichReport:
    lower_ok: bool
    upper_ok: bool
    lower_margin: float
    upper_margin: float
    unweighted_lower_margin: float

    @property
    def holds(self) -> bool:
        return self.lower_ok and self.upper_ok


@dataclass(frozen=True)
class DissipationReport:
    ok: bool
    violations: int
    worst_margin: float
    first_violation_t: Optional[float]
    integrated_ok: bool
    integrated_worst_margin: float


@dataclass(frozen=True, eq=False)
class DssReport:
    ok: bool
    max_slack: float
    rhs: NDArray
    slack: NDArray
    decay_time: Optional[float]


@dataclass(frozen=True)
class IssReport:
    ok: bool
    worst_margin: float


@dataclass(frozen=True)
class InvariantSetReport:
    applicable: bool
    reason: str = ""
    T_eps: Optional[float] = None
    SM_ok: bool = False
    ultimate_ok: bool = False
    range_ok: bool = False
    sm_level: float = math.inf
    sdelta_level: float = math.inf
    gamma_eps: float = math.inf


@dataclass(frozen=True)
class InequalityReport:
    holds: bool
    lhs: float
    rhs: float
    margin: float


def h1_norm_sq(X: NDArray, Xz: NDArray, z: NDArray) -> float:
    """‖X‖²_{H¹} = ‖X‖²_{L²} + ‖∂X‖²_{L²} по формуле трапеций."""
    return float(trapezoid(np.sum(X * X, axis=1), z) + trapezoid(np.sum(Xz * Xz, axis=1), z))


def _weighted(values: NDArray, P: NDArray, weight: NDArray, z: NDArray) -> float:
    q = np.einsum("ji,ik,jk->j", values, P, values)
    return float(trapezoid(q * weight, z))


def set_levels(dc: DerivedConstants, quant: QuantizerSpec, n: int, eps: float) -> SetLevels:
    sm = dc.cP_lo / dc.cD * quant.M_q ** 2 if math.isfinite(quant.M_q) else math.inf
    return SetLevels(sm=sm, sdelta=ultimate_bound(dc, n, quant.delta_q, eps) * dc.cP_lo / dc.cD)


def eval_V(state: FieldState, cert: Optional[CertificateParams], dc: DerivedConstants,
           levels: Optional[SetLevels] = None) -> LyapunovSample:
    """
    V = V₁ + V₂ + V₃ на сеточном состоянии

    Args:
        state: Поле X, градиент X_z и η
        cert: Сертификат (μ берётся из него, иначе из dc)
        dc: Производные константы (P₁, P₂, P₃)
        levels: Уровни S_M, S_Δ для флагов принадлежности

    Returns:
        LyapunovSample: Значения V, max_z|X|, ‖X‖²_{H¹} и M_X для текущего состояния
    """
    mu = cert.mu if cert is not None else dc.mu
    X, Xz, z = state.X, state.Xz, state.z
    if X.shape[1] != dc.P1.shape[0] or state.eta.shape != (X.shape[1],):
        raise InvalidInputError("Размерность состояния не согласована с константами")
    weight = np.exp(-mu * z)
    V1 = _weighted(X, dc.P1, weight, z)
    V2 = _weighted(Xz, dc.P2, weight, z)
    r = state.eta - X[-1]
    V3 = float(r @ dc.P3 @ r)
    V = V1 + V2 + V3
    h1 = h1_norm_sq(X, Xz, z)
    return LyapunovSample(
        t=state.t, V1=V1, V2=V2, V3=V3, V=V,
        maxnorm=float(np.max(np.linalg.norm(X, axis=1))),
        eta_norm=float(np.linalg.norm(state.eta)),
        h1=h1,
        Mx0=h1 + float(r @ r),
        in_SM=levels is not None and V <= levels.sm,
        in_SDelta=levels is not None and V <= levels.sdelta,
    )


def check_sandwich(sample: LyapunovSample, state: FieldState, dc: DerivedConstants) -> SandwichReport:
    """e^{−μ}c̲_P·N ≤ V ≤ c̄_P·N, N = ‖X‖²_{H¹} + |η − X(1)|²."""
    norm_sq = sample.Mx0
    tol = 1e-6 * (1.0 + norm_sq)
    lower = math.exp(-dc.mu) * dc.cP_lo * norm_sq
    upper = dc.cP_hi * norm_sq
    return SandwichReport(
        lower_ok=sample.V >= lower - tol,
        upper_ok=sample.V <= upper + tol,
        lower_margin=sample.V - lower,
        upper_margin=upper - sample.V,
        unweighted_lower_margin=sample.V - dc.cP_lo * norm_sq,
    )


def _series(traj: Sequence[LyapunovSample], d_log: ArrayLike) -> tuple[NDArray, NDArray, NDArray]:
    if len(traj) == 0:
        raise InvalidInputError("Пустая траектория")
    t = np.array([s.t for s in traj])
    V = np.array([s.V for s in traj])
    d = np.asarray(d_log, dtype=float)
    if d.ndim == 1:
        d = d.reshape(len(traj), -1)
    if d.shape[0] != len(traj):
        raise InvalidInputError(f"d_log: {d.shape[0]} отсчётов при {len(traj)} точках траектории")
    return t, V, np.sum(d * d, axis=1)


def _uniform_step(t: NDArray) -> float:
    if t.size < 2:
        return 0.0
    steps = np.diff(t)
    if np.max(np.abs(steps - steps[0])) > 1e-9 * max(1.0, abs(steps[0])):
        raise InvalidInputError("Отсчёты траектории не равномерны по времени")
    return float(steps[0])


def check_dissipation(traj: Sequence[LyapunovSample], d_log: ArrayLike, dc: DerivedConstants,
                      dz: float, c_tol: Optional[float] = None,
                      d_interval: Optional[ArrayLike] = None) -> DissipationReport:
    """
    Разностная проверка V̇ ≤ −σV + χ|d|² и её интегральной формы

    Args:
        traj: Отсчёты V на равномерной сетке по времени
        d_log: Возмущение в тех же моментах
        dc: Константы сертификата
        dz: Шаг по пространству
        c_tol: Коэффициент допуска C_tol
        d_interval: max |d|² на каждом интервале между отсчётами (по всем шагам решателя);
            по умолчанию - максимум по концам интервала

    Returns:
        DissipationReport: Число нарушений, худший запас и время первого нарушения
    """
    c_tol = settings.MONITOR_C_TOL if c_tol is None else c_tol
    t, V, d2 = _series(traj, d_log)
    dt = _uniform_step(t)

    tol = c_tol * (dt + dz) * (1.0 + V)
    d2_step = np.maximum(d2[:-1], d2[1:])
    if d_interval is not None:
        d2_step = np.asarray(d_interval, dtype=float).ravel()
        if d2_step.size != max(t.size - 1, 0):
            raise InvalidInputError(f"d_interval: {d2_step.size} интервалов при {t.size} точках траектории")
    margins = np.array([])
    if t.size >= 2:
        slope = np.diff(V) / dt
        rhs = -dc.sigma * V[:-1] + dc.chi * d2_step
        margins = rhs + tol[:-1] - slope
    violated = np.flatnonzero(margins < 0.0)

    # sup |d|² на [t₀, t_i] включает все шаги внутри интервалов
    sup_d2 = np.maximum.accumulate(np.concatenate([d2[:1], np.maximum(d2[1:], d2_step)]))
    bound = np.exp(-dc.sigma * (t - t[0])) * V[0] + dc.chi / dc.sigma * sup_d2 + tol
    integrated = bound - V

    return DissipationReport(
        ok=violated.size == 0,
        violations=int(violated.size),
        worst_margin=float(np.min(margins)) if margins.size else math.inf,
        first_violation_t=float(t[violated[0]]) if violated.size else None,
        integrated_ok=bool(np.all(integrated >= 0.0)),
        integrated_worst_margin=float(np.min(integrated)),
    )


def check_dss(traj: Sequence[LyapunovSample], d_log: ArrayLike, dc: DerivedConstants,
              Mx0: Optional[float] = None, dz: float = 0.0,
              c_tol: Optional[float] = None) -> DssReport:
    """
    max_z|X|² ≤ (c_D/c̲_P)(c̄_P e^{−σt} M_X⁰ + (χ/σ) sup_{s≤t}|d(s)|²) + tol
    """
    c_tol = settings.MONITOR_C_TOL if c_tol is None else c_tol
    t, _, d2 = _series(traj, d_log)
    dt = _uniform_step(t)
    Mx0 = traj[0].Mx0 if Mx0 is None else Mx0
    maxnorm = np.array([s.maxnorm for s in traj])

    sup_d2 = np.maximum.accumulate(d2)
    rhs = dc.cD / dc.cP_lo * (dc.cP_hi * np.exp(-dc.sigma * (t - t[0])) * Mx0
                              + dc.chi / dc.sigma * sup_d2)
    slack = rhs + c_tol * (dt + dz) * (1.0 + rhs) - maxnorm ** 2

    decay_time = None
    if maxnorm[0] > 0.0:
        below = np.flatnonzero(maxnorm <= 1e-3 * maxnorm[0])
        if below.size:
            decay_time = float(t[below[0]])

    return DssReport(ok=bool(np.all(slack >= 0.0)), max_slack=float(np.min(slack)),
                     rhs=rhs, slack=slack, decay_time=decay_time)


def check_iss_combined(traj: Sequence[LyapunovSample], d_log: ArrayLike, dc: DerivedConstants,
                       dz: float = 0.0, c_tol: Optional[float] = None) -> IssReport:
    """
    max|X|² + |η|² ≤ C₁ sup|d|² + C₂e^{−σt}(2(max|X⁰|² + |η⁰|²) + ‖X⁰‖²_{H¹})
    """
    c_tol = settings.MONITOR_C_TOL if c_tol is None else c_tol
    t, _, d2 = _series(traj, d_log)
    dt = _uniform_step(t)
    first = traj[0]
    initial = 2.0 * (first.maxnorm ** 2 + first.eta_norm ** 2) + first.h1

    lhs = np.array([s.maxnorm ** 2 + s.eta_norm ** 2 for s in traj])
    rhs = dc.C1 * np.maximum.accumulate(d2) + dc.C2 * np.exp(-dc.sigma * (t - t[0])) * initial
    margin = rhs + c_tol * (dt + dz) * (1.0 + rhs) - lhs
    return IssReport(ok=bool(np.all(margin >= 0.0)), worst_margin=float(np.min(margin)))


def check_invariant_sets(traj: Sequence[LyapunovSample], dc: DerivedConstants,
                         quant_spec: QuantizerSpec, eps: float, n: int,
                         x1_log: Optional[ArrayLike] = None, dz: float = 0.0,
                         c_tol: Optional[float] = None) -> InvariantSetReport:
    """
    Инвариантность S_M, попадание в S_Δ и предельная оценка для квантованного контура

    Returns:
        InvariantSetReport: applicable=False, если не выполнены условие скорости,
        вложение S_Δ ⊂ S_M или начальное условие V(0) ≤ уровня S_M
    """
    c_tol = settings.MONITOR_C_TOL if c_tol is None else c_tol
    if len(traj) == 0:
        raise InvalidInputError("Пустая траектория")

    levels = set_levels(dc, quant_spec, n, eps)
    gamma = ultimate_bound(dc, n, quant_spec.delta_q, eps)
    rate_bound = quantizer_rate_bound(dc, n)

    def inapplicable(reason: str) -> InvariantSetReport:
        logger.warning(f"Invariant-set check inapplicable: {reason}")
        return InvariantSetReport(applicable=False, reason=reason, sm_level=levels.sm,
                                  sdelta_level=levels.sdelta, gamma_eps=gamma)

    if not quant_spec.rate > rate_bound:
        return inapplicable(f"rate (M_q/delta_q)^2 = {quant_spec.rate:.6g} "
                            f"not above bound {rate_bound:.6g}")
    if not levels.sdelta < levels.sm:
        return inapplicable(f"S_Delta level {levels.sdelta:.6g} not below S_M level "
                            f"{levels.sm:.6g}; decrease eps")
    if traj[0].V > levels.sm:
        return inapplicable(f"V(0) = {traj[0].V:.6g} exceeds S_M level {levels.sm:.6g}")

    t = np.array([s.t for s in traj])
    V = np.array([s.V for s in traj])
    maxnorm_sq = np.array([s.maxnorm for s in traj]) ** 2
    dt = _uniform_step(t)
    tol = c_tol * (dt + dz)

    sm_ok = bool(np.all(V <= levels.sm + tol * (1.0 + levels.sm)))
    entered = np.flatnonzero(V <= levels.sdelta)
    T_eps = float(t[entered[0]]) if entered.size else None

    range_ok = True
    if x1_log is not None and math.isfinite(quant_spec.M_q):
        x1 = np.asarray(x1_log, dtype=float)
        range_ok = bool(np.all(np.max(np.abs(x1), axis=1) <= quant_spec.M_q))

    bound_ok = False
    if T_eps is not None:
        after = t >= T_eps
        bound_ok = bool(np.all(maxnorm_sq[after] <= gamma + tol * (1.0 + gamma)))

    return InvariantSetReport(
        applicable=True,
        T_eps=T_eps,
        SM_ok=sm_ok,
        ultimate_ok=bound_ok and range_ok,
        range_ok=range_ok,
        sm_level=levels.sm,
        sdelta_level=levels.sdelta,
        gamma_eps=gamma,
    )


def _profile_terms(z: ArrayLike, X: ArrayLike, Xz: Optional[ArrayLike]) -> tuple[NDArray, NDArray, NDArray]:
    z = np.asarray(z, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if z.size < 16 or X.shape[0] != z.size:
        raise InvalidInputError("Нужно не меньше 16 согласованных отсчётов профиля")
    if Xz is None:
        Xz = np.gradient(X, z, axis=0, edge_order=2)
    else:
        Xz = np.asarray(Xz, dtype=float).reshape(X.shape)
    return z, X, Xz


def _quadrature_tol(z: NDArray, rhs: float) -> float:
    dz = float(np.max(np.diff(z)))
    return (1e-9 + 10.0 * dz * dz) * (1.0 + rhs)


def check_sup_bound(z: ArrayLike, X: ArrayLike, Xz: Optional[ArrayLike] = None) -> InequalityReport:
    """max_z |X(z)|² ≤ |X(0)|² + ‖X‖²_{H¹}."""
    z, X, Xz = _profile_terms(z, X, Xz)
    lhs = float(np.max(np.sum(X * X, axis=1)))
    rhs = float(X[0] @ X[0]) + h1_norm_sq(X, Xz, z)
    margin = rhs - lhs
    return InequalityReport(holds=margin >= -_quadrature_tol(z, rhs), lhs=lhs, rhs=rhs, margin=margin)


def check_trace_ineq(z: ArrayLike, X: ArrayLike, Xz: Optional[ArrayLike] = None) -> InequalityReport:
    """|X(1)|² ≤ 2‖X‖²_{H¹}."""
    z, X, Xz = _profile_terms(z, X, Xz)
    lhs = float(X[-1] @ X[-1])
    rhs = 2.0 * h1_norm_sq(X, Xz, z)
    margin = rhs - lhs
    return InequalityReport(holds=margin >= -_quadrature_tol(z, rhs), lhs=lhs, rhs=rhs, margin=margin)
