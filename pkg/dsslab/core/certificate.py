import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import minimize

from dsslab.config import settings
from dsslab.core.system import ControllerParams, HyperbolicSystem
from dsslab.errors import CertificateInfeasibleError, InvalidInputError
from dsslab.utils.matrices import (
    max_eig_sym,
    min_eig_sym,
    spectral_norm,
    spectral_radius,
)


logger = logging.getLogger(__name__)

MU_GRID = np.geomspace(0.01, 2.0, 10)
ALPHA_GRID = np.geomspace(0.1, 10.0, 10)
SCALING_BUDGET = 2000
NM_MAX_EVALS = 200


@dataclass(frozen=True, eq=False)
class CertificateParams:
    mu: float
    nu: float
    D: NDArray
    alpha: float
    beta1: float = 1.0
    beta2: float = 1.0
    beta3: float = 1.0
    zeta: float = 0.0

    def __post_init__(self):
        d = np.array(self.D, dtype=float)
        if d.ndim == 1:
            d = np.diag(d)
        object.__setattr__(self, "D", d)

    @property
    def rho(self) -> float:
        return math.exp(-self.mu) - self.nu ** 2

    @property
    def d(self) -> NDArray:
        return np.diag(self.D).copy()


@dataclass(frozen=True, eq=False)
class DerivedConstants:
    F: NDArray
    Q: NDArray
    G: NDArray
    Omega: NDArray
    P1: NDArray
    P2: NDArray
    P3: NDArray
    Dtilde: NDArray
    sigma1: float
    sigma2: float
    sigma: float
    chi: float
    cD: float
    cP_lo: float
    cP_hi: float
    dss_c: float
    dss_a: float
    dss_gamma_coef: float
    C1: float
    C2: float
    mu: float


@dataclass(frozen=True)
class ContractionReport:
    holds: bool
    norm: float


@dataclass(frozen=True)
class OmegaReport:
    holds: bool
    min_eig: float


@dataclass(frozen=True, eq=False)
class SearchReport:
    feasible: bool
    params: Optional[CertificateParams]
    best_norm: float
    best_min_eig: float
    evaluations: int
    obstruction: Optional[str] = None


def _check_dims(sys: HyperbolicSystem, ctl: ControllerParams, cert: CertificateParams) -> None:
    n = sys.n
    if sys.H.shape != (n, n) or sys.B.shape[0] != n or ctl.K.shape != (sys.m, n):
        raise InvalidInputError("Несогласованные размерности H, B, K")
    if cert.D.shape != (n, n):
        raise InvalidInputError(f"D должна быть {n}x{n}, получено {cert.D.shape}")
    if np.any(np.diag(cert.D) <= 0) or np.any(cert.D - np.diag(np.diag(cert.D)) != 0):
        raise InvalidInputError("D должна быть диагональной с положительной диагональю")


def _blocks(sys: HyperbolicSystem, ctl: ControllerParams, D: NDArray) -> tuple[NDArray, NDArray, NDArray]:
    F = sys.B @ ctl.K
    D2 = D @ D
    Q = F.T @ D2 @ F
    G = sys.H.T @ D2 @ F
    return F, Q, G


def build_omega(sys: HyperbolicSystem, ctl: ControllerParams, cert: CertificateParams,
                cross_block: Optional[str] = None) -> NDArray:
    """
    Симметричная матрица Ω размера 3n×3n

    Блоки: (1,1) = ρβ₁D², (1,2) = −β₁(G+Q), (1,3) = 0,
    (2,2) = 2αβ₃I − (β₁+α²β₂)Q, (2,3) = β₃I + αβ₂G,
    (3,3) = (ρD² + Q + G + Gᵀ)β₂. При cross_block="transposed" в (2,3) стоит Gᵀ.
    """
    _check_dims(sys, ctl, cert)
    cross_block = cross_block or settings.OMEGA_CROSS_BLOCK
    n = sys.n
    F, Q, G = _blocks(sys, ctl, cert.D)
    D2 = cert.D @ cert.D
    eye = np.eye(n)
    zero = np.zeros((n, n))
    a, b1, b2, b3 = cert.alpha, cert.beta1, cert.beta2, cert.beta3
    G23 = G.T if cross_block == "transposed" else G

    a11 = cert.rho * b1 * D2
    a12 = -b1 * (G + Q)
    a22 = 2.0 * a * b3 * eye - (b1 + a * a * b2) * Q
    a23 = b3 * eye + a * b2 * G23
    a33 = (cert.rho * D2 + Q + G + G.T) * b2

    omega = np.block([
        [a11, a12, zero],
        [a12.T, a22, a23],
        [zero, a23.T, a33],
    ])
    return 0.5 * (omega + omega.T)


def check_contraction(sys: HyperbolicSystem, ctl: ControllerParams,
                      cert: CertificateParams) -> ContractionReport:
    """‖D(H+BK)D⁻¹‖₂ ≤ ν < 1."""
    _check_dims(sys, ctl, cert)
    d = cert.d
    scaled = (d[:, None] * (sys.H + sys.B @ ctl.K)) / d[None, :]
    norm = spectral_norm(scaled)
    return ContractionReport(holds=bool(norm <= cert.nu and cert.nu < 1.0), norm=norm)


def check_omega(sys: HyperbolicSystem, ctl: ControllerParams, cert: CertificateParams,
                cross_block: Optional[str] = None) -> OmegaReport:
    """Ω > ζI."""
    min_eig = min_eig_sym(build_omega(sys, ctl, cert, cross_block))
    return OmegaReport(holds=bool(min_eig > cert.zeta), min_eig=min_eig)


def derive_constants(sys: HyperbolicSystem, ctl: ControllerParams, cert: CertificateParams,
                     chi_beta: Optional[str] = None,
                     cross_block: Optional[str] = None) -> DerivedConstants:
    """
    Все константы оценок устойчивости по проверенному сертификату

    Args:
        sys: Система
        ctl: Регулятор
        cert: Параметры сертификата
        chi_beta: Какой β стоит в перекрёстном слагаемом χ (по умолчанию из настроек)
        cross_block: Вариант блока (2,3) матрицы Ω

    Returns:
        DerivedConstants: F, Q, G, Ω, P₁..P₃, σ, χ, c_D, c̲_P, c̄_P, константы DSS и ISS

    Raises:
        CertificateInfeasibleError: если не выполнено условие сжатия или Ω > ζI
    """
    contraction = check_contraction(sys, ctl, cert)
    omega_check = check_omega(sys, ctl, cert, cross_block)
    if not contraction.holds:
        raise CertificateInfeasibleError(
            f"Условие сжатия не выполнено: норма {contraction.norm:.6g}, ν = {cert.nu}"
        )
    if not omega_check.holds:
        raise CertificateInfeasibleError(
            f"Ω > ζI не выполнено: λ_min = {omega_check.min_eig:.6g}, ζ = {cert.zeta}"
        )

    chi_beta = chi_beta or settings.CHI_BETA
    F, Q, G = _blocks(sys, ctl, cert.D)
    D = cert.D
    lam = sys.Lambda
    lam_inv = np.diag(1.0 / sys.speeds)
    Dtilde = D @ lam

    P1 = cert.beta1 * D @ D @ lam_inv
    P2 = cert.beta2 * Dtilde @ Dtilde @ lam_inv
    P3 = cert.beta3 * np.eye(sys.n)

    sigma1 = cert.mu * float(np.min(sys.speeds))
    sigma2 = sigma1
    sigma = min(sigma1, sigma2, cert.zeta / 2.0)

    a = cert.alpha
    zeta = cert.zeta
    q_norm = spectral_norm(Q)
    g_norm = spectral_norm(G)
    beta_cross = {"beta1": cert.beta1, "beta2": cert.beta2, "beta3": cert.beta3}[chi_beta]
    chi = (
        a ** 4 * cert.beta2 ** 2 * q_norm ** 2 / zeta
        + (a * beta_cross) ** 2 * g_norm ** 2 / zeta
        + a ** 2 * cert.beta2 * q_norm
        + 2.0 * (a * cert.beta3) ** 2 / zeta
    )

    cP_lo = min(min_eig_sym(P) for P in (P1, P2, P3))
    cP_hi = max(max_eig_sym(P) for P in (P1, P2, P3))
    d_min = float(np.min(cert.d))
    cD = max(spectral_norm(D) ** 2, spectral_norm(D @ F) ** 2) / (d_min ** 2 * (1.0 - cert.nu ** 2))

    return DerivedConstants(
        F=F, Q=Q, G=G, Omega=build_omega(sys, ctl, cert, cross_block),
        P1=P1, P2=P2, P3=P3, Dtilde=Dtilde,
        sigma1=sigma1, sigma2=sigma2, sigma=sigma, chi=chi, cD=cD,
        cP_lo=cP_lo, cP_hi=cP_hi,
        dss_c=math.sqrt(cD * cP_hi / cP_lo),
        dss_a=sigma / 2.0,
        dss_gamma_coef=math.sqrt(cD * chi / (cP_lo * sigma)),
        C1=(2.0 + cD) * chi / (cP_lo * sigma),
        C2=(2.0 + cD) * cP_hi / cP_lo,
        mu=cert.mu,
    )


def quantizer_rate_bound(dc: DerivedConstants, n: int) -> float:
    """n·c_D·χ/(c̲_P·σ): квантователь допустим, если (M_q/Δ_q)² строго больше."""
    return n * dc.cD * dc.chi / (dc.cP_lo * dc.sigma)


def ultimate_bound(dc: DerivedConstants, n: int, delta_q: float, eps: float) -> float:
    """γ_ε(Δ_q) - предельная оценка max_z |X(z,t)|²."""
    if delta_q <= 0 or eps <= 0:
        raise InvalidInputError("delta_q и eps должны быть положительными")
    return quantizer_rate_bound(dc, n) * delta_q ** 2 * (1.0 + eps)


def omega_obstruction(sys: HyperbolicSystem) -> Optional[str]:
    """
    Необходимое условие положительности блока (3,3): спектральный радиус H меньше 1

    Returns:
        Optional[str]: Описание препятствия или None
    """
    radius = spectral_radius(sys.H)
    if radius >= 1.0:
        return (
            f"spectral radius of H is {radius:.6g} >= 1: block (3,3) of Omega "
            f"cannot be positive definite for any certificate"
        )
    return None


def optimize_scaling(sys: HyperbolicSystem, ctl: ControllerParams,
                     max_evals: int = SCALING_BUDGET) -> tuple[NDArray, float, int]:
    """
    Покоординатный спуск по log D для минимизации ‖D(H+BK)D⁻¹‖₂

    Returns:
        tuple[NDArray, float, int]: (диагональ D, достигнутая норма, число вычислений)
    """
    A = sys.H + sys.B @ ctl.K
    n = sys.n

    def objective(log_d: NDArray) -> float:
        d = np.exp(log_d)
        return spectral_norm((d[:, None] * A) / d[None, :])

    log_d = np.zeros(n)
    best = objective(log_d)
    evals = 1
    h = 1.0
    while h > 1e-6 and evals < max_evals:
        improved = False
        # первая координата фиксирована: норма инвариантна к D → cD
        for i in range(1, n):
            for sign in (1.0, -1.0):
                if evals >= max_evals:
                    break
                trial = log_d.copy()
                trial[i] += sign * h
                value = objective(trial)
                evals += 1
                if value < best - 1e-15:
                    log_d, best = trial, value
                    improved = True
                    break
        if not improved:
            h *= 0.5
    return np.exp(log_d), best, evals


def search_certificate(sys: HyperbolicSystem, ctl: ControllerParams,
                       budget: Optional[int] = None, seed: int = 0,
                       workers: Optional[int] = None,
                       chi_beta: Optional[str] = None,
                       cross_block: Optional[str] = None) -> SearchReport:
    """
    Поиск параметров сертификата

    (i) D - покоординатным спуском по log D; ν - достигнутая норма;
    (ii) сетка μ × α в логарифмическом масштабе;
    (iii) в каждой точке симплекс Нелдера–Мида по (log β₁, log β₂) при β₃ = 1
    максимизирует λ_min(Ω); (iv) ζ = 0.9·λ_min.
    Из допустимых точек выбирается точка с наименьшей границей скорости квантователя.

    Returns:
        SearchReport: Найденный сертификат или отчёт о недопустимости
    """
    budget = settings.SEARCH_BUDGET if budget is None else budget
    workers = settings.SEARCH_WORKERS if workers is None else workers
    if budget < 1:
        raise InvalidInputError(f"budget должен быть ≥ 1, получено {budget}")

    d, norm, used = optimize_scaling(sys, ctl, min(SCALING_BUDGET, max(budget // 10, 1)))
    logger.info(f"Scaling search: ||D(H+BK)D^-1|| = {norm:.6g} after {used} evaluations")

    if norm >= 1.0:
        return SearchReport(feasible=False, params=None, best_norm=norm,
                            best_min_eig=-math.inf, evaluations=used,
                            obstruction=f"contraction condition fails: best norm {norm:.6g} >= 1")

    nu = min(max(norm, 1e-6) * (1.0 + 1e-9), 1.0 - 1e-12)

    obstruction = omega_obstruction(sys)
    if obstruction is not None:
        trial = CertificateParams(mu=MU_GRID[0], nu=nu, D=d, alpha=ctl.alpha)
        min_eig = min_eig_sym(build_omega(sys, ctl, trial, cross_block))
        logger.warning(f"Certificate search stopped: {obstruction}")
        return SearchReport(feasible=False, params=None, best_norm=norm,
                            best_min_eig=min_eig, evaluations=used + 1,
                            obstruction=obstruction)

    points = [(mu, alpha) for mu in MU_GRID for alpha in ALPHA_GRID]
    remaining = max(budget - used, 0)
    per_point = max(remaining // len(points), 1)
    points = points[: max(remaining // per_point, 0)]
    rng = np.random.default_rng(seed)
    starts = rng.normal(0.0, 0.25, size=(len(points), 2))

    def explore(idx: int) -> tuple[float, NDArray, int]:
        mu, alpha = points[idx]
        if math.exp(-mu) - nu ** 2 <= 0.0:
            return -math.inf, starts[idx], 0

        # Ω линейна по (β₁, β₂, β₃), положительная определённость от масштаба не зависит: β₃ = 1
        def objective(x: NDArray) -> float:
            cert = CertificateParams(mu=mu, nu=nu, D=d, alpha=alpha,
                                     beta1=math.exp(x[0]), beta2=math.exp(x[1]), beta3=1.0)
            return -min_eig_sym(build_omega(sys, ctl, cert, cross_block))

        if per_point < 3:
            return -objective(starts[idx]), starts[idx], 1
        result = minimize(objective, starts[idx], method="Nelder-Mead",
                          options={"maxfev": min(per_point, NM_MAX_EVALS), "xatol": 1e-4, "fatol": 1e-10})
        return -float(result.fun), result.x, int(result.nfev)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(explore, range(len(points))))
    else:
        results = [explore(i) for i in range(len(points))]

    evaluations = used + sum(r[2] for r in results)
    best_min_eig = max((r[0] for r in results), default=-math.inf)
    best: Optional[CertificateParams] = None
    best_rate = math.inf
    for (mu, alpha), (min_eig, x, _) in zip(points, results):
        if not min_eig > 0.0:
            continue
        cert = CertificateParams(mu=mu, nu=nu, D=d, alpha=alpha,
                                 beta1=math.exp(x[0]), beta2=math.exp(x[1]), beta3=1.0,
                                 zeta=0.9 * min_eig)
        if not (check_contraction(sys, ctl, cert).holds
                and check_omega(sys, ctl, cert, cross_block).holds):
            continue
        dc = derive_constants(sys, ctl, cert, chi_beta, cross_block)
        rate = quantizer_rate_bound(dc, sys.n)
        if rate < best_rate:
            best, best_rate = cert, rate

    if best is None:
        logger.info(f"No certificate found, best min eig {best_min_eig:.6g}")
        return SearchReport(feasible=False, params=None, best_norm=norm,
                            best_min_eig=best_min_eig, evaluations=evaluations)

    logger.info(
        f"Certificate found: mu={best.mu:.4g}, alpha={best.alpha:.4g}, "
        f"zeta={best.zeta:.4g}, rate bound {best_rate:.6g}"
    )
    return SearchReport(feasible=True, params=best, best_norm=norm,
                        best_min_eig=best_min_eig, evaluations=evaluations)


def certificate_report(cert: CertificateParams, dc: DerivedConstants, n: int) -> dict:
    """Отчёт certificate.json."""
    return {
        "mu": cert.mu,
        "nu": cert.nu,
        "D": cert.d.tolist(),
        "alpha": cert.alpha,
        "beta1": cert.beta1,
        "beta2": cert.beta2,
        "beta3": cert.beta3,
        "zeta": cert.zeta,
        "sigma": dc.sigma,
        "chi": dc.chi,
        "c_D": dc.cD,
        "cP_lo": dc.cP_lo,
        "cP_hi": dc.cP_hi,
        "dss_c": dc.dss_c,
        "dss_a": dc.dss_a,
        "dss_gamma_coef": dc.dss_gamma_coef,
        "dss_gamma_form": "derived form",
        "C1": dc.C1,
        "C2": dc.C2,
        "rate_bound": quantizer_rate_bound(dc, n),
    }

