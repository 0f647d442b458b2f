import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from pydantic import ValidationError

from dsslab.config import settings
from dsslab.core.certificate import (
    CertificateParams,
    DerivedConstants,
    certificate_report,
    check_contraction,
    check_omega,
    derive_constants,
    search_certificate,
    ultimate_bound,
)
from dsslab.core.controller import MeasurementSource
from dsslab.core.lyapunov import (
    LyapunovSample,
    check_dissipation,
    check_dss,
    check_invariant_sets,
    check_iss_combined,
    check_sandwich,
    eval_V,
    h1_norm_sq,
    set_levels,
)
from dsslab.core.solver import Mode, StepRecord, TransportSolver, aligned_time_step
from dsslab.core.system import (
    ControllerParams,
    HyperbolicSystem,
    InitialProfile,
    check_compatibility,
    solve_eta0,
    validate,
)
from dsslab.errors import BlowUpError, ConfigurationError, InvalidInputError
from dsslab.schemas import (
    CheckOutcome,
    ExperimentConfig,
    GridConfig,
    ProfileConfig,
    SolverSnapshot,
    Summary,
)
from dsslab.storage.repository import ArtifactRepository
from dsslab.utils.quantizers import QuantizerSpec
from dsslab.utils.signals import Signal, make_signal


logger = logging.getLogger(__name__)


@dataclass
class RunResult:
    summary: Summary
    out_dir: Path

    @property
    def exit_code(self) -> int:
        return self.summary.exit_code


@dataclass
class CertificateStage:
    ctl: ControllerParams
    params: Optional[CertificateParams]
    constants: Optional[DerivedConstants]
    report: dict
    outcome: CheckOutcome


@dataclass
class CompareReport:
    rows: list[dict]
    ordering: list[str]
    strictly_decreasing: bool
    identical: bool
    gamma_ratios: list[Optional[float]] = field(default_factory=list)


@dataclass
class RestartReport:
    agree: bool
    max_abs_diff: float
    tol: float
    grid_aligned: bool
    initial_maxnorm: float
    final_maxnorm: float
    alpha: float


# ===== CONFIG =====
def load_config(path: str | Path) -> ExperimentConfig:
    """Прочитать и провалидировать JSON-файл эксперимента."""
    path = Path(path)
    try:
        return ExperimentConfig.model_validate_json(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigurationError(f"Файл конфигурации не найден: {path}")
    except ValidationError as e:
        raise ConfigurationError(f"Некорректная конфигурация {path}: {e}")


def build_profile(pcfg: ProfileConfig, n: int) -> InitialProfile:
    if pcfg.kind == "zero":
        profile = InitialProfile.zero(n)
    elif pcfg.kind == "cosine":
        profile = InitialProfile.cosine(pcfg.modes, pcfg.amplitude)
    elif pcfg.kind == "ramp":
        profile = InitialProfile.ramp(pcfg.slope, pcfg.offset or [0.0])
    else:
        profile = InitialProfile.from_samples(pcfg.samples)
    if profile.n != n:
        raise ConfigurationError(f"Профиль размерности {profile.n}, система размерности {n}")
    return profile


def build_system(cfg: ExperimentConfig) -> tuple[HyperbolicSystem, ControllerParams, InitialProfile]:
    """Собрать систему, регулятор и профиль; нарушения инвариантов - ошибка конфигурации."""
    try:
        sys = HyperbolicSystem.from_speeds(cfg.system.Lambda, cfg.system.H, cfg.system.B)
        n = sys.n
        eta0 = cfg.controller.eta0
        ctl = ControllerParams(
            K=cfg.controller.K,
            alpha=cfg.controller.alpha,
            eta0=np.zeros(n) if eta0 is None or eta0 == "compatible" else eta0,
        )
    except (ValueError, InvalidInputError) as e:
        raise ConfigurationError(f"Некорректные матрицы: {e}")

    violations = validate(sys, ctl)
    if violations:
        raise ConfigurationError("; ".join(violations))

    profile = build_profile(cfg.profile, sys.n)
    if cfg.controller.eta0 == "compatible":
        eta0, _ = solve_eta0(sys, ctl, profile)
        ctl = ctl.with_eta0(eta0)
    return sys, ctl, profile


def build_measurement(cfg: ExperimentConfig, n: int,
                      seed: int) -> tuple[MeasurementSource, Optional[QuantizerSpec]]:
    quant = None
    if cfg.quantizer is not None:
        q = cfg.quantizer
        quant = (QuantizerSpec.floor(q.ell) if q.kind == "floor"
                 else QuantizerSpec.range_sensitivity(q.delta_q, q.M_q))
        return MeasurementSource(quantizer=quant), quant

    signal: Optional[Signal] = None
    if cfg.disturbance is not None:
        dcfg = cfg.disturbance
        signal = make_signal(dcfg.kind, n, amplitude=dcfg.amplitude, rate=dcfg.rate,
                             seed=seed if dcfg.seed is None else dcfg.seed,
                             dwell=dcfg.dwell, t_on=dcfg.t_on)
    return MeasurementSource(disturbance=signal), quant


def resolve_time_step(grid: GridConfig, sys: HyperbolicSystem) -> float:
    default = 1.0 / (grid.M * float(np.max(sys.speeds)))
    if grid.dt is None:
        return default
    if grid.dt == "auto":
        aligned = aligned_time_step(sys.speeds, grid.M)
        return default if aligned is None else aligned
    return float(grid.dt)


# ===== CERTIFICATE =====
def resolve_certificate(cfg: ExperimentConfig, sys: HyperbolicSystem,
                        ctl: ControllerParams, seed: int) -> CertificateStage:
    """
    Проверить явный сертификат или найти его поиском

    Найденный поиском α заменяет α регулятора (с предупреждением в журнале).
    """
    ccfg = cfg.certificate
    if ccfg.mode == "none":
        return CertificateStage(ctl, None, None, {"mode": "none"},
                                CheckOutcome(status="inapplicable", detail="certificate disabled"))

    if ccfg.mode == "explicit":
        alpha = ctl.alpha if ccfg.alpha is None else ccfg.alpha
        if not math.isclose(alpha, ctl.alpha, rel_tol=1e-12):
            raise ConfigurationError(
                f"alpha сертификата {alpha} не совпадает с alpha регулятора {ctl.alpha}"
            )
        if len(ccfg.D) != sys.n or min(ccfg.D) <= 0:
            raise ConfigurationError(f"D должна содержать {sys.n} положительных чисел")
        params = CertificateParams(mu=ccfg.mu, nu=ccfg.nu, D=ccfg.D, alpha=alpha,
                                   beta1=ccfg.beta1, beta2=ccfg.beta2, beta3=ccfg.beta3,
                                   zeta=ccfg.zeta)
        report = {"mode": "explicit"}
    else:
        search = search_certificate(sys, ctl, budget=ccfg.budget, seed=seed,
                                    chi_beta=ccfg.chi_beta, cross_block=ccfg.omega_cross_block)
        report = {
            "mode": "search",
            "evaluations": search.evaluations,
            "best_norm": search.best_norm,
            "best_min_eig": search.best_min_eig,
            "obstruction": search.obstruction,
        }
        if not search.feasible:
            report["feasible"] = False
            detail = search.obstruction or "no certificate found"
            logger.warning(f"Certificate search failed: {detail}")
            return CertificateStage(ctl, None, None, report,
                                    CheckOutcome(status="fail", detail=detail))
        params = search.params
        if not math.isclose(params.alpha, ctl.alpha, rel_tol=1e-12):
            logger.warning(f"Controller alpha {ctl.alpha} replaced by certified alpha {params.alpha:.6g}")
            ctl = ctl.with_alpha(params.alpha)

    contraction = check_contraction(sys, ctl, params)
    omega = check_omega(sys, ctl, params, ccfg.omega_cross_block)
    report["contraction"] = {"holds": contraction.holds, "norm": contraction.norm}
    report["omega"] = {"holds": omega.holds, "min_eig": omega.min_eig}
    report["feasible"] = contraction.holds and omega.holds

    if not report["feasible"]:
        detail = (f"contraction {contraction.norm:.6g} (holds={contraction.holds}), "
                  f"min eig {omega.min_eig:.6g} (holds={omega.holds})")
        return CertificateStage(ctl, params, None, report, CheckOutcome(status="fail", detail=detail))

    dc = derive_constants(sys, ctl, params, ccfg.chi_beta, ccfg.omega_cross_block)
    report.update(certificate_report(params, dc, sys.n))
    return CertificateStage(ctl, params, dc, report,
                            CheckOutcome(status="pass", detail=f"sigma={dc.sigma:.6g}, chi={dc.chi:.6g}"))


# ===== RUN =====
def _boundary_row(rec: StepRecord) -> list[float]:
    return [rec.t, *rec.x1.tolist(), *rec.eta.tolist(), *rec.u.tolist(), *rec.d.tolist()]


def _outcome(ok: bool, detail: str = "") -> CheckOutcome:
    return CheckOutcome(status="pass" if ok else "fail", detail=detail)


def _exit_code(checks: dict[str, CheckOutcome]) -> int:
    return 0 if all(c.status == "pass" for c in checks.values()) else 1


def run(config: ExperimentConfig, out_dir: Optional[str | Path] = None,
        checks: Optional[Sequence[str]] = None, seed: Optional[int] = None) -> RunResult:
    """
    Полный эксперимент: сертификат, моделирование, проверки, артефакты

    Args:
        config: Конфигурация эксперимента
        out_dir: Каталог артефактов (иначе config.output_dir или OUTPUT_DIR/name)
        checks: Переопределение списка проверок
        seed: Переопределение зерна

    Returns:
        RunResult: Сводка и каталог; exit_code 0/1/2/3
    """
    updates = {}
    if checks is not None:
        updates["checks"] = list(checks)
    if seed is not None:
        updates["seed"] = seed
    cfg = config.model_copy(update=updates) if updates else config
    try:
        cfg = ExperimentConfig.model_validate(cfg.model_dump())
    except ValidationError as e:
        raise ConfigurationError(f"Некорректная конфигурация: {e}")

    target = Path(out_dir or cfg.output_dir or Path(settings.OUTPUT_DIR) / cfg.name)
    repo = ArtifactRepository(target)
    summary = Summary(name=cfg.name, seed=cfg.seed, exit_code=2)
    logger.info(f"Run '{cfg.name}' started, artifacts in {target}")

    try:
        sys, ctl, profile = build_system(cfg)
        stage = resolve_certificate(cfg, sys, ctl, cfg.seed)
        repo.write_certificate(stage.report)
        summary.certificate_feasible = stage.outcome.status == "pass"
        ctl = stage.ctl

        source, quant = build_measurement(cfg, sys.n, cfg.seed)
        dt = resolve_time_step(cfg.grid, sys)
        solver = TransportSolver.init(sys, ctl, profile, cfg.grid.M, dt, Mode(cfg.grid.mode))
    except (ConfigurationError, InvalidInputError) as e:
        logger.error(f"Run '{cfg.name}' configuration error: {e}")
        summary.warnings.append(str(e))
        repo.write_summary(summary)
        return RunResult(summary, target)

    summary.warnings.extend(solver.warnings)
    dc = stage.constants
    eps = cfg.quantizer.eps if cfg.quantizer is not None else 0.1
    levels = set_levels(dc, quant, sys.n, eps) if dc is not None and quant is not None else None
    if quant is not None:
        summary.delta_q = quant.delta_q

    n_steps = int(round(cfg.T / dt))
    snapshot_every = max(1, int(round(cfg.grid.snapshot_stride / dt)))
    monitor_every = cfg.grid.monitor_stride
    requested = list(dict.fromkeys(cfg.checks))

    records: list[StepRecord] = []
    field_rows: list[list[float]] = []
    samples: list[LyapunovSample] = []
    sample_times: list[float] = []
    maxnorms: list[float] = []
    d_log: list[np.ndarray] = []
    sandwich_failures = 0
    initial_state = solver.field()

    try:
        for k in range(n_steps + 1):
            need_snapshot = k % snapshot_every == 0 or k == n_steps
            need_monitor = k % monitor_every == 0
            state = solver.field() if (need_snapshot or need_monitor) else None
            if need_snapshot:
                for j, zj in enumerate(state.z):
                    field_rows.append([state.t, float(zj), *state.X[j].tolist()])

            rec = solver.step(source=source) if k < n_steps else solver.record(source=source)
            records.append(rec)

            if need_monitor:
                sample_times.append(state.t)
                maxnorms.append(float(np.max(np.linalg.norm(state.X, axis=1))))
                d_log.append(rec.d)
                if dc is not None:
                    sample = eval_V(state, stage.params, dc, levels)
                    samples.append(sample)
                    if "sandwich" in requested and not check_sandwich(sample, state, dc).holds:
                        sandwich_failures += 1
    except BlowUpError as e:
        logger.error(f"Run '{cfg.name}' blew up at t={e.t:.6g}")
        summary.blow_up_time = e.t
        summary.exit_code = e.exit_code
        summary.warnings.append(e.detail)
        repo.write_boundary((_boundary_row(r) for r in records), sys.n, sys.m)
        repo.write_summary(summary)
        return RunResult(summary, target)

    times = np.array(sample_times)
    d_arr = np.array(d_log)
    d_interval = _interval_d2(records, monitor_every, len(sample_times))
    maxnorm_arr = np.array(maxnorms)
    dz = 1.0 / cfg.grid.M

    summary.initial_maxnorm = float(maxnorm_arr[0])
    summary.final_maxnorm = float(maxnorm_arr[-1])
    window = times >= (1.0 - settings.ULTIMATE_WINDOW) * cfg.T - 1e-12
    summary.ultimate_maxnorm = float(np.max(maxnorm_arr[window]))
    if maxnorm_arr[0] > 0.0:
        below = np.flatnonzero(maxnorm_arr <= 1e-3 * maxnorm_arr[0])
        summary.decay_time = float(times[below[0]]) if below.size else None
    r0 = initial_state.eta - initial_state.X[-1]
    h1_0 = h1_norm_sq(initial_state.X, initial_state.Xz, initial_state.z)
    summary.Mx0 = h1_0 + float(r0 @ r0)
    summary.practical_constant = h1_0 + float(initial_state.eta @ initial_state.eta)
    if dc is not None:
        summary.dss_gain = dc.dss_gamma_coef * float(np.max(np.linalg.norm(d_arr, axis=1)))

    dss = check_dss(samples, d_arr, dc, dz=dz) if dc is not None else None
    results: dict[str, CheckOutcome] = {}
    no_cert = CheckOutcome(status="inapplicable", detail="no verified certificate")

    for name in requested:
        if name == "certificate":
            results[name] = stage.outcome
        elif name == "compatibility":
            compat = check_compatibility(sys, ctl, profile)
            results[name] = _outcome(compat.ok, f"residual={compat.residual:.3e}")
        elif name == "decay":
            ok = maxnorm_arr[0] == 0.0 or summary.decay_time is not None
            results[name] = _outcome(ok, f"decay_time={summary.decay_time}")
        elif dc is None:
            results[name] = no_cert
        elif name == "sandwich":
            results[name] = _outcome(sandwich_failures == 0, f"failures={sandwich_failures}")
        elif name in ("dissipation", "integrated"):
            if quant is not None:
                results[name] = CheckOutcome(status="inapplicable", detail="quantized loop")
                continue
            diss = check_dissipation(samples, d_arr, dc, dz, d_interval=d_interval)
            if name == "dissipation":
                results[name] = _outcome(diss.ok, f"violations={diss.violations}, "
                                                  f"worst margin={diss.worst_margin:.3e}")
            else:
                results[name] = _outcome(diss.integrated_ok,
                                         f"worst margin={diss.integrated_worst_margin:.3e}")
        elif name == "dss":
            results[name] = _outcome(dss.ok, f"max slack={dss.max_slack:.3e}")
        elif name == "iss":
            iss = check_iss_combined(samples, d_arr, dc, dz=dz)
            results[name] = _outcome(iss.ok, f"worst margin={iss.worst_margin:.3e}")
        elif name == "invariant_sets":
            if quant is None:
                results[name] = CheckOutcome(status="inapplicable", detail="no quantizer")
                continue
            x1_log = np.array([records[int(round(t / dt))].x1 for t in times])
            inv = check_invariant_sets(samples, dc, quant, eps, sys.n, x1_log, dz=dz)
            summary.T_eps = inv.T_eps
            if not inv.applicable:
                results[name] = CheckOutcome(status="inapplicable", detail=inv.reason)
            else:
                results[name] = _outcome(inv.SM_ok and inv.ultimate_ok,
                                         f"SM_ok={inv.SM_ok}, ultimate_ok={inv.ultimate_ok}, "
                                         f"range_ok={inv.range_ok}")

    if dc is not None and quant is not None:
        summary.gamma_eps = ultimate_bound(dc, sys.n, quant.delta_q, eps)

    summary.checks = results
    summary.exit_code = _exit_code(results)

    repo.write_field(field_rows, sys.n)
    repo.write_boundary((_boundary_row(r) for r in records), sys.n, sys.m)
    monitor_rows = []
    for i, t in enumerate(times):
        d_norm = float(np.linalg.norm(d_arr[i]))
        if samples:
            s = samples[i]
            monitor_rows.append([t, s.V1, s.V2, s.V3, s.V, s.maxnorm, d_norm,
                                 int(s.in_SM), int(s.in_SDelta),
                                 float(dss.rhs[i]), float(dss.slack[i])])
        else:
            monitor_rows.append([t, "", "", "", "", maxnorm_arr[i], d_norm, "", "", "", ""])
    repo.write_monitor(monitor_rows)
    repo.write_summary(summary)

    status = "V" if summary.exit_code == 0 else "X"
    logger.info(f"{status} Run '{cfg.name}' finished with exit code {summary.exit_code}")
    return RunResult(summary, target)


def _interval_d2(records: Sequence[StepRecord], stride: int, count: int) -> np.ndarray:
    """max |d|² по всем шагам между соседними отсчётами монитора (концы включительно)."""
    if count < 2:
        return np.zeros(0)
    d2 = np.array([float(r.d @ r.d) for r in records[:(count - 1) * stride + 1]])
    starts = np.arange(count - 1) * stride
    return np.maximum(np.maximum.reduceat(d2[:-1], starts), d2[starts + stride])


def _run_path(path: str) -> RunResult:
    return run(load_config(path))


def run_batch(paths: Sequence[str | Path], workers: int = 1) -> list[RunResult]:
    """Пакет экспериментов; результаты в порядке конфигураций."""
    paths = [str(p) for p in paths]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_run_path, paths))
    return [_run_path(p) for p in paths]


# ===== COMPARE / RESTART =====
def compare_runs(summaries: Sequence[Summary]) -> CompareReport:
    """
    Сравнить предельные нормы запусков с прогнозами γ_ε

    Упорядочивание - по убыванию Δ_q; ожидается строгое убывание предельной нормы.
    """
    if len(summaries) < 2:
        raise ConfigurationError("Для сравнения нужно не меньше двух сводок")
    for s in summaries:
        if s.ultimate_maxnorm is None:
            raise ConfigurationError(f"В сводке '{s.name}' нет предельной нормы")

    rows = []
    for s in summaries:
        sq = s.ultimate_maxnorm ** 2
        rows.append({
            "name": s.name,
            "delta_q": s.delta_q,
            "ultimate_maxnorm": s.ultimate_maxnorm,
            "ultimate_maxnorm_sq": sq,
            "gamma_eps": s.gamma_eps,
            "bound_ok": None if s.gamma_eps is None else sq <= s.gamma_eps,
        })

    by_resolution = sorted(rows, key=lambda r: -(r["delta_q"] if r["delta_q"] is not None else math.inf))
    values = [r["ultimate_maxnorm"] for r in by_resolution]
    strictly_decreasing = all(a > b for a, b in zip(values, values[1:]))
    identical = all(abs(a - rows[0]["ultimate_maxnorm"]) <= 1e-12 for a in (r["ultimate_maxnorm"] for r in rows))

    ratios = []
    for a, b in zip(by_resolution, by_resolution[1:]):
        if a["gamma_eps"] and b["gamma_eps"]:
            ratios.append(a["gamma_eps"] / b["gamma_eps"])
        else:
            ratios.append(None)

    ordering = [r["name"] for r in sorted(rows, key=lambda r: -r["ultimate_maxnorm"])]
    return CompareReport(rows=rows, ordering=ordering, strictly_decreasing=strictly_decreasing,
                         identical=identical, gamma_ratios=ratios)


def restart_check(config: ExperimentConfig, split: float) -> RestartReport:
    """
    Сравнить непрерывный счёт на [0,T] со счётом [0,s] + снимок + продолжение

    Returns:
        RestartReport: Максимальное расхождение поля и η в момент T
    """
    if config.grid.mode != "exact":
        raise ConfigurationError("Проверка перезапуска требует режима exact")
    if not (0.0 <= split < config.T):
        raise ConfigurationError(f"Момент разбиения {split} вне [0, {config.T})")

    sys, ctl, profile = build_system(config)
    ctl = resolve_certificate(config, sys, ctl, config.seed).ctl
    dt = resolve_time_step(config.grid, sys)
    n_steps = int(round(config.T / dt))
    split_steps = int(round(split / dt))

    def advance(solver: TransportSolver, steps: int) -> None:
        source, _ = build_measurement(config, sys.n, config.seed)
        for _ in range(steps):
            solver.step(source=source)

    mono = TransportSolver.init(sys, ctl, profile, config.grid.M, dt, Mode.EXACT)
    initial_maxnorm = float(np.max(np.linalg.norm(mono.field_values(), axis=1)))
    advance(mono, n_steps)

    first = TransportSolver.init(sys, ctl, profile, config.grid.M, dt, Mode.EXACT)
    advance(first, split_steps)
    payload = first.snapshot().model_dump_json()
    resumed = TransportSolver.resume(sys, ctl, SolverSnapshot.model_validate_json(payload))
    advance(resumed, n_steps - split_steps)

    a, b = mono.field_values(), resumed.field_values()
    diff = max(float(np.max(np.abs(a - b))), float(np.max(np.abs(mono.eta - resumed.eta))))
    tol = 1e-12 if mono.grid_aligned else 1e-8
    logger.info(f"Restart check at s={split}: max diff {diff:.3e} (tol {tol:.0e})")
    return RestartReport(agree=diff <= tol, max_abs_diff=diff, tol=tol,
                         grid_aligned=mono.grid_aligned, initial_maxnorm=initial_maxnorm,
                         final_maxnorm=float(np.max(np.linalg.norm(a, axis=1))),
                         alpha=ctl.alpha)
