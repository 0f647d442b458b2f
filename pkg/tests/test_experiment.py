import csv
import json

import numpy as np
import pytest

from dsslab.core.experiment import (
    build_measurement,
    build_system,
    compare_runs,
    load_config,
    resolve_certificate,
    resolve_time_step,
    restart_check,
    run,
    run_batch,
)
from dsslab.core.system import check_compatibility
from dsslab.errors import ConfigurationError
from dsslab.schemas import ExperimentConfig, GridConfig, Summary
from tests.helpers import PRESETS_DIR, load_preset


def _config(data: dict) -> ExperimentConfig:
    return ExperimentConfig.model_validate(data)


def _short(name: str, M: int = 64, T: float | None = None, **grid) -> ExperimentConfig:
    data = load_preset(name)
    data["grid"] = {**data["grid"], "M": M, **grid}
    if T is not None:
        data["T"] = T
    return _config(data)


def _rows(path) -> list[list[str]]:
    with path.open(encoding="utf-8") as f:
        return list(csv.reader(f))


class TestConfig:
    @pytest.mark.parametrize("path", sorted(PRESETS_DIR.glob("*.json")), ids=lambda p: p.stem)
    def test_presets_load(self, path):
        cfg = load_config(path)
        assert cfg.name == path.stem
        build_system(cfg)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigurationError):
            load_config(tmp_path / "absent.json")

    def test_invalid_file(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"name": "bad", "T": -1.0}), encoding="utf-8")
        with pytest.raises(ConfigurationError):
            load_config(path)

    def test_quantizer_and_disturbance_exclusive(self):
        data = load_preset("damped-dss")
        data["quantizer"] = {"kind": "floor", "ell": 1.0}
        with pytest.raises(ValueError):
            _config(data)

    def test_explicit_certificate_fields_required(self):
        data = load_preset("damped-dss")
        data["certificate"] = {"mode": "explicit", "mu": 0.1}
        with pytest.raises(ValueError):
            _config(data)

    def test_compatible_eta0(self, damped_config_dict):
        damped_config_dict["profile"] = {"kind": "ramp", "slope": [1.0, 0.5], "offset": [0.1, 0.2]}
        damped_config_dict["controller"]["eta0"] = "compatible"
        sys, ctl, profile = build_system(_config(damped_config_dict))
        assert check_compatibility(sys, ctl, profile).ok
        assert not np.allclose(ctl.eta0, 0.0)

    def test_auto_time_step_is_aligned(self, damped_system):
        assert resolve_time_step(GridConfig(M=64, dt="auto"), damped_system) == pytest.approx(1 / 128)
        assert resolve_time_step(GridConfig(M=64), damped_system) == pytest.approx(1 / 128)
        assert resolve_time_step(GridConfig(M=64, dt=0.001), damped_system) == 0.001

    def test_floor_measurement(self):
        source, quant = build_measurement(_config(load_preset("damped-ell10")), 2, seed=0)
        assert quant.delta_q == pytest.approx(0.1)
        assert source.quantizer is quant


class TestRun:
    def test_zero_profile_stays_zero(self, tmp_path):
        result = run(load_config(PRESETS_DIR / "zero.json"), out_dir=tmp_path)
        s = result.summary
        assert result.exit_code == 0, s.checks
        assert s.initial_maxnorm == 0.0
        assert s.final_maxnorm == 0.0
        assert s.ultimate_maxnorm == 0.0
        assert all(c.status == "pass" for c in s.checks.values())

    def test_damped_short_run(self, damped_config_dict, tmp_path):
        result = run(_config(damped_config_dict), out_dir=tmp_path)
        assert result.exit_code == 0, result.summary.checks
        assert result.summary.certificate_feasible is True
        assert result.summary.final_maxnorm < result.summary.initial_maxnorm

        # Δt = 1/128, T = 2: 256 шагов, снимки каждые 32 шага, монитор каждые 2
        assert len(_rows(tmp_path / "field.csv")) == 1 + 9 * 65
        assert len(_rows(tmp_path / "boundary.csv")) == 1 + 257
        assert len(_rows(tmp_path / "monitor.csv")) == 1 + 129

        report = json.loads((tmp_path / "certificate.json").read_text(encoding="utf-8"))
        assert report["feasible"] is True
        assert report["contraction"]["norm"] == pytest.approx(0.35)

    def test_checks_override(self, damped_config_dict, tmp_path):
        result = run(_config(damped_config_dict), out_dir=tmp_path, checks=["certificate"])
        assert list(result.summary.checks) == ["certificate"]

    def test_deterministic(self, tmp_path):
        cfg = _short("damped-dss", T=1.0)
        run(cfg, out_dir=tmp_path / "a")
        run(cfg, out_dir=tmp_path / "b")
        for name in ("field.csv", "boundary.csv", "monitor.csv"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_seed_changes_random_disturbance(self, tmp_path):
        cfg = _short("damped-dss", T=1.0)
        run(cfg, out_dir=tmp_path / "a", seed=0)
        run(cfg, out_dir=tmp_path / "b", seed=1)
        assert (tmp_path / "a" / "boundary.csv").read_bytes() != (tmp_path / "b" / "boundary.csv").read_bytes()

    def test_alpha_mismatch_is_configuration_error(self, damped_config_dict, tmp_path):
        damped_config_dict["certificate"]["alpha"] = 3.0
        result = run(_config(damped_config_dict), out_dir=tmp_path)
        assert result.exit_code == 2
        summary = Summary.model_validate_json((tmp_path / "summary.json").read_text(encoding="utf-8"))
        assert summary.exit_code == 2

    def test_wrong_profile_dimension(self, damped_config_dict, tmp_path):
        damped_config_dict["profile"] = {"kind": "cosine", "modes": [1.0]}
        assert run(_config(damped_config_dict), out_dir=tmp_path).exit_code == 2

    def test_reference_obstruction(self, tmp_path):
        result = run(_short("reference-ell1", T=2.0), out_dir=tmp_path)
        s = result.summary
        assert result.exit_code == 1
        assert s.certificate_feasible is False
        assert s.checks["certificate"].status == "fail"
        assert "spectral radius" in s.checks["certificate"].detail
        assert s.checks["invariant_sets"].status == "inapplicable"
        report = json.loads((tmp_path / "certificate.json").read_text(encoding="utf-8"))
        assert report["feasible"] is False
        assert report["obstruction"]

    def test_quantized_range_run(self, tmp_path):
        result = run(_short("damped-quantized-range"), out_dir=tmp_path)
        s = result.summary
        assert result.exit_code == 0, s.checks
        assert s.checks["invariant_sets"].status == "pass"
        assert s.delta_q == pytest.approx(0.1)
        assert s.gamma_eps == pytest.approx(19.021, rel=1e-3)
        assert s.ultimate_maxnorm ** 2 <= s.gamma_eps

    def test_blow_up_exit_code(self, damped_config_dict, tmp_path):
        damped_config_dict["system"]["H"] = [[3.0, 0.0], [0.0, 3.0]]
        damped_config_dict["controller"]["K"] = [[0.0, 0.0], [0.0, 0.0]]
        damped_config_dict["certificate"] = {"mode": "none"}
        damped_config_dict["checks"] = ["decay"]
        damped_config_dict["T"] = 40.0
        result = run(_config(damped_config_dict), out_dir=tmp_path)
        assert result.exit_code == 3
        assert 0.0 < result.summary.blow_up_time < 40.0
        assert (tmp_path / "boundary.csv").exists()

    @pytest.mark.parametrize("disturbance", [
        {"kind": "zero"},
        {"kind": "step", "amplitude": 0.5, "t_on": 1.0},
        {"kind": "random", "amplitude": 0.5, "dwell": 0.05},
    ], ids=lambda d: d["kind"])
    def test_certified_loop_checks_pass(self, disturbance, tmp_path):
        data = load_preset("damped-dss")
        data["T"] = 5.0
        data["disturbance"] = disturbance
        checks = ["dissipation", "integrated", "dss", "iss"]
        result = run(_config(data), out_dir=tmp_path, checks=checks)
        s = result.summary
        assert result.exit_code == 0, s.checks
        assert [s.checks[name].status for name in checks] == ["pass"] * 4

    @pytest.mark.slow
    @pytest.mark.parametrize("seed", range(100))
    def test_random_disturbance_bounds(self, seed, tmp_path):
        data = load_preset("damped-dss")
        data["grid"]["M"] = 64
        data["T"] = 5.0
        data["disturbance"] = {"kind": "random", "amplitude": 1.0, "dwell": 0.05}
        result = run(_config(data), out_dir=tmp_path, checks=["dss", "iss"], seed=seed)
        assert result.summary.checks["dss"].status == "pass", result.summary.checks
        assert result.summary.checks["iss"].status == "pass", result.summary.checks

    @pytest.mark.slow
    def test_vanishing_disturbance_decays(self, tmp_path):
        result = run(_short("damped-vanishing"), out_dir=tmp_path)
        assert result.exit_code == 0, result.summary.checks
        assert result.summary.decay_time is not None

    @pytest.mark.slow
    def test_floor_resolution_ordering(self, tmp_path):
        summaries = []
        for name in ("damped-ell0.1", "damped-ell1", "damped-ell10"):
            result = run(_short(name, T=10.0), out_dir=tmp_path / name)
            summaries.append(result.summary)
        report = compare_runs(summaries)
        assert report.ordering == ["damped-ell0.1", "damped-ell1", "damped-ell10"]
        assert report.strictly_decreasing
        assert not report.identical
        assert report.gamma_ratios == [pytest.approx(100.0), pytest.approx(100.0)]
        assert all(row["bound_ok"] for row in report.rows)


class TestBatch:
    def test_sequential_batch(self, damped_config_dict, tmp_path):
        paths = []
        for i in range(2):
            data = {**damped_config_dict, "name": f"batch-{i}", "T": 0.5,
                    "output_dir": str(tmp_path / f"out-{i}")}
            path = tmp_path / f"cfg-{i}.json"
            path.write_text(json.dumps(data), encoding="utf-8")
            paths.append(path)
        results = run_batch(paths, workers=1)
        assert [r.summary.name for r in results] == ["batch-0", "batch-1"]
        assert all(r.exit_code == 0 for r in results)
        assert (tmp_path / "out-1" / "summary.json").exists()


    def test_parallel_batch_matches_sequential(self, damped_config_dict, tmp_path):
        def configs(tag):
            paths = []
            for i in range(2):
                data = {**damped_config_dict, "name": f"batch-{i}", "T": 0.5,
                        "output_dir": str(tmp_path / tag / f"out-{i}")}
                path = tmp_path / f"{tag}-{i}.json"
                path.write_text(json.dumps(data), encoding="utf-8")
                paths.append(path)
            return paths

        sequential = run_batch(configs("seq"), workers=1)
        parallel = run_batch(configs("par"), workers=2)
        assert [r.summary.name for r in parallel] == ["batch-0", "batch-1"]
        assert [r.exit_code for r in parallel] == [r.exit_code for r in sequential]
        for i in range(2):
            seq = (tmp_path / "seq" / f"out-{i}" / "monitor.csv").read_bytes()
            par = (tmp_path / "par" / f"out-{i}" / "monitor.csv").read_bytes()
            assert seq == par

class TestCompare:
    @staticmethod
    def _summary(name, delta_q, norm, gamma=None):
        return Summary(name=name, seed=0, exit_code=0, delta_q=delta_q,
                       ultimate_maxnorm=norm, gamma_eps=gamma)

    def test_ordering_and_ratios(self):
        report = compare_runs([
            self._summary("fine", 0.1, 0.07, 0.19),
            self._summary("coarse", 10.0, 6.8, 1900.0),
            self._summary("mid", 1.0, 0.68, 19.0),
        ])
        assert report.ordering == ["coarse", "mid", "fine"]
        assert report.strictly_decreasing
        assert report.gamma_ratios == [pytest.approx(100.0), pytest.approx(100.0)]
        assert all(row["bound_ok"] for row in report.rows)

    def test_identical_runs_flagged(self):
        report = compare_runs([self._summary("a", 1.0, 0.5), self._summary("b", 0.1, 0.5)])
        assert report.identical
        assert not report.strictly_decreasing
        assert report.gamma_ratios == [None]

    def test_violated_bound(self):
        report = compare_runs([self._summary("a", 1.0, 5.0, 1.0), self._summary("b", 0.1, 0.1, 1.0)])
        assert report.rows[0]["bound_ok"] is False
        assert report.rows[1]["bound_ok"] is True

    def test_needs_two_summaries(self):
        with pytest.raises(ConfigurationError):
            compare_runs([self._summary("a", 1.0, 0.5)])

    def test_needs_ultimate_norm(self):
        with pytest.raises(ConfigurationError):
            compare_runs([self._summary("a", 1.0, 0.5), self._summary("b", 0.1, None)])


class TestRestart:
    @pytest.mark.parametrize("split", [0.0, 0.5, 1.0])
    def test_snapshot_resume_matches(self, damped_config_dict, split):
        report = restart_check(_config(damped_config_dict), split)
        assert report.grid_aligned
        assert report.agree, report.max_abs_diff
        assert report.max_abs_diff <= 1e-12

    def test_random_disturbance_replayed(self):
        report = restart_check(_short("damped-dss", T=1.0), 0.5)
        assert report.agree, report.max_abs_diff

    def test_searched_alpha_used(self, damped_config_dict):
        damped_config_dict["certificate"] = {"mode": "search", "budget": 2000}
        damped_config_dict["T"] = 1.0
        cfg = _config(damped_config_dict)
        sys, ctl, _ = build_system(cfg)
        stage = resolve_certificate(cfg, sys, ctl, cfg.seed)
        report = restart_check(cfg, 0.5)
        assert report.agree, report.max_abs_diff
        assert report.alpha == stage.ctl.alpha

    def test_certificate_alpha_mismatch(self, damped_config_dict):
        damped_config_dict["certificate"]["alpha"] = 3.0
        with pytest.raises(ConfigurationError):
            restart_check(_config(damped_config_dict), 0.5)

    def test_requires_exact_mode(self, damped_config_dict):
        damped_config_dict["grid"]["mode"] = "upwind"
        with pytest.raises(ConfigurationError):
            restart_check(_config(damped_config_dict), 1.0)

    @pytest.mark.parametrize("split", [-0.1, 2.0, 5.0])
    def test_split_out_of_range(self, damped_config_dict, split):
        with pytest.raises(ConfigurationError):
            restart_check(_config(damped_config_dict), split)
