import numpy as np
import pytest

from dsslab.core.system import (
    ControllerParams,
    HyperbolicSystem,
    InitialProfile,
    check_compatibility,
    closed_loop_boundary,
    solve_eta0,
    validate,
)
from dsslab.errors import InvalidInputError


class TestClosedLoopBoundary:
    def test_open_loop_part(self, printed_system, printed_controller):
        x0 = closed_loop_boundary(printed_system, printed_controller, [1.0, 0.0], [0.0, 0.0])
        np.testing.assert_allclose(x0, [0.25, 0.0])

    def test_controller_part(self, printed_system, printed_controller):
        x0 = closed_loop_boundary(printed_system, printed_controller, [0.0, 0.0], [1.0, 0.0])
        np.testing.assert_allclose(x0, [0.0, -0.25])

    def test_dimension_mismatch(self, printed_system, printed_controller):
        with pytest.raises(InvalidInputError):
            closed_loop_boundary(printed_system, printed_controller, [1.0, 0.0, 0.0], [0.0, 0.0])


class TestCompatibility:
    def test_cosine_data_with_zero_eta(self, printed_system, printed_controller, cosine_profile):
        report = check_compatibility(printed_system, printed_controller, cosine_profile)
        assert report.ok
        assert report.residual == pytest.approx(0.0, abs=1e-12)

    def test_cosine_data_with_unit_eta(self, printed_system, printed_controller, cosine_profile):
        ctl = printed_controller.with_eta0([1.0, 1.0])
        report = check_compatibility(printed_system, ctl, cosine_profile)
        assert not report.ok
        assert report.residual == pytest.approx(np.hypot(0.5, 0.75))
        assert report.residual > 0.5

    def test_solve_eta0_recovers_zero(self, printed_system, printed_controller, cosine_profile):
        eta0, residual = solve_eta0(printed_system, printed_controller.with_eta0([3.0, -1.0]),
                                    cosine_profile)
        np.testing.assert_allclose(eta0, [0.0, 0.0], atol=1e-12)
        assert residual == pytest.approx(0.0, abs=1e-12)

    def test_solve_eta0_with_offset_profile(self, printed_system, printed_controller):
        profile = InitialProfile.ramp([0.0, 0.0], [1.0, 1.0])
        eta0, residual = solve_eta0(printed_system, printed_controller, profile)
        ctl = printed_controller.with_eta0(eta0)
        assert residual == pytest.approx(0.0, abs=1e-12)
        assert check_compatibility(printed_system, ctl, profile).ok


class TestValidate:
    def test_printed_system_is_valid(self, printed_system, printed_controller):
        assert validate(printed_system, printed_controller) == []

    def test_non_positive_speed(self, printed_controller):
        sys = HyperbolicSystem.from_speeds([1.0, -2.0], np.eye(2), np.eye(2))
        violations = validate(sys, printed_controller)
        assert len(violations) == 1
        assert violations[0].startswith("Lambda")

    def test_non_diagonal_lambda(self, printed_controller):
        sys = HyperbolicSystem(Lambda=[[1.0, 0.1], [0.0, 2.0]], H=np.eye(2), B=np.eye(2))
        assert any(v.startswith("Lambda") for v in validate(sys, printed_controller))

    def test_wrong_gain_shape(self, printed_system):
        ctl = ControllerParams(K=[[1.0, 0.0, 0.0]], alpha=1.0, eta0=[0.0, 0.0])
        violations = validate(printed_system, ctl)
        assert violations == ["K: must be 2x2, got (1, 3)"]

    def test_non_positive_alpha(self, printed_system, printed_controller):
        violations = validate(printed_system, printed_controller.with_alpha(0.0))
        assert len(violations) == 1 and violations[0].startswith("alpha")


class TestInitialProfile:
    def test_cosine_matches_formula_at_nodes(self, cosine_profile):
        z = np.linspace(0.0, 1.0, 101)
        values = cosine_profile.evaluate(z)
        np.testing.assert_allclose(values[:, 0], np.cos(4 * np.pi * z) - 1.0, atol=1e-14)
        np.testing.assert_allclose(values[:, 1], np.cos(2 * np.pi * z) - 1.0, atol=1e-14)

    def test_endpoints_vanish(self, cosine_profile):
        np.testing.assert_allclose(cosine_profile.at(0.0), [0.0, 0.0], atol=1e-14)
        np.testing.assert_allclose(cosine_profile.at(1.0), [0.0, 0.0], atol=1e-14)

    def test_samples_interpolate_linearly(self):
        profile = InitialProfile.from_samples([[0.0], [1.0], [0.0]])
        assert profile.at(0.25)[0] == pytest.approx(0.5)

    def test_needs_exactly_one_source(self):
        with pytest.raises(InvalidInputError):
            InitialProfile(n=1)

    def test_samples_dimension_checked(self):
        with pytest.raises(InvalidInputError):
            InitialProfile(n=2, samples=np.zeros((5, 1)))
