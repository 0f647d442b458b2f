import math

import numpy as np
import pytest

from dsslab.errors import InvalidInputError
from dsslab.utils.signals import (
    ConstantSignal,
    DecayingSignal,
    RandomSignal,
    StepSignal,
    ZeroSignal,
    make_signal,
)


class TestDeterministicSignals:
    def test_zero(self):
        np.testing.assert_array_equal(ZeroSignal(3).sample(2.0), np.zeros(3))

    def test_constant_with_norm(self):
        d = ConstantSignal.with_norm(2, 0.5).sample(0.0)
        assert np.linalg.norm(d) == pytest.approx(0.5)
        assert d[0] == pytest.approx(d[1])

    def test_step_is_right_continuous(self):
        s = StepSignal(2, 0.5, t_on=1.0)
        np.testing.assert_array_equal(s.value(0.5), np.zeros(2))
        assert np.linalg.norm(s.value(1.0)) == pytest.approx(0.5)
        np.testing.assert_array_equal(s.value_left(1.0), np.zeros(2))
        assert np.linalg.norm(s.value_left(1.1)) == pytest.approx(0.5)

    def test_decaying(self):
        s = DecayingSignal(1, 2.0, rate=1.0)
        assert s.value(0.0)[0] == pytest.approx(2.0)
        assert s.value(3.0)[0] == pytest.approx(2.0 * math.exp(-3.0))

    def test_running_sup(self):
        s = DecayingSignal(1, 2.0, rate=1.0)
        for t in (1.0, 0.0, 2.0):
            s.sample(t)
        assert s.running_sup == pytest.approx(2.0)

    def test_negative_time_rejected(self):
        with pytest.raises(InvalidInputError):
            ZeroSignal(1).sample(-0.1)


class TestRandomSignal:
    def test_norm_equals_amplitude(self):
        s = RandomSignal(2, 1.0, seed=3)
        for t in np.linspace(0.0, 2.0, 41):
            assert np.linalg.norm(s.value(t)) == pytest.approx(1.0)

    def test_piecewise_constant_on_dwell(self):
        s = RandomSignal(2, 1.0, seed=3, dwell=0.05)
        np.testing.assert_array_equal(s.value(0.01), s.value(0.04))
        np.testing.assert_array_equal(s.value_left(0.05), s.value(0.0))

    def test_pure_function_of_seed_and_time(self):
        a = RandomSignal(3, 0.5, seed=11)
        b = RandomSignal(3, 0.5, seed=11)
        b.sample(7.0)
        np.testing.assert_array_equal(a.value(1.23), b.value(1.23))

    def test_seeds_differ(self):
        a = RandomSignal(3, 0.5, seed=1).value(0.0)
        b = RandomSignal(3, 0.5, seed=2).value(0.0)
        assert not np.array_equal(a, b)


class TestMakeSignal:
    @pytest.mark.parametrize("kind", ["zero", "constant", "step", "decaying", "random"])
    def test_kinds(self, kind):
        s = make_signal(kind, 2, amplitude=0.5)
        assert s.kind == kind
        assert s.value(5.0).shape == (2,)

    def test_unknown_kind(self):
        with pytest.raises(InvalidInputError):
            make_signal("sawtooth", 1)
