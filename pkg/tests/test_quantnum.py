from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qnnperf.errors import DegenerateRange, DyadicUnderflow
from qnnperf.quantnum import (
    DyadicScale,
    ThresholdSet,
    UniformQuantizer,
    apply_thresholds,
    clip_range,
    compute_scale,
    dyadic_requantize,
    fit_dyadic,
    thresholds_from_uniform,
    uniform_quantize,
)


class TestUniform:
    def test_exact_division(self):
        assert uniform_quantize(2.5, UniformQuantizer(0.5)) == 5

    def test_saturation(self):
        assert uniform_quantize(1e6, UniformQuantizer(0.5)) == 127

    def test_zero_maps_to_minus_z(self):
        assert uniform_quantize(0, UniformQuantizer(0.25, zero_point=3)) == -3

    def test_unsigned_clip(self):
        q = UniformQuantizer(1, bit_width=4, signed=False)
        assert uniform_quantize(-5, q) == 0
        assert uniform_quantize(99, q) == 15

    def test_rounding_modes(self):
        for mode, expected in [("half_away", -3), ("half_up", -2),
                               ("floor", -3), ("ceil", -2)]:
            q = UniformQuantizer(1, rounding=mode)
            assert uniform_quantize(-2.5, q) == expected, mode

    @given(st.floats(-1e4, 1e4), st.sampled_from([2, 4, 8]),
           st.booleans())
    @settings(max_examples=200, deadline=None)
    def test_always_in_clip_range(self, r, bits, signed):
        q = UniformQuantizer(Fraction(3, 7), 0, bits, signed)
        lo, hi = clip_range(bits, signed)
        assert lo <= uniform_quantize(r, q) <= hi


class TestScale:
    def test_symmetric_range(self):
        assert compute_scale(-1, 1, 8) == pytest.approx(2 / 255)

    def test_identity_scale(self):
        assert compute_scale(0, 255, 8) == 1.0

    def test_degenerate(self):
        with pytest.raises(DegenerateRange):
            compute_scale(0, 0, 8)


class TestDyadic:
    def test_exactly_dyadic(self):
        d, err = fit_dyadic(0.75, 2)
        assert (d.M, d.n) == (3, 2) and err == 0

    def test_forced_shift(self):
        d, err = fit_dyadic(Fraction(1, 10), 4)
        assert (d.M, d.n) == (2, 4)
        assert err == pytest.approx(0.025)

    def test_large_shift(self):
        d, err = fit_dyadic(Fraction(123, 10000), 30)
        assert d.M == 13207024
        assert err < 2 ** -31
        # Nearest mantissa: the neighbors are strictly worse.
        s = Fraction(123, 10000)
        for m in (d.M - 1, d.M + 1):
            assert abs(s - Fraction(m, 2 ** 30)) > err

    def test_underflow(self):
        with pytest.raises(DyadicUnderflow):
            fit_dyadic(Fraction(1, 100), 4)

    def test_joint_search_not_worse(self):
        s = Fraction(13, 40)
        _, err_pinned = fit_dyadic(s, 8)
        _, err_joint = fit_dyadic(s, 8, joint=True)
        assert err_joint <= err_pinned

    def test_requantize_exact_shift(self):
        assert dyadic_requantize(8, DyadicScale(1, 2), 0, -128, 127) == 2

    def test_requantize_rounding(self):
        assert dyadic_requantize(7, DyadicScale(1, 2), 0, -128, 127) == 2

    def test_requantize_negative_arithmetic_shift(self):
        assert dyadic_requantize(-8, DyadicScale(3, 3), 0, -128, 127) == -3


class TestThresholds:
    def test_unit_scale_levels(self):
        q = UniformQuantizer(1, 0, 2, True, "half_up")
        t = thresholds_from_uniform(8, True, q)
        assert len(t.thresholds) == 3
        assert t.levels == (-2, -1, 0, 1)

    def test_scale_two_boundaries(self):
        q = UniformQuantizer(2, 0, 2, True, "half_up")
        t = thresholds_from_uniform(8, True, q)
        assert t.thresholds == (-3, -1, 1)

    def test_reproduces_uniform_exhaustively(self):
        q = UniformQuantizer(Fraction(5, 2), 1, 4, True, "half_up")
        t = thresholds_from_uniform(8, True, q)
        for v in range(-128, 128):
            assert apply_thresholds(v, t) == uniform_quantize(v, q), v

    def test_degenerate_width_rejected(self):
        with pytest.raises(ValueError):
            thresholds_from_uniform(8, True, UniformQuantizer(1, 0, 1))

    def test_apply_middle_bin(self):
        t = ThresholdSet((-1, 1), (-1, 0, 1))
        assert apply_thresholds(0, t) == 0

    def test_apply_half_open_boundary(self):
        t = ThresholdSet((-1, 1), (-1, 0, 1))
        assert apply_thresholds(-1, t) == 0
        assert apply_thresholds(1, t) == 1

    def test_apply_below_first(self):
        t = ThresholdSet((-1, 1), (-1, 0, 1))
        assert apply_thresholds(-7, t) == -1

    def test_monotone(self):
        q = UniformQuantizer(3, -1, 3, True, "half_up")
        t = thresholds_from_uniform(6, True, q)
        outs = [apply_thresholds(v, t) for v in range(-32, 32)]
        assert outs == sorted(outs)

    def test_strictly_increasing_enforced(self):
        with pytest.raises(ValueError):
            ThresholdSet((1, 1), (0, 1, 2))
