"""Transfer-function algebra: parameter packing, roots, stabilisation."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from srivc.ctlti import (
    DegenerateModelError,
    ImaginaryAxisPoleError,
    TransferFunction,
    format_tf,
    is_coprime,
    is_stable,
    parse_tf,
    poly_roots,
    reflect_unstable_poles,
    tf_frequency_response,
    tf_from_theta,
    theta_from_tf,
    warn_if_not_coprime,
)

# Hand-computed references for the canonical system 1/(0.04 p^2 + 0.2 p + 1):
# roots of the denominator via the quadratic formula, sqrt(0.12)/0.08 = 4.3301270;
# magnitude at w=0.5 is ((1 - 0.04*0.25)^2 + (0.2*0.5)^2)^(-1/2) = 0.9901^(-1/2).
CANONICAL_POLES = (-2.5 + 4.330127018922193j, -2.5 - 4.330127018922193j)
CANONICAL_MAG_05 = 1.00498706


def coefficients(min_size, max_size):
    return st.lists(
        st.floats(min_value=-10.0, max_value=10.0),
        min_size=min_size,
        max_size=max_size,
    )


def nonzero_floats():
    return st.floats(min_value=0.1, max_value=10.0).flatmap(
        lambda mag: st.sampled_from([mag, -mag])
    )


class TestParameterPacking:
    def test_canonical_round_trip(self, theta_star):
        tf = tf_from_theta(theta_star, 2, 0)
        np.testing.assert_array_equal(tf.den, [0.04, 0.2, 1.0])
        np.testing.assert_array_equal(tf.num, [1.0])
        np.testing.assert_array_equal(theta_from_tf(tf), theta_star)

    def test_static_gain(self):
        tf = tf_from_theta([3.5], 0, 0)
        assert tf.order_den == 0 and tf.order_num == 0
        np.testing.assert_array_equal(theta_from_tf(tf), [3.5])

    def test_declared_order_keeps_leading_zeros(self):
        # b0 = 0 still declares numerator order 1
        tf = tf_from_theta([1.0, 0.0, 2.0], 1, 1)
        assert tf.order_num == 1
        np.testing.assert_array_equal(tf.num, [0.0, 2.0])

    @given(
        n=st.integers(0, 4),
        data=st.data(),
    )
    def test_round_trip_property(self, n, data):
        m = data.draw(st.integers(0, n))
        a = [data.draw(nonzero_floats()) for _ in range(min(n, 1))]
        a += data.draw(coefficients(max(n - 1, 0), max(n - 1, 0)))
        b = data.draw(coefficients(m + 1, m + 1))
        theta = np.array(a + b)
        back = theta_from_tf(tf_from_theta(theta, n, m))
        np.testing.assert_array_equal(back, theta)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ValueError, match="length"):
            tf_from_theta([1.0, 2.0], 2, 0)

    def test_improper_rejected(self):
        with pytest.raises(ValueError):
            tf_from_theta([1.0, 1.0, 1.0, 1.0], 1, 2)
        with pytest.raises(ValueError, match="improper"):
            TransferFunction([1.0, 0.0, 0.0], [1.0, 1.0])

    def test_zero_leading_coefficient_rejected(self):
        with pytest.raises(ValueError, match="nonzero"):
            tf_from_theta([0.0, 0.2, 1.0], 2, 0)


class TestNormalization:
    def test_constant_term_rescaled(self):
        tf = TransferFunction([2.0], [2.0, 4.0])
        np.testing.assert_array_equal(tf.den, [0.5, 1.0])
        np.testing.assert_array_equal(tf.num, [0.5])

    def test_already_normalized_is_bit_exact(self):
        num = np.array([0.3, 1.7])
        den = np.array([0.04, 0.2, 1.0])
        tf = TransferFunction(num, den)
        assert tf.den[-1] == 1.0
        np.testing.assert_array_equal(tf.num, num)
        np.testing.assert_array_equal(tf.den, den)

    def test_degenerate_constant_raises(self):
        with pytest.raises(DegenerateModelError):
            TransferFunction([1.0], [1.0, 0.0])
        with pytest.raises(DegenerateModelError):
            TransferFunction([1.0], [1.0, 1e-15])

    def test_equality_is_semantic(self):
        a = TransferFunction([2.0], [2.0, 4.0])
        b = TransferFunction([0.5], [0.5, 1.0])
        assert a == b
        assert hash(a) == hash(b)
        assert a != TransferFunction([0.5], [0.6, 1.0])


class TestRoots:
    def test_canonical_poles(self, canonical_system):
        roots = np.sort_complex(poly_roots(canonical_system.den))
        expect = np.sort_complex(np.array(CANONICAL_POLES))
        assert np.max(np.abs(roots - expect)) < 1e-4

    def test_roots_satisfy_polynomial(self, canonical_system):
        for r in poly_roots(canonical_system.den):
            assert abs(np.polyval(canonical_system.den, r)) < 1e-10

    @given(coeffs=coefficients(2, 7), lead=nonzero_floats())
    def test_reconstruction_property(self, coeffs, lead):
        poly = np.array([lead] + coeffs)
        roots = poly_roots(poly)
        rebuilt = lead * np.poly(roots)
        scale = np.max(np.abs(poly))
        assert np.max(np.abs(rebuilt.real - poly)) < 1e-8 * max(scale, 1.0)

    def test_degree_zero_rejected(self):
        with pytest.raises(ValueError):
            poly_roots([1.0])

    def test_zero_polynomial_rejected(self):
        with pytest.raises(ValueError):
            poly_roots([0.0, 0.0])


class TestStability:
    def test_canonical_is_stable(self, canonical_system):
        assert is_stable(canonical_system)

    def test_right_half_plane_pole(self):
        # 1/(p - 1): constant term normalises to 1 with a sign flip
        tf = TransferFunction([1.0], [1.0, -1.0])
        assert not is_stable(tf)

    def test_static_gain_is_stable(self):
        assert is_stable(TransferFunction([2.0], [1.0]))


class TestReflection:
    def test_first_order_mirror(self):
        # 1/(p - 2) -> pole +2 mirrors to -2 -> denominator (p + 2)/2
        tf = TransferFunction([1.0], [1.0, -2.0])
        fixed = reflect_unstable_poles(tf)
        np.testing.assert_allclose(fixed.den, [0.5, 1.0], atol=1e-12)
        np.testing.assert_allclose(fixed.num, tf.num, atol=0)
        assert is_stable(fixed)

    def test_complex_pair_keeps_magnitude(self):
        # poles 1 +/- 3j -> -1 +/- 3j; |pole| = sqrt(10) both sides
        den = np.array([1.0, -2.0, 10.0]) / 10.0
        fixed = reflect_unstable_poles(TransferFunction([1.0], den))
        roots = np.sort_complex(poly_roots(fixed.den))
        np.testing.assert_allclose(roots, [-1.0 - 3.0j, -1.0 + 3.0j], atol=1e-9)
        np.testing.assert_allclose(
            np.abs(roots), np.sqrt(10.0) * np.ones(2), rtol=1e-9
        )

    def test_stable_input_returned_unchanged(self, canonical_system):
        assert reflect_unstable_poles(canonical_system) is canonical_system

    def test_numerator_untouched(self):
        tf = TransferFunction([3.0, -1.0], [1.0, -2.0])
        fixed = reflect_unstable_poles(tf)
        np.testing.assert_array_equal(fixed.num, tf.num)

    def test_constant_term_still_one(self):
        fixed = reflect_unstable_poles(TransferFunction([1.0], [0.1, -0.2, 1.0]))
        assert fixed.den[-1] == 1.0

    @given(coeffs=coefficients(1, 5), lead=nonzero_floats())
    def test_idempotent_property(self, coeffs, lead):
        den = np.array([lead] + coeffs)
        if abs(den[-1]) < 1e-6:
            den[-1] = 1.0
        tf = TransferFunction([1.0], den)
        try:
            once = reflect_unstable_poles(tf)
        except ImaginaryAxisPoleError:
            return
        assert is_stable(once)
        twice = reflect_unstable_poles(once)
        np.testing.assert_allclose(twice.den, once.den, rtol=1e-9, atol=1e-12)

    def test_imaginary_axis_pole_raises(self):
        with pytest.raises(ImaginaryAxisPoleError):
            reflect_unstable_poles(TransferFunction([1.0], [0.25, 0.0, 1.0]))


class TestFrequencyResponse:
    def test_dc_and_resonance(self, canonical_system):
        assert tf_frequency_response(canonical_system, 0.0) == 1.0 + 0.0j
        # A(j5) = 0.04*(j5)^2 + 0.2*(j5) + 1 = j, so G(j5) = -j exactly
        assert abs(tf_frequency_response(canonical_system, 5.0) - (-1.0j)) < 1e-12

    def test_half_radian_magnitude(self, canonical_system):
        assert abs(
            abs(tf_frequency_response(canonical_system, 0.5)) - CANONICAL_MAG_05
        ) < 1e-7

    @given(
        omega=st.floats(min_value=0.0, max_value=100.0),
        b=coefficients(1, 3),
    )
    def test_conjugate_symmetry(self, omega, b):
        tf = TransferFunction(b, [0.04, 0.2, 1.0])
        left = tf_frequency_response(tf, -omega)
        right = np.conj(tf_frequency_response(tf, omega))
        assert abs(left - right) <= 1e-12 * max(1.0, abs(right))

    def test_evaluation_on_pole_raises(self):
        # 1/(0.25 p^2 + 1) has poles at +/- 2j
        tf = TransferFunction([1.0], [0.25, 0.0, 1.0])
        with pytest.raises(ZeroDivisionError):
            tf_frequency_response(tf, 2.0)


class TestTextFormat:
    def test_canonical_form(self, canonical_system):
        assert format_tf(canonical_system) == "num:1.0;den:0.04,0.2,1.0"

    def test_parse_round_trip_exact(self, canonical_system):
        back = parse_tf(format_tf(canonical_system))
        np.testing.assert_array_equal(back.num, canonical_system.num)
        np.testing.assert_array_equal(back.den, canonical_system.den)

    @given(
        b=coefficients(1, 3),
        a=coefficients(2, 2),
        lead=nonzero_floats(),
    )
    def test_round_trip_property(self, b, a, lead):
        den = np.array([lead] + a)
        if abs(den[-1]) < 1e-6:
            den[-1] = 1.0
        tf = TransferFunction(b, den)
        back = parse_tf(format_tf(tf))
        np.testing.assert_array_equal(back.num, tf.num)
        np.testing.assert_array_equal(back.den, tf.den)

    def test_whitespace_tolerated(self):
        tf = parse_tf(" num: 1.0 ; den: 0.5, 1.0 ")
        np.testing.assert_array_equal(tf.den, [0.5, 1.0])

    @pytest.mark.parametrize(
        "text",
        [
            "num:1.0",
            "den:1.0;den:1.0",
            "num:a;den:1.0,1.0",
            "num:1.0;den:1.0;x:2",
            "",
        ],
    )
    def test_malformed_rejected(self, text):
        with pytest.raises(ValueError):
            parse_tf(text)


class TestCoprimality:
    def test_coprime_canonical(self, canonical_system):
        assert is_coprime(canonical_system)

    def test_shared_root_detected(self):
        # (p + 1) / ((p + 1)(p + 2)) shares the root at -1
        den = np.polymul([1.0, 1.0], [0.5, 1.0])
        tf = TransferFunction([1.0, 1.0], den)
        assert not is_coprime(tf)
        with pytest.warns(UserWarning, match="share a root"):
            warn_if_not_coprime(tf)

    def test_zero_numerator_counts_as_coprime(self):
        assert is_coprime(TransferFunction([0.0, 0.0], [1.0, 1.0, 1.0]))
