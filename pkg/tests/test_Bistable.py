import unittest

import numpy as np
from numpy.polynomial import Polynomial

from rfwave import Bistable, ClampedBistable


class TestBistable(unittest.TestCase):

    """Tests for rfwave.Bistable."""

    def __init__(self, *args, **kwargs):
        super(TestBistable, self).__init__(*args, **kwargs)
        self.cubic = Bistable('cubic', 0.3)
        self.balanced = Bistable('cubic', 0.5)
        self.quintic = Bistable('quintic', 0.4)

    def test_cubic_values(self):
        """Test f(u) = u(1 - u)(u - a)."""
        u = np.linspace(-0.5, 1.5, 11)
        np.testing.assert_allclose(self.cubic(u), u * (1 - u) * (u - 0.3),
                                   atol=1e-15)
        np.testing.assert_array_equal(self.cubic.eval_f(u), self.cubic(u))

    def test_roots(self):
        """Test the root triple and the normalization."""
        self.assertEqual(self.cubic.roots, (0.0, 0.3, 1.0))
        self.assertTrue(self.cubic.is_normalized())

    def test_derivative(self):
        """Test f'(0) = -a and f'(1) = a - 1."""
        self.assertAlmostEqual(self.cubic.eval_df(0.0), -0.3, places=14)
        self.assertAlmostEqual(self.cubic.eval_df(1.0), -0.7, places=14)

    def test_middle_root_range(self):
        """Test a needs to lie strictly between the outer roots."""
        self.assertRaises(ValueError, Bistable, 'cubic', 1.2)
        self.assertRaises(ValueError, Bistable, 'cubic', 0.0)

    def test_unknown_kind(self):
        """Test unknown kinds raise."""
        self.assertRaises(ValueError, Bistable, 'sine')

    def test_polynomial_needs_roots(self):
        """Test a general polynomial needs coefficients and roots."""
        self.assertRaises(ValueError, Bistable, 'polynomial',
                          coefficients=[0, -0.3, 1.3, -1])

    def test_not_a_root(self):
        """Test declared roots are checked."""
        self.assertRaises(ValueError, Bistable, 'polynomial',
                          coefficients=self.cubic.coefficients,
                          roots=(0.0, 0.4, 1.0))

    def test_not_bistable(self):
        """Test unstable outer roots raise."""
        self.assertRaises(ValueError, Bistable, 'polynomial',
                          coefficients=-self.cubic.coefficients,
                          roots=(0.0, 0.3, 1.0))

    def test_quintic(self):
        """Test the quintic has stable roots 0 and 1."""
        self.assertAlmostEqual(self.quintic.eval_df(0.0), -0.8, places=14)
        self.assertAlmostEqual(self.quintic.eval_df(1.0), -1.2, places=14)

    def test_beta(self):
        """Test beta = min{-f'(0), -f'(1)}/2."""
        self.assertAlmostEqual(self.cubic.beta(), 0.15, places=14)

    def test_potential_integral(self):
        """Test the integral (1 - 2a)/12 of the cubic."""
        self.assertAlmostEqual(self.cubic.potential_integral(), 0.4 / 12,
                               places=14)

    def test_speed_sign(self):
        """Test the sign law and the balanced case."""
        self.assertEqual(self.cubic.predicted_speed_sign(), -1)
        self.assertEqual(Bistable('cubic', 0.7).predicted_speed_sign(), 1)
        self.assertEqual(self.balanced.predicted_speed_sign(), 0)

    def test_extrema(self):
        """Test the extrema +-sqrt(3)/36 of the balanced cubic."""
        f_min, f_max = self.balanced.extrema()
        self.assertAlmostEqual(f_min, -np.sqrt(3) / 36, places=12)
        self.assertAlmostEqual(f_max, np.sqrt(3) / 36, places=12)

    def test_extrema_by_scan(self):
        """Test the scanned extrema of the quintic against a dense grid."""
        f_min, f_max = self.quintic.extrema()
        u = np.linspace(0.0, 1.0, 200001)
        self.assertAlmostEqual(f_min, self.quintic(u).min(), places=9)
        self.assertAlmostEqual(f_max, self.quintic(u).max(), places=9)

    def test_norms(self):
        """Test the sup-norms of f and f'."""
        self.assertAlmostEqual(self.balanced.norm(), np.sqrt(3) / 36,
                               places=6)
        self.assertAlmostEqual(self.balanced.derivative_norm(), 6.5,
                               places=12)

    def test_normalized(self):
        """Test the affine map of the roots (-1, 0, 1) to [0, 1]."""
        f = Bistable('polynomial', coefficients=[0.0, 1.0, 0.0, -1.0],
                     roots=(-1.0, 0.0, 1.0))
        self.assertFalse(f.is_normalized())
        self.assertRaises(ValueError, f.beta)

        g = f.normalized()
        self.assertEqual(g.roots, (0.0, 0.5, 1.0))
        np.testing.assert_allclose(g.coefficients,
                                   8 * Bistable('cubic', 0.5).coefficients,
                                   atol=1e-14)

    def test_mirrored(self):
        """Test -f(1 - v) is the cubic with root 1 - a."""
        mirror = self.cubic.mirrored()
        self.assertAlmostEqual(mirror.a, 0.7, places=14)
        np.testing.assert_allclose(mirror.coefficients,
                                   Bistable('cubic', 0.7).coefficients,
                                   atol=1e-14)

    def test_mirrored_twice(self):
        """Test mirroring is an involution."""
        twice = self.quintic.mirrored().mirrored()
        u = np.linspace(-0.5, 1.5, 21)
        np.testing.assert_allclose(twice(u), self.quintic(u), atol=1e-12)

    def test_spec_round_trip(self):
        """Test the plain-data description rebuilds an equal object."""
        self.assertEqual(Bistable(**self.cubic.spec()), self.cubic)
        g = self.quintic.mirrored()
        self.assertEqual(Bistable(**g.spec()), g)

    def test_inequality(self):
        """Test different roots compare unequal."""
        self.assertNotEqual(self.cubic, self.balanced)


class TestClampedBistable(unittest.TestCase):

    """Tests for the bounded modification of f."""

    def __init__(self, *args, **kwargs):
        super(TestClampedBistable, self).__init__(*args, **kwargs)
        self.f = Bistable('cubic', 0.3)
        self.clamped = self.f.clamp(0.5)
        self.f_min, self.f_max = self.f.extrema()

    def test_type(self):
        """Test clamp returns the modification."""
        self.assertIsInstance(self.clamped, ClampedBistable)
        self.assertEqual(self.clamped.a, 0.3)

    def test_unchanged_inside(self):
        """Test f is kept on [u_-, u_+]."""
        u = np.linspace(0.0, 1.0, 101)
        np.testing.assert_array_equal(self.clamped(u), self.f(u))

    def test_constant_far_away(self):
        """Test the value is f_max left and f_min right beyond 2w."""
        np.testing.assert_allclose(self.clamped([-1.0, -5.0]), self.f_max)
        np.testing.assert_allclose(self.clamped([2.0, 7.0]), self.f_min)

    def test_bounded(self):
        """Test the modification is bounded by the extrema of f."""
        u = np.linspace(-3.0, 4.0, 7001)
        bound = max(abs(self.f_min), abs(self.f_max))
        self.assertLessEqual(np.abs(self.clamped(u)).max(), bound + 1e-15)

    def test_continuous(self):
        """Test continuity across the roots."""
        for u in (0.0, 1.0):
            self.assertAlmostEqual(self.clamped(u - 1e-9),
                                   self.clamped(u + 1e-9), places=8)

    def test_scalar(self):
        """Test scalars in, scalars out."""
        self.assertIsInstance(self.clamped(0.5), float)

    def test_invalid_width(self):
        """Test a non-positive blend width raises."""
        self.assertRaises(ValueError, ClampedBistable, self.f, 0.0)

    def test_polynomial_identity(self):
        """Test against an explicit polynomial."""
        poly = Polynomial.fromroots([0.0, 0.3, 1.0])
        u = np.linspace(0.0, 1.0, 11)
        np.testing.assert_allclose(self.clamped(u), -poly(u), atol=1e-15)


if __name__ == '__main__':
    unittest.main()
