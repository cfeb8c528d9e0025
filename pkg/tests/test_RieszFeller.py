import unittest

import numpy as np
from scipy.special import gamma

from rfwave import (
        Field,
        Grid,
        RFParams,
        apply,
        apply_integral,
        apply_integral_small_alpha,
        apply_reflected,
        apply_spectral,
        coeffs,
        derivative_bound,
        estimate_bound,
        levy_coefficients,
        optimal_cutoff,
        symbol
    )
from rfwave.RieszFeller import background_action, clear_background_cache


class TestRFParams(unittest.TestCase):

    """Tests for rfwave.RFParams."""

    def test_attrs(self):
        """Test order and skewness attributes."""
        p = RFParams(1.5, 0.25)
        self.assertEqual(p.alpha, 1.5)
        self.assertEqual(p.theta, 0.25)

    def test_default_theta(self):
        """Test the symmetric default."""
        self.assertEqual(RFParams(1.5).theta, 0.0)

    def test_invalid_alpha(self):
        """Test orders outside (0, 2] raise."""
        self.assertRaises(ValueError, RFParams, 0.0)
        self.assertRaises(ValueError, RFParams, 2.5)

    def test_inadmissible_theta(self):
        """Test the error names the violated bound."""
        with self.assertRaises(ValueError) as context:
            RFParams(1.5, 0.7)
        self.assertIn('min(alpha, 2 - alpha) = 0.5', str(context.exception))

    def test_kernel_region(self):
        """Test alpha = 1 with large skewness is admissible."""
        p = RFParams(1.0, 0.99)
        self.assertEqual(p.theta, 0.99)

    def test_wave_regime(self):
        """Test waves need 1 < alpha <= 2."""
        self.assertRaises(ValueError, RFParams(1.0).check_wave_regime)
        p = RFParams(2.0)
        self.assertIs(p.check_wave_regime(), p)

    def test_mirrored(self):
        """Test the mirrored skewness."""
        self.assertEqual(RFParams(1.5, 0.25).mirrored(), RFParams(1.5, -0.25))


class TestSymbol(unittest.TestCase):

    def test_laplacian(self):
        """Test the classical symbol -xi^2."""
        self.assertAlmostEqual(symbol(RFParams(2.0), 3.0), -9.0, places=12)

    def test_skewed(self):
        """Test the skewed symbol at xi = 2."""
        value = symbol(RFParams(1.5, 0.5), 2.0)
        self.assertAlmostEqual(value.real, -2.0, places=12)
        self.assertAlmostEqual(value.imag, -2.0, places=12)

    def test_origin(self):
        """Test the symbol vanishes at the origin."""
        self.assertEqual(symbol(RFParams(1.2, 0.5), 0.0), 0.0)

    def test_conjugate_symmetry(self):
        """Test psi(-xi) is the conjugate of psi(xi)."""
        p = RFParams(1.7, -0.2)
        self.assertAlmostEqual(symbol(p, -1.3), np.conj(symbol(p, 1.3)),
                               places=14)


class TestCoeffs(unittest.TestCase):

    def test_symmetric(self):
        """Test c1 = c2 for theta = 0."""
        c = coeffs(RFParams(1.5))
        # Gamma(1 + alpha) sin(alpha pi / 2) / pi
        expected = gamma(2.5) * np.sin(0.75 * np.pi) / np.pi
        self.assertAlmostEqual(c.c1, expected, places=12)
        self.assertEqual(c.c1, c.c2)
        self.assertEqual(c.odd, 0.0)

    def test_extremal(self):
        """Test c1 vanishes at extremal skewness."""
        c = coeffs(RFParams(1.5, 0.5))
        self.assertEqual(c.c1, 0.0)
        self.assertGreater(c.c2, 0.0)

    def test_small_alpha(self):
        """Test the coefficients for alpha < 1."""
        c = coeffs(RFParams(0.5))
        self.assertAlmostEqual(c.c1, 0.199471, places=6)

    def test_alpha_one(self):
        """Test alpha = 1 has no integral representation here."""
        self.assertRaises(ValueError, coeffs, RFParams(1.0))
        self.assertGreater(levy_coefficients(RFParams(1.0)).c1, 0.0)

    def test_positive_sum(self):
        """Test c1 + c2 > 0 across the admissible region."""
        for alpha, theta in [(1.2, 0.8), (1.5, -0.5), (0.7, 0.7), (1.9, 0)]:
            c = levy_coefficients(RFParams(alpha, theta))
            self.assertGreater(c.c1 + c.c2, 0.0)


def plane_wave(grid, p):
    """cos(kx) periodic on n dx with k near 1, and D cos(kx)."""

    period = grid.n_points * grid.dx
    k = 2 * np.pi * round(period / (2 * np.pi)) / period
    x = grid.x
    exact = -k**p.alpha * np.cos(k * x - p.theta * np.pi / 2)
    return Field(grid, np.cos(k * x)), exact, k**p.alpha


def tanh_front(grid):
    return Field.from_function(grid, lambda x: 0.5 * (1 + np.tanh(x)),
                               0.0, 1.0)


class TestApplySpectral(unittest.TestCase):

    """Tests for the Fourier multiplier path."""

    def __init__(self, *args, **kwargs):
        super(TestApplySpectral, self).__init__(*args, **kwargs)
        self.grid = Grid(20.0, 4001)
        self.bump = Field(self.grid, np.exp(-self.grid.x**2))

    def test_plane_wave_symmetric(self):
        """Test cos(kx) is an eigenfunction with eigenvalue -k^alpha."""
        p = RFParams(1.5)
        wave, exact, scale = plane_wave(self.grid, p)
        result = apply_spectral(wave, p, periodic=True)
        self.assertLessEqual(np.abs(result.values - exact).max() / scale,
                             1e-8)

    def test_plane_wave_skewed(self):
        """Test the phase shift theta pi/2 of a skewed operator."""
        p = RFParams(1.5, 0.5)
        wave, exact, scale = plane_wave(self.grid, p)
        result = apply_spectral(wave, p, periodic=True)
        self.assertLessEqual(np.abs(result.values - exact).max() / scale,
                             1e-8)

    def test_gaussian_laplacian(self):
        """Test alpha = 2 gives the second derivative."""
        x = self.grid.x
        result = apply_spectral(self.bump, RFParams(2.0))
        exact = (4 * x**2 - 2) * np.exp(-x**2)
        self.assertLessEqual(np.abs(result.values - exact).max(), 1e-8)

    def test_nonzero_tails(self):
        """Test fields with tails need the decomposition first."""
        self.assertRaises(ValueError, apply_spectral, tanh_front(self.grid),
                          RFParams(1.5))

    def test_not_decayed(self):
        """Test a field that is large at the boundary raises."""
        field = Field(self.grid, np.cos(self.grid.x))
        self.assertRaises(ValueError, apply_spectral, field, RFParams(1.5))


class TestApplyIntegral(unittest.TestCase):

    """Tests for the singular-integral path."""

    def __init__(self, *args, **kwargs):
        super(TestApplyIntegral, self).__init__(*args, **kwargs)
        self.grid = Grid(20.0, 4001)
        self.bump = Field(self.grid, np.exp(-self.grid.x**2))
        self.front_grid = Grid(40.0, 8001)
        self.front = tanh_front(self.front_grid)

    def test_constant(self):
        """Test constants are annihilated."""
        field = Field(self.grid, np.ones(self.grid.n_points), 1.0, 1.0)
        result = apply_integral(field, RFParams(1.5, 0.3))
        self.assertLessEqual(np.abs(result.values).max(), 1e-10)

    def test_agrees_with_spectral(self):
        """Test both paths agree on a Gaussian."""
        for theta in (0.0, 0.3):
            p = RFParams(1.5, theta)
            integral = apply_integral(self.bump, p)
            spectral = apply_spectral(self.bump, p)
            self.assertLessEqual(
                np.abs(integral.values - spectral.values).max(), 1e-4)

    def test_front_odd(self):
        """Test a symmetric operator maps a tanh front to an odd field."""
        result = apply_integral(self.front, RFParams(1.5)).values
        self.assertLessEqual(np.abs(result + result[::-1]).max(), 1e-8)

    def test_order_range(self):
        """Test the compensated integral needs 1 < alpha < 2."""
        self.assertRaises(ValueError, apply_integral, self.bump,
                          RFParams(2.0))
        self.assertRaises(ValueError, apply_integral, self.bump,
                          RFParams(0.5))

    def test_unsettled(self):
        """Test unsettled fields are rejected."""
        field = Field(self.grid, self.bump.values, 0.0, 0.3)
        self.assertRaises(ValueError, apply_integral, field, RFParams(1.5))

    def test_reflected(self):
        """Test D_theta f = (D_-theta f(-.))(-x)."""
        p = RFParams(1.5, 0.3)
        field = Field(self.grid, np.exp(-(self.grid.x - 1)**2) * (
            1 + 0.5 * self.grid.x))
        direct = apply_integral(field, p).values
        mirrored = apply_reflected(field, p, apply_integral).values
        self.assertLessEqual(np.abs(direct - mirrored).max(), 1e-9)

    def test_small_alpha(self):
        """Test the plain jump integral for alpha < 1 against spectral."""
        p = RFParams(0.5)
        integral = apply_integral_small_alpha(self.bump, p).values
        spectral = apply_spectral(self.bump, p).values
        inner = np.abs(self.grid.x) <= 5
        # periodic images of the slowly decaying spectral result
        self.assertLessEqual(np.abs(integral - spectral)[inner].max(), 5e-3)
        self.assertRaises(ValueError, apply_integral_small_alpha, self.bump,
                          RFParams(1.5))


class TestApply(unittest.TestCase):

    """Tests for the combined operator on fields with any tails."""

    def __init__(self, *args, **kwargs):
        super(TestApply, self).__init__(*args, **kwargs)
        self.grid = Grid(40.0, 8001)
        self.front = tanh_front(self.grid)
        self.p = RFParams(1.5, 0.25)

    def test_zero_tails(self):
        """Test zero-tailed fields go through the spectral path only."""
        bump = Field(self.grid, np.exp(-self.grid.x**2))
        self.assertEqual(apply(bump, self.p), apply_spectral(bump, self.p))

    def test_front_decays(self):
        """Test D of a front decays like the jump tail c L^-alpha / alpha."""
        result = apply(self.front, self.p).values
        c = levy_coefficients(self.p)
        L = self.grid.half_width
        scale = L**-self.p.alpha / self.p.alpha
        self.assertAlmostEqual(result[0] / (c.c1 * scale), 1.0, delta=0.05)
        self.assertAlmostEqual(result[-1] / (-c.c2 * scale), 1.0,
                               delta=0.05)

    def test_front_agrees_with_integral(self):
        """Test the split path against the singular integral."""
        split = apply(self.front, self.p).values
        integral = apply_integral(self.front, self.p).values
        self.assertLessEqual(np.abs(split - integral).max(), 1e-4)

    def test_background_cache(self):
        """Test the ramp action is computed once per grid and order."""
        clear_background_cache()
        first = background_action(self.grid, self.p)
        self.assertIs(background_action(self.grid, self.p), first)
        self.assertFalse(first.flags.writeable)
        clear_background_cache()
        self.assertIsNot(background_action(self.grid, self.p), first)

    def test_background_on_wider_grid(self):
        """Test the ramp action beyond the grid continues the line action."""
        wide = self.grid.extended()
        values = background_action(self.grid, self.p, wide)
        inner = values[self.grid.inner_slice(wide)]
        np.testing.assert_allclose(inner, background_action(self.grid,
                                                            self.p),
                                   rtol=0.0, atol=1e-10)
        # the ramp is 0 on the left and 1 on the right of the wide grid
        self.assertGreater(values[0], 0.0)
        self.assertLess(values[-1], 0.0)
        self.assertLess(values[0], background_action(self.grid, self.p)[0])


class TestBound(unittest.TestCase):

    """Tests for the derivative bound on |D f|."""

    def __init__(self, *args, **kwargs):
        super(TestBound, self).__init__(*args, **kwargs)
        self.grid = Grid(20.0, 4001)
        self.p = RFParams(1.5)
        self.bump = Field(self.grid, np.exp(-self.grid.x**2))

    def test_dominates(self):
        """Test the bound dominates the measured sup."""
        for theta in (0.0, 0.4):
            p = RFParams(1.5, theta)
            measured = np.abs(apply_integral(self.bump, p).values).max()
            self.assertGreaterEqual(estimate_bound(self.bump, p), measured)

    def test_constant(self):
        """Test the bound of a constant field is zero."""
        field = Field(self.grid, np.full(self.grid.n_points, 0.3), 0.3, 0.3)
        self.assertAlmostEqual(estimate_bound(field, self.p), 0.0, places=10)

    def test_optimal_cutoff(self):
        """Test the optimal cutoff beats M = 1 and M = 4."""
        M = optimal_cutoff(self.bump)
        best = estimate_bound(self.bump, self.p, M)
        self.assertLessEqual(best, estimate_bound(self.bump, self.p, 1.0))
        self.assertLessEqual(best, estimate_bound(self.bump, self.p, 4.0))

    def test_laplacian_has_no_bound(self):
        """Test alpha = 2 is rejected."""
        self.assertRaises(ValueError, estimate_bound, self.bump,
                          RFParams(2.0))

    def test_derivative_bound(self):
        """Test the cutoff-one bound from derivative norms."""
        self.assertEqual(derivative_bound(RFParams(2.0), 0.5, 0.25), 0.25)
        # K = 2 c1, factor max(1/(2 - alpha), 4/(alpha - 1)) = 8
        expected = 2 * levy_coefficients(self.p).c1 * 8 * 0.75
        self.assertAlmostEqual(derivative_bound(self.p, 0.5, 0.25), expected,
                               places=12)


if __name__ == '__main__':
    unittest.main()
