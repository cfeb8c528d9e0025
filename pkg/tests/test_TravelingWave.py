import functools
import json
import os
import tempfile
import unittest

import numpy as np

from rfwave import (
        Bistable,
        Field,
        Grid,
        RFParams,
        SolverConfig,
        TailFit,
        Trajectory,
        WaveExtraction,
        align,
        evolve,
        extract_wave,
        fit_tail,
        front_width,
        initial_zeta,
        levy_coefficients,
        predicted_tail_amplitude,
        speed_bound,
        speed_formula,
        speed_from_formula,
        stability_experiment,
        track_level,
        uniqueness_check
    )

# u_t = u_xx + u(1 - u)(u - a) has U = 1/(1 + exp(-xi/sqrt(2))) and
# c = -sqrt(2)(1/2 - a)
exact_speed = -np.sqrt(2.0) * 0.2


def exact_profile(x, level=0.5):
    """Closed-form profile shifted so that U(0) = level."""
    shift = np.sqrt(2.0) * np.log(level / (1.0 - level))
    return 1.0 / (1.0 + np.exp(-(x + shift) / np.sqrt(2.0)))


@functools.lru_cache(maxsize=None)
def wave(a, T=40.0):
    grid = Grid(40.0, 4001)
    b, p = Bistable('cubic', a), RFParams(2.0)
    traj = evolve(initial_zeta(grid), b, p, SolverConfig(dt=0.01, T=T))
    return extract_wave(traj, b, p)


@functools.lru_cache(maxsize=None)
def fractional_wave(a, theta=0.0):
    grid = Grid(40.0, 2001)
    b, p = Bistable('cubic', a), RFParams(1.5, theta)
    traj = evolve(initial_zeta(grid), b, p, SolverConfig(dt=0.01, T=30.0))
    return extract_wave(traj, b, p)


def moving_front(speed, times, grid):
    snapshots = [Field.from_function(
        grid, lambda x: 0.5 * (1 + np.tanh(x - speed * t)), 0.0, 1.0)
        for t in times]
    return Trajectory(times, snapshots, {})


class TestInitialZeta(unittest.TestCase):

    def test_center(self):
        """Test zeta(0) = 1/2 and the tails 0 and 1."""
        grid = Grid(20.0, 4001)
        zeta = initial_zeta(grid)
        self.assertAlmostEqual(zeta.values[2000], 0.5, places=12)
        self.assertEqual((zeta.tail_left, zeta.tail_right), (0.0, 1.0))

    def test_slope(self):
        """Test the largest slope 30/64."""
        d1, _, _ = initial_zeta(Grid(20.0, 4001)).derivatives()
        self.assertAlmostEqual(d1.max(), 0.46875, places=6)

    def test_small_grid(self):
        """Test L < 8 raises."""
        self.assertRaises(ValueError, initial_zeta, Grid(6.0, 601))


class TestTrackLevel(unittest.TestCase):

    def __init__(self, *args, **kwargs):
        super(TestTrackLevel, self).__init__(*args, **kwargs)
        self.grid = Grid(20.0, 4001)

    def test_translate(self):
        """Test the crossing of an exact translate."""
        times = np.array([0.0, 1.0, 2.0, 3.0])
        traj = moving_front(0.7, times, self.grid)
        t, z = track_level(traj, 0.5)
        np.testing.assert_array_equal(t, times)
        np.testing.assert_allclose(z, 0.7 * times, atol=1e-6)

    def test_other_level(self):
        """Test the level 0.3 sits at artanh(-0.4)."""
        traj = moving_front(0.0, np.array([0.0]), self.grid)
        _, z = track_level(traj, 0.3)
        self.assertAlmostEqual(z[0], np.arctanh(-0.4), places=6)

    def test_not_bracketed(self):
        """Test a level outside the snapshot range raises."""
        traj = moving_front(0.0, np.array([0.0]), self.grid)
        self.assertRaises(ValueError, track_level, traj, 1.5)

    def test_not_monotone(self):
        """Test a bump crossing the level twice raises."""
        bump = Field(self.grid, np.exp(-self.grid.x**2))
        traj = Trajectory([0.0], [bump], {})
        self.assertRaises(ValueError, track_level, traj, 0.5)


class TestWaveExtraction(unittest.TestCase):

    """Tests for the wave read off the alpha = 2 cubic."""

    def __init__(self, *args, **kwargs):
        super(TestWaveExtraction, self).__init__(*args, **kwargs)
        self.w = wave(0.3)

    def test_speed(self):
        """Test c within 1% of -sqrt(2)(1/2 - a)."""
        self.assertAlmostEqual(self.w.speed / exact_speed, 1.0, delta=0.01)
        self.assertGreaterEqual(self.w.speed_fit_r2, 0.999)

    def test_profile(self):
        """Test the profile against the closed form."""
        U = self.w.profile
        inner = np.abs(U.x) <= 20.0
        exact = exact_profile(U.x[inner], 0.3)
        error = np.abs(U.values[inner] - exact).max()
        self.assertLessEqual(error, 1e-2)
        self.assertAlmostEqual(float(U.sample(0.0)), 0.3, places=8)

    def test_translation(self):
        """Test shifting the seed by 25 dx shifts the wave and keeps c."""
        grid = self.w.profile.grid
        s = 25 * grid.dx
        seed = initial_zeta(grid).shift_interpolate(s)
        traj = evolve(seed, self.w.b, self.w.p, SolverConfig(dt=0.01, T=40.0))
        shifted = extract_wave(traj, self.w.b, self.w.p)

        self.assertAlmostEqual(shifted.speed, self.w.speed, delta=1e-6)
        np.testing.assert_allclose(shifted.z_track[1], self.w.z_track[1] - s,
                                   rtol=0.0, atol=1e-6)
        shift, distance = align(shifted.profile, self.w.profile)
        self.assertLessEqual(distance, 1e-6)
        self.assertAlmostEqual(shift, 0.0, delta=1e-6)

    def test_monotone(self):
        """Test the profile has no negative differences."""
        self.assertGreaterEqual(self.w.check_monotone(), -1e-8)

    def test_residual(self):
        """Test the wave equation residual is small."""
        self.assertLessEqual(self.w.residual_sup, 1e-3)

    def test_width_bound(self):
        """Test m_1 is close to the width of the exact profile."""
        exact = 2 * np.sqrt(2.0) * np.log(0.95 / 0.05)
        self.assertAlmostEqual(self.w.width_bound / exact, 1.0, delta=0.05)

    def test_tail_fit(self):
        """Test the exponential tail rate 1/sqrt(2)."""
        fit = self.w.tail_fit['right']
        self.assertIsInstance(fit, TailFit)
        self.assertEqual(fit.model, 'exponential')
        self.assertAlmostEqual(fit.exponent, -1.0 / np.sqrt(2.0),
                               delta=0.02)
        self.assertGreater(fit.r2, 0.999)
        self.assertIsNone(fit.predicted_amplitude)

    def test_speed_from_formula(self):
        """Test the energy identity on the extracted profile."""
        self.assertAlmostEqual(self.w.speed_from_formula() / exact_speed,
                               1.0, delta=0.01)

    def test_export(self):
        """Test 'profile.csv' and 'wave.json'."""
        with tempfile.TemporaryDirectory() as directory:
            path = self.w.export(directory)
            with open(path, 'r') as f:
                record = json.load(f)
            profile = Field.from_csv(os.path.join(directory, 'profile.csv'),
                                     0.0, 1.0)

        self.assertEqual(record['c'], self.w.speed)
        self.assertEqual(record['alpha'], 2.0)
        self.assertIn('right', record['tail_fit'])
        np.testing.assert_array_equal(profile.values, self.w.profile.values)

    def test_balanced(self):
        """Test a = 1/2 gives a standing front."""
        self.assertLessEqual(abs(wave(0.5, 20.0).speed), 1e-3)

    def test_not_extracted(self):
        """Test the accessors raise before extraction."""
        w = WaveExtraction(Bistable('cubic', 0.3), RFParams(2.0))
        with self.assertRaises(TypeError):
            w.speed
        with self.assertRaises(TypeError):
            w.profile

    def test_not_fitted(self):
        """Test the tail fit raises before fitting."""
        w = WaveExtraction(Bistable('cubic', 0.3), RFParams(2.0))
        w._profile = self.w.profile
        with self.assertRaises(TypeError):
            w.tail_fit


class TestFractionalWave(unittest.TestCase):

    """Tests for waves of the alpha = 1.5 cubic."""

    def test_balanced(self):
        """Test a = 1/2 gives a standing front."""
        self.assertLessEqual(abs(fractional_wave(0.5).speed), 1e-3)

    def test_tail_exponent(self):
        """Test both tails decay like |xi|^-alpha."""
        w = fractional_wave(0.3)
        for side in ('left', 'right'):
            fit = w.tail_fit[side]
            self.assertEqual(fit.model, 'power')
            self.assertAlmostEqual(fit.exponent, -1.5, delta=0.2)

    def test_speed(self):
        """Test c < 0 for a < 1/2 and |c| below the a priori bound."""
        w = fractional_wave(0.3)
        self.assertLess(w.speed, 0.0)
        self.assertLessEqual(abs(w.speed), speed_bound(w.b, w.p))

    def test_skew_reversal(self):
        """Test c(a, theta) = -c(1 - a, -theta)."""
        forward = fractional_wave(0.3, 0.3).speed
        backward = fractional_wave(0.7, -0.3).speed
        self.assertAlmostEqual(forward / -backward, 1.0, delta=0.02)


class TestSpeedFormula(unittest.TestCase):

    def __init__(self, *args, **kwargs):
        super(TestSpeedFormula, self).__init__(*args, **kwargs)
        self.profile = Field.from_function(Grid(40.0, 8001), exact_profile,
                                           0.0, 1.0)

    def test_exact_profile(self):
        """Test -int f / int (U')^2 on the closed-form profile."""
        c = speed_formula(self.profile, Bistable('cubic', 0.3))
        self.assertAlmostEqual(c, exact_speed, places=6)

    def test_balanced(self):
        """Test the balanced cubic has zero speed."""
        self.assertEqual(speed_formula(self.profile,
                                       Bistable('cubic', 0.5)), 0.0)

    def test_skewed(self):
        """Test the identity is refused for theta != 0."""
        b = Bistable('cubic', 0.3)
        w = WaveExtraction(b, RFParams(1.5, 0.2))
        self.assertRaises(ValueError, speed_from_formula, w, b)

    def test_front_width(self):
        """Test 1 / max U' = 4 sqrt(2)."""
        self.assertAlmostEqual(front_width(self.profile), 4 * np.sqrt(2.0),
                               places=6)


class TestTails(unittest.TestCase):

    def test_predicted_amplitude(self):
        """Test c_side / (alpha |f'(u_side)|)."""
        b, p = Bistable('cubic', 0.3), RFParams(1.5)
        c = levy_coefficients(p)
        self.assertAlmostEqual(predicted_tail_amplitude(b, p, 'right'),
                               c.c2 / (1.5 * 0.7), places=12)
        self.assertAlmostEqual(predicted_tail_amplitude(b, p, 'left'),
                               c.c1 / (1.5 * 0.3), places=12)

    def test_no_prediction(self):
        """Test no prediction for alpha = 2 or theta != 0."""
        b = Bistable('cubic', 0.3)
        self.assertIsNone(predicted_tail_amplitude(b, RFParams(2.0),
                                                   'right'))
        self.assertIsNone(predicted_tail_amplitude(b, RFParams(1.5, 0.2),
                                                   'left'))

    def test_invalid_side(self):
        """Test unknown sides raise."""
        self.assertRaises(ValueError, fit_tail, wave(0.3), RFParams(2.0),
                          'middle')


class TestSpeedBound(unittest.TestCase):

    def test_positive(self):
        """Test the bound is a positive number."""
        bound = speed_bound(Bistable('cubic', 0.3), RFParams(1.5))
        self.assertTrue(np.isfinite(bound))
        self.assertGreater(bound, 0.0)

    def test_symmetric_in_a(self):
        """Test a and 1 - a give the same bound."""
        p = RFParams(1.5)
        ratio = (speed_bound(Bistable('cubic', 0.3), p)
                 / speed_bound(Bistable('cubic', 0.7), p))
        self.assertAlmostEqual(ratio, 1.0, places=6)

    def test_alpha_two(self):
        """Test alpha = 2 is refused."""
        self.assertRaises(ValueError, speed_bound, Bistable('cubic', 0.3),
                          RFParams(2.0))


class TestAlign(unittest.TestCase):

    def test_recovers_shift(self):
        """Test the shift of a translated profile."""
        U = Field.from_function(Grid(40.0, 4001), exact_profile, 0.0, 1.0)
        shift, distance = align(U.shift_interpolate(-0.3), U)
        self.assertAlmostEqual(shift, 0.3, places=6)
        self.assertLessEqual(distance, 1e-7)


class TestStability(unittest.TestCase):

    def __init__(self, *args, **kwargs):
        super(TestStability, self).__init__(*args, **kwargs)
        self.w = wave(0.3)
        self.b, self.p = self.w.b, self.w.p
        self.cfg = SolverConfig(dt=0.01)

    def test_already_converged(self):
        """Test a zero perturbation needs no fit."""
        zero = Field(self.w.profile.grid, np.zeros(4001))
        fit = stability_experiment(self.w, zero, self.b, self.p, 1.0,
                                   self.cfg)
        self.assertEqual(fit.status, 'already converged')
        self.assertIsNone(fit.kappa)

    def test_converging(self):
        """Test a bump decays exponentially."""
        x = self.w.profile.x
        bump = Field(self.w.profile.grid,
                     0.05 * np.exp(-(x - 3.0)**2))
        fit = stability_experiment(self.w, bump, self.b, self.p, 20.0,
                                   self.cfg)
        self.assertEqual(fit.status, 'converging')
        self.assertGreater(fit.kappa, 0.0)
        self.assertLess(fit.distances[-1], fit.distances[0])
        json.dumps(fit.as_dict())

    def test_inadmissible(self):
        """Test perturbed data need tails on both sides of a."""
        down = Field(self.w.profile.grid, -np.ones(4001), -1.0, -1.0)
        self.assertRaises(ValueError, stability_experiment, self.w, down,
                          self.b, self.p, 1.0, self.cfg)


class TestUniqueness(unittest.TestCase):

    def test_same_wave(self):
        """Test two seeds give one wave for alpha = 1.5, theta = 0.25."""
        grid = Grid(80.0, 4001)
        steep = Field.from_function(grid,
                                    lambda x: 0.5 * (1 + np.tanh(2.0 * x)),
                                    0.0, 1.0)
        report = uniqueness_check(RFParams(1.5, 0.25),
                                  Bistable('cubic', 0.3),
                                  [initial_zeta(grid), steep],
                                  SolverConfig(dt=0.02, T=80.0))
        self.assertLessEqual(report.speed_difference, 1e-3)
        self.assertLessEqual(report.profile_distance, 1e-3)
        json.dumps(report.as_dict())

    def test_seed_count(self):
        """Test exactly two seeds are needed."""
        zeta = initial_zeta(Grid(20.0, 2001))
        self.assertRaises(ValueError, uniqueness_check, RFParams(2.0),
                          Bistable('cubic', 0.3), [zeta])

    def test_inadmissible_seed(self):
        """Test a seed with both tails below a is rejected."""
        grid = Grid(20.0, 2001)
        flat = Field(grid, np.zeros(2001))
        self.assertRaises(ValueError, uniqueness_check, RFParams(2.0),
                          Bistable('cubic', 0.3), [initial_zeta(grid), flat])


if __name__ == '__main__':
    unittest.main()
