import json
import logging
import os

import numpy as np
from scipy.integrate import trapezoid
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq, minimize_scalar
from scipy.stats import linregress

from rfwave.base import Base, NumericalError, smoothstep
from rfwave.CauchySolver import SolverConfig, evolve
from rfwave.Field import Field
from rfwave.RieszFeller import apply, derivative_bound, levy_coefficients

logger = logging.getLogger(__name__)

discard_fraction = 0.2
profile_fraction = 0.5
min_speed_r2 = 0.999
monotone_tolerance = 1e-8
tail_floor = 1e-10


def initial_zeta(grid):
    """Quintic smoothstep zeta(s) = 6t^5 - 15t^4 + 10t^3, t = s/4.

    The ramp s in [0, 4] is centered on the grid, so zeta(x = 0) = 1/2.

    Parameters
    ----------
    grid : rfwave.Grid
        Grid with half width L >= 8.

    Returns
    -------
    zeta : rfwave.Field
        Field with tails 0 and 1.
    """

    if grid.half_width < 8:
        error_str = ("The grid is too small for the initial ramp: need "
                     "L >= 8, got L = {}.")
        raise ValueError(error_str.format(grid.half_width))

    return Field(grid, smoothstep((grid.x + 2.0) / 4.0), 0.0, 1.0)


def _crossing(x, values, level):
    """Position where a sampled profile crosses ``level``."""

    d = values - level
    if d.min() > 0 or d.max() < 0:
        error_str = ("The level {} is not bracketed by the snapshot range "
                     "[{:.6g}, {:.6g}].")
        raise ValueError(error_str.format(level, values.min(), values.max()))

    signs = np.sign(d)
    signs = signs[signs != 0]
    if np.count_nonzero(np.diff(signs)) != 1:
        error_str = ("The snapshot crosses the level {} more than once; it "
                     "is not monotone there.")
        raise ValueError(error_str.format(level))

    i = int(np.nonzero((d[:-1] <= 0) & (d[1:] >= 0))[0][0])
    if d[i] == 0:
        return x[i]
    if d[i + 1] == 0:
        return x[i + 1]

    window = slice(max(0, i - 3), min(len(x), i + 5))
    if np.any(np.diff(values[window]) <= 0):
        error_str = ("The snapshot is not strictly increasing through the "
                     "level {} near x = {:.6g}.")
        raise ValueError(error_str.format(level, x[i]))

    inverse = PchipInterpolator(x[window], d[window])
    return brentq(inverse, x[i], x[i + 1], xtol=1e-14, rtol=1e-15)


def track_level(traj, level):
    """Crossing z(level, t) of every snapshot.

    Parameters
    ----------
    traj : rfwave.Trajectory
        Trajectory with snapshots increasing through ``level``.

    level : float
        Level to track.

    Returns
    -------
    times, z : numpy.ndarray
    """

    x = traj.grid.x
    z = np.array([_crossing(x, s.values, level) for s in traj.snapshots])
    return np.array(traj.times), z


class TailFit(Base):

    """Regression of one profile tail.

    Attributes
    ----------
    side : str
        'left' for U - u_- as xi -> -inf, 'right' for u_+ - U.

    model : str
        'power' fits log y against log |xi|, 'exponential' log y against
        |xi|.

    exponent : float
        Fitted slope: the power (about -alpha) or the decay rate.

    amplitude : float
        exp(intercept).

    window : tuple of float
        Range of |xi| used.

    r2 : float
        Coefficient of determination of the fitted model.

    alternative_r2 : float
        r^2 of the other model on the same window.

    predicted_amplitude : float or None
        c_side / (alpha |f'(u_side)|) for theta = 0 and alpha < 2.
    """

    def __init__(self, side, model, exponent, amplitude, window, r2,
                 alternative_r2, predicted_amplitude=None):
        self.side = side
        self.model = model
        self.exponent = exponent
        self.amplitude = amplitude
        self.window = window
        self.r2 = r2
        self.alternative_r2 = alternative_r2
        self.predicted_amplitude = predicted_amplitude

    def as_dict(self):
        return {'side': self.side, 'model': self.model,
                'exponent': self.exponent, 'amplitude': self.amplitude,
                'window': list(self.window), 'r2': self.r2,
                'alternative_r2': self.alternative_r2,
                'predicted_amplitude': self.predicted_amplitude}

    def __eq__(self, other):
        attributes = ['side', 'model', 'exponent', 'amplitude', 'window',
                      'r2']
        return self._check_attr_equality(other, attributes)

    __hash__ = None


class WaveExtraction(Base):

    """Traveling wave (U, c) read off a front-forming trajectory.

    The wave speed is the slope of z(a, t), the profile the mean of the
    snapshots re-centered on z(a, t). Run ``extract`` first; the accessors
    raise TypeError before.

    Parameters
    ----------
    b : rfwave.Bistable
        Reaction term of the run.

    p : rfwave.RFParams
        Operator parameters of the run.

    width_level : float
        delta of the front width diagnostic z(1 - delta) - z(delta).
    """

    def __init__(self, b, p, width_level=0.05):
        self.b = b
        self.p = p
        self.width_level = width_level

        self._profile = None
        self._speed = None
        self._z_track = None
        self._speed_fit_r2 = None
        self._residual = None
        self._residual_sup = None
        self._operator_action = None
        self._width_bound = None
        self._tail_fit = None

    def _check_extracted(self):
        if self._profile is None:
            raise TypeError("No wave has been extracted yet, run "
                            "'extract' first.")

    @property
    def profile(self):
        self._check_extracted()
        return self._profile

    @property
    def speed(self):
        self._check_extracted()
        return self._speed

    @property
    def z_track(self):
        self._check_extracted()
        return self._z_track

    @property
    def speed_fit_r2(self):
        self._check_extracted()
        return self._speed_fit_r2

    @property
    def residual(self):
        self._check_extracted()
        return self._residual

    @property
    def residual_sup(self):
        self._check_extracted()
        return self._residual_sup

    @property
    def operator_action(self):
        """D U on the grid, with the profile's boundary samples as tails."""

        self._check_extracted()
        return self._operator_action

    @property
    def width_bound(self):
        """m_1: largest z(1 - delta, t) - z(delta, t) over the kept times."""

        self._check_extracted()
        return self._width_bound

    @property
    def tail_fit(self):
        self._check_extracted()
        if self._tail_fit is None:
            raise TypeError("The tails have not been fitted, run 'fit_tail' "
                            "first.")
        return self._tail_fit

    def extract(self, traj):
        """Measure speed and profile and assemble the wave residual.

        Parameters
        ----------
        traj : rfwave.Trajectory
            Run from front-forming initial data. The speed is fitted after
            the first 20% of the run, the profile averaged over its final
            half.

        Returns
        -------
        self : rfwave.WaveExtraction
        """

        b, grid = self.b, traj.grid
        times, z = track_level(traj, b.a)

        keep = times >= discard_fraction * times[-1]
        if np.count_nonzero(keep) < 3:
            error_str = ("Only {} snapshots remain after discarding the "
                         "transient; record more snapshots.")
            raise ValueError(error_str.format(np.count_nonzero(keep)))

        t_kept, z_kept = times[keep], z[keep]
        fit = linregress(t_kept, z_kept)
        r2 = fit.rvalue**2

        if np.ptp(z_kept) < grid.dx:
            # standing front: rigidity measured against the grid spacing
            rms = np.sqrt(np.mean((z_kept - fit.intercept
                                   - fit.slope * t_kept)**2))
            r2 = 1.0 - rms / grid.dx

        if not r2 >= min_speed_r2:
            error_str = ("The front has not become rigid: the speed fit has "
                         "r^2 = {:.6f} < {}; run to a longer T.")
            raise NumericalError(error_str.format(r2, min_speed_r2))

        # the profile averages the final part of the run only
        snapshots = [s for s, k in zip(traj.snapshots, keep) if k]
        late = times >= (1.0 - profile_fraction) * times[-1]
        aligned = [s.with_values(s.values, s.values[0], s.values[-1])
                   .shift_interpolate(z_k).values
                   for s, z_k, k in zip(traj.snapshots, z, late) if k]
        profile = Field(grid, np.mean(aligned, axis=0), b.u_minus, b.u_plus)

        offset = brentq(lambda xi: float(profile.sample(xi)) - b.a,
                        -2 * grid.dx, 2 * grid.dx, xtol=1e-14)
        if abs(offset) > 1e-12:
            profile = profile.shift_interpolate(offset)

        widths = [_crossing(grid.x, s.values, 1.0 - self.width_level)
                  - _crossing(grid.x, s.values, self.width_level)
                  for s in snapshots]

        self._profile = profile
        self._speed = fit.slope
        self._z_track = (times, z)
        self._speed_fit_r2 = r2
        self._width_bound = max(widths)
        self._assemble_residual()

        logger.info("wave extracted for %r, %r: c = %.7f (r^2 %.6f), "
                    "residual %.3e", self.p, b, self._speed, r2,
                    self._residual_sup)
        return self

    def _assemble_residual(self):
        """-c U' - D U - f(U) on the grid, sup taken on |xi| <= L/2."""

        U = self._profile
        settled = U.with_values(U.values, U.values[0], U.values[-1])
        d1, _, _ = settled.derivatives()
        action = apply(settled, self.p)

        residual = -self._speed * d1 - action.values - self.b(U.values)
        inner = np.abs(U.x) <= 0.5 * U.grid.half_width

        self._operator_action = action
        self._residual = Field(U.grid, residual)
        self._residual_sup = float(np.abs(residual[inner]).max())

    def check_monotone(self):
        """Smallest discrete difference of the profile."""

        diff = np.diff(self.profile.values)
        if diff.min() < -monotone_tolerance:
            error_str = ("The extracted profile is not monotone: a discrete "
                         "difference is {:.3e}.")
            raise NumericalError(error_str.format(diff.min()))
        return diff.min()

    def fit_tail(self, side=None, start=None):
        """Fit both tails, or one if ``side`` is given; see ``fit_tail``."""

        sides = ('left', 'right') if side is None else (side,)
        fits = {s: fit_tail(self, self.p, s, start) for s in sides}
        self._tail_fit = dict(self._tail_fit or {}, **fits)
        return self

    def speed_from_formula(self):
        return speed_from_formula(self, self.b)

    def as_dict(self):
        record = {'alpha': self.p.alpha, 'theta': self.p.theta,
                  'nonlinearity': self.b.spec(), 'a': self.b.a,
                  'c': float(self.speed),
                  'speed_fit_r2': float(self.speed_fit_r2),
                  'residual_sup': self.residual_sup,
                  'width_bound': float(self.width_bound)}
        if self._tail_fit is not None:
            record['tail_fit'] = {side: fit.as_dict()
                                  for side, fit in self._tail_fit.items()}
        return record

    def export(self, directory):
        """Write 'profile.csv' and 'wave.json' into ``directory``."""

        os.makedirs(directory, exist_ok=True)
        self.profile.to_csv(os.path.join(directory, 'profile.csv'))

        path = os.path.join(directory, 'wave.json')
        with open(path, 'w') as f:
            json.dump(self.as_dict(), f, indent=2, sort_keys=True)
        return path


def extract_wave(traj, b, p):
    """Extract the traveling wave from a trajectory and fit its tails.

    Returns
    -------
    extraction : rfwave.WaveExtraction
    """

    return WaveExtraction(b, p).extract(traj).fit_tail()


def front_width(profile):
    """1 / max U'."""

    d1, _, _ = profile.derivatives()
    return 1.0 / np.abs(d1).max()


def fit_tail(w, p, side='right', start=None):
    """Regress one tail of the extracted profile.

    For alpha < 2 log y is fitted against log |xi| (power law, exponent
    about -alpha); for alpha = 2 against |xi| (exponential). y is
    U - u_- on the left and u_+ - U on the right. The window runs from
    ``start`` (5 front widths, 2 for alpha = 2) to 0.6 L, beyond which the
    aligned snapshots reach past the edge of the grid.

    Parameters
    ----------
    w : rfwave.WaveExtraction
        Extracted wave.

    p : rfwave.RFParams
        Operator parameters.

    side : str
        'left' or 'right'.

    start : float
        Inner end of the window in |xi|.

    Returns
    -------
    fit : rfwave.TailFit
    """

    if side not in ('left', 'right'):
        error_str = "The tail side needs to be 'left' or 'right', got '{}'."
        raise ValueError(error_str.format(side))

    U, b = w.profile, w.b
    end = 0.6 * U.grid.half_width

    if start is None:
        widths = 2.0 if p.alpha == 2 else 5.0
        start = widths * front_width(U)
        if start > end / 2.5:
            logger.warning("tail window shortened: %.3g front widths do not "
                           "fit below %.3g", widths, end)
            start = end / 2.5

    if side == 'right':
        mask = (U.x >= start) & (U.x <= end)
        r, y = U.x[mask], b.u_plus - U.values[mask]
    else:
        mask = (U.x <= -start) & (U.x >= -end)
        r, y = -U.x[mask], U.values[mask] - b.u_minus

    positive = y > tail_floor
    r, y = r[positive], y[positive]
    if len(r) < 3 or r.max() < 2.0 * r.min():
        error_str = ("The {} tail window is too short to fit: need |xi| to "
                     "span a factor 2 above the floor {}, got [{:.3g}, "
                     "{:.3g}].")
        raise ValueError(error_str.format(side, tail_floor,
                                          r.min() if len(r) else np.nan,
                                          r.max() if len(r) else np.nan))

    power = linregress(np.log(r), np.log(y))
    exponential = linregress(r, np.log(y))

    if p.alpha == 2:
        model, chosen, other = 'exponential', exponential, power
        predicted = None
    else:
        model, chosen, other = 'power', power, exponential
        predicted = predicted_tail_amplitude(b, p, side)

    fit = TailFit(side, model, float(chosen.slope),
                  float(np.exp(chosen.intercept)),
                  (float(r.min()), float(r.max())), float(chosen.rvalue**2),
                  float(other.rvalue**2), predicted)
    logger.debug("%s tail: %s exponent %.4f, r^2 %.5f", side, model,
                 fit.exponent, fit.r2)
    return fit


def predicted_tail_amplitude(b, p, side):
    """Leading tail amplitude c_side / (alpha |f'(u_side)|) for theta = 0.

    The right tail is fed by the jumps to the left (c2), the left tail by
    the jumps to the right (c1).
    """

    if p.theta != 0 or p.alpha == 2:
        return None

    c = levy_coefficients(p)
    if side == 'right':
        return c.c2 / (p.alpha * abs(b.eval_df(b.u_plus)))
    return c.c1 / (p.alpha * abs(b.eval_df(b.u_minus)))


def speed_formula(profile, b):
    """c = -int f / int (U')^2 for a profile field.

    Raises NumericalError when the profile is flat.
    """

    if b.predicted_speed_sign() == 0:
        return 0.0

    d1, _, _ = profile.with_values(profile.values, profile.values[0],
                                   profile.values[-1]).derivatives()
    energy = trapezoid(d1**2, profile.x)
    if not energy > 0:
        error_str = ("The profile is flat: the integral of (U')^2 is {}; no "
                     "speed follows from it.")
        raise NumericalError(error_str.format(energy))

    return -b.potential_integral() / energy


def speed_from_formula(w, b):
    """Speed from the energy identity c = -int f / int (U')^2.

    The identity is only used for the symmetric operator theta = 0.
    """

    if w.p.theta != 0:
        error_str = ("The speed formula is only available for theta = 0, "
                     "got theta = {}.")
        raise ValueError(error_str.format(w.p.theta))

    return speed_formula(w.profile, b)


def speed_bound(b, p):
    """Upper bound C for |c| from tanh sub- and supersolutions.

    With a = min(a, 1 - a) and zeta = (1 + tanh)/2, epsilon solves
    rho(epsilon) = K (epsilon^2 ||zeta''|| + epsilon ||zeta'||) = min |f|
    on [a/3, 2a/3] and [1 - 2a/3, 1 - a/3], and
    C = ||f||_[0, 1] / epsilon * (3 + a) / a.

    Parameters
    ----------
    b : rfwave.Bistable
        Reaction term with roots 0 < a < 1.

    p : rfwave.RFParams
        Operator parameters with 1 < alpha < 2.

    Returns
    -------
    bound : float
    """

    p.check_wave_regime()
    if p.alpha == 2:
        raise ValueError("speed_bound needs 1 < alpha < 2.")
    b.check_normalized()

    a = min(b.a, 1.0 - b.a)
    bands = np.concatenate((np.linspace(a / 3, 2 * a / 3, 2001),
                            np.linspace(1 - 2 * a / 3, 1 - a / 3, 2001)))
    target = np.abs(b(bands)).min()

    d1_norm, d2_norm = 0.5, 2.0 / (3.0 * np.sqrt(3.0))

    def rho(eps):
        return derivative_bound(p, eps * d1_norm, eps**2 * d2_norm) - target

    upper = 1.0
    for _ in range(60):
        if rho(upper) > 0:
            break
        upper *= 2.0
    else:
        raise NumericalError("No bracket found for the speed-bound rate.")

    eps = brentq(rho, 0.0, upper, xtol=1e-15)
    bound = b.norm(0.0, 1.0) / eps * (3.0 + a) / a
    logger.info("speed bound for %r, %r: epsilon %.4e, C %.4g", b, p, eps,
                bound)
    return bound


def _sup_distance(u, U, shift, inner):
    """sup over ``inner`` of |u(x) - U(x - shift)|."""
    return np.abs(u.values[inner] - U.sample(u.x[inner] - shift)).max()


def align(u, U, guess=0.0, span=2.0, n_scan=41):
    """Shift s minimizing sup |u - U(. - s)| on |x| <= L/2 near ``guess``.

    Returns
    -------
    shift, distance : float
    """

    inner = np.abs(u.x) <= 0.5 * u.grid.half_width
    scan = guess + np.linspace(-span, span, n_scan)
    scan = np.append(scan, guess)
    values = [_sup_distance(u, U, s, inner) for s in scan]
    k = int(np.argmin(values))
    step = 2.0 * span / (n_scan - 1)

    res = minimize_scalar(lambda s: _sup_distance(u, U, s, inner),
                          bounds=(scan[k] - step, scan[k] + step),
                          method='bounded', options={'xatol': 1e-10})
    if res.fun < values[k]:
        return float(res.x), float(res.fun)
    return float(scan[k]), float(values[k])


def _check_admissible_seed(u0, b):
    if not u0.tail_left < b.a < u0.tail_right:
        error_str = ("The initial data need limsup u0 < a < liminf u0 at "
                     "-inf and +inf: got tails ({}, {}) around a = {}.")
        raise ValueError(error_str.format(u0.tail_left, u0.tail_right, b.a))


class UniquenessReport(Base):

    """Two extracted waves compared up to translation."""

    def __init__(self, extractions, shift, speed_difference,
                 profile_distance):
        self.extractions = extractions
        self.shift = shift
        self.speed_difference = speed_difference
        self.profile_distance = profile_distance

    def as_dict(self):
        return {'speeds': [float(w.speed) for w in self.extractions],
                'shift': self.shift,
                'speed_difference': self.speed_difference,
                'profile_distance': self.profile_distance}


def uniqueness_check(p, b, seeds, cfg=None):
    """Run two admissible seeds and compare the waves they converge to.

    Parameters
    ----------
    p : rfwave.RFParams
        Operator parameters.

    b : rfwave.Bistable
        Reaction term.

    seeds : pair of rfwave.Field
        Initial data with left tail below a and right tail above a.

    cfg : rfwave.SolverConfig
        Stepping options of both runs.

    Returns
    -------
    report : rfwave.UniquenessReport
    """

    if len(seeds) != 2:
        error_str = "uniqueness_check needs two seeds, got {}."
        raise ValueError(error_str.format(len(seeds)))

    for seed in seeds:
        _check_admissible_seed(seed, b)

    cfg = SolverConfig() if cfg is None else cfg
    waves = [extract_wave(evolve(seed, b, p, cfg), b, p) for seed in seeds]

    first, second = (w.profile for w in waves)
    shift, distance = align(first, second)
    report = UniquenessReport(waves, shift,
                              float(abs(waves[0].speed - waves[1].speed)),
                              distance)
    logger.info("uniqueness: speed difference %.3e, profile distance %.3e",
                report.speed_difference, report.profile_distance)
    return report


class StabilityFit(Base):

    """Decay of the distance to the translated wave.

    Attributes
    ----------
    times, distances : numpy.ndarray
        s(t) = min over shifts of sup |u(., t) - U(. - ct + xi)| on
        |x| <= L/2.

    kappa : float or None
        Exponential rate from log s(t) on the post-transient window.

    xi : float
        Asymptotic shift, u(x, t) ~ U(x - ct + xi).

    prefactor : float or None
        K in s(t) ~ K exp(-kappa t).

    r2 : float or None
        Quality of the log-linear fit.

    status : str
        'converging' or 'already converged'.
    """

    def __init__(self, times, distances, shifts, kappa, xi, prefactor, r2,
                 status, window=None):
        self.times = times
        self.distances = distances
        self.shifts = shifts
        self.kappa = kappa
        self.xi = xi
        self.prefactor = prefactor
        self.r2 = r2
        self.status = status
        self.window = window

    def as_dict(self):
        return {'times': [float(t) for t in self.times],
                'distances': [float(s) for s in self.distances],
                'kappa': self.kappa, 'xi': self.xi,
                'prefactor': self.prefactor, 'r2': self.r2,
                'status': self.status, 'window': self.window}


def stability_experiment(w, perturbation, b, p, T, cfg=None):
    """Evolve a perturbed wave and fit the decay of its distance to a
    translate.

    Parameters
    ----------
    w : rfwave.WaveExtraction
        Extracted wave (U, c).

    perturbation : rfwave.Field
        Added to U; the sum is clipped to [u_-, u_+].

    b : rfwave.Bistable
        Reaction term.

    p : rfwave.RFParams
        Operator parameters.

    T : float
        Horizon.

    cfg : rfwave.SolverConfig
        Stepping options; T overrides its horizon.

    Returns
    -------
    fit : rfwave.StabilityFit
    """

    U, c = w.profile, w.speed
    values = np.clip(U.values + perturbation.values, b.u_minus, b.u_plus)
    u0 = U.with_values(values, values[0], values[-1])
    _check_admissible_seed(u0, b)

    cfg = SolverConfig() if cfg is None else cfg
    cfg = SolverConfig(cfg.dt, T, cfg.snapshot_stride, cfg.scheme,
                       cfg.clamp_reaction, cfg.ode_step)
    traj = evolve(u0, b, p, cfg)

    shifts, distances = [], []
    offset = 0.0
    for t, snapshot in zip(traj.times, traj.snapshots):
        shift, distance = align(snapshot, U, guess=c * t + offset)
        offset = shift - c * t
        shifts.append(shift)
        distances.append(distance)

    times = np.array(traj.times)
    shifts, distances = np.array(shifts), np.array(distances)
    xi = float(c * times[-1] - shifts[-1])

    if distances[0] <= 1e-6:
        logger.info("stability: initial distance %.2e, already converged",
                    distances[0])
        return StabilityFit(times, distances, shifts, None, xi, None, None,
                            'already converged')

    if np.all(np.diff(distances) >= 0):
        error_str = ("The distance to the wave never decreased (from {:.3e} "
                     "to {:.3e}); the run does not converge.")
        raise NumericalError(error_str.format(distances[0], distances[-1]))

    # a plateau in the last quarter is the numerical floor of the distance
    late = distances[times >= 0.75 * times[-1]]
    floor = np.median(late) if late[-1] > 0.9 * late[0] else 0.0
    lower, upper = max(1e-6, 3.0 * floor), 0.5 * distances[0]
    window = (distances >= lower) & (distances <= upper)
    if np.count_nonzero(window) < 3:
        error_str = ("Too few snapshots ({}) with distance in [{:.2e}, "
                     "{:.2e}] to fit a decay rate; record more snapshots.")
        raise NumericalError(error_str.format(np.count_nonzero(window),
                                              lower, upper))

    fit = linregress(times[window], np.log(distances[window]))
    result = StabilityFit(times, distances, shifts, float(-fit.slope), xi,
                          float(np.exp(fit.intercept)), float(fit.rvalue**2),
                          'converging', (float(lower), float(upper)))
    logger.info("stability: kappa %.4f (r^2 %.4f), xi %.4f", result.kappa,
                result.r2, result.xi)
    return result
