import json
import logging
import threading

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.interpolate import CubicSpline
from scipy.signal import fftconvolve
from scipy.special import erfc, zeta
from scipy.stats import linregress

from rfwave.base import Base
from rfwave.RieszFeller import RFParams, discrete_multiplier, \
    levy_coefficients, symbol, _real_part

logger = logging.getLogger(__name__)

# the transform of the kernel is below this value beyond the cutoff frequency
spectral_cutoff = 1e-18
n_tail_terms = 3


def cutoff_frequency(p, t=1.0):
    """Frequency beyond which exp(t psi) is below ``spectral_cutoff``."""

    damping = np.cos(p.theta * np.pi / 2)
    return (-np.log(spectral_cutoff) / (t * damping))**(1.0 / p.alpha)


def default_extent(p):
    """Half width of the kernel table: 40 for the Gaussian, 200 otherwise."""
    return 40.0 if p.alpha == 2 else 200.0


class KernelTable(Base):

    """Tabulated kernel G(x, 1) of the linear equation u_t = D u.

    Use ``KernelTable.build`` to construct one. The table is treated as
    immutable; only the memo of semigroup actions on reference ramps grows.

    Attributes
    ----------
    params : rfwave.RFParams
        Operator parameters.

    x_nodes, g1_values : numpy.ndarray
        Table nodes on |x| <= x_max and G(x, 1) there, negative noise clamped.

    tail_coefficients : numpy.ndarray
        Shape (2, n_tail_terms): coefficients of |x|^(-1-k*alpha), k >= 1,
        for the left and the right tail.

    min_value : float
        Smallest inverted value before clamping.

    build_resolution : int
        Number of nodes of the inversion transform.
    """

    def __init__(self, params, x_nodes, g1_values, tail_coefficients,
                 min_value, build_resolution):
        self.params = params
        self.x_nodes = x_nodes
        self.g1_values = g1_values
        self.tail_coefficients = tail_coefficients
        self.min_value = min_value
        self.build_resolution = build_resolution

        self.x_max = x_nodes[-1]
        self.dx = x_nodes[1] - x_nodes[0]
        self._spline = CubicSpline(x_nodes, g1_values)

        # trapezoid sums with the end correction -dx^2/12 [g']
        slope = self._spline(x_nodes, 1)
        cdf = cumulative_trapezoid(g1_values, x_nodes, initial=0.0)
        cdf -= self.dx**2 / 12.0 * (slope - slope[0])
        cdf += self._tail_mass(0)
        self.mass = cdf[-1] + self._tail_mass(1)
        self._cdf_spline = CubicSpline(x_nodes, cdf)

        self._ramp_actions = {}
        self._lock = threading.Lock()

    @classmethod
    def build(cls, p, x_max=None, n=2**20):
        """Invert exp(psi) on n nodes and tabulate G(x, 1) on |x| <= x_max.

        Parameters
        ----------
        p : rfwave.RFParams
            Operator parameters.

        x_max : float
            Table half width, ``default_extent(p)`` if omitted.

        n : int
            Size of the inversion transform.

        Returns
        -------
        kernel : rfwave.KernelTable
        """

        check_buildable(p)
        x_max = default_extent(p) if x_max is None else float(x_max)

        dx = min(0.01, np.pi / cutoff_frequency(p))
        period = n * dx
        if x_max >= 0.5 * period:
            error_str = ("The inversion transform of {} nodes at dx = {:.3e} "
                         "does not reach x_max = {}; use more nodes.")
            raise ValueError(error_str.format(n, dx, x_max))

        dxi = 2.0 * np.pi / period
        index = np.arange(n) - n // 2
        xi = index * dxi
        x = index * dx

        transform = np.exp(symbol(p, xi))
        inverted = np.fft.fftshift(np.fft.fft(np.fft.ifftshift(transform)))
        g = dxi / (2.0 * np.pi) * _real_part(inverted, 'kernel build')

        keep = np.abs(x) <= x_max
        x, g = x[keep], g[keep]

        coefficients = _fit_tails(p, x, g)
        if p.alpha < 2:
            # remove the periodic images of the power-law tails, then refit
            s = 1.0 + p.alpha
            left, right = coefficients[0, 0], coefficients[1, 0]
            g = g - period**(-s) * (right * zeta(s, 1.0 + x / period)
                                    + left * zeta(s, 1.0 - x / period))
            coefficients = _fit_tails(p, x, g)

        min_value = g.min()
        g = np.maximum(g, 0.0)
        x.flags.writeable = False
        g.flags.writeable = False

        kernel = cls(p, x, g, coefficients, min_value, n)
        logger.info("kernel built for %r: %d nodes, dx %.3e, mass defect "
                    "%.2e, min %.2e", p, len(x), dx, kernel.mass_defect(),
                    min_value)
        return kernel

    @property
    def tail_amplitude(self):
        """Leading tail amplitudes (left, right)."""
        return tuple(self.tail_coefficients[:, 0])

    def mass_defect(self):
        return abs(self.mass - 1.0)

    def _tail_values(self, side, y):
        """Power-law tail of one side at |y| beyond the table."""

        alpha = self.params.alpha
        r = np.abs(y)
        out = np.zeros_like(r)
        for k, a in enumerate(self.tail_coefficients[side], start=1):
            out = out + a * r**(-1.0 - k * alpha)
        return out

    def _tail_mass(self, side):
        """Mass of one tail beyond the table edge."""
        return float(self._tail_mass_at(side, np.float64(self.x_max)))

    def _eval_unit(self, y):
        y = np.asarray(y, dtype=float)
        shape, y = y.shape, y.ravel()
        out = np.array(self._spline(np.clip(y, -self.x_max, self.x_max)))
        outside = np.abs(y) > self.x_max
        if not np.any(outside):
            return out.reshape(shape)

        far = y[outside]
        if self.params.alpha == 2:
            out[outside] = (4.0 * np.pi)**-0.5 * np.exp(-0.25 * far**2)
        else:
            out[outside] = np.where(far < 0, self._tail_values(0, far),
                                    self._tail_values(1, far))
        return out.reshape(shape)

    def eval(self, x, t=1.0):
        """G(x, t) = t^(-1/alpha) G(x t^(-1/alpha), 1).

        Parameters
        ----------
        x : float or array-like
            Positions.

        t : float
            Time, t > 0.
        """

        _check_time(t)
        scale = t**(-1.0 / self.params.alpha)
        out = scale * self._eval_unit(scale * np.asarray(x, dtype=float))
        return out[()] if np.ndim(out) == 0 else out

    def cdf(self, x, t=1.0):
        """Distribution function of G(., t)."""

        _check_time(t)
        y = np.asarray(x, dtype=float) * t**(-1.0 / self.params.alpha)
        inside = self._cdf_spline(np.clip(y, -self.x_max, self.x_max))

        if self.params.alpha == 2:
            outside = 0.5 * erfc(-0.5 * y)
        else:
            r = np.maximum(np.abs(y), self.x_max)
            left = self._tail_mass_at(0, r)
            outside = np.where(y < 0, left, 1.0 - self._tail_mass_at(1, r))

        out = np.where(np.abs(y) <= self.x_max, inside, outside)
        return out[()] if np.ndim(out) == 0 else out

    def _tail_mass_at(self, side, r):
        alpha = self.params.alpha
        out = np.zeros_like(r)
        for k, a in enumerate(self.tail_coefficients[side], start=1):
            out = out + a * r**(-k * alpha) / (k * alpha)
        return out

    def multiplier(self, grid, n_fft, t):
        """exp(t psi) on numpy's FFT frequencies."""
        return np.exp(discrete_multiplier(self.params, grid, n_fft, scale=t))

    def ramp_action(self, grid, t):
        """S_t applied to the grid's reference ramp, memoized per (grid, t).

        Uses S_t zeta = Phi_t * zeta' with the distribution function Phi_t.
        """

        key = (grid, float(t))
        with self._lock:
            if key in self._ramp_actions:
                return self._ramp_actions[key]

        n = grid.n_points
        offsets = (np.arange(2 * n - 1) - (n - 1)) * grid.dx
        d1, _ = grid.reference_ramp_derivatives()
        values = fftconvolve(self.cdf(offsets, t), d1 * grid.dx)
        values = values[n - 1:2 * n - 1]
        values.flags.writeable = False

        with self._lock:
            return self._ramp_actions.setdefault(key, values)

    def convolve(self, field, t):
        """Semigroup step S_t field = G(., t) * field.

        Parameters
        ----------
        field : rfwave.Field
            Field with settled tails.

        t : float
            Time, t > 0.

        Returns
        -------
        result : rfwave.Field
            Field with the input's tails.
        """

        _check_time(t)
        parts = field.decompose()
        grid = field.grid

        n = grid.n_points
        n_fft = grid.padded_size()
        spectrum = np.fft.fft(parts.perturbation.values, n_fft)
        values = np.fft.ifft(self.multiplier(grid, n_fft, t) * spectrum)[:n]
        values = _real_part(values, 'convolve')

        jump = field.tail_right - field.tail_left
        if jump != 0:
            values = values + jump * self.ramp_action(grid, t)
        values = values + field.tail_left

        return field.with_values(values)

    def check_properties(self):
        """Measure the kernel properties; see ``KernelReport``."""
        return KernelReport.measure(self)

    def export(self, prefix):
        """Write '<prefix>.csv' with 'x,g' and a '<prefix>.json' sidecar."""

        csv_path, json_path = prefix + '.csv', prefix + '.json'
        data = np.column_stack((self.x_nodes, self.g1_values))
        np.savetxt(csv_path, data, delimiter=',', header='x,g', comments='',
                   fmt='%.17g')

        sidecar = {'alpha': self.params.alpha,
                   'theta': self.params.theta,
                   'mass_defect': self.mass_defect(),
                   'tail_amplitude': [float(a) for a in self.tail_amplitude],
                   'build_resolution': self.build_resolution}
        with open(json_path, 'w') as f:
            json.dump(sidecar, f, indent=2, sort_keys=True)

        return csv_path, json_path

    def __eq__(self, other):
        attributes = ['params', 'x_nodes', 'g1_values', 'build_resolution']
        return self._check_attr_equality(other, attributes)

    __hash__ = None


def build(p, x_max=None, n=2**20):
    """Build the kernel table of D^alpha_theta."""
    return KernelTable.build(p, x_max, n)


def check_buildable(p):
    if not isinstance(p, RFParams):
        raise TypeError("A kernel needs RFParams, got {}.".format(
            type(p).__name__))

    if p.alpha == 1 and abs(p.theta) == 1:
        raise ValueError("alpha = 1 with |theta| = 1 is a pure translation "
                         "and has no kernel density.")

    if p.alpha < 1 and abs(p.theta) == p.alpha:
        raise ValueError("Extremal skewness |theta| = alpha < 1 gives a "
                         "kernel supported on a half-line; not supported.")


def _check_time(t):
    if not t > 0:
        error_str = "The time t needs to be greater than zero, got {}."
        raise ValueError(error_str.format(t))


def _fit_tails(p, x, g):
    """Least-squares fit of sum_k a_k |x|^(-1-k*alpha) on the last decade.

    A side whose jump coefficient vanishes has no power-law tail.
    """

    coefficients = np.zeros((2, n_tail_terms))
    if p.alpha == 2:
        return coefficients

    c = levy_coefficients(p)
    x_max = np.abs(x).max()

    for side, (mask, weight) in enumerate(((x <= -0.1 * x_max, c.c1),
                                           (x >= 0.1 * x_max, c.c2))):
        if weight == 0:
            continue
        r, values = np.abs(x[mask]), g[mask]
        powers = -1.0 - p.alpha * np.arange(1, n_tail_terms + 1)
        design = r[:, None]**powers[None, :] / values[:, None]
        scale = np.abs(design).max(axis=0)
        solution = np.linalg.lstsq(design / scale, np.ones_like(r),
                                   rcond=None)[0]
        coefficients[side] = solution / scale

    return coefficients


class KernelReport(Base):

    """Measured kernel properties.

    Attributes
    ----------
    min_value : float
        Smallest inverted value before clamping.

    mass_defect : float
        |mass - 1| with the analytic tail mass.

    scaling_deviation : float
        Largest relative deviation of eval(x, t) from a direct inversion at
        t in {0.25, 4} and five positions.

    semigroup_defects : dict
        sup |G(., s) * G(., t) - G(., s + t)| on the inner half of the table,
        keyed by (s, t).

    envelope : tuple
        (B_0, B_1) with |d^m G(y, 1)| <= B_m / (1 + y^2).

    tail_slopes : tuple
        Log-log slopes of the left and right tail on the last decade, None
        for a side without a power-law tail.

    core_radius : float
        Radius min(x_max/2, 10) of the core on which the table values are
        checked for positivity.

    tails_positive : bool
        Whether the fitted tails beyond the table are positive on every side
        that carries one.

    positive : bool
        Whether G(., 1) is strictly positive on the core and the tails are.
    """

    semigroup_pairs = ((0.5, 0.5), (1.0, 2.0))
    scaling_times = (0.25, 4.0)
    scaling_points = (-2.0, -0.5, 0.0, 0.7, 3.0)

    def __init__(self, min_value, mass_defect, scaling_deviation,
                 semigroup_defects, envelope, tail_slopes, core_radius,
                 tails_positive, positive):
        self.min_value = min_value
        self.mass_defect = mass_defect
        self.scaling_deviation = scaling_deviation
        self.semigroup_defects = semigroup_defects
        self.envelope = envelope
        self.tail_slopes = tail_slopes
        self.core_radius = core_radius
        self.tails_positive = tails_positive
        self.positive = positive

    @classmethod
    def measure(cls, kernel):
        p = kernel.params
        x, g = kernel.x_nodes, kernel.g1_values

        scaling = max(_scaling_deviation(kernel, t) for t in cls.scaling_times)

        core = np.abs(x) <= 0.5 * kernel.x_max
        defects = {}
        for s, t in cls.semigroup_pairs:
            composed = fftconvolve(kernel.eval(x, s), kernel.eval(x, t),
                                   mode='same') * kernel.dx
            direct = kernel.eval(x, s + t)
            defects[(s, t)] = np.abs(composed - direct)[core].max()
            logger.debug("semigroup defect at (%g, %g): %.3e", s, t,
                         defects[(s, t)])

        weight = 1.0 + x**2
        envelope = (np.abs(g * weight).max(),
                    np.abs(np.gradient(g, kernel.dx) * weight).max())

        c = levy_coefficients(p)
        slopes = [None, None]
        if p.alpha < 2:
            for side, (mask, weight) in enumerate((
                    (x <= -0.1 * kernel.x_max, c.c1),
                    (x >= 0.1 * kernel.x_max, c.c2))):
                if weight > 0:
                    fit = linregress(np.log(np.abs(x[mask])), np.log(g[mask]))
                    slopes[side] = fit.slope

        core_radius = min(0.5 * kernel.x_max, 10.0)
        core_positive = bool(np.all(g[np.abs(x) <= core_radius] > 0))

        tails_positive = True
        if p.alpha < 2:
            radii = kernel.x_max * np.array([1.0, 2.0, 10.0, 100.0, 1e4])
            for side, weight in enumerate((c.c1, c.c2)):
                if weight > 0:
                    sign = 1.0 if side else -1.0
                    values = kernel._tail_values(side, sign * radii)
                    tails_positive &= bool(np.all(values > 0))

        return cls(kernel.min_value, kernel.mass_defect(), scaling, defects,
                   envelope, tuple(slopes), core_radius, tails_positive,
                   core_positive and tails_positive)

    def as_dict(self):
        return {'min_value': self.min_value,
                'mass_defect': self.mass_defect,
                'scaling_deviation': self.scaling_deviation,
                'semigroup_defects': {'{},{}'.format(*k): v for k, v in
                                      self.semigroup_defects.items()},
                'envelope': list(self.envelope),
                'tail_slopes': list(self.tail_slopes),
                'core_radius': self.core_radius,
                'tails_positive': self.tails_positive,
                'positive': self.positive}


def direct_inversion(p, x, t, period=None, tails=(0.0, 0.0)):
    """G(x, t) by direct summation of the inverse transform at a few points.

    Independent of the table. The sum is periodic with ``period`` (default
    2000 t^(1/alpha)); the images of leading tails with the given (left,
    right) amplitudes at t = 1 are subtracted.
    """

    period = 2000.0 * t**(1.0 / p.alpha) if period is None else period
    dxi = 2.0 * np.pi / period
    xi = np.arange(1, int(cutoff_frequency(p, t) / dxi) + 1) * dxi
    transform = np.exp(t * symbol(p, xi))

    x = np.atleast_1d(np.asarray(x, dtype=float))
    values = np.empty_like(x)
    for i, point in enumerate(x):
        # xi > 0 and its mirror combine to twice the real part
        terms = (np.exp(-1j * xi * point) * transform).real
        values[i] = dxi / (2.0 * np.pi) * (1.0 + 2.0 * terms.sum())

    s = 1.0 + p.alpha
    left, right = tails
    return values - t * period**(-s) * (right * zeta(s, 1.0 + x / period)
                                        + left * zeta(s, 1.0 - x / period))


def _scaling_deviation(kernel, t):
    p = kernel.params
    points = np.array(KernelReport.scaling_points) * t**(1.0 / p.alpha)
    reference = direct_inversion(p, points, t, tails=kernel.tail_amplitude)
    return np.max(np.abs(kernel.eval(points, t) - reference) / reference)
