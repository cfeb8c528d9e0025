import logging
import threading

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.signal import fftconvolve
from scipy.special import gamma

from rfwave.base import Base, NumericalError
from rfwave.Field import Field

logger = logging.getLogger(__name__)

admissibility_slack = 1e-12
imaginary_tolerance = 1e-10
boundary_tolerance = 1e-8


class RFParams(Base):

    """Order and skewness (alpha, theta) of a Riesz-Feller operator.

    Parameters
    ----------
    alpha : float
        Order, 0 < alpha <= 2.

    theta : float
        Skewness, |theta| <= min(alpha, 2 - alpha).
    """

    def __init__(self, alpha, theta=0.0):
        self.alpha = float(alpha)
        self.theta = float(theta)
        self._check_parameters()

    def _check_parameters(self):
        """Check that (alpha, theta) lies in the Feller admissible region."""

        if not 0 < self.alpha <= 2:
            error_str = "The order alpha needs to be in (0, 2], got {}."
            raise ValueError(error_str.format(self.alpha))

        bound = min(self.alpha, 2.0 - self.alpha)
        if abs(self.theta) > bound + admissibility_slack:
            error_str = ("The skewness theta = {} is not admissible for "
                         "alpha = {}: need |theta| <= min(alpha, 2 - alpha) "
                         "= {}.")
            raise ValueError(error_str.format(self.theta, self.alpha, bound))

        return self

    def check_wave_regime(self):
        """Raise ValueError unless 1 < alpha <= 2."""

        if not 1 < self.alpha <= 2:
            error_str = ("Traveling-wave computations need 1 < alpha <= 2, "
                         "got alpha = {}.")
            raise ValueError(error_str.format(self.alpha))

        return self

    def mirrored(self):
        """Parameters of the reflected operator, theta -> -theta."""
        return RFParams(self.alpha, -self.theta)

    def __hash__(self):
        return hash((self.alpha, self.theta))

    def __eq__(self, other):
        attributes = ['alpha', 'theta']
        return self._check_attr_equality(other, attributes)

    def __repr__(self):
        return "RFParams(alpha={!r}, theta={!r})".format(self.alpha,
                                                         self.theta)


class IntegralCoeffs(Base):

    """Coefficients of the singular-integral representation.

    c1 weights the jumps f(x + xi), c2 the jumps f(x - xi).
    """

    def __init__(self, c1, c2):
        self.c1 = c1
        self.c2 = c2

    @property
    def even(self):
        return 0.5 * (self.c1 + self.c2)

    @property
    def odd(self):
        return 0.5 * (self.c1 - self.c2)

    def __eq__(self, other):
        attributes = ['c1', 'c2']
        return self._check_attr_equality(other, attributes)

    def __repr__(self):
        return "IntegralCoeffs(c1={!r}, c2={!r})".format(self.c1, self.c2)


def symbol(p, xi):
    """Fourier symbol -|xi|^alpha exp(i sgn(xi) theta pi/2)."""

    xi = np.asarray(xi, dtype=float)
    phase = np.exp(1j * np.sign(xi) * p.theta * np.pi / 2)
    return -np.abs(xi)**p.alpha * phase


def levy_coefficients(p):
    """Jump-measure coefficients (c1, c2) for any admissible (alpha, theta)."""

    c1 = gamma(1 + p.alpha) * np.sin((p.alpha + p.theta) * np.pi / 2) / np.pi
    c2 = gamma(1 + p.alpha) * np.sin((p.alpha - p.theta) * np.pi / 2) / np.pi

    # sin(pi) and sin(0) at extremal skewness
    c1 = 0.0 if abs(c1) < 1e-15 else c1
    c2 = 0.0 if abs(c2) < 1e-15 else c2
    return IntegralCoeffs(c1, c2)


def coeffs(p):
    """Coefficients (c1, c2) of the integral representation.

    Parameters
    ----------
    p : rfwave.RFParams
        Operator parameters, alpha != 1.

    Returns
    -------
    coefficients : rfwave.IntegralCoeffs
    """

    if p.alpha == 1:
        raise ValueError("The integral representation for alpha = 1 is a "
                         "principal value and is not supported.")

    return levy_coefficients(p)


def discrete_multiplier(p, grid, n_fft, scale=1.0):
    """Symbol on numpy's FFT frequencies of a length n_fft transform.

    numpy transforms with exp(-i omega x), so frequency omega corresponds to
    xi = -omega. The Nyquist bin is its own mirror and keeps the real part.
    """

    omega = grid.wavenumbers(n_fft)
    multiplier = scale * symbol(p, -omega)
    if n_fft % 2 == 0:
        multiplier[n_fft // 2] = multiplier[n_fft // 2].real
    return multiplier


def _real_part(values, where):
    residue = np.abs(values.imag).max()
    if residue > imaginary_tolerance * max(1.0, np.abs(values.real).max()):
        error_str = ("Imaginary residue {:.3e} after the inverse transform in "
                     "{} exceeds the tolerance {:.0e}.")
        raise NumericalError(error_str.format(residue, where,
                                              imaginary_tolerance))
    return values.real


def apply_spectral(field, p, periodic=False):
    """Apply the operator as a Fourier multiplier to a decaying field.

    Parameters
    ----------
    field : rfwave.Field
        Field with declared tails 0.

    p : rfwave.RFParams
        Operator parameters.

    periodic : bool
        Treat the samples as one period of length n*dx instead of zero
        padding. The boundary decay check is skipped.

    Returns
    -------
    result : rfwave.Field
    """

    if field.tail_left != 0 or field.tail_right != 0:
        error_str = ("The spectral path needs tails 0, got ({}, {}); "
                     "decompose the field first.")
        raise ValueError(error_str.format(field.tail_left, field.tail_right))

    values = field.values
    n = len(values)

    if periodic:
        n_fft = n
    else:
        sup = np.abs(values).max()
        edge = max(abs(values[0]), abs(values[-1]))
        if edge > boundary_tolerance * sup:
            error_str = ("The field has not decayed at the boundary: "
                         "{:.3e} > {:.0e} * sup|f| = {:.3e}.")
            raise ValueError(error_str.format(edge, boundary_tolerance,
                                              boundary_tolerance * sup))
        n_fft = field.grid.padded_size()

    multiplier = discrete_multiplier(p, field.grid, n_fft)
    result = np.fft.ifft(multiplier * np.fft.fft(values, n_fft))[:n]

    return Field(field.grid, _real_part(result, 'apply_spectral'))


def _panel_rule(lower, upper, ratio=1.15, order=4):
    """Gauss-Legendre panels on a geometric mesh of [lower, upper]."""

    edges = [lower]
    while edges[-1] * ratio < upper:
        edges.append(edges[-1] * ratio)
    edges.append(upper)
    edges = np.array(edges)

    nodes, weights = leggauss(order)
    mid = 0.5 * (edges[1:] + edges[:-1])
    half = 0.5 * (edges[1:] - edges[:-1])

    xi = (mid[:, None] + half[:, None] * nodes[None, :]).ravel()
    w = (half[:, None] * weights[None, :]).ravel()
    return xi, w


def _far_weights(grid, m, alpha):
    """Composite Simpson weights times xi^(-1-alpha) on xi = k*dx, k >= m."""

    k_max = grid.n_points - 1
    if m >= k_max:
        return np.zeros(m + 1)
    k_max += (k_max - m) % 2

    simpson = np.ones(k_max - m + 1)
    simpson[1:-1:2] = 4.0
    simpson[2:-1:2] = 2.0

    weights = np.zeros(k_max + 1)
    k = np.arange(m, k_max + 1)
    weights[m:] = simpson * grid.dx / 3.0 * (k * grid.dx)**(-1.0 - alpha)
    return weights


def _singular_integral(field, p, cutoff, compensated):
    """Both one-sided jump integrals for every grid point.

    With ``compensated`` the first-order term f'(x)xi is subtracted from the
    jumps, as needed for 1 < alpha < 2.
    """

    alpha = p.alpha
    c = levy_coefficients(p)
    grid = field.grid
    dx = grid.dx

    m = max(int(round(cutoff / dx)), 4)
    M = m * dx
    h = 2.0 * dx

    f = field.values
    d1, d2, d3 = field.derivatives()

    # [0, h] from the Taylor expansion of the even and odd jump sums
    even = d2 * h**(2 - alpha) / (2 - alpha)
    odd = d3 / 3.0 * h**(3 - alpha) / (3 - alpha)
    if not compensated:
        odd = odd + 2.0 * d1 * h**(1 - alpha) / (1 - alpha)

    # [h, M] by graded Gauss-Legendre panels
    xi, w = _panel_rule(h, M)
    logger.debug("singular integral: %d panel nodes, far cutoff %d dx",
                 len(xi), m)

    kernel = w * xi**(-1.0 - alpha)
    ahead = field.sample(field.x[:, None] + xi[None, :])
    behind = field.sample(field.x[:, None] - xi[None, :])

    even = even + ((ahead + behind - 2.0 * f[:, None]) * kernel).sum(axis=1)
    jump = ahead - behind
    if compensated:
        jump = jump - 2.0 * d1[:, None] * xi[None, :]
    odd = odd + (jump * kernel).sum(axis=1)

    near = c.even * even + c.odd * odd

    # [M, inf) against the constant tails
    weights = _far_weights(grid, m, alpha)
    n, k_max = len(f), len(weights) - 1

    right = fftconvolve(f - field.tail_right, weights[::-1])[k_max:k_max + n]
    left = fftconvolve(f - field.tail_left, weights)[:n]

    right = right + (field.tail_right - f) * M**(-alpha) / alpha
    left = left + (field.tail_left - f) * M**(-alpha) / alpha
    if compensated:
        right = right - d1 * M**(1 - alpha) / (alpha - 1)
        left = left + d1 * M**(1 - alpha) / (alpha - 1)

    return near + c.c1 * right + c.c2 * left


def apply_integral(field, p, cutoff=1.0):
    """Apply the operator through its compensated singular integral.

    Parameters
    ----------
    field : rfwave.Field
        Settled field, sampled densely enough to be treated as C^2.

    p : rfwave.RFParams
        Operator parameters with 1 < alpha < 2.

    cutoff : float
        Split point M between the panel quadrature and the grid-aligned far
        field. It is rounded to a multiple of dx.

    Returns
    -------
    result : rfwave.Field
        Field with tails 0.
    """

    if not 1 < p.alpha < 2:
        error_str = "apply_integral needs 1 < alpha < 2, got alpha = {}."
        raise ValueError(error_str.format(p.alpha))

    field.check_settled()
    values = _singular_integral(field, p, cutoff, compensated=True)
    return Field(field.grid, values)


def apply_integral_small_alpha(field, p, cutoff=1.0):
    """Apply the operator for 0 < alpha < 1 through the plain jump integral."""

    if not 0 < p.alpha < 1:
        error_str = ("apply_integral_small_alpha needs 0 < alpha < 1, got "
                     "alpha = {}.")
        raise ValueError(error_str.format(p.alpha))

    field.check_settled()
    values = _singular_integral(field, p, cutoff, compensated=False)
    return Field(field.grid, values)


def apply_reflected(field, p, apply_operator):
    """Evaluate D_theta f through (D_{-theta} f(-.))(-x)."""

    mirrored = apply_operator(field.reflected(), p.mirrored())
    return mirrored.reflected()


def estimate_bound(field, p, cutoff=1.0):
    """Upper bound for sup|D f| from sup-norms of f' and f''.

    Returns K ||f''|| M^(2-alpha)/(2-alpha) + 4K ||f'|| M^(1-alpha)/(alpha-1)
    with K = c1 + c2.
    """

    p.check_wave_regime()
    if p.alpha == 2:
        raise ValueError("estimate_bound needs 1 < alpha < 2.")

    alpha = p.alpha
    K = _bound_constant(p)
    d1, d2, _ = field.derivatives()
    M = float(cutoff)

    return (K * np.abs(d2).max() * M**(2 - alpha) / (2 - alpha)
            + 4 * K * np.abs(d1).max() * M**(1 - alpha) / (alpha - 1))


def _bound_constant(p):
    return gamma(1 + p.alpha) / np.pi * abs(
        np.sin((p.alpha + p.theta) * np.pi / 2)
        + np.sin((p.alpha - p.theta) * np.pi / 2))


def derivative_bound(p, d1_norm, d2_norm):
    """Bound on sup|D g| from ||g'|| and ||g''|| at cutoff M = 1.

    K max{1/(2 - alpha), 4/(alpha - 1)} (||g''|| + ||g'||) for alpha < 2 and
    ||g''|| for alpha = 2.
    """

    p.check_wave_regime()
    if p.alpha == 2:
        return d2_norm

    factor = max(1.0 / (2.0 - p.alpha), 4.0 / (p.alpha - 1.0))
    return _bound_constant(p) * factor * (d2_norm + d1_norm)


def optimal_cutoff(field):
    """Cutoff M minimizing ``estimate_bound``, 4 ||f'|| / ||f''||."""

    d1, d2, _ = field.derivatives()
    first, second = np.abs(d1).max(), np.abs(d2).max()

    if first == 0:
        return 1.0
    if second == 0:
        return np.inf
    return 4.0 * first / second


_background_cache = {}
_background_lock = threading.Lock()


def background_action(grid, p, target=None):
    """Operator applied to the grid's reference ramp, cached per (grid, p).

    Parameters
    ----------
    grid : rfwave.Grid
        Grid carrying the reference ramp.

    p : rfwave.RFParams
        Operator parameters with 1 < alpha <= 2.

    target : rfwave.Grid, optional
        Grid with the same spacing on which to evaluate the action of the
        ramp on the whole line, ``grid`` if omitted.

    Returns
    -------
    values : numpy.ndarray
        Read-only array of D zeta_ref on the target grid.
    """

    p.check_wave_regime()
    target = grid if target is None else target
    key = (grid, p, target)

    with _background_lock:
        if key in _background_cache:
            logger.debug("background action cache hit for %r", p)
            return _background_cache[key]

    if p.alpha == 2:
        _, values = grid.reference_ramp_derivatives(target.x)
    else:
        ramp = Field(target, grid.reference_ramp(target.x), 0.0, 1.0)
        values = _singular_integral(ramp, p, 1.0, compensated=True)
    values = np.array(values)
    values.flags.writeable = False

    with _background_lock:
        values = _background_cache.setdefault(key, values)

    return values


def clear_background_cache():
    with _background_lock:
        _background_cache.clear()


def apply(field, p):
    """Apply the operator to a settled field of any tails.

    The decaying perturbation goes through the spectral path, the background
    ramp through the cached singular-integral action.
    """

    parts = field.decompose()
    result = apply_spectral(parts.perturbation, p)

    jump = field.tail_right - field.tail_left
    if jump == 0:
        return result

    background = jump * background_action(field.grid, p)
    return result.with_values(result.values + background)
