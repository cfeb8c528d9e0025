import json
import logging

import numpy as np
from scipy.optimize import brentq

from rfwave.base import Base, NumericalError, smoothstep, \
    smoothstep_derivatives
from rfwave.Field import Field
from rfwave.Grid import Grid
from rfwave.RieszFeller import apply, derivative_bound

logger = logging.getLogger(__name__)

kinds = ('wave_supersolution', 'wave_subsolution', 'ramp_supersolution',
         'ramp_subsolution')

# zeta(s) = smoothstep(s/4): sup |zeta'| and sup |zeta''|
zeta_d1_norm = 30.0 / 16.0 / 4.0
zeta_d2_norm = 10.0 / np.sqrt(3.0) / 16.0


class Certificate(Base):

    """Sign check of a sub- or supersolution on a probe lattice.

    Attributes
    ----------
    kind : str
        One of 'wave_supersolution', 'wave_subsolution',
        'ramp_supersolution' and 'ramp_subsolution'.

    constants : dict
        The constants the function was built from.

    margin : float
        Worst signed residual: the minimum of w_t - D w - f(w) for a
        supersolution, minus its maximum for a subsolution.

    tolerance : float
        The certificate passes if margin >= -tolerance.

    probe_count : int
        Number of lattice points evaluated.
    """

    def __init__(self, kind, constants, margin, tolerance, probe_count):
        if kind not in kinds:
            error_str = "Unknown certificate kind '{}', expected one of {}."
            raise ValueError(error_str.format(kind, ", ".join(kinds)))

        self.kind = kind
        self.constants = constants
        self.margin = float(margin)
        self.tolerance = float(tolerance)
        self.probe_count = int(probe_count)

    @property
    def passed(self):
        return self.margin >= -self.tolerance

    def as_dict(self):
        return {'kind': self.kind,
                'constants': {k: float(v) for k, v in self.constants.items()},
                'worst_residual_sign_margin': self.margin,
                'tolerance': self.tolerance,
                'probe_count': self.probe_count, 'passed': self.passed}

    def export(self, path):
        with open(path, 'w') as f:
            json.dump(self.as_dict(), f, indent=2, sort_keys=True)
        return path

    def __eq__(self, other):
        attributes = ['kind', 'constants', 'margin', 'tolerance',
                      'probe_count']
        return self._check_attr_equality(other, attributes)

    __hash__ = None


def probe_times(n_t=13, t_max=3.0):
    """n_t times log-spaced in (0.01, t_max]."""
    return np.geomspace(0.01, t_max, n_t)


def _min_decay(b, lower, upper, n=4001):
    """min of -f' on [lower, upper]."""
    return (-b.eval_df(np.linspace(lower, upper, n))).min()


def delta_star(b):
    """Largest delta_* with -f' >= beta on [1 - 2 delta_*, 1 + delta_*]
    and on [-delta_*, 2 delta_*]."""

    beta = b.beta()

    def slack(delta):
        return min(_min_decay(b, 1.0 - 2.0 * delta, 1.0 + delta),
                   _min_decay(b, -delta, 2.0 * delta)) - beta

    return brentq(slack, 1e-12, 0.5, xtol=1e-14)


def plateau_radius(profile, delta):
    """Smallest grid M with U > 1 - delta for xi >= M, U < delta for
    xi <= -M."""

    x, U = profile.x, profile.values
    low = x[(x > 0) & (U <= 1.0 - delta)]
    high = x[(x < 0) & (U >= delta)]
    M = max(low.max() if len(low) else 0.0,
            -high.min() if len(high) else 0.0) + profile.grid.dx

    if M >= 0.75 * profile.grid.half_width:
        error_str = ("The profile does not settle to within delta_* = "
                     "{:.3e} of its limits inside |xi| < 0.75 L; extract on "
                     "a larger domain.")
        raise NumericalError(error_str.format(delta))
    return M


def _profile_slope(profile):
    settled = profile.with_values(profile.values, profile.values[0],
                                  profile.values[-1])
    d1, _, _ = settled.derivatives()
    return Field(profile.grid, d1)


def certify_wave_barriers(w, b, p, delta=None, tolerance=None, xi_anchor=0.0,
                          n_x=41, n_t=13, t_max=3.0):
    """Check the shifted-wave pair w^+- built on an extracted wave.

    w^+-(x, t) = U(x - ct + xi_0 +- sigma delta (1 - exp(-beta t)))
    +- delta exp(-beta t) with beta = min{-f'(0), -f'(1)}/2. delta_*, M
    and sigma are chosen as in the construction: -f' >= beta near the
    stable roots, U within delta_* of its limits beyond M, and
    sigma = (||f'||_[-1, 2] + beta) / (beta inf_|y|<=M U').

    Parameters
    ----------
    w : rfwave.WaveExtraction
        Extracted wave (U, c).

    b : rfwave.Bistable
        Reaction term with roots 0 < a < 1.

    p : rfwave.RFParams
        Operator parameters.

    delta : float
        Lift, 0 < delta <= delta_*; delta_*/2 if omitted.

    tolerance : float
        Allowed sign violation, max(1e-5, 3 residual_sup) if omitted.

    Returns
    -------
    supersolution, subsolution : rfwave.Certificate
    """

    beta = b.beta()
    d_star = delta_star(b)
    delta = 0.5 * d_star if delta is None else float(delta)

    if not 0 < delta <= d_star:
        error_str = "The lift delta = {} needs 0 < delta <= delta_* = {}."
        raise ValueError(error_str.format(delta, d_star))

    if tolerance is None:
        tolerance = max(1e-5, 3.0 * w.residual_sup)
    if tolerance > delta * beta:
        error_str = ("The extraction residual {:.3e} is too large to "
                     "certify: the tolerance {:.3e} exceeds delta beta = "
                     "{:.3e}.")
        raise NumericalError(error_str.format(w.residual_sup, tolerance,
                                              delta * beta))

    U, c = w.profile, w.speed
    slope = _profile_slope(U)
    action = Field(U.grid, w.operator_action.values)

    M = plateau_radius(U, d_star)
    inner = np.abs(U.x) <= M
    inf_slope = slope.values[inner].min()
    if not inf_slope > 0:
        error_str = ("The profile is not strictly increasing on |xi| <= M = "
                     "{:.4g}: inf U' = {:.3e}.")
        raise NumericalError(error_str.format(M, inf_slope))

    sigma = (b.derivative_norm(-1.0, 2.0) + beta) / (beta * inf_slope)
    constants = {'delta': delta, 'delta_star': d_star, 'sigma_star': sigma,
                 'beta': beta, 'M': M, 'xi_anchor': xi_anchor}

    L = U.grid.half_width
    x = np.linspace(-0.5 * L, 0.5 * L, n_x)[:, None]
    t = probe_times(n_t, t_max)[None, :]
    decay = np.exp(-beta * t)

    margins = {}
    pairs = ((1.0, 'wave_supersolution'), (-1.0, 'wave_subsolution'))
    for sign, kind in pairs:
        y = x - c * t + xi_anchor + sign * sigma * delta * (1.0 - decay)
        lifted = U.sample(y) + sign * delta * decay
        residual = (slope.sample(y) * (-c + sign * sigma * delta * beta
                                       * decay)
                    - sign * delta * beta * decay - action.sample(y)
                    - b(lifted))
        margins[kind] = residual.min() if sign > 0 else -residual.max()

    certificates = tuple(Certificate(kind, constants, margins[kind],
                                     tolerance, n_x * n_t)
                         for _, kind in pairs)
    logger.info("shifted-wave certificates: margins %.3e / %.3e, tolerance "
                "%.1e, sigma %.4g, M %.4g", margins['wave_supersolution'],
                margins['wave_subsolution'], tolerance, sigma, M)
    return certificates


def check_selection(certificate, w, b, n=20001):
    """Re-check the constants of a shifted-wave certificate.

    Returns
    -------
    checks : dict
        One verdict per selection inequality: 'decay_upper' and
        'decay_lower' for -f' >= beta near 1 and 0, 'plateau' for the
        radius M and 'sigma' for the shift rate.
    """

    k = certificate.constants
    d, beta, M = k['delta_star'], k['beta'], k['M']

    near_one = np.linspace(1.0 - 2.0 * d, 1.0 + d, n)
    near_zero = np.linspace(-d, 2.0 * d, n)

    U = w.profile
    beyond = np.linspace(M, U.grid.half_width, n)
    fine = np.linspace(-M, M, n)
    slope = _profile_slope(U)

    sigma_needed = ((np.abs(b.eval_df(np.linspace(-1.0, 2.0, n))).max()
                     + beta) / (beta * slope.sample(fine).min()))

    return {'decay_upper': bool((-b.eval_df(near_one)).min()
                                >= beta * (1 - 1e-9)),
            'decay_lower': bool((-b.eval_df(near_zero)).min()
                                >= beta * (1 - 1e-9)),
            'plateau': bool(U.sample(beyond).min() > 1.0 - d
                            and U.sample(-beyond).max() < d),
            'sigma': bool(k['sigma_star'] >= sigma_needed * (1 - 1e-3))}


def _zeta_action(p, half_width=32.0, n_points=4097):
    """D zeta for zeta(s) = smoothstep(s/4) on an s-grid."""

    grid = Grid(half_width, n_points)
    zeta = Field(grid, smoothstep(grid.x / 4.0), 0.0, 1.0)
    return apply(zeta, p)


def _zeta_slope(s):
    d1, _ = smoothstep_derivatives(s / 4.0)
    return d1 / 4.0


def _select_rate_and_drift(b, p, delta):
    """Rate epsilon and drift K for the lower zeta barrier.

    epsilon is halved until epsilon + rho(epsilon) is at most half the
    reaction margin mu = min f on [-delta, -delta/2] and [a + delta/2,
    1 - delta]; then K makes K epsilon (a + 2 delta) zeta' beat
    epsilon + rho + max(-f) on the band [-delta/2, a + delta/2].
    """

    a = b.a
    mu = min(b(np.linspace(-delta, -0.5 * delta, 2001)).min(),
             b(np.linspace(a + 0.5 * delta, 1.0 - delta, 2001)).min())
    if not mu > 0:
        error_str = ("The reaction has no positive margin outside the band "
                     "for delta = {}: min f = {:.3e}.")
        raise NumericalError(error_str.format(delta, mu))

    eps = 0.5
    for _ in range(60):
        rho = derivative_bound(p, eps * zeta_d1_norm, eps**2 * zeta_d2_norm)
        if eps + rho <= 0.5 * mu:
            break
        eps *= 0.5
    else:
        raise NumericalError("No admissible rate epsilon found for the "
                             "zeta barriers.")

    band = np.linspace(-0.5 * delta, a + 0.5 * delta, 4001)
    deficit = max(0.0, (-b(band)).max())

    def level(value):
        t = brentq(lambda t: smoothstep(t) - value, 0.0, 1.0, xtol=1e-14)
        return _zeta_slope(4.0 * t)

    slope_min = min(level(0.5 * delta),
                    level((a + 1.5 * delta) / (a + 2.0 * delta)))
    K = 1.1 * (eps + rho + deficit) / (eps * (a + 2.0 * delta) * slope_min)

    return {'epsilon': eps, 'K_speed': K, 'rho': rho, 'reaction_margin': mu,
            'zeta_prime_min': slope_min}


def _lower_barrier_residual(b, p, delta, constants, s, t):
    """w_t - D w - f(w) for w = -delta + A(t) zeta(s), s = eps(x - xi - Kt)
    and A(t) = 1 - (1 - a - 2 delta) exp(-eps t)."""

    eps, K = constants['epsilon'], constants['K_speed']
    gap = (1.0 - b.a - 2.0 * delta) * np.exp(-eps * t)
    A = 1.0 - gap

    zeta = smoothstep(s / 4.0)
    action = _zeta_action(p).sample(s)
    w = -delta + A * zeta

    w_t = eps * gap * zeta - A * _zeta_slope(s) * eps * K
    return w_t - A * eps**p.alpha * action - b(w)


def certify_ramp_barriers(b, p, delta, tolerance=1e-5, xi_anchor=0.0,
                          n_s=41, n_t=13, t_max=3.0):
    """Check the zeta barriers w^+- that need no traveling wave.

    w^-(x, t) = -delta + [1 - (1 - a - 2 delta) exp(-eps t)]
    zeta(eps(x - xi - K t)) and w^+ its mirror image
    1 + delta - [1 - (a - 2 delta) exp(-eps t)] zeta(-eps(x - xi + K t)),
    checked through the mirrored reaction -f(1 - v) and skewness -theta.
    The probes cover zeta's transition s in [-1, 5] for the rescaled
    variable s = eps(x - xi -+ K t).

    Parameters
    ----------
    b : rfwave.Bistable
        Reaction term with roots 0 < a < 1.

    p : rfwave.RFParams
        Operator parameters.

    delta : float
        Lift, 0 < delta <= min{a/2, (1 - a)/2}.

    Returns
    -------
    supersolution, subsolution : rfwave.Certificate
    """

    b.check_normalized()
    bound = min(0.5 * b.a, 0.5 * (1.0 - b.a))
    if not 0 < delta <= bound:
        error_str = ("The lift delta = {} needs 0 < delta <= min{{a/2, "
                     "(1 - a)/2}} = {}.")
        raise ValueError(error_str.format(delta, bound))

    s = np.linspace(-1.0, 5.0, n_s)[:, None]
    t = probe_times(n_t, t_max)[None, :]

    results = []
    for kind, b_k, p_k in (('ramp_supersolution', b.mirrored(), p.mirrored()),
                           ('ramp_subsolution', b, p)):
        constants = _select_rate_and_drift(b_k, p_k, delta)
        residual = _lower_barrier_residual(b_k, p_k, delta, constants, s, t)
        constants.update({'delta': delta, 'xi_anchor': xi_anchor})

        # the mirror image of a subsolution is a supersolution
        margin = -residual.max()
        results.append(Certificate(kind, constants, margin, tolerance,
                                   n_s * n_t))
        logger.info("%s: epsilon %.3e, K %.4g, margin %.3e", kind,
                    constants['epsilon'], constants['K_speed'], margin)

    return tuple(results)
