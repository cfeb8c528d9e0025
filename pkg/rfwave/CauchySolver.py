import json
import logging
import os

import numpy as np
from scipy.integrate import trapezoid

from rfwave.base import Base, NumericalError
from rfwave.Field import Field
from rfwave.RieszFeller import background_action, discrete_multiplier
from rfwave.StableKernel import KernelTable

logger = logging.getLogger(__name__)

blowup_margin = 1.0
ordering_tolerance = 1e-8


class SolverConfig(Base):

    """Time stepping options.

    Parameters
    ----------
    dt : float
        Time step; the last step is shortened to hit T exactly.

    T : float
        Final time, T >= dt.

    snapshot_stride : int
        Steps between recorded snapshots, every 0.1 time units if omitted.

    scheme : str
        'etd1' or 'etd2rk'.

    clamp_reaction : bool
        Use the bounded modification of the reaction term.

    ode_step : float
        Largest RK4 step for the far-field tail values.
    """

    schemes = ('etd1', 'etd2rk')

    def __init__(self, dt=5e-3, T=40.0, snapshot_stride=None, scheme='etd2rk',
                 clamp_reaction=True, ode_step=1e-3):
        self.dt = float(dt)
        self.T = float(T)
        self.snapshot_stride = snapshot_stride
        self.scheme = scheme
        self.clamp_reaction = bool(clamp_reaction)
        self.ode_step = float(ode_step)
        self._check_parameters()

    def _check_parameters(self):
        """Check the step, horizon, stride and scheme."""

        if not self.dt > 0:
            error_str = "The time step dt needs to be positive, got {}."
            raise ValueError(error_str.format(self.dt))

        if self.T < self.dt:
            error_str = "The horizon T = {} needs to be at least dt = {}."
            raise ValueError(error_str.format(self.T, self.dt))

        if self.snapshot_stride is not None and int(self.snapshot_stride) < 1:
            error_str = "The snapshot stride needs to be at least 1, got {}."
            raise ValueError(error_str.format(self.snapshot_stride))

        if self.scheme not in self.schemes:
            error_str = "Unknown scheme '{}', expected one of {}."
            raise ValueError(error_str.format(self.scheme,
                                              ", ".join(self.schemes)))

        return self

    def steps(self):
        """Number of steps and the uniform step that reaches T."""

        n_steps = max(1, int(np.ceil(self.T / self.dt - 1e-9)))
        return n_steps, self.T / n_steps

    def stride(self):
        if self.snapshot_stride is not None:
            return int(self.snapshot_stride)
        _, h = self.steps()
        return max(1, int(round(0.1 / h)))

    def as_dict(self):
        return {'dt': self.dt, 'T': self.T,
                'snapshot_stride': self.snapshot_stride,
                'scheme': self.scheme,
                'clamp_reaction': self.clamp_reaction,
                'ode_step': self.ode_step}

    def __eq__(self, other):
        attributes = ['dt', 'T', 'snapshot_stride', 'scheme',
                      'clamp_reaction', 'ode_step']
        return self._check_attr_equality(other, attributes)

    __hash__ = None


class Trajectory(Base):

    """Recorded solution of the Cauchy problem.

    Attributes
    ----------
    times : numpy.ndarray
        Snapshot times, starting at 0.

    snapshots : list of rfwave.Field
        One field per time; tails are the far-field values at that time.

    log : dict
        Per-step 'time', 'sup', 'inf', 'tail_left' and 'tail_right'.

    metadata : dict
        Run parameters. 'confined' tells whether u stayed within 1e-8 of
        [u_-, u_+] for data starting there (None otherwise), and
        'confinement_violation' is the largest excursion.
    """

    def __init__(self, times, snapshots, log, metadata=None):
        self.times = np.asarray(times, dtype=float)
        self.snapshots = snapshots
        self.log = log
        self.metadata = {} if metadata is None else metadata

    @property
    def grid(self):
        return self.snapshots[0].grid

    @property
    def final(self):
        return self.snapshots[-1]

    def values(self):
        """Snapshot values stacked into an array of shape (n_times, n)."""
        return np.array([s.values for s in self.snapshots])

    def export(self, directory):
        """Write one CSV per snapshot and a 'manifest.json'."""

        os.makedirs(directory, exist_ok=True)
        files = []
        for k, snapshot in enumerate(self.snapshots):
            name = 'snapshot_{:05d}.csv'.format(k)
            snapshot.to_csv(os.path.join(directory, name))
            files.append(name)

        manifest = dict(self.metadata)
        manifest['times'] = [float(t) for t in self.times]
        manifest['snapshots'] = files
        manifest['log'] = {k: [float(v) for v in vals]
                           for k, vals in self.log.items()}

        path = os.path.join(directory, 'manifest.json')
        with open(path, 'w') as f:
            json.dump(manifest, f, indent=2, sort_keys=True)
        return path

    def __eq__(self, other):
        attributes = ['times', 'snapshots']
        return self._check_attr_equality(other, attributes)

    __hash__ = None


def phi_functions(z, n_contour=16, radius=1.0):
    """exp(z), phi_1(z) = (e^z - 1)/z and phi_2(z) = (e^z - 1 - z)/z^2.

    Small |z| uses the mean over a circle of points around z to avoid
    cancellation.
    """

    z = np.asarray(z, dtype=complex)
    small = np.abs(z) < radius

    def direct(s):
        with np.errstate(divide='ignore', invalid='ignore'):
            e = np.exp(s)
            return (e - 1.0) / s, (e - 1.0 - s) / s**2

    phi1, phi2 = direct(np.where(small, 1.0, z))

    if np.any(small):
        roots = radius * np.exp(2j * np.pi * (np.arange(n_contour) + 0.5)
                                / n_contour)
        circle = z[small][:, None] + roots[None, :]
        c1, c2 = direct(circle)
        phi1[small] = c1.mean(axis=1)
        phi2[small] = c2.mean(axis=1)

    return np.exp(z), phi1, phi2


def _rk4(f, u, h, n_steps):
    for _ in range(n_steps):
        k1 = f(u)
        k2 = f(u + 0.5 * h * k1)
        k3 = f(u + 0.5 * h * k2)
        k4 = f(u + h * k3)
        u = u + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return u


def far_field_ode(u_limit, b, T, dt=1e-3):
    """RK4 solution of u' = f(u) from u_limit.

    Returns
    -------
    times, values : numpy.ndarray
    """

    n_steps = max(1, int(np.ceil(T / dt - 1e-9)))
    h = T / n_steps
    values = np.empty(n_steps + 1)
    values[0] = u_limit
    for k in range(n_steps):
        values[k + 1] = _rk4(b, values[k], h, 1)
    return np.linspace(0.0, T, n_steps + 1), values


class _MildProblem(object):

    """Split u = ubar(t) + w with ubar = u_-(t) + (u_+(t) - u_-(t)) zeta_ref.

    w solves w_t = D w + N(w, t) on the periodic extended grid with
    N = (u_+ - u_-) D zeta_ref + f(u) - [f(u_-)(1 - zeta) + f(u_+) zeta],
    where D zeta_ref is the action on the whole line. The physical grid is
    the middle slice of the extended one.
    """

    def __init__(self, grid, p, reaction, ode_step):
        self.grid = grid
        self.wide = grid.extended()
        self.inner = grid.inner_slice(self.wide)
        self.reaction = reaction
        self.ode_step = ode_step
        self.ramp = grid.reference_ramp(self.wide.x)
        self.symbol = discrete_multiplier(p, self.wide, self.wide.n_points)
        self.background = background_action(grid, p, self.wide)

    def f(self, u):
        if self.reaction is None:
            return np.zeros_like(u)
        return self.reaction(u)

    def compose(self, w, tails):
        tail_left, tail_right = tails
        return tail_left + (tail_right - tail_left) * self.ramp + w

    def lift(self, values, tails):
        """Perturbation on the extended grid, zero outside the grid."""

        w = np.zeros(self.wide.n_points)
        w[self.inner] = values - self.compose(0.0, tails)[self.inner]
        return w

    def restrict(self, w, tails):
        return self.compose(w, tails)[self.inner]

    def forcing(self, w, tails):
        tail_left, tail_right = tails
        u = self.compose(w, tails)
        ramp_reaction = (self.f(np.float64(tail_left)) * (1.0 - self.ramp)
                         + self.f(np.float64(tail_right)) * self.ramp)
        return ((tail_right - tail_left) * self.background + self.f(u)
                - ramp_reaction)

    def advance_tails(self, tails, h):
        if self.reaction is None:
            return tails
        n_sub = max(1, int(np.ceil(h / self.ode_step - 1e-9)))
        return tuple(float(_rk4(self.reaction, np.float64(u), h / n_sub,
                                n_sub)) for u in tails)


def _reaction(b, clamp):
    if b is None:
        return None
    return b.clamp() if clamp else b


def _check_initial_data(u0, b, p):
    p.check_wave_regime()
    u0.check_settled()

    if b is not None:
        lower, upper = b.u_minus - 0.5, b.u_plus + 0.5
        if u0.values.min() < lower or u0.values.max() > upper:
            error_str = ("The initial data need to lie in [{}, {}], got "
                         "[{:.4g}, {:.4g}].")
            raise ValueError(error_str.format(lower, upper, u0.values.min(),
                                              u0.values.max()))


def _confinement_range(u0, b):
    """[u_-, u_+] if the data start inside it, otherwise None."""

    if b is None:
        return None
    lower, upper = b.u_minus, b.u_plus
    values = np.concatenate([u0.values, [u0.tail_left, u0.tail_right]])
    if values.min() < lower - ordering_tolerance or \
            values.max() > upper + ordering_tolerance:
        return None
    return lower, upper


def evolve(u0, b, p, cfg=None):
    """Solve u_t = D u + f(u) by exponential time differencing.

    Parameters
    ----------
    u0 : rfwave.Field
        Initial data with settled tails.

    b : rfwave.Bistable
        Reaction term, or None for the linear equation.

    p : rfwave.RFParams
        Operator parameters, 1 < alpha <= 2.

    cfg : rfwave.SolverConfig
        Stepping options.

    Returns
    -------
    trajectory : rfwave.Trajectory
    """

    cfg = SolverConfig() if cfg is None else cfg
    _check_initial_data(u0, b, p)

    grid = u0.grid
    problem = _MildProblem(grid, p, _reaction(b, cfg.clamp_reaction),
                           cfg.ode_step)
    n_steps, h = cfg.steps()
    stride = cfg.stride()
    E, phi1, phi2 = phi_functions(h * problem.symbol)

    if b is None:
        bound = np.abs(u0.values).max() + blowup_margin
    else:
        bound = b.u_plus + blowup_margin

    confinement = _confinement_range(u0, b)
    worst = 0.0

    tails = (u0.tail_left, u0.tail_right)
    w = problem.lift(u0.values, tails)

    times, snapshots = [0.0], [u0]
    log = {'time': [0.0], 'sup': [u0.values.max()], 'inf': [u0.values.min()],
           'tail_left': [tails[0]], 'tail_right': [tails[1]]}

    logger.info("evolving %d steps of %.3e with %s on %r (period %d)",
                n_steps, h, cfg.scheme, grid, problem.wide.n_points)

    for step in range(1, n_steps + 1):
        forcing = np.fft.fft(problem.forcing(w, tails))
        w_hat = E * np.fft.fft(w) + h * phi1 * forcing
        new_tails = problem.advance_tails(tails, h)

        if cfg.scheme == 'etd2rk':
            stage = np.fft.ifft(w_hat).real
            stage_forcing = np.fft.fft(problem.forcing(stage, new_tails))
            w_hat = w_hat + h * phi2 * (stage_forcing - forcing)

        w = np.fft.ifft(w_hat).real
        tails = new_tails
        t = step * h

        sup = np.abs(problem.compose(w, tails)).max()
        if not np.isfinite(sup) or sup > bound:
            error_str = ("The solution blew up at t = {:.4g}: sup|u| = {:.4g} "
                         "exceeds {:.4g}; reduce dt or clamp the reaction.")
            raise NumericalError(error_str.format(t, sup, bound))

        u = problem.restrict(w, tails)
        log['time'].append(t)
        log['sup'].append(u.max())
        log['inf'].append(u.min())
        log['tail_left'].append(tails[0])
        log['tail_right'].append(tails[1])

        if confinement is not None:
            lower, upper = confinement
            violation = max(lower - u.min(), u.max() - upper, 0.0)
            if violation > ordering_tolerance >= worst:
                logger.warning("u left [%g, %g] by %.3e at t = %.4g", lower,
                               upper, violation, t)
            worst = max(worst, violation)

        if step % stride == 0 or step == n_steps:
            times.append(t)
            snapshots.append(Field(grid, u, tails[0], tails[1],
                                   u0.tail_tolerance))

    logger.info("evolution finished at t = %.4g: range [%.6g, %.6g]",
                times[-1], min(log['inf']), max(log['sup']))

    metadata = {'alpha': p.alpha, 'theta': p.theta,
                'nonlinearity': None if b is None else b.spec(),
                'config': cfg.as_dict(),
                'confined': None, 'confinement_violation': None}
    if confinement is not None:
        metadata['confined'] = bool(worst <= ordering_tolerance)
        metadata['confinement_violation'] = float(worst)
    return Trajectory(times, snapshots, log, metadata)


def picard_iterate(u0, b, p, T, n_iter, n_nodes=64, clamp_reaction=True,
                   full_output=False):
    """Picard iteration of the mild formulation up to time T.

    The time integral uses the product trapezoid rule on ``n_nodes``
    intervals: the semigroup is integrated exactly against the piecewise
    linear interpolant of the forcing.

    Parameters
    ----------
    u0 : rfwave.Field
        Initial data with settled tails.

    b : rfwave.Bistable
        Reaction term, or None for the linear equation.

    p : rfwave.RFParams
        Operator parameters.

    T : float
        Horizon, 0 < T <= 0.5.

    n_iter : int
        Number of sweeps, at least 1.

    full_output : bool
        Also return the sup-distances between successive iterates.

    Returns
    -------
    field : rfwave.Field
        The last iterate at time T.

    distances : list of float
        Only if ``full_output``.
    """

    if not 0 < T <= 0.5:
        error_str = "The Picard horizon needs 0 < T <= 0.5, got {}."
        raise ValueError(error_str.format(T))

    if n_iter < 1:
        error_str = "The number of Picard sweeps needs to be >= 1, got {}."
        raise ValueError(error_str.format(n_iter))

    _check_initial_data(u0, b, p)
    problem = _MildProblem(u0.grid, p, _reaction(b, clamp_reaction), 1e-3)

    h = T / n_nodes
    E, phi1, phi2 = phi_functions(h * problem.symbol)
    start, end = h * (phi1 - phi2), h * phi2

    tails = [(u0.tail_left, u0.tail_right)]
    for _ in range(n_nodes):
        tails.append(problem.advance_tails(tails[-1], h))

    w0 = problem.lift(u0.values, tails[0])
    w0_hat = np.fft.fft(w0)
    iterate = [w0] * (n_nodes + 1)
    distances = []

    for k in range(n_iter):
        forcing = [np.fft.fft(problem.forcing(w, tl))
                   for w, tl in zip(iterate, tails)]

        current, new = w0_hat, [w0]
        for j in range(1, n_nodes + 1):
            current = E * current + start * forcing[j - 1] + end * forcing[j]
            new.append(np.fft.ifft(current).real)

        distance = max(np.abs(w_new - w_old).max()
                       for w_new, w_old in zip(new, iterate))
        scale = max(1.0, np.abs(new[-1]).max())
        if distances and distance > distances[-1] and \
                distance > 1e-12 * scale:
            error_str = ("The Picard iteration is not contracting: sweep {} "
                         "moved {:.3e}, more than the previous {:.3e}.")
            raise NumericalError(error_str.format(k + 1, distance,
                                                  distances[-1]))

        logger.debug("Picard sweep %d: distance %.3e", k + 1, distance)
        distances.append(distance)
        iterate = new

    final = tails[-1]
    field = Field(u0.grid, problem.restrict(iterate[-1], final), final[0],
                  final[1], u0.tail_tolerance)

    if full_output:
        return field, distances
    return field


def eta_lower_bound(m, t, K2, kernel, n_samples=2001):
    """exp(-K2 t) min of G(z, t) over z in [-m - 1, m]."""

    if not t > 0:
        error_str = "The time t needs to be greater than zero, got {}."
        raise ValueError(error_str.format(t))

    z = np.linspace(-m - 1.0, m, n_samples)
    return np.exp(-K2 * t) * kernel.eval(z, t).min()


class ComparisonReport(Base):

    """Outcome of evolving two ordered initial data.

    Attributes
    ----------
    times, min_differences : numpy.ndarray
        Snapshot times and min(v - u) there.

    ordered : bool
        Whether min(v - u) >= -1e-8 max(1, sup|v - u|) at every snapshot.

    K2 : float
        Bound on |f'| along both trajectories plus one.

    initial_mass : float
        Integral of v0 - u0 over [0, 1].

    probes : list of dict
        One row per probe (x, t) with the measured difference, the lower
        bound eta * initial_mass and the verdict.
    """

    def __init__(self, times, min_differences, ordered, K2, initial_mass,
                 probes):
        self.times = times
        self.min_differences = min_differences
        self.ordered = ordered
        self.K2 = K2
        self.initial_mass = initial_mass
        self.probes = probes

    @property
    def certified(self):
        return all(row['passed'] for row in self.probes)

    @property
    def passed(self):
        return self.ordered and self.certified

    def as_dict(self):
        return {'times': [float(t) for t in self.times],
                'min_differences': [float(d) for d in self.min_differences],
                'ordered': self.ordered, 'K2': self.K2,
                'initial_mass': self.initial_mass, 'probes': self.probes,
                'certified': self.certified}


def compare_evolutions(u0, v0, b, p, cfg=None, kernel=None,
                       probe_x=(0.0, -5.0, 5.0), probe_t=(0.5, 1.0)):
    """Evolve u0 <= v0 and check ordering and the positivity lower bound.

    Parameters
    ----------
    u0, v0 : rfwave.Field
        Ordered initial data on the same grid.

    b : rfwave.Bistable
        Reaction term.

    p : rfwave.RFParams
        Operator parameters.

    cfg : rfwave.SolverConfig
        Stepping options shared by both runs.

    kernel : rfwave.KernelTable
        Kernel of D for the lower bound, built if omitted.

    Returns
    -------
    report : rfwave.ComparisonReport
    """

    if u0.grid != v0.grid:
        raise ValueError("The two initial data need to share one grid.")

    gap = v0.values - u0.values
    if gap.min() < 0 or v0.tail_left < u0.tail_left or \
            v0.tail_right < u0.tail_right:
        error_str = ("The initial data need u0 <= v0 everywhere, got "
                     "min(v0 - u0) = {:.3e}.")
        raise ValueError(error_str.format(gap.min()))

    cfg = SolverConfig(T=max(probe_t)) if cfg is None else cfg
    kernel = KernelTable.build(p) if kernel is None else kernel

    lower = evolve(u0, b, p, cfg)
    upper = evolve(v0, b, p, cfg)

    differences = upper.values() - lower.values()
    min_differences = differences.min(axis=1)
    scale = max(1.0, np.abs(differences).max())
    ordered = bool(np.all(min_differences >= -ordering_tolerance * scale))

    u = np.linspace(0.0, 1.0, 2001)
    visited = np.concatenate((lower.values().ravel(), upper.values().ravel(),
                              u))
    K2 = np.abs(b.eval_df(visited)).max() + 1.0

    unit = np.linspace(0.0, 1.0, 1001)
    initial_mass = trapezoid(v0.sample(unit) - u0.sample(unit), unit)

    probes = []
    for t in probe_t:
        k = int(np.argmin(np.abs(lower.times - t)))
        t_k = lower.times[k]
        gap_k = upper.snapshots[k] - lower.snapshots[k]
        for x in probe_x:
            measured = float(gap_k.sample(x))
            bound = eta_lower_bound(abs(x), t_k, K2, kernel) * initial_mass
            probes.append({'x': float(x), 't': float(t_k),
                           'difference': measured, 'lower_bound': float(bound),
                           'passed': bool(measured >= bound
                                          - ordering_tolerance * scale)})

    report = ComparisonReport(lower.times, min_differences, ordered, K2,
                              initial_mass, probes)
    logger.info("comparison: ordered %s, lower-bound certificate %s",
                report.ordered, report.certified)
    return report
