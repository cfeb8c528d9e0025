"""Command line driver: run one experiment config and write its RunRecord.

    rfwave <operation> --config <path> [--out <dir>] [--seed <int>]
                       [--jobs <n>] [-v]
"""
import argparse
import json
import logging
import os
import sys
import time
import traceback
from concurrent.futures import ProcessPoolExecutor, as_completed
from importlib import metadata

import numpy as np

from rfwave.base import Base, NumericalError, smoothstep
from rfwave.Certificates import (
        certify_wave_barriers,
        certify_ramp_barriers,
        check_selection
    )
from rfwave.CauchySolver import evolve
from rfwave.Field import Field
from rfwave.read_config import (
        ExperimentConfig,
        operations,
        read_experiment_config
    )
from rfwave.RieszFeller import (
        apply,
        apply_integral,
        apply_spectral,
        estimate_bound
    )
from rfwave.StableKernel import KernelTable
from rfwave.TravelingWave import (
        extract_wave,
        initial_zeta,
        speed_bound,
        stability_experiment
    )

logger = logging.getLogger(__name__)

handled_errors = (ValueError, TypeError, NumericalError)


def _version():
    try:
        return metadata.version("rfwave")
    except metadata.PackageNotFoundError:
        return "unknown"


def _plain(value):
    """Convert numpy scalars, arrays and tuples to JSON-native values."""

    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_plain(v) for v in value]
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


class RunRecord(Base):

    """Outcome of one run.

    Attributes
    ----------
    config : dict
        Echo of the experiment config.

    version : str
        Installed rfwave version.

    wall_time : float
        Seconds spent in the operation.

    metrics : dict
        Headline numbers of the operation.

    assertions : dict
        Verdict per named check.

    error : dict or None
        'module', 'type' and 'message' of the error that stopped the run.
    """

    def __init__(self, config, version, wall_time, metrics, assertions,
                 error=None):
        self.config = _plain(config)
        self.version = version
        self.wall_time = float(wall_time)
        self.metrics = _plain(metrics)
        self.assertions = {k: bool(v) for k, v in assertions.items()}
        self.error = error

    @property
    def passed(self):
        return self.error is None and all(self.assertions.values())

    def as_dict(self):
        return {'config': self.config, 'version': self.version,
                'wall_time': self.wall_time, 'metrics': self.metrics,
                'assertions': self.assertions, 'error': self.error,
                'passed': self.passed}

    def to_json(self):
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        return cls(data['config'], data['version'], data['wall_time'],
                   data['metrics'], data['assertions'], data['error'])

    def export(self, path):
        with open(path, 'w', encoding='utf-8') as f:
            f.write(self.to_json())
        return path

    def __eq__(self, other):
        attributes = ['config', 'version', 'wall_time', 'metrics',
                      'assertions', 'error']
        return self._check_attr_equality(other, attributes)

    __hash__ = None


def _origin(error):
    """Dotted name of the package module the error was raised in."""

    package = os.path.dirname(os.path.abspath(__file__))
    for frame in reversed(traceback.extract_tb(error.__traceback__)):
        path = os.path.abspath(frame.filename)
        if os.path.dirname(path) == package:
            return 'rfwave.' + os.path.splitext(os.path.basename(path))[0]
    return type(error).__module__


def _normalized(b):
    if b.is_normalized():
        return b
    logger.info("normalizing the roots of %r to [0, 1]", b)
    return b.normalized()


def _seed_field(config, b):
    zeta = initial_zeta(config.grid)
    width = b.u_plus - b.u_minus
    return zeta.with_values(b.u_minus + width * zeta.values, b.u_minus,
                            b.u_plus)


def _bump(grid, amplitude, radius=4.0):
    return Field(grid, amplitude * smoothstep(1.0 - np.abs(grid.x) / radius))


def run_kernel(config, out):
    p, v = config.params, config.values
    kernel = KernelTable.build(p, v['x_max'], v['kernel_n'])
    kernel.export(os.path.join(out, 'kernel'))
    report = kernel.check_properties()

    assertions = {
        'mass_defect': report.mass_defect <= 1e-6,
        'min_value': report.min_value >= -1e-12,
        'positive': report.positive,
        'scaling': report.scaling_deviation <= 1e-5,
        'semigroup': max(report.semigroup_defects.values()) <= 1e-5,
    }
    if p.alpha < 2:
        for side, slope in zip(('left', 'right'), report.tail_slopes):
            if slope is not None:
                assertions['tail_slope_' + side] = \
                    abs(slope + 1.0 + p.alpha) <= 0.1

    return report.as_dict(), assertions


def run_opcheck(config, out):
    """Eigen test of the spectral path, cross checks of the integral path
    and the derivative bound on seeded random bumps."""

    grid, p = config.grid, config.params
    x = grid.x
    rng = np.random.default_rng(config.values['seed'])

    # plane wave with k close to 1 that is periodic on n dx
    period = grid.n_points * grid.dx
    k = 2.0 * np.pi * max(1, round(period / (2.0 * np.pi))) / period
    wave = Field(grid, np.cos(k * x))
    exact = -k**p.alpha * np.cos(k * x - p.theta * np.pi / 2)
    eigen_error = (np.abs(apply_spectral(wave, p, periodic=True).values
                          - exact).max() / k**p.alpha)

    metrics = {'eigen_error': eigen_error}
    assertions = {'eigen': eigen_error <= 1e-8}

    bump = Field(grid, np.exp(-x**2))
    spectral = apply_spectral(bump, p)

    if p.alpha == 2:
        exact = (4 * x**2 - 2) * np.exp(-x**2)
        metrics['laplacian_error'] = np.abs(spectral.values - exact).max()
        assertions['laplacian'] = metrics['laplacian_error'] <= 1e-8
        return metrics, assertions

    integral = apply_integral(bump, p)
    metrics['bump_difference'] = np.abs(integral.values
                                        - spectral.values).max()
    assertions['bump_paths_agree'] = metrics['bump_difference'] <= 1e-4

    front = Field.from_function(grid, lambda s: 0.5 * (1 + np.tanh(s)), 0.0,
                                1.0)
    metrics['front_difference'] = np.abs(apply(front, p).values
                                         - apply_integral(front, p).values
                                         ).max()
    assertions['front_paths_agree'] = metrics['front_difference'] <= 1e-4

    ratios, integral_ratios = [], []
    for _ in range(5):
        center = rng.uniform(-5.0, 5.0)
        radius = rng.uniform(1.0, 4.0)
        amplitude = rng.uniform(-1.0, 1.0)
        field = Field(grid, amplitude * smoothstep(
            1.0 - np.abs(x - center) / radius))
        bound = estimate_bound(field, p)
        ratios.append(np.abs(apply_spectral(field, p).values).max() / bound)
        integral_ratios.append(
            np.abs(apply_integral(field, p).values).max() / bound)
    metrics['bound_ratios'] = ratios
    metrics['integral_bound_ratios'] = integral_ratios
    assertions['bound_dominates'] = max(ratios) <= 1.0
    assertions['bound_dominates_integral'] = max(integral_ratios) <= 1.0

    return metrics, assertions


def run_evolve(config, out):
    b, p = config.nonlinearity, config.params
    traj = evolve(_seed_field(config, b), b, p, config.solver)
    traj.export(os.path.join(out, 'trajectory'))

    lower, upper = min(traj.log['inf']), max(traj.log['sup'])
    steps = np.diff(traj.final.values)
    metrics = {'final_time': traj.times[-1], 'inf': lower, 'sup': upper,
               'confinement_violation':
                   traj.metadata['confinement_violation'],
               'tail_left': traj.final.tail_left,
               'tail_right': traj.final.tail_right,
               'min_difference': steps.min()}
    assertions = {'confined': traj.metadata['confined'] is True,
                  'monotone': steps.min() >= -1e-8}
    return metrics, assertions


def _wave(config):
    b, p = _normalized(config.nonlinearity), config.params
    traj = evolve(_seed_field(config, b), b, p, config.solver)
    return extract_wave(traj, b, p), b


def run_wave(config, out):
    p = config.params
    w, b = _wave(config)
    w.export(os.path.join(out, 'wave'))

    metrics = w.as_dict()
    assertions = {}

    try:
        metrics['monotone_min_difference'] = w.check_monotone()
        assertions['monotone'] = True
    except NumericalError as e:
        logger.warning("%s", e)
        assertions['monotone'] = False

    c, sign = w.speed, b.predicted_speed_sign()
    if sign == 0:
        assertions['speed_sign'] = abs(c) <= 1e-3
    else:
        assertions['speed_sign'] = np.sign(c) == sign

    if p.alpha == 2 and b.kind == 'cubic':
        metrics['c_exact'] = -np.sqrt(2.0) * (0.5 - b.a)
        assertions['speed_magnitude'] = \
            abs(c - metrics['c_exact']) <= 0.01 * max(abs(metrics['c_exact']),
                                                      1e-3)

    if p.theta == 0:
        metrics['c_formula'] = w.speed_from_formula()
        if abs(c) > 1e-3:
            assertions['speed_formula'] = \
                abs(c - metrics['c_formula']) <= 0.05 * abs(c)

    if p.alpha < 2:
        metrics['speed_bound'] = speed_bound(b, p)
        assertions['speed_bound'] = abs(c) <= metrics['speed_bound']

    return metrics, assertions


def run_certify(config, out):
    v = config.values
    w, b = _wave(config)
    p = config.params

    certificates = list(certify_wave_barriers(w, b, p, v['delta_wave']))
    certificates += list(certify_ramp_barriers(b, p, v['delta_ramp']))

    metrics, assertions = {'c': w.speed}, {}
    for certificate in certificates:
        certificate.export(os.path.join(
            out, 'certificate_{}.json'.format(certificate.kind)))
        metrics[certificate.kind] = certificate.as_dict()
        assertions[certificate.kind] = certificate.passed

    for name, verdict in check_selection(certificates[0], w, b).items():
        assertions['selection_' + name] = verdict

    return metrics, assertions


def run_stability(config, out):
    v = config.values
    w, b = _wave(config)
    perturbation = _bump(config.grid, v['bump_amplitude'])
    fit = stability_experiment(w, perturbation, b, config.params,
                               v['stability_T'], config.solver)

    metrics = fit.as_dict()
    metrics['c'] = w.speed
    with open(os.path.join(out, 'stability.json'), 'w') as f:
        json.dump(_plain(metrics), f, indent=2, sort_keys=True)

    assertions = {}
    if fit.status == 'converging':
        assertions['kappa_positive'] = fit.kappa > 0
        assertions['decay_fit'] = fit.r2 >= 0.9
    return metrics, assertions


def _run_child(config):
    return run(config).as_dict()


def _speed_law(config, children):
    """c increases with a at every fixed value of the other swept keys."""

    others = sorted(k for k in config.sweep if k != 'a')
    groups = {}
    for child, record in children:
        if 'c' not in record['metrics']:
            return False
        key = tuple(repr(child.values[k]) for k in others)
        groups.setdefault(key, []).append((child.values['a'],
                                           record['metrics']['c']))

    return all(np.all(np.diff([c for _, c in sorted(group)]) > 0)
               for group in groups.values())


def run_sweep(config, out, jobs=1):
    children = config.children()
    logger.info("sweep: %d child runs on %d worker(s)", len(children), jobs)

    records = {}
    if jobs == 1:
        for name, child in children:
            records[name] = _run_child(child)
    else:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            futures = {ex.submit(_run_child, child): name
                       for name, child in children}
            for future in as_completed(futures):
                records[futures[future]] = future.result()
                logger.info("sweep: %s finished", futures[future])

    metrics = {name: record['metrics'] for name, record in records.items()}
    assertions = {name: record['passed'] for name, record in records.items()}

    if config.values['task'] == 'wave' and 'a' in config.sweep:
        pairs = [(child, records[name]) for name, child in children]
        assertions['speed_increases_with_a'] = _speed_law(config, pairs)

    return metrics, assertions


tasks = {
    'kernel': run_kernel,
    'opcheck': run_opcheck,
    'evolve': run_evolve,
    'wave': run_wave,
    'certify': run_certify,
    'stability': run_stability,
}


def run(config, out=None, jobs=1):
    """Execute the config's operation and write 'record.json'.

    Parameters
    ----------
    config : rfwave.ExperimentConfig
        Validated config.

    out : str
        Output directory, the config's 'output' if omitted.

    jobs : int
        Worker processes for sweeps.

    Returns
    -------
    record : rfwave.cli.RunRecord
    """

    if out is not None:
        config = ExperimentConfig(dict(config.values, output=out))
    out = config.values['output']
    os.makedirs(out, exist_ok=True)

    start = time.perf_counter()
    error = None
    try:
        if config.operation == 'sweep':
            metrics, assertions = run_sweep(config, out, jobs)
        else:
            metrics, assertions = tasks[config.operation](config, out)
    except handled_errors as e:
        error = {'module': _origin(e), 'type': type(e).__name__,
                 'message': str(e)}
        logger.error("%s failed in %s: %s", config.operation,
                     error['module'], e)
        metrics, assertions = {}, {}

    record = RunRecord(config.as_dict(), _version(),
                       time.perf_counter() - start, metrics, assertions,
                       error)
    record.export(os.path.join(out, 'record.json'))

    failed = sorted(k for k, v in record.assertions.items() if not v)
    logger.info("%s finished in %.1f s, failed checks: %s", config.operation,
                record.wall_time, ", ".join(failed) or "none")
    return record


def _parse_args(argv):
    parser = argparse.ArgumentParser(
        prog='rfwave',
        description="Riesz-Feller traveling-wave experiments.")
    parser.add_argument('operation', choices=operations)
    parser.add_argument('--config', required=True,
                        help="flat TOML experiment config")
    parser.add_argument('--out', default=None,
                        help="output directory, overrides the config")
    parser.add_argument('--seed', type=int, default=None)
    parser.add_argument('--jobs', type=int, default=1,
                        help="worker processes for sweeps")
    parser.add_argument('-v', '--verbose', action='count', default=0)
    return parser.parse_args(argv)


def main(argv=None):
    args = _parse_args(argv)
    levels = (logging.WARNING, logging.INFO, logging.DEBUG)
    logging.basicConfig(
        level=levels[min(args.verbose, 2)],
        format="%(asctime)s %(name)s %(levelname)s %(message)s")

    if args.jobs < 1:
        logger.error("--jobs needs to be at least 1, got %d", args.jobs)
        return 2

    try:
        config = read_experiment_config(args.config)
        values = dict(config.values, operation=args.operation)
        if args.seed is not None:
            values['seed'] = args.seed
        if args.out is not None:
            values['output'] = args.out
        config = ExperimentConfig(values)
    except (OSError, ValueError, TypeError) as e:
        logger.error("invalid config %s: %s", args.config, e)
        return 2

    record = run(config, jobs=args.jobs)
    if record.error is not None:
        print("{}: {}".format(record.error['module'],
                              record.error['message']), file=sys.stderr)
    return 0 if record.passed else 1


if __name__ == '__main__':
    sys.exit(main())
