import itertools
import os
import sys

from rfwave.base import Base
from rfwave.Bistable import Bistable
from rfwave.CauchySolver import SolverConfig
from rfwave.Grid import Grid
from rfwave.RieszFeller import RFParams
from rfwave.StableKernel import check_buildable

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

operations = ('kernel', 'opcheck', 'evolve', 'wave', 'sweep', 'certify',
              'stability')

env_prefix = 'RFWAVE_'

defaults = {
    'operation': 'wave',
    'task': 'wave',
    'alpha': None,
    'theta': 0.0,
    'a': 0.5,
    'nonlinearity': None,
    'L': 80.0,
    'n': 8192,
    'dt': 5e-3,
    'T': 40.0,
    'snapshot_stride': None,
    'scheme': 'etd2rk',
    'clamp_reaction': True,
    'output': 'rfwave-out',
    'seed': 0,
    'x_max': None,
    'kernel_n': 2**20,
    'delta_wave': None,
    'delta_ramp': 0.1,
    'bump_amplitude': 0.05,
    'stability_T': 20.0,
}


class ExperimentConfig(Base):

    """Validated experiment configuration.

    Parameters
    ----------
    values : dict
        Complete set of keys, see ``defaults``. Sweep configs may hold lists.

    Attributes
    ----------
    params : rfwave.RFParams
    nonlinearity : rfwave.Bistable
    grid : rfwave.Grid
    solver : rfwave.SolverConfig
        Built for every operation but 'sweep'.

    sweep : dict
        For 'sweep': the keys given as lists and their values.
    """

    def __init__(self, values):
        self.values = dict(values)
        self.operation = self.values['operation']
        self.sweep = {}
        self._check_parameters()

        if self.operation == 'sweep':
            self.sweep = {k: v for k, v in self.values.items()
                          if isinstance(v, list)}
            if not self.sweep:
                raise ValueError("A sweep needs at least one key with a "
                                 "list of values.")
            # validates every point of the product
            self.children()
            return

        v = self.values
        self.params = RFParams(v['alpha'], v['theta'])
        self.nonlinearity = make_nonlinearity(v['nonlinearity'], v['a'])
        self.grid = Grid(v['L'], v['n'])
        self.solver = SolverConfig(v['dt'], v['T'], v['snapshot_stride'],
                                   v['scheme'], v['clamp_reaction'])

        if self.operation == 'kernel':
            check_buildable(self.params)
        else:
            self.params.check_wave_regime()

    def _check_parameters(self):
        """Check the operation, required keys and where lists may appear."""

        if self.operation not in operations:
            error_str = "Unknown operation '{}', expected one of {}."
            raise ValueError(error_str.format(self.operation,
                                              ", ".join(operations)))

        if self.values['alpha'] is None:
            raise ValueError("The config needs the order 'alpha'.")

        lists = [k for k, v in self.values.items() if isinstance(v, list)]
        if lists and self.operation != 'sweep':
            error_str = ("Only sweep configs may give lists of values, got "
                         "lists for {}.")
            raise ValueError(error_str.format(", ".join(sorted(lists))))

        if self.operation == 'sweep' and self.values['task'] in ('sweep',):
            raise ValueError("A sweep cannot run sweeps.")

        if self.values['task'] not in operations:
            error_str = "Unknown sweep task '{}', expected one of {}."
            raise ValueError(error_str.format(self.values['task'],
                                              ", ".join(operations)))

        return self

    def children(self):
        """Configs of a sweep, one per point of the Cartesian product.

        Returns
        -------
        children : list of (str, rfwave.read_config.ExperimentConfig)
            Sub directory name and config.
        """

        if self.operation != 'sweep':
            return []

        keys = sorted(self.sweep)
        children = []
        ranges = [range(len(self.sweep[k])) for k in keys]
        for indices in itertools.product(*ranges):
            combination = [self.sweep[k][i] for k, i in zip(keys, indices)]
            values = dict(self.values, operation=self.values['task'])
            values.update(zip(keys, combination))
            name = '_'.join(_label(k, v, i) for k, v, i in
                           zip(keys, combination, indices))
            values['output'] = os.path.join(self.values['output'], name)
            children.append((name, ExperimentConfig(values)))
        return children

    def as_dict(self):
        return dict(self.values)

    def __eq__(self, other):
        return self._check_attr_equality(other, ['values'])

    __hash__ = None


def _label(key, value, index):
    # tables are numbered, scalars spelled out
    if isinstance(value, dict):
        return '{}{}'.format(key, index)
    return '{}={}'.format(key, value)


def make_nonlinearity(spec, a=0.5):
    """Bistable from an inline table, or the cubic with root a."""

    if spec is None:
        return Bistable('cubic', a)

    spec = dict(spec)
    unknown = set(spec) - {'kind', 'a', 'coefficients', 'roots'}
    if unknown:
        error_str = "Unknown nonlinearity key(s): {}."
        raise ValueError(error_str.format(", ".join(sorted(unknown))))
    return Bistable(**spec)


def _parse_value(text):
    """A TOML scalar or array given as plain text, else the bare string."""

    try:
        return tomllib.loads('value = ' + text)['value']
    except tomllib.TOMLDecodeError:
        return text


def parse_config(text, environ=None):
    """Parse a flat TOML experiment document.

    Defaults are filled for every missing key, then any key ``k`` may be
    overridden by the environment variable RFWAVE_<K> (upper-case).

    Parameters
    ----------
    text : str
        The document.

    environ : mapping
        Environment to read overrides from, ``os.environ`` if omitted.

    Returns
    -------
    config : rfwave.ExperimentConfig
    """

    environ = os.environ if environ is None else environ

    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as e:
        raise ValueError("The config is not valid TOML: {}".format(e))

    unknown = set(data) - set(defaults)
    if unknown:
        error_str = "Unknown config key(s): {}."
        raise ValueError(error_str.format(", ".join(sorted(unknown))))

    values = dict(defaults, **data)
    for key in defaults:
        name = env_prefix + key.upper()
        if name in environ:
            values[key] = _parse_value(environ[name])

    return ExperimentConfig(values)


def read_config(func):
    """Decorator for reading a config file and passing its text on."""
    def wrapper(path_to_file, *args, **kwargs):
        with open(path_to_file, 'r') as f:
            text = f.read()

        return func(text, *args, **kwargs)
    return wrapper


@read_config
def read_experiment_config(text, environ=None):
    return parse_config(text, environ)
