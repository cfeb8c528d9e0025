import numpy as np

from rfwave.base import Base
from rfwave.Grid import Grid


class Field(Base):

    """Real samples on a grid with declared constant tails beyond [-L, L].

    Parameters
    ----------
    grid : rfwave.Grid
        Grid the values are sampled on.

    values : array-like
        One finite value per grid point.

    tail_left, tail_right : float
        Constant extension of the field for x < -L and x > L.

    tail_tolerance : float
        Allowed deviation of the boundary samples from the declared tails for
        the field to count as settled. Relative to |tail_right - tail_left|,
        absolute when the tails are equal.
    """

    def __init__(self, grid, values, tail_left=0.0, tail_right=0.0,
                 tail_tolerance=1e-6):
        self.grid = grid
        self.values = np.array(values, dtype=float)
        self.tail_left = float(tail_left)
        self.tail_right = float(tail_right)
        self.tail_tolerance = float(tail_tolerance)
        self._check_parameters()
        self.values.flags.writeable = False

    def _check_parameters(self):
        """Check the values against the grid."""

        if not isinstance(self.grid, Grid):
            raise TypeError("A Field needs an rfwave.Grid, got {}.".format(
                type(self.grid).__name__))

        if self.values.shape != (self.grid.n_points,):
            error_str = ("The field needs exactly {} values (one per grid "
                         "point), got shape {}.")
            raise ValueError(error_str.format(self.grid.n_points,
                                              self.values.shape))

        if not np.all(np.isfinite(self.values)):
            raise ValueError("The field values need to be finite.")

        if not (np.isfinite(self.tail_left) and np.isfinite(self.tail_right)):
            raise ValueError("The declared tails need to be finite.")

        return self

    @classmethod
    def from_function(cls, grid, func, tail_left=None, tail_right=None,
                      tail_tolerance=1e-6):
        """Sample ``func`` on the grid; tails default to the end samples."""

        values = func(grid.x)
        tail_left = values[0] if tail_left is None else tail_left
        tail_right = values[-1] if tail_right is None else tail_right
        return cls(grid, values, tail_left, tail_right, tail_tolerance)

    def with_values(self, values, tail_left=None, tail_right=None):
        """Return a new field on the same grid, keeping unspecified tails."""

        tail_left = self.tail_left if tail_left is None else tail_left
        tail_right = self.tail_right if tail_right is None else tail_right
        return Field(self.grid, values, tail_left, tail_right,
                     self.tail_tolerance)

    @property
    def x(self):
        return self.grid.x

    def tail_deviation(self):
        """Largest distance between a boundary sample and its declared tail."""

        return max(abs(self.values[0] - self.tail_left),
                   abs(self.values[-1] - self.tail_right))

    def is_settled(self):
        """Whether the boundary samples match the declared tails."""

        scale = abs(self.tail_right - self.tail_left)
        scale = 1.0 if scale == 0 else scale
        return self.tail_deviation() <= self.tail_tolerance * scale

    def check_settled(self):
        """Raise ValueError if the field does not have settled tails."""

        if not self.is_settled():
            error_str = ("The field does not have settled tails: boundary "
                         "samples ({:.3e}, {:.3e}) deviate from the declared "
                         "tails ({:.3e}, {:.3e}) by {:.3e}, more than the "
                         "tail tolerance {:.1e}.")
            raise ValueError(error_str.format(
                self.values[0], self.values[-1], self.tail_left,
                self.tail_right, self.tail_deviation(), self.tail_tolerance))

        return self

    def decompose(self):
        """Split into a smooth background ramp and a decaying perturbation.

        Returns
        -------
        decomposition : rfwave.Field.Decomposition
        """

        self.check_settled()
        ramp = self.grid.reference_ramp()
        jump = self.tail_right - self.tail_left

        background = Field(self.grid, self.tail_left + jump * ramp,
                           self.tail_left, self.tail_right)
        perturbation = Field(self.grid, self.values - background.values,
                             0.0, 0.0, self.tail_tolerance)

        return Decomposition(background, perturbation)

    def sample(self, points):
        """Evaluate the field anywhere by four-point cubic interpolation.

        Points beyond [-L, L] take the declared tail values.
        """

        points = np.asarray(points, dtype=float)
        L = self.grid.half_width
        index = (points + L) / self.grid.dx
        out = self._interpolate_at_index(index)
        out = np.where(points < -L, self.tail_left, out)
        return np.where(points > L, self.tail_right, out)

    def _interpolate_at_index(self, index):
        """Lagrange cubic through the four nodes around a fractional index."""

        n = self.grid.n_points
        padded = np.concatenate(([self.tail_left] * 2, self.values,
                                 [self.tail_right] * 2))

        floor = np.floor(index)
        s = index - floor
        i = np.clip(floor.astype(int), -1, n - 1) + 2

        w_0 = -s * (s - 1) * (s - 2) / 6
        w_1 = (s + 1) * (s - 1) * (s - 2) / 2
        w_2 = -(s + 1) * s * (s - 2) / 2
        w_3 = (s + 1) * s * (s - 1) / 6

        out = (w_0 * padded[i - 1] + w_1 * padded[i] + w_2 * padded[i + 1]
               + w_3 * padded[i + 2])

        out = np.where(index < 0, self.tail_left, out)
        return np.where(index > n - 1, self.tail_right, out)

    def shift_interpolate(self, shift):
        """Return the field sampled at x_i + shift.

        Parameters
        ----------
        shift : float
            Translation, |shift| < L/2.

        Returns
        -------
        field : rfwave.Field
        """

        if not abs(shift) < 0.5 * self.grid.half_width:
            error_str = ("The shift {} is too large: |s| needs to be below "
                         "L/2 = {}.")
            raise ValueError(error_str.format(shift,
                                              0.5 * self.grid.half_width))

        if shift == 0:
            return self.with_values(self.values)

        index = np.arange(self.grid.n_points) + shift / self.grid.dx
        return self.with_values(self._interpolate_at_index(index))

    def reflected(self):
        """Return x -> f(-x); the grid is symmetric so values are reversed."""

        return Field(self.grid, self.values[::-1], self.tail_right,
                     self.tail_left, self.tail_tolerance)

    def derivatives(self):
        """First, second and third x-derivatives by fourth-order differences.

        The field is extended by its tails beyond the boundary.
        """

        f = np.concatenate(([self.tail_left] * 3, self.values,
                            [self.tail_right] * 3))
        dx = self.grid.dx
        c = slice(3, -3)

        def at(k):
            return f[3 + k:len(f) - 3 + k]

        d1 = (-at(2) + 8 * at(1) - 8 * at(-1) + at(-2)) / (12 * dx)
        d2 = (-at(2) + 16 * at(1) - 30 * f[c] + 16 * at(-1) - at(-2)) / \
            (12 * dx**2)
        d3 = (-at(3) + 8 * at(2) - 13 * at(1) + 13 * at(-1) - 8 * at(-2)
              + at(-3)) / (8 * dx**3)

        return d1, d2, d3

    def to_csv(self, path):
        """Write the field as CSV with header 'x,u' at full precision."""

        data = np.column_stack((self.grid.x, self.values))
        np.savetxt(path, data, delimiter=',', header='x,u', comments='',
                   fmt='%.17g')
        return path

    @classmethod
    def from_csv(cls, path, tail_left=None, tail_right=None):
        """Read a field written by ``to_csv``; tails default to end samples."""

        data = np.loadtxt(path, delimiter=',', skiprows=1, ndmin=2)
        x, values = data[:, 0], data[:, 1]
        grid = Grid(-x[0], len(x))
        tail_left = values[0] if tail_left is None else tail_left
        tail_right = values[-1] if tail_right is None else tail_right
        return cls(grid, values, tail_left, tail_right)

    def __add__(self, other):
        return self.with_values(self.values + other.values,
                                self.tail_left + other.tail_left,
                                self.tail_right + other.tail_right)

    def __sub__(self, other):
        return self.with_values(self.values - other.values,
                                self.tail_left - other.tail_left,
                                self.tail_right - other.tail_right)

    def __eq__(self, other):
        attributes = ['grid', 'values', 'tail_left', 'tail_right']
        return self._check_attr_equality(other, attributes)

    __hash__ = None


class Decomposition(Base):

    """Background ramp plus zero-tailed perturbation of a settled field.

    Attributes
    ----------
    background : rfwave.Field
        tail_left + (tail_right - tail_left) * reference ramp.

    perturbation : rfwave.Field
        Field minus background, declared tails 0.
    """

    def __init__(self, background, perturbation):
        self.background = background
        self.perturbation = perturbation

    def recombine(self):
        """Return background + perturbation with the background's tails."""

        return self.background.with_values(self.background.values
                                           + self.perturbation.values)

    def __eq__(self, other):
        attributes = ['background', 'perturbation']
        return self._check_attr_equality(other, attributes)


def decompose(field):
    """Background/perturbation split of a settled field."""
    return field.decompose()


def shift_interpolate(field, shift):
    """Field sampled at x_i + shift."""
    return field.shift_interpolate(shift)
