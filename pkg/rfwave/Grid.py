import numpy as np
import scipy.fft

from rfwave.base import Base, smoothstep, smoothstep_derivatives


class Grid(Base):

    """Uniform one-dimensional grid on [-L, L].

    Parameters
    ----------
    half_width : float
        Half width L of the domain.

    n_points : int
        Number of grid points, both end points included.

    Attributes
    ----------
    dx : float
        Grid spacing 2L/(n_points - 1).

    x : numpy.ndarray
        Grid points x_i = -L + i*dx.
    """

    min_points = 16

    def __init__(self, half_width, n_points):
        self.half_width = float(half_width)
        self.n_points = int(n_points)
        self._check_parameters()

        self.dx = 2.0 * self.half_width / (self.n_points - 1)
        self.x = -self.half_width + np.arange(self.n_points) * self.dx
        self.x.flags.writeable = False

    def _check_parameters(self):
        """Check that the grid parameters are valid."""

        if not np.isfinite(self.half_width) or self.half_width <= 0:
            error_str = "The half width L must be positive, got {}."
            raise ValueError(error_str.format(self.half_width))

        if self.n_points < self.min_points:
            error_str = "The grid needs at least {} points, got {}."
            raise ValueError(error_str.format(self.min_points, self.n_points))

        return self

    def reference_ramp(self, x=None):
        """Smooth ramp from 0 to 1 over the middle half [-L/2, L/2].

        The ramp is evaluated at the grid points unless other points x are
        given; it is 0 left of -L/2 and 1 right of L/2.
        """

        L = self.half_width
        x = self.x if x is None else np.asarray(x, dtype=float)
        return smoothstep((x + 0.5 * L) / L)

    def reference_ramp_derivatives(self, x=None):
        """First and second x-derivatives of ``reference_ramp``."""

        L = self.half_width
        x = self.x if x is None else np.asarray(x, dtype=float)
        d1, d2 = smoothstep_derivatives((x + 0.5 * L) / L)
        return d1 / L, d2 / L**2

    def extended(self, factor=2):
        """Wider grid with the same spacing, centred on this one.

        The wider grid has an FFT-friendly number of points, about factor
        times as many, and this grid is its slice ``self.inner_slice(wide)``.
        """

        if factor < 1:
            error_str = "The extension factor must be at least 1, got {}."
            raise ValueError(error_str.format(factor))

        size = scipy.fft.next_fast_len(int(np.ceil(factor * self.n_points)))
        while (size - self.n_points) % 2:
            size = scipy.fft.next_fast_len(size + 1)
        extra = (size - self.n_points) // 2
        return Grid(self.half_width + extra * self.dx, size)

    def inner_slice(self, wide):
        """Slice of a grid from ``extended`` holding this grid's points."""

        extra = (wide.n_points - self.n_points) // 2
        return slice(extra, extra + self.n_points)

    def wavenumbers(self, n_fft=None):
        """Angular frequencies of numpy's FFT of length n_fft."""

        n_fft = self.n_points if n_fft is None else n_fft
        return 2.0 * np.pi * np.fft.fftfreq(n_fft, d=self.dx)

    def padded_size(self):
        """Power of two at least twice the number of grid points."""

        return 1 << int(np.ceil(np.log2(2 * self.n_points)))

    def __hash__(self):
        return hash((self.half_width, self.n_points))

    def __eq__(self, other):
        attributes = ['half_width', 'n_points']
        return self._check_attr_equality(other, attributes)

    def __repr__(self):
        return "Grid(half_width={!r}, n_points={!r})".format(self.half_width,
                                                           self.n_points)


def make_grid(half_width, n_points):
    """Return the uniform grid on [-half_width, half_width]."""
    return Grid(half_width, n_points)
