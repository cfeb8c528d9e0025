import numpy as np


class NumericalError(RuntimeError):

    """Raised when a computation fails for numerical rather than input reasons.

    Examples are solution blow-up, a Picard iteration that stops contracting,
    an imaginary residue after an inverse transform, or a front that has not
    become rigid enough to measure its speed.
    """


class Base(object):

    def _check_attr_equality(self, other, attributes):
        """"Return True if all attributes have equal value."""

        if not isinstance(other, type(self)):
            return False

        for attr in attributes:
            mine, theirs = getattr(self, attr), getattr(other, attr)
            if isinstance(mine, np.ndarray) or isinstance(theirs, np.ndarray):
                if np.shape(mine) != np.shape(theirs):
                    return False
                if not np.all(np.asarray(mine) == np.asarray(theirs)):
                    return False
            elif mine != theirs:
                return False

        return True

    def __ne__(self, other):
        return not self.__eq__(other)


def smoothstep(t):
    """Quintic smoothstep 6t^5 - 15t^4 + 10t^3, clipped to [0, 1].

    C^2 with vanishing first and second derivatives at both ends.
    """

    t = np.clip(t, 0.0, 1.0)
    return t**3 * (10.0 - 15.0 * t + 6.0 * t**2)


def smoothstep_derivatives(t):
    """First and second derivative of ``smoothstep`` with respect to t."""

    t = np.clip(t, 0.0, 1.0)
    d1 = 30.0 * t**2 * (1.0 - t)**2
    d2 = 60.0 * t * (1.0 - t) * (1.0 - 2.0 * t)
    return d1, d2
