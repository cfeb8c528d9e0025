import numpy as np
from numpy.polynomial import Polynomial
from scipy.optimize import minimize_scalar

from rfwave.base import Base, smoothstep


class Bistable(Base):

    """Polynomial bistable reaction term f with roots u_- < a < u_+.

    Parameters
    ----------
    kind : str
        One of 'cubic', 'quintic' or 'polynomial'.

    a : float
        Middle (unstable) root for the cubic f(u) = u(1-u)(u-a) and the
        quintic f(u) = (u+1)u(u-a)(u-1)(u-2).

    coefficients : array-like
        Ascending power-series coefficients, required for kind 'polynomial'.

    roots : tuple of float
        (u_minus, a, u_plus), required for kind 'polynomial'.

    Attributes
    ----------
    u_minus, a, u_plus : float
        The bistable roots.

    poly : numpy.polynomial.Polynomial
        The reaction term as a polynomial.
    """

    kinds = ('cubic', 'quintic', 'polynomial')
    root_tolerance = 1e-12

    def __init__(self, kind='cubic', a=0.5, coefficients=None, roots=None):
        self.kind = kind

        if kind == 'cubic':
            self.u_minus, self.a, self.u_plus = 0.0, float(a), 1.0
            self.poly = -Polynomial.fromroots([0.0, self.a, 1.0])
        elif kind == 'quintic':
            self.u_minus, self.a, self.u_plus = 0.0, float(a), 1.0
            self.poly = Polynomial.fromroots([-1.0, 0.0, self.a, 1.0, 2.0])
        elif kind == 'polynomial':
            if coefficients is None or roots is None:
                raise ValueError("A 'polynomial' nonlinearity needs both "
                                 "'coefficients' and 'roots'.")
            self.u_minus, self.a, self.u_plus = (float(r) for r in roots)
            self.poly = Polynomial(np.asarray(coefficients, dtype=float))
        else:
            error_str = "Unknown nonlinearity kind '{}', expected one of {}."
            raise ValueError(error_str.format(kind, ", ".join(self.kinds)))

        self.dpoly = self.poly.deriv()
        self._check_parameters()

    @property
    def roots(self):
        return self.u_minus, self.a, self.u_plus

    @property
    def coefficients(self):
        return self.poly.coef

    def _check_parameters(self):
        """Check the root ordering, the roots and the stability of u_-, u_+."""

        if not self.u_minus < self.a < self.u_plus:
            error_str = ("The roots need to satisfy u_- < a < u_+, got "
                         "({}, {}, {}).")
            raise ValueError(error_str.format(*self.roots))

        bad_roots = [r for r in self.roots
                     if abs(self.poly(r)) > self.root_tolerance]
        if bad_roots:
            error_str = "The value(s) {} are not roots of f."
            raise ValueError(error_str.format(bad_roots))

        if self.dpoly(self.u_minus) >= 0 or self.dpoly(self.u_plus) >= 0:
            error_str = ("f is not bistable: need f'(u_-) < 0 and f'(u_+) < 0,"
                         " got f'(u_-) = {:.4g} and f'(u_+) = {:.4g}.")
            raise ValueError(error_str.format(self.dpoly(self.u_minus),
                                              self.dpoly(self.u_plus)))

        return self

    def __call__(self, u):
        return self.poly(u)

    def eval_f(self, u):
        """Value of f."""
        return self.poly(u)

    def eval_df(self, u):
        """Value of f'."""
        return self.dpoly(u)

    def is_normalized(self):
        return self.u_minus == 0.0 and self.u_plus == 1.0

    def check_normalized(self):
        if not self.is_normalized():
            error_str = ("The roots need to be normalized to u_- = 0 and "
                         "u_+ = 1, got ({}, {}); use 'normalized()' first.")
            raise ValueError(error_str.format(self.u_minus, self.u_plus))

    def normalized(self):
        """Affinely rescale the roots to u_- = 0 and u_+ = 1.

        Returns g(v) = f(u_- + (u_+ - u_-) v) as a 'polynomial' Bistable.
        """

        width = self.u_plus - self.u_minus
        g = self.poly(Polynomial([self.u_minus, width]))
        a = (self.a - self.u_minus) / width
        return Bistable('polynomial', coefficients=g.coef, roots=(0.0, a, 1.0))

    def mirrored(self):
        """Reaction term of the reflected problem, v -> -f(1 - v).

        If u solves the equation with f, then 1 - u(-x) solves it with the
        mirrored f and the skewness reversed. The roots become 0 < 1 - a < 1.
        """

        self.check_normalized()
        g = -self.poly(Polynomial([1.0, -1.0]))
        return Bistable('polynomial', coefficients=g.coef,
                        roots=(0.0, 1.0 - self.a, 1.0))

    def beta(self):
        """Decay rate beta = min{-f'(0), -f'(1)} / 2."""

        self.check_normalized()
        return 0.5 * min(-self.dpoly(0.0), -self.dpoly(1.0))

    def potential_integral(self):
        """Exact integral of f over [u_-, u_+]."""

        antiderivative = self.poly.integ()
        return antiderivative(self.u_plus) - antiderivative(self.u_minus)

    def predicted_speed_sign(self):
        """Sign of the wave speed, -sign of the potential integral."""

        integral = self.potential_integral()
        scale = max(1.0, np.abs(self.poly.coef).max())
        if abs(integral) <= 1e-14 * scale:
            return 0
        return -int(np.sign(integral))

    def extrema(self):
        """Minimum and maximum of f on [u_-, u_+]."""

        lo, hi = self.u_minus, self.u_plus

        if self.kind == 'cubic':
            candidates = [r.real for r in self.dpoly.roots()
                          if abs(r.imag) < 1e-14 and lo <= r.real <= hi]
        else:
            # dense scan, then refine every local extremum
            u = np.linspace(lo, hi, 10001)
            fu = self.poly(u)
            candidates = []
            for k in range(1, len(u) - 1):
                for sign in (1.0, -1.0):
                    if sign * fu[k] <= sign * fu[k - 1] and \
                            sign * fu[k] <= sign * fu[k + 1]:
                        res = minimize_scalar(
                            lambda v, s=sign: s * self.poly(v),
                            bounds=(u[k - 1], u[k + 1]), method='bounded',
                            options={'xatol': 1e-13})
                        candidates.append(res.x)

        values = self.poly(np.array(candidates + [lo, hi]))
        return values.min(), values.max()

    def norm(self, lower=None, upper=None, n=20001):
        """Sup-norm of f on [lower, upper] by dense sampling."""

        lower = self.u_minus if lower is None else lower
        upper = self.u_plus if upper is None else upper
        return np.abs(self.poly(np.linspace(lower, upper, n))).max()

    def derivative_norm(self, lower=None, upper=None, n=20001):
        """Sup-norm of f' on [lower, upper] by dense sampling."""

        lower = self.u_minus - 1.0 if lower is None else lower
        upper = self.u_plus + 1.0 if upper is None else upper
        return np.abs(self.dpoly(np.linspace(lower, upper, n))).max()

    def clamp(self, blend_width=0.5):
        """Return the bounded C^2 modification of f."""
        return ClampedBistable(self, blend_width)

    def spec(self):
        """Plain-data description used in configs and run records."""

        if self.kind == 'polynomial':
            return {'kind': 'polynomial',
                    'coefficients': [float(c) for c in self.poly.coef],
                    'roots': [float(r) for r in self.roots]}
        return {'kind': self.kind, 'a': self.a}

    def __eq__(self, other):
        attributes = ['kind', 'u_minus', 'a', 'u_plus', 'coefficients']
        return self._check_attr_equality(other, attributes)

    __hash__ = None

    def __repr__(self):
        return "Bistable(kind={!r}, roots={!r})".format(self.kind, self.roots)


class ClampedBistable(Base):

    """Globally bounded C^2 modification of a bistable f.

    f is kept on [u_-, u_+]. At distance d outside the interval the value is
    (1 - S) * F * tanh(f/F) + S * F_end, where F_end is f_max on the left and
    f_min on the right, F = |F_end| and S = smoothstep((d - w)/w) for blend
    width w. The result is constant for d >= 2w.

    Parameters
    ----------
    base : rfwave.Bistable
        The polynomial reaction term.

    blend_width : float
        Blend width w > 0.
    """

    def __init__(self, base, blend_width=0.5):
        if blend_width <= 0:
            error_str = "The blend width must be positive, got {}."
            raise ValueError(error_str.format(blend_width))

        self.base = base
        self.blend_width = float(blend_width)
        self.f_min, self.f_max = base.extrema()

    @property
    def u_minus(self):
        return self.base.u_minus

    @property
    def a(self):
        return self.base.a

    @property
    def u_plus(self):
        return self.base.u_plus

    def _saturate(self, fu, d, end_value):
        F = abs(end_value)
        if F == 0:
            return np.zeros_like(fu)
        S = smoothstep((d - self.blend_width) / self.blend_width)
        return (1.0 - S) * F * np.tanh(fu / F) + S * end_value

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        fu = self.base.poly(u)
        lo, hi = self.base.u_minus, self.base.u_plus

        out = np.where(u < lo, self._saturate(fu, lo - u, self.f_max), fu)
        out = np.where(u > hi, self._saturate(fu, u - hi, self.f_min), out)
        return out[()] if out.ndim == 0 else out

    def eval_f(self, u):
        return self(u)

    def __eq__(self, other):
        attributes = ['base', 'blend_width']
        return self._check_attr_equality(other, attributes)

    __hash__ = None
