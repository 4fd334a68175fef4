"""Closed-form kernels of the dyadic averaging step.

The central function ``theta`` is the moving-average kernel obtained by
integrating the truncated power s -> s_+^(v - 1/alpha) against a unit step
that is +1 on the first half of a cell and -1 on the second half.  Its first
difference in x (``big_theta``) is much better localized and is what the
summation-by-parts series evaluators consume; the x-derivatives of both are
needed for decay diagnostics.

All four functions are piecewise powers of x, x - 1/2, x - 1, x - 3/2 and
x - 2.  For large x the closed forms subtract terms of size x^q that agree to
roughly q*log2(x) bits, so beyond ``KernelParams.switch_x`` the bracket is
evaluated through a binomial tail series in 1/(2x) whose surviving terms all
share one sign (the first three moments of the difference weights vanish, so
no cancelling head remains).  The series terms shrink by about a factor x, so
a handful of terms reaches full double precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import integrate

from .errors import ParameterError

# Weights of the five-term form of big_theta over offsets l/2, l = 0..4.
D5 = (1.0, -2.0, 0.0, 2.0, -1.0)

_MAX_TAIL_TERMS = 220


@dataclass(frozen=True)
class KernelParams:
    """Stability index and the crossover point of the large-x evaluation.

    ``switch_x`` may be anything >= 4 (the tail series converges for any
    x > 2).  The default sits low on purpose: the direct bracket loses about
    2*log2(x) bits to cancellation, which already costs eight digits of the
    result near x ~ 1e4, while the tail series holds full precision from
    x = 4 on.  Direct evaluation below 8 stays comfortably accurate.
    """

    alpha: float
    switch_x: float = 8.0

    def __post_init__(self):
        if not 1.0 < self.alpha < 2.0:
            raise ParameterError(f"alpha must lie in (1, 2), got {self.alpha}")
        if not self.switch_x >= 4.0:
            raise ParameterError(
                f"switch_x must be at least 4, got {self.switch_x}")


def _check_v(v: float, alpha: float) -> None:
    # The closed forms stay finite for any exponent p = v - 1/alpha in
    # (-1, 1); evaluation is therefore allowed on that widened range even
    # though the series modules restrict v to (1/alpha, 1).
    lo = 1.0 / alpha - 1.0
    if not lo < v < 1.0:
        raise ParameterError(
            f"v must lie in (1/alpha - 1, 1) = ({lo:.6g}, 1), got {v}")


def truncated_power(s, kappa):
    """Return s**kappa for s > 0 and exactly 0 for s <= 0.

    Total on the real line; scalars in, scalar out, arrays elementwise.
    """
    if np.isscalar(s) or getattr(s, "ndim", 0) == 0:
        sv = float(s)
        if sv <= 0.0:
            return 0.0
        # numpy pow saturates to inf instead of raising on overflow
        with np.errstate(over="ignore", under="ignore"):
            return float(np.float64(sv) ** np.float64(kappa))
    s = np.asarray(s, dtype=float)
    out = np.zeros(s.shape)
    mask = s > 0.0
    if mask.any():
        out[mask] = np.power(s[mask], float(kappa))
    return out


def _tail3(x, e):
    """Sum_{n>=2} C(e,n) (-1/(2x))^n (2^n - 2), elementwise in x.

    This is the bracket (1 - 2b)^e - 2(1 - b)^e + 1 at b = 1/(2x) with the
    n = 0, 1 terms cancelled analytically.  Every surviving term has the
    sign of (e - 1), so the running sum is monotone and the relative
    stopping test is safe.
    """
    b = 0.5 / x
    coef = e * (e - 1.0) / 2.0 * b * b
    pow2 = 4.0
    total = coef * (pow2 - 2.0)
    n = 2
    while n < _MAX_TAIL_TERMS:
        coef = coef * (e - n) / (n + 1.0) * (-b)
        pow2 *= 2.0
        n += 1
        term = coef * (pow2 - 2.0)
        total = total + term
        if np.all(np.abs(term) <= 1e-17 * np.abs(total)):
            break
    return total


def _tail5(x, e):
    """Sum_{n>=3} C(e,n) (-1/(2x))^n (2*3^n - 4^n - 2), elementwise in x.

    Same idea as _tail3 for the five-term difference weights, whose first
    three moments vanish, so the series starts at n = 3.
    """
    b = 0.5 / x
    coef = e * (e - 1.0) * (e - 2.0) / 6.0 * (-b) ** 3
    pow3, pow4 = 27.0, 64.0
    total = coef * (2.0 * pow3 - pow4 - 2.0)
    n = 3
    while n < _MAX_TAIL_TERMS:
        coef = coef * (e - n) / (n + 1.0) * (-b)
        pow3 *= 3.0
        pow4 *= 4.0
        n += 1
        term = coef * (2.0 * pow3 - pow4 - 2.0)
        total = total + term
        if np.all(np.abs(term) <= 1e-17 * np.abs(total)):
            break
    return total


def _piecewise(x, params, direct, tail):
    """Zero for x <= 0, closed form up to switch_x, tail series beyond."""
    scalar = np.isscalar(x) or getattr(x, "ndim", 0) == 0
    xa = np.asarray(x, dtype=float)
    flat = np.atleast_1d(xa).ravel()
    out = np.zeros(flat.shape)
    lo = (flat > 0.0) & (flat <= params.switch_x)
    hi = flat > params.switch_x
    if lo.any():
        out[lo] = direct(flat[lo])
    if hi.any():
        out[hi] = tail(flat[hi])
    out = out.reshape(xa.shape)
    return float(out) if scalar else out


def theta(x, v, params: KernelParams):
    """Averaged kernel: ((x-1)_+^q - 2(x-1/2)_+^q + x_+^q) / q, q = 1+v-1/alpha.

    Vanishes identically for x <= 0 and decays like (p/4) x^(p-1) with
    p = v - 1/alpha as x grows.  Elementwise in x.
    """
    _check_v(v, params.alpha)
    q = 1.0 + v - 1.0 / params.alpha

    def direct(t):
        return (truncated_power(t - 1.0, q)
                - 2.0 * truncated_power(t - 0.5, q)
                + truncated_power(t, q)) / q

    def tail(t):
        return np.power(t, q) * _tail3(t, q) / q

    return _piecewise(x, params, direct, tail)


def big_theta(x, v, params: KernelParams):
    """First difference theta(x) - theta(x-1), via the five-term weights.

    Decays like p(p-1)/4 * x^(p-2); the extra order of localization is what
    makes the summation-by-parts route worthwhile.
    """
    _check_v(v, params.alpha)
    q = 1.0 + v - 1.0 / params.alpha

    def direct(t):
        acc = truncated_power(t, q)
        for l, d in enumerate(D5[1:], start=1):
            if d:
                acc = acc + d * truncated_power(t - 0.5 * l, q)
        return acc / q

    def tail(t):
        return np.power(t, q) * _tail5(t, q) / q

    return _piecewise(x, params, direct, tail)


def dtheta_dx(x, v, params: KernelParams):
    """x-derivative of theta; right-limit convention at the kink points."""
    _check_v(v, params.alpha)
    p = v - 1.0 / params.alpha

    def direct(t):
        return (truncated_power(t - 1.0, p)
                - 2.0 * truncated_power(t - 0.5, p)
                + truncated_power(t, p))

    def tail(t):
        return np.power(t, p) * _tail3(t, p)

    return _piecewise(x, params, direct, tail)


def dbig_theta_dx(x, v, params: KernelParams):
    """x-derivative of big_theta; right-limit convention at the kinks."""
    _check_v(v, params.alpha)
    p = v - 1.0 / params.alpha

    def direct(t):
        acc = truncated_power(t, p)
        for l, d in enumerate(D5[1:], start=1):
            if d:
                acc = acc + d * truncated_power(t - 0.5 * l, p)
        return acc

    def tail(t):
        return np.power(t, p) * _tail5(t, p)

    return _piecewise(x, params, direct, tail)


def theta_quadrature_oracle(x: float, v: float, alpha: float) -> float:
    """theta evaluated from its defining integral, for cross-checks only.

    Integrates (x - s)_+^(v - 1/alpha) against the half-cell step (+1 on
    [0, 1/2), -1 on [1/2, 1)) with adaptive quadrature, splitting at the
    moving endpoint where the integrand meets its kink.  Absolute accuracy
    around 1e-10; far too slow for production use.
    """
    if not 1.0 < alpha < 2.0:
        raise ParameterError(f"alpha must lie in (1, 2), got {alpha}")
    _check_v(v, alpha)
    x = float(x)
    if x <= 0.0:
        return 0.0
    p = v - 1.0 / alpha
    total = 0.0
    for a, b, sign in ((0.0, 0.5, 1.0), (0.5, 1.0, -1.0)):
        if x <= a:
            continue
        hi = min(b, x)
        val, _ = integrate.quad(lambda s: (x - s) ** p, a, hi,
                                epsabs=1e-12, epsrel=1e-12, limit=200)
        total += sign * val
    return total
