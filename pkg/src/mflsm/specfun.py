"""Bessel and Hankel functions of integer order and real positive argument.

Values come from ``scipy.special``; this module adds the argument checks the
rest of the package relies on (x > 0, 0 <= n <= 200) and the derivative
helpers used by the cylinder series solver.
"""

import numpy as np
from scipy import special

from .errors import DomainError

MAX_ORDER = 200


def _check(n, x):
    n = np.asarray(n)
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)) or np.any(x <= 0):
        raise DomainError("Bessel argument must be finite and > 0")
    if not np.issubdtype(n.dtype, np.integer):
        if np.any(n != np.round(n)):
            raise DomainError("Bessel order must be an integer")
        n = n.astype(int)
    if np.any(n < 0) or np.any(n > MAX_ORDER):
        raise DomainError(f"Bessel order must lie in [0, {MAX_ORDER}]")
    return n, x


def _out(v):
    return v.item() if np.ndim(v) == 0 else v


def bessel_j(n, x):
    """J_n(x), broadcasting over ``n`` and ``x``."""
    n, x = _check(n, x)
    return _out(special.jv(n, x))


def bessel_y(n, x):
    """Y_n(x), broadcasting over ``n`` and ``x``."""
    n, x = _check(n, x)
    return _out(special.yv(n, x))


def hankel2(n, x):
    """H_n^(2)(x) = J_n(x) - j Y_n(x)."""
    n, x = _check(n, x)
    return _out(special.jv(n, x) - 1j * special.yv(n, x))


def bessel_j_prime(n, x):
    """dJ_n/dx from J_{n-1} - (n/x) J_n (with J_{-1} = -J_1)."""
    n, x = _check(n, x)
    return _out(special.jv(n - 1, x) - n / x * special.jv(n, x))


def hankel2_prime(n, x):
    """dH_n^(2)/dx from the same recurrence as :func:`bessel_j_prime`."""
    n, x = _check(n, x)
    h = lambda m: special.jv(m, x) - 1j * special.yv(m, x)  # noqa: E731
    return _out(h(n - 1) - n / x * h(n))
