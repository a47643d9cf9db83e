"""Pure-Python implementations of the compiled kernels.

Signatures and results match ``_kernels.pyx`` exactly; the backend selector in
``_backend`` picks one of the two at import time.
"""

import math

import numpy as np

LOG_2PI = math.log(2.0 * math.pi)


def kalman_filter(y, a, b, c, rho, p0, filtered):
    """Scalar local-level Kalman recursion.

    Observation ``y_t = a + x_t + b e_t``, state ``x_t = rho x_{t-1} + c eps_t``.
    The filter starts from ``x_{0|0} = 0`` with variance ``p0``.  Filtered means
    ``x_{t|t}`` are written into ``filtered`` (length ``len(y)``).

    Returns the Gaussian log-likelihood, or ``nan`` if a one-step prediction
    variance is not strictly positive.
    """
    r = b * b
    q = c * c
    x = 0.0
    p = p0
    ll = 0.0
    for t in range(len(y)):
        xp = rho * x
        pp = rho * rho * p + q
        f = pp + r
        if not f > 0.0:
            return math.nan
        v = y[t] - a - xp
        ll -= 0.5 * (LOG_2PI + math.log(f) + v * v / f)
        k = pp / f
        x = xp + k * v
        p = (1.0 - k) * pp
        filtered[t] = x
    return ll


def kalman_loglik(y, a, b, c, rho, p0):
    r = b * b
    q = c * c
    x = 0.0
    p = p0
    ll = 0.0
    for t in range(len(y)):
        xp = rho * x
        pp = rho * rho * p + q
        f = pp + r
        if not f > 0.0:
            return math.nan
        v = y[t] - a - xp
        ll -= 0.5 * (LOG_2PI + math.log(f) + v * v / f)
        k = pp / f
        x = xp + k * v
        p = (1.0 - k) * pp
    return ll


def power_iterate(mat, v0, tol, max_iter, norm_kind):
    """Power iteration ``v <- mat @ v`` with renormalisation each step.

    ``norm_kind`` 1 rescales to unit sum, 2 to unit Euclidean norm.  Stops when
    successive iterates differ by less than ``tol`` in max norm.  Returns
    ``(v, growth, iterations, converged)``; ``growth`` is the scale factor of
    the last step (the Perron root on convergence).
    """
    mat = np.ascontiguousarray(mat, dtype=float)
    v = np.array(v0, dtype=float)
    n = v.shape[0]
    growth = 0.0
    for it in range(1, max_iter + 1):
        w = mat @ v
        if norm_kind == 1:
            s = float(w.sum())
        else:
            s = float(math.sqrt(w @ w))
        if not s > 0.0:
            return v, 0.0, it, False
        w /= s
        growth = s
        diff = float(np.max(np.abs(w - v))) if n else 0.0
        v = w
        if diff < tol:
            return v, growth, it, True
    return v, growth, max_iter, False
