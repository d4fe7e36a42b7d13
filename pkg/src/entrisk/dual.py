"""Dual-variable update machinery for the exponential-potential geometry.

Everything here works on the dual variable nu of the min-min objective
E[exp(s - nu) + nu].  The proximal mirror step uses the Bregman divergence
induced by phi(nu) = exp(-nu); its closed form makes exp(nu_t) a convex
combination of exp(nu_prev) and exp(s).  All exponential arithmetic is
routed through logaddexp so quantities like exp(700) never materialize:
that single primitive is what keeps every update overflow-free.

Functions broadcast over numpy arrays; the scalar contracts are the
documented ones.
"""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from .core import ALPHA_INF, is_infinite_alpha


def logmeanexp(a, axis=None):
    """log of the arithmetic mean of exp(a), shift-stable."""
    a = np.asarray(a, dtype=float)
    n = a.size if axis is None else a.shape[axis]
    return logsumexp(a, axis=axis) - np.log(n)


def bregman_exp(a, b):
    """Bregman divergence of the potential phi(nu) = exp(-nu).

    D(a, b) = exp(-a) - exp(-b) + exp(-b) * (a - b), evaluated as
    exp(-b) * (expm1(b - a) - (b - a)) so the result is never negative
    in floating point (expm1(u) >= u holds after rounding).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    u = b - a
    return np.exp(-b) * (np.expm1(u) - u)


def _validate_alpha(alpha):
    alpha = np.asarray(alpha, dtype=float)
    if np.any(alpha <= 0):
        raise ValueError("alpha must be positive")
    return alpha


def spmd_step(nu_prev, s_value, alpha):
    """Proximal mirror step on one stochastic dual term.

    Minimizes exp(s - nu) + nu + D(nu, nu_prev) / alpha in closed form:

        nu_t = nu_prev + log(1 + alpha e^s) - log(1 + alpha e^{nu_prev})

    computed as logaddexp(0, log alpha + s) - logaddexp(0, log alpha + nu_prev).
    With the distinguished infinite alpha the step returns s_value itself
    (the mini-batch-approximation limit).
    """
    nu_prev = np.asarray(nu_prev, dtype=float)
    s_value = np.asarray(s_value, dtype=float)
    if is_infinite_alpha(alpha):
        return s_value + 0.0 * nu_prev
    log_alpha = np.log(_validate_alpha(alpha))
    step = np.logaddexp(0.0, log_alpha + s_value) - np.logaddexp(0.0, log_alpha + nu_prev)
    out = nu_prev + step
    return out if out.ndim else float(out)


def spmd_step_batch(nu_prev, s_values, alpha, axis=-1):
    """spmd_step with exp(s) replaced by the mean of exp(s_j) over ``axis``.

    Infinite alpha returns logmeanexp(s_values) directly.
    """
    s_values = np.asarray(s_values, dtype=float)
    if s_values.shape == () or s_values.shape[axis] == 0:
        raise ValueError("s_values must be a nonempty batch")
    mean_log = logmeanexp(s_values, axis=axis)
    if is_infinite_alpha(alpha):
        return mean_log
    return spmd_step(nu_prev, mean_log, alpha)


def dual_sgd_step(nu_prev, s_value, alpha_prime, clamp):
    """Projected SGD step on the dual: nu - alpha' * (1 - exp(s - nu)).

    The stochastic gradient of exp(s - nu) + nu is 1 - exp(s - nu); the
    exponent is formed as s - nu first so bounded problems never overflow.
    ``clamp`` is the projection interval (c0, c1); pass None to reproduce
    the unprojected variant.
    """
    alpha_prime = _validate_alpha(alpha_prime)
    nu_prev = np.asarray(nu_prev, dtype=float)
    out = nu_prev - alpha_prime * (1.0 - np.exp(np.asarray(s_value, dtype=float) - nu_prev))
    if clamp is not None:
        c0, c1 = clamp
        if c0 > c1:
            raise ValueError("clamp interval is empty")
        out = np.clip(out, c0, c1)
    return out if out.ndim else float(out)


def dual_sgd_step_batch(nu_prev, s_values, alpha_prime, clamp, axis=-1):
    """dual_sgd_step with the batch-mean gradient 1 - mean_j exp(s_j - nu)."""
    mean_log = logmeanexp(np.asarray(s_values, dtype=float), axis=axis)
    return dual_sgd_step(nu_prev, mean_log, alpha_prime, clamp)


def softplus_dual_value(s_minus_nu, rho):
    """Softplus surrogate log(1 + rho * exp(x)) / rho of the exponential term.

    Truncates the exponential for large x (value ~ x + log(rho)/rho there)
    and approaches exp(x) as rho -> 0.  Evaluated via logaddexp.
    """
    if not rho > 0:
        raise ValueError("rho must be positive")
    x = np.asarray(s_minus_nu, dtype=float)
    out = np.logaddexp(0.0, x + np.log(rho)) / rho
    return out if out.ndim else float(out)


def softplus_dual_grad(s_minus_nu, rho):
    """d/dx of softplus_dual_value: exp(x) / (1 + rho exp(x)).

    This is the coefficient that replaces exp(x) in the softplus variant of
    the alternating-SGD updates; computed as exp(x - logaddexp(0, x + log rho)).
    """
    if not rho > 0:
        raise ValueError("rho must be positive")
    x = np.asarray(s_minus_nu, dtype=float)
    out = np.exp(x - np.logaddexp(0.0, x + np.log(rho)))
    return out if out.ndim else float(out)


def erm_rate_state(nu_prev, t: int):
    """Step size making nu_t track the log running mean of z exactly.

    t = 1 returns the infinite alpha (so nu_1 = s_1); afterwards
    alpha_t = exp(-nu_prev) / (t - 1), i.e. pi_{t-1} / (t - 1).
    """
    if t < 1:
        raise ValueError("iterations are 1-based")
    if t == 1:
        return ALPHA_INF
    return np.exp(-np.asarray(nu_prev, dtype=float)) / (t - 1)


def sox_log_average(nu_prev, mean_log, gamma):
    """Log-domain moving average exp(nu) <- (1-gamma) exp(nu_prev) + gamma exp(mean_log).

    gamma = 1 snaps to mean_log exactly.
    """
    if not 0.0 < gamma <= 1.0:
        raise ValueError("gamma must lie in (0, 1]")
    mean_log = np.asarray(mean_log, dtype=float)
    if gamma == 1.0:
        return mean_log
    nu_prev = np.asarray(nu_prev, dtype=float)
    return np.logaddexp(np.log1p(-gamma) + nu_prev, np.log(gamma) + mean_log)
