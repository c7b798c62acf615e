"""Log-space helpers for integrals and norms whose powers overflow doubles."""

from __future__ import annotations

import math

import numpy as np
from scipy.special import logsumexp


def safe_log(x):
    """``log|x|`` with ``-inf`` at zero and no warnings."""
    x = np.abs(np.asarray(x, dtype=float))
    with np.errstate(divide="ignore"):
        return np.log(x)


def log_integral(logf, cell_volume):
    """``log(sum(exp(logf)) * cell_volume)``; ``-inf`` for an identically zero integrand."""
    logf = np.asarray(logf, dtype=float).ravel()
    if logf.size == 0 or np.all(np.isneginf(logf)):
        return -math.inf
    return float(logsumexp(logf) + math.log(cell_volume))


def log_norm(f, p, cell_volume):
    """``log ||f||_{L^p}`` on a uniform grid (midpoint rule)."""
    if np.isinf(p):
        return float(np.max(safe_log(f)))
    return log_integral(p * safe_log(f), cell_volume) / p


def log_sum(*logs):
    """``log(sum(exp(l)))`` over scalars, tolerating ``-inf``."""
    vals = [float(v) for v in logs]
    if all(math.isinf(v) and v < 0 for v in vals):
        return -math.inf
    return float(logsumexp(vals))


def log_trapezoid(log_vals, times):
    """``log`` of the trapezoid rule in time applied to ``exp(log_vals)``."""
    times = np.asarray(times, dtype=float)
    if len(times) < 2:
        return -math.inf
    dt = np.diff(times)
    w = np.zeros(len(times))
    w[:-1] += dt / 2
    w[1:] += dt / 2
    lv = np.asarray(log_vals, dtype=float)
    terms = [l + math.log(wi) for l, wi in zip(lv, w) if wi > 0]
    return log_sum(*terms)


def log_margin(log_lhs, log_rhs):
    """Relative margin ``(rhs - lhs) / max(lhs, rhs)`` for positive sides given as logs."""
    if math.isinf(log_lhs) and log_lhs < 0:
        return 0.0 if (math.isinf(log_rhs) and log_rhs < 0) else 1.0
    if math.isinf(log_rhs) and log_rhs > 0:
        return 1.0
    d = log_lhs - log_rhs
    return float(-math.expm1(d)) + 0.0 if d <= 0 else float(math.expm1(-d))


def to_float(log_value):
    """``exp`` that saturates to ``inf`` instead of raising."""
    if log_value > 709.0:
        return math.inf
    return math.exp(log_value)
