"""Closed-form solution for binary (K=2) models.

For a logistic classifier p_1(x) = 1 / (1 + exp(w @ x + w0)) the minimizer of
E(x) = (lam/2) ||x - x_bar||^2 - ln p_1(x) lies on the ray from x_bar along
-w, and its class-1 probability is the unique root in (0, 1) of the scalar
fixed-point equation

    t = 1 / (1 + exp(slope * t + intercept)),
    slope = ||w||^2 / lam,   intercept = w @ x_bar + w0 - slope.

The whole solve is two vector-vector products plus a scalar root find.
"""

from __future__ import annotations

import math

import numpy as np

from .model import LogisticModel, SoftmaxModel, to_logistic


def _logistic_prob(u: float) -> float:
    """1 / (1 + exp(u)) without overflow for any float u."""
    if u >= 0:
        e = math.exp(-u)
        return e / (1.0 + e)
    return 1.0 / (1.0 + math.exp(u))


def sigmoid_fixed_point(slope: float, intercept: float, tol: float = 1e-14) -> float:
    """Unique root in (0, 1) of t = 1 / (1 + exp(slope * t + intercept)).

    Requires slope > 0, which makes h(t) = t - 1/(1+exp(slope*t+intercept))
    strictly increasing with h(0) < 0 < h(1), so the root exists and is
    unique. Safeguarded Newton: a step leaving the current bracket is
    replaced by bisection. Converges in a handful of iterations; the cap of
    60 is never binding in practice.

    Parameters
    ----------
    slope : float
        Must be positive.
    intercept : float
    tol : float
        Absolute residual target |h(t)|. When tol is below what double
        precision can represent for the given slope, the best representable
        root is returned once the bracket closes.
    """
    if not slope > 0:
        raise ValueError("slope must be positive, got %r" % (slope,))
    lo, hi = 1e-300, 1.0 - 1e-300  # evaluation-safe bracket endpoints
    t = 0.5
    for _ in range(60):
        q = _logistic_prob(slope * t + intercept)
        h = t - q
        if abs(h) < tol:
            return t
        if h < 0:
            lo = t
        else:
            hi = t
        h_prime = 1.0 + slope * q * (1.0 - q)
        t_next = t - h / h_prime
        if not lo < t_next < hi:
            t_next = 0.5 * (lo + hi)
        if t_next == t:  # bracket closed at machine resolution
            return t
        t = t_next
    return t


def solve_logistic(lm: LogisticModel, source: np.ndarray, lam: float):
    """Closed-form minimizer targeting class 1 of a logistic model.

    Returns
    -------
    (x_star, p1_star)
        The minimizer and its class-1 probability. ``w = 0`` degenerates to
        ``x_star = source`` (the objective's data term then fixes the point).

    Cost is O(D): one dot product for the intercept, one squared norm, the
    scalar root find, and one axpy for the solution.
    """
    if not lam > 0:
        raise ValueError("lam must be positive")
    source = np.asarray(source, dtype=np.float64)
    w = lm.w
    w_norm_sq = float(w @ w)
    if w_norm_sq == 0.0:
        return source.copy(), _logistic_prob(lm.w0)
    slope = w_norm_sq / lam
    intercept = float(w @ source) + lm.w0 - slope
    p1 = sigmoid_fixed_point(slope, intercept)
    x_star = source - ((1.0 - p1) / lam) * w
    return x_star, p1


def solve_closed_form(model: SoftmaxModel, source: np.ndarray, target_class: int, lam: float):
    """Closed-form solve of a K=2 softmax model for either target class.

    Class 2 is targeted by negating (w, w0), which swaps the class roles.
    Returns (x_star, p_target).
    """
    lm = to_logistic(model)
    if target_class == 2:
        lm = LogisticModel(w=-lm.w, w0=-lm.w0)
    elif target_class != 1:
        raise ValueError("target class must be 1 or 2 for a binary model")
    return solve_logistic(lm, source, lam)
