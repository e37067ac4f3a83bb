"""Step-size selection: plain backtracking and strong-Wolfe bracketing."""

from __future__ import annotations

import numpy as np

from .errors import LineSearchError


def backtracking_search(evaluate, x, d, e_x, rho=0.8, max_backtracks=100):
    """First step in {1, rho, rho^2, ...} that strictly decreases the objective.

    Parameters
    ----------
    evaluate : callable
        Maps a point to its objective value.
    x : ndarray
        Current iterate.
    d : ndarray
        Descent direction.
    e_x : float
        Objective at ``x`` (saves one evaluation).
    rho : float
        Backtracking factor in (0, 1).
    max_backtracks : int
        Trial budget before giving up.

    Returns
    -------
    (alpha, e_new, trials)
        Accepted step, objective there, and the number of candidate steps
        tried (1 means the full step was accepted).
    """
    alpha = 1.0
    for trials in range(1, max_backtracks + 1):
        e_new = evaluate(x + alpha * d)
        if e_new < e_x:
            return alpha, e_new, trials
        alpha *= rho
    raise LineSearchError(
        "no decrease within %d backtracking trials (last step %.3g)"
        % (max_backtracks, alpha / rho)
    )


def decrease_below_resolution(e_x, slope, alpha=1.0) -> bool:
    """Whether the decrease a line search hunts for is unobservable in floats.

    ``slope`` is the directional derivative at the current point; the best
    decrease any step of size about ``alpha`` can produce is |slope|*alpha,
    and once that falls under the objective's evaluation noise every
    candidate comparison is rounding, not signal.
    """
    return abs(slope) * alpha <= 128.0 * np.finfo(np.float64).eps * max(1.0, abs(e_x))


def stalled_step_acceptable(e_x, grad_norm_x, e_cand, grad_norm_cand) -> bool:
    """Whether a candidate step taken after line-search exhaustion is sound.

    Near the minimizer the true per-step decrease can drop below one ulp of
    the objective, so no strict decrease is observable in double precision
    even though the step is mathematically downhill. In that regime the
    candidate must earn acceptance through the gradient instead: its norm at
    least halved, with the objective unchanged up to evaluation noise.
    """
    # noise allowance: a few tens of ulps, since the objective is assembled
    # from terms that may individually dwarf the final value
    slack = 64.0 * np.finfo(np.float64).eps * max(1.0, abs(e_x))
    return grad_norm_cand <= 0.5 * grad_norm_x and e_cand <= e_x + slack


def wolfe_search(
    evaluate,
    evaluate_gradient,
    x,
    d,
    alpha_init=1.0,
    c1=1e-4,
    c2=0.9,
    f0=None,
    g0=None,
    max_expansions=30,
    zoom_iters=60,
):
    """Strong Wolfe line search: bracket by doubling, then zoom.

    Finds alpha with f(x + alpha d) <= f(x) + c1 alpha g0.d and
    |g(x + alpha d).d| <= c2 |g0.d|. Steps larger than 1 are allowed.

    Parameters
    ----------
    evaluate, evaluate_gradient : callables
        Objective and gradient as functions of the point.
    x, d : ndarray
        Iterate and descent direction.
    alpha_init : float
        First trial step.
    c1, c2 : float
        Sufficient-decrease and curvature constants, 0 < c1 < c2 < 1.
    f0, g0 : optional
        Objective and gradient at ``x`` if the caller already has them.

    Returns
    -------
    (alpha, e_new, grad_new)
    """
    if not 0 < c1 < c2 < 1:
        raise ValueError("need 0 < c1 < c2 < 1")
    phi0 = evaluate(x) if f0 is None else f0
    grad0 = evaluate_gradient(x) if g0 is None else g0
    dphi0 = float(grad0 @ d)
    if dphi0 >= 0:
        raise LineSearchError("search direction is not a descent direction")

    def phi(a):
        return evaluate(x + a * d)

    def dphi(a):
        g = evaluate_gradient(x + a * d)
        return float(g @ d), g

    def zoom(lo, hi, phi_lo, dphi_lo, phi_hi):
        # Nocedal-Wright style zoom; quadratic interpolation with a bisection
        # safeguard keeping each trial strictly interior.
        for _ in range(zoom_iters):
            width = hi - lo
            denom = 2.0 * (phi_hi - phi_lo - dphi_lo * width)
            if denom != 0.0:
                a = lo - dphi_lo * width * width / denom
            else:
                a = lo + 0.5 * width
            interior_lo = lo + 0.1 * width
            interior_hi = lo + 0.9 * width
            if not min(interior_lo, interior_hi) <= a <= max(interior_lo, interior_hi):
                a = lo + 0.5 * width
            phi_a = phi(a)
            if phi_a > phi0 + c1 * a * dphi0 or phi_a >= phi_lo:
                hi, phi_hi = a, phi_a
            else:
                dphi_a, grad_a = dphi(a)
                if abs(dphi_a) <= -c2 * dphi0:
                    return a, phi_a, grad_a
                if dphi_a * (hi - lo) >= 0.0:
                    hi, phi_hi = lo, phi_lo
                lo, phi_lo, dphi_lo = a, phi_a, dphi_a
            if abs(hi - lo) <= 1e-14 * max(1.0, abs(lo)):
                raise LineSearchError("Wolfe interval collapsed without an acceptable step")
        raise LineSearchError("Wolfe zoom exceeded its evaluation budget")

    alpha_prev, phi_prev, dphi_prev = 0.0, phi0, dphi0
    alpha = float(alpha_init)
    if not alpha > 0:
        alpha = 1.0
    alpha_max = 1e10
    for i in range(max_expansions):
        phi_a = phi(alpha)
        if phi_a > phi0 + c1 * alpha * dphi0 or (i > 0 and phi_a >= phi_prev):
            return zoom(alpha_prev, alpha, phi_prev, dphi_prev, phi_a)
        dphi_a, grad_a = dphi(alpha)
        if abs(dphi_a) <= -c2 * dphi0:
            return alpha, phi_a, grad_a
        if dphi_a >= 0.0:
            return zoom(alpha, alpha_prev, phi_a, dphi_a, phi_prev)
        if alpha >= alpha_max:
            break
        alpha_prev, phi_prev, dphi_prev = alpha, phi_a, dphi_a
        alpha = min(2.0 * alpha, alpha_max)
    raise LineSearchError("Wolfe bracketing failed within the expansion budget")
