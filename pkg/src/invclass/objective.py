"""The inverse-classification objective and its derivatives.

For a problem (source x_bar, target class k, trade-off lam > 0) the objective
is

    E(x) = (lam / 2) * ||x - x_bar||^2 - ln p_k(x),

strongly convex with parameter lam. All routines here work from a
ReducedModel so the target row cancels analytically: with
z_bar = a_bar @ x + b_bar (whose entry k is zero),

    -ln p_k(x) = logsumexp(z_bar),    p = softmax(z_bar) = softmax(z).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ModelFormatError
from .model import ReducedModel, SoftmaxModel


@dataclass(frozen=True)
class Problem:
    """One inverse-classification instance.

    Attributes
    ----------
    source : ndarray of shape (D,)
        The instance to perturb as little as possible.
    target_class : int
        The class (1-based) whose probability the solution should make high.
    lam : float
        Trade-off between staying near ``source`` and classifying as the
        target; must be positive.
    """

    source: np.ndarray
    target_class: int
    lam: float

    def __post_init__(self):
        source = np.asarray(self.source, dtype=np.float64)
        if source.ndim != 1 or not np.isfinite(source).all():
            raise ValueError("source must be a finite vector")
        if not self.lam > 0:
            raise ValueError("lam must be positive, got %r" % (self.lam,))
        if int(self.target_class) < 1:
            raise ValueError("target_class is 1-based and must be >= 1")
        source = source.copy()
        source.flags.writeable = False
        object.__setattr__(self, "source", source)
        object.__setattr__(self, "target_class", int(self.target_class))
        object.__setattr__(self, "lam", float(self.lam))


def _check_compatible(reduced: ReducedModel, prob: Problem) -> None:
    if reduced.target_class != prob.target_class:
        raise ValueError(
            "problem targets class %d but the reduction was built for class %d"
            % (prob.target_class, reduced.target_class)
        )


def eval_objective(reduced: ReducedModel, model: SoftmaxModel, prob: Problem, x: np.ndarray):
    """Evaluate E at ``x``.

    Returns
    -------
    E : float
        Objective value.
    p : ndarray of shape (K,)
        Softmax probabilities at ``x``, returned for reuse by solvers.

    The target-class log-probability comes from max-shifted logsumexp of the
    reduced logits, so E stays finite and accurate when p_k underflows.
    """
    _check_compatible(reduced, prob)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.feature_dim,) or x.shape != (reduced.feature_dim,):
        raise ModelFormatError(
            "x has length %d, model expects %d" % (x.size, model.feature_dim)
        )
    if not np.isfinite(x).all():
        raise ModelFormatError("x entries must be finite")
    z_bar = reduced.a_bar @ x + reduced.b_bar
    m = z_bar.max()  # >= 0 because the target entry is exactly 0
    lse = m + np.log(np.exp(z_bar - m).sum())
    p = np.exp(z_bar - lse)
    diff = x - prob.source
    energy = 0.5 * prob.lam * float(diff @ diff) + float(lse)
    return energy, p


def gradient(reduced: ReducedModel, prob: Problem, x: np.ndarray, p: np.ndarray) -> np.ndarray:
    """Gradient lam * (x - x_bar) + a_bar.T @ p, with p evaluated at x."""
    return prob.lam * (x - prob.source) + reduced.a_bar.T @ p


def hessian_matvec(reduced: ReducedModel, prob: Problem, p: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Apply the Hessian lam * I + a_bar.T @ (diag(p) - p p.T) @ a_bar to ``u``.

    O(KD) work; the D x D matrix is never formed.
    """
    t = reduced.a_bar @ u
    s = p * t - p * float(p @ t)
    return prob.lam * u + reduced.a_bar.T @ s


def lipschitz_bound(reduced: ReducedModel, prob: Problem) -> float:
    """Gradient Lipschitz constant L = lam + ||a_bar||^2 (squared spectral norm)."""
    return prob.lam + reduced.spec_norm_sq


def target_neg_log_prob(reduced: ReducedModel, x: np.ndarray) -> float:
    """-ln p_k(x) for the reduction's target class, via shifted logsumexp."""
    z_bar = reduced.a_bar @ x + reduced.b_bar
    m = z_bar.max()
    return float(m + np.log(np.exp(z_bar - m).sum()))
