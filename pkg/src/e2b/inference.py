"""Asymptotic variance of the estimated weights and balance diagnostics.

The dual solve is a Z-estimator: the multipliers satisfy the empirical
moment condition mean_i[psi_i] = 0 with per-observation score

    psi_i = g_i exp(-lam' g_i + ell_i).

Its sandwich covariance is V = A^{-1} B A^{-1} with A = mean[d psi/d lam]
and B = mean[psi psi'], both evaluated at the solution.  Pushing V
through the gradient of the normalized-weight map s_i(lam) (the softmax
scaled so weights average one, i.e. s_i = n w_i) gives the per-row
variance of sqrt(n) times the weight around its population value:

    sigma2_i = grad s_i' V grad s_i,   grad s_i = -s_i (g_i - G w).

All exponentials are max-subtracted; that rescales psi by a constant,
which cancels in the A^{-1} ... A^{-1} sandwich, so the result is
invariant to shifting all log-base-weights by a constant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import BalancingProblem
from .errors import DataError, RankError
from .solver import DualSolution

Array = np.ndarray


@dataclass(frozen=True)
class WeightVariance:
    """Per-row weight variances and the multiplier sandwich matrix."""

    sigma2: Array          # (n,) variance of sqrt(n) (w_hat_i - w*_i), density-ratio scale
    cov_multipliers: Array  # (2K+1, 2K+1) sandwich V
    condition: float       # condition number of the bread matrix


def _bread_and_butter(g_mat: Array, logits: Array):
    shifted = np.exp(logits - logits.max())
    n = g_mat.shape[1]
    bread = (g_mat * shifted[None, :]) @ g_mat.T / n
    butter = (g_mat * (shifted**2)[None, :]) @ g_mat.T / n
    return bread, butter, shifted


def sandwich_variance(p: BalancingProblem, sol: DualSolution) -> WeightVariance:
    """Sandwich variance of the estimated weights at the dual solution."""
    if not sol.converged:
        raise DataError("sandwich variance requires a converged dual solution")
    g_mat = p.constraints
    logits = -sol.multipliers @ g_mat + p.log_base_weights
    bread, butter, _ = _bread_and_butter(g_mat, logits)
    try:
        bread_inv = np.linalg.inv(bread)
    except np.linalg.LinAlgError:
        raise RankError("empirical score-derivative matrix is singular") from None
    cov = bread_inv @ butter @ bread_inv
    cov = 0.5 * (cov + cov.T)

    n = p.n
    w = sol.weights
    centered = g_mat - (g_mat @ w)[:, None]      # g_i - G w per column
    grad_s = -(n * w)[None, :] * centered        # (2K+1, n), column i = grad s_i
    sigma2 = np.einsum("ki,kl,li->i", grad_s, cov, grad_s)
    return WeightVariance(
        sigma2=sigma2,
        cov_multipliers=cov,
        condition=float(np.linalg.cond(bread)),
    )


def weight_and_variance_at(
    p: BalancingProblem,
    sol: DualSolution,
    g_probe: Array,
    ell_probe: float = 0.0,
    variance: WeightVariance | None = None,
) -> tuple[float, float]:
    """Estimated density-ratio weight and its variance at a probe point.

    The probe weight is exp(-lam' g + ell) over the sample mean of the
    same exponential, i.e. the weight map evaluated off-sample; its
    variance uses the same sandwich as the per-row ones.
    """
    g_probe = np.asarray(g_probe, dtype=float)
    if g_probe.shape != (p.n_constraints,):
        raise DataError(f"probe feature must have length {p.n_constraints}")
    variance = variance or sandwich_variance(p, sol)
    logits = -sol.multipliers @ p.constraints + p.log_base_weights
    m = logits.max()
    denom = float(np.exp(logits - m).mean())
    probe_logit = float(-sol.multipliers @ g_probe + ell_probe)
    s_probe = np.exp(probe_logit - m) / denom
    grad_s = -s_probe * (g_probe - p.constraints @ sol.weights)
    sigma2 = float(grad_s @ variance.cov_multipliers @ grad_s)
    return float(s_probe), sigma2


def weighted_entropy_identity(w: Array, p_hat: Array) -> tuple[float, float]:
    """Both sides of the inverse-density base-weight identity.

    lhs: sum_i w_i log(w_i / p_hat_i^{-1})
    rhs: sum_i (1 / p_hat_i) * H(p_hat_i w_i) with H(p) = p log p.
    """
    w = np.asarray(w, dtype=float)
    p_hat = np.asarray(p_hat, dtype=float)
    if np.any(w <= 0) or np.any(p_hat <= 0):
        raise DataError("weights and densities must be strictly positive")
    lhs = float(np.sum(w * np.log(w * p_hat)))
    pw = p_hat * w
    rhs = float(np.sum((pw * np.log(pw)) / p_hat))
    return lhs, rhs


def gsw_balance_check(w: Array, a: Array, phi_x: Array) -> Array:
    """Weighted treatment-confounder cross moment sum_i w_i a_i phi(x_i).

    Zero in expectation under generalized stable weights; for solved
    entropy-balancing weights this equals the interaction block of the
    balance residual.
    """
    w = np.asarray(w, dtype=float)
    a = np.asarray(a, dtype=float)
    phi_x = np.atleast_2d(np.asarray(phi_x, dtype=float))
    if phi_x.shape[0] != w.shape[0]:
        phi_x = phi_x.T
    if phi_x.shape[0] != w.shape[0] or a.shape != w.shape:
        raise DataError("shape mismatch in balance check")
    return (w * a) @ phi_x
