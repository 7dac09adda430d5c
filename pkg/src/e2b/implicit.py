"""Derivatives of the dual solution and the weights in the log-base-weights.

At the optimum the unnormalized first-order condition is

    sum_i g_i exp(-lam' g_i + ell_i) = 0.

Differentiating it in ell_j and dividing by the normalizer gives a small
linear system per column: with M = sum_i w_i g_i g_i' (the weighted
second moment at the solution),

    d lam / d ell_j = M^{-1} g_j w_j.

The total weight Jacobian chains the direct logit path and the indirect
multiplier path through the softmax:

    dw/dell = (diag(w) - w w') (I - G' J),    J = d lam / d ell,

so a loss gradient in the weights pulls back to the log-base-weights
with one Cholesky solve and a couple of matrix-vector products; this
vector-Jacobian product is the primitive the training loop consumes.
Computations use the normalized weights rather than the raw
exponentials, which is the same linear system up to a positive scale
and does not overflow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .data import BalancingProblem
from .errors import DataError, RankError
from .solver import DualSolution

Array = np.ndarray

_JITTERS = (0.0, 1e-12, 1e-10, 1e-8)


@dataclass(frozen=True)
class WeightJacobianContext:
    """Cached quantities for differentiating through one dual solution."""

    hessian: Array          # (2K+1, 2K+1) weighted second moment sum_i w_i g_i g_i'
    cho: tuple              # Cholesky factorization of hessian (with jitter if needed)
    logits: Array           # (n,) -lam' G + ell
    weights: Array          # (n,)


def _factor(hess: Array) -> tuple:
    scale = max(np.abs(np.diag(hess)).max(), 1.0)
    for jitter in _JITTERS:
        try:
            return scipy.linalg.cho_factor(
                hess + jitter * scale * np.eye(hess.shape[0]), lower=True
            )
        except scipy.linalg.LinAlgError:
            continue
    # Name the most deficient direction to make rank errors actionable.
    eigvals, eigvecs = np.linalg.eigh(hess)
    worst = int(np.abs(eigvecs[:, 0]).argmax())
    raise RankError(
        f"weighted second-moment matrix is singular (smallest eigenvalue "
        f"{eigvals[0]:.3e}, dominated by constraint row {worst})"
    )


def jacobian_context(p: BalancingProblem, sol: DualSolution) -> WeightJacobianContext:
    if not sol.converged:
        raise DataError("implicit derivatives require a converged dual solution")
    w = sol.weights
    gw = p.constraints * w[None, :]
    hess = gw @ p.constraints.T
    return WeightJacobianContext(
        hessian=hess,
        cho=_factor(hess),
        logits=-sol.multipliers @ p.constraints + p.log_base_weights,
        weights=w,
    )


def dual_jacobian(
    p: BalancingProblem, sol: DualSolution, ctx: WeightJacobianContext | None = None
) -> Array:
    """Full (2K+1) x n Jacobian of the multipliers in the log-base-weights.

    Column j solves M J_j = g_j w_j.  Exported for diagnostics and
    finite-difference tests; training uses the VJP below instead.
    """
    ctx = ctx or jacobian_context(p, sol)
    rhs = p.constraints * ctx.weights[None, :]
    return scipy.linalg.cho_solve(ctx.cho, rhs)


def weights_vjp(
    p: BalancingProblem,
    sol: DualSolution,
    grad_weights: Array,
    ctx: WeightJacobianContext | None = None,
) -> Array:
    """Pull a loss gradient in the weights back to the log-base-weights.

    Computes (dw/dell)' v for v = grad_weights.  The softmax part maps v
    to t = w * v - w (w . v); the multiplier part subtracts the component
    explained by the balance constraints, w_j * g_j' M^{-1} (G t).
    """
    grad_weights = np.asarray(grad_weights, dtype=float)
    if grad_weights.shape != (p.n,):
        raise DataError(f"grad_weights must have length {p.n}, got {grad_weights.shape}")
    ctx = ctx or jacobian_context(p, sol)
    w = ctx.weights
    t = w * grad_weights - w * float(w @ grad_weights)
    pulled = scipy.linalg.cho_solve(ctx.cho, p.constraints @ t)
    return t - w * (pulled @ p.constraints)
