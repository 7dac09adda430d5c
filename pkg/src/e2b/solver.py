"""Dual solver for entropy balancing with arbitrary log-base-weights.

The primal problem picks weights on the simplex minimizing KL divergence
to the base weights subject to zero weighted moments of the constraint
features.  Its dual is the smooth convex problem

    minimize over lam:  log sum_i exp(-lam' g_i + ell_i)

whose gradient is -G w with w = softmax(-lam' G + ell), so driving the
gradient to zero is exactly driving the balance residual G w to zero.
We run Newton's method with a backtracking line search; the Hessian is
the weighted second-moment matrix sum_i w_i g_i g_i' - (G w)(G w)',
which is positive semidefinite.  When its Cholesky factorization fails
even with diagonal jitter, the step falls back to steepest descent.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .data import BalancingProblem
from .errors import DataError

Array = np.ndarray

# Diagonal jitter escalation for barely-PD Hessians, before giving up.
_JITTERS = (0.0, 1e-12, 1e-10, 1e-8)


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-9          # infinity-norm threshold on the dual gradient
    max_iter: int = 200
    backtrack: float = 0.5     # line-search shrink factor
    sufficient_decrease: float = 1e-4

    def __post_init__(self):
        if not self.tol > 0:
            raise DataError("tol must be positive")
        if self.max_iter < 1:
            raise DataError("max_iter must be >= 1")


@dataclass(frozen=True)
class DualSolution:
    """Multipliers, weights, and convergence diagnostics of one dual solve."""

    multipliers: Array   # (2K+1,)
    weights: Array       # (n,), positive, sums to 1
    iterations: int
    grad_norm: float     # final infinity-norm of the dual gradient
    converged: bool


def _stable_softmax(logits: Array) -> Array:
    z = logits - logits.max()
    e = np.exp(z)
    return e / e.sum()


def _objective(logits: Array) -> float:
    # log-sum-exp with max subtraction
    m = logits.max()
    return float(m + np.log(np.exp(logits - m).sum()))


def weights_from_dual(p: BalancingProblem, multipliers: Array) -> Array:
    """Map multipliers to normalized weights: softmax(-lam' G + ell)."""
    multipliers = np.asarray(multipliers, dtype=float)
    if multipliers.shape != (p.n_constraints,):
        raise DataError(
            f"multipliers must have length {p.n_constraints}, got {multipliers.shape}"
        )
    return _stable_softmax(-multipliers @ p.constraints + p.log_base_weights)


def balance_residual(p: BalancingProblem, w: Array) -> Array:
    """Weighted constraint moments G w; zero at exact balance."""
    return p.constraints @ np.asarray(w, dtype=float)


def kl_to_base(w: Array, ell: Array) -> float:
    """KL divergence from the weights to the normalized base weights."""
    w = np.asarray(w, dtype=float)
    ell = np.asarray(ell, dtype=float)
    m = ell.max()
    ell_norm = ell - (m + np.log(np.exp(ell - m).sum()))
    return float(np.sum(w * (np.log(w) - ell_norm)))


def _newton_direction(hess: Array, grad: Array) -> Array | None:
    scale = max(np.abs(np.diag(hess)).max(), 1.0)
    for jitter in _JITTERS:
        try:
            cho = scipy.linalg.cho_factor(
                hess + jitter * scale * np.eye(hess.shape[0]), lower=True
            )
            return scipy.linalg.cho_solve(cho, -grad)
        except scipy.linalg.LinAlgError:
            continue
    return None


def solve_dual(p: BalancingProblem, opts: SolverOptions | None = None) -> DualSolution:
    """Minimize the dual objective starting from multipliers = 0.

    Returns the best iterate with ``converged=False`` when the gradient
    norm never reaches the tolerance; callers decide whether that is
    fatal.  The iteration order is fixed, so identical inputs produce
    bitwise-identical results.
    """
    opts = opts or SolverOptions()
    g_mat = p.constraints
    if not np.isfinite(g_mat).all():
        raise DataError("constraint matrix contains non-finite values")
    dead = np.flatnonzero(~g_mat.any(axis=1))
    if dead.size:
        warnings.warn(f"constraint rows {dead.tolist()} are all zero (rank deficient)")

    dim = p.n_constraints
    lam = np.zeros(dim)
    logits = -lam @ g_mat + p.log_base_weights
    obj = _objective(logits)
    w = _stable_softmax(logits)

    iterations = 0
    for iterations in range(1, opts.max_iter + 1):
        residual = g_mat @ w
        grad = -residual
        grad_norm = float(np.abs(grad).max())
        if grad_norm <= opts.tol:
            return DualSolution(lam, w, iterations - 1, grad_norm, True)

        gw = g_mat * w[None, :]
        hess = gw @ g_mat.T - np.outer(residual, residual)
        step = _newton_direction(hess, grad)
        if step is None:
            step = -grad  # gradient descent fallback

        # Backtracking line search (Armijo condition).
        slope = float(grad @ step)
        if slope >= 0.0:
            step = -grad
            slope = float(grad @ step)
        t = 1.0
        for _ in range(60):
            cand = lam + t * step
            cand_logits = -cand @ g_mat + p.log_base_weights
            cand_obj = _objective(cand_logits)
            if cand_obj <= obj + opts.sufficient_decrease * t * slope:
                break
            t *= opts.backtrack
        else:
            # No productive step length: report the best iterate.
            break
        lam = lam + t * step
        logits = cand_logits
        obj = cand_obj
        w = _stable_softmax(logits)

    residual = g_mat @ w
    grad_norm = float(np.abs(residual).max())
    return DualSolution(lam, w, iterations, grad_norm, grad_norm <= opts.tol)
