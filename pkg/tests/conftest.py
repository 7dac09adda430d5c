"""Shared oracles and instance builders for the test suite."""

import numpy as np
import pytest

from e2b.data import BalancingProblem
from e2b.solver import SolverOptions, solve_dual


def random_problem(rng, n=None, k=None, ell_scale=0.5):
    """A small random balancing instance with mild log-base-weights.

    Rows follow the production [phi; a; a*phi] layout, then every row is
    recentered around a random strictly positive weight vector, which
    guarantees exact balance is feasible (the dual minimum is finite).
    """
    k = k if k is not None else int(rng.integers(1, 4))
    dim = 2 * k + 1
    n = n if n is not None else int(rng.integers(max(dim + 3, 8), 17))
    phi = rng.standard_normal((k, n))
    a = rng.standard_normal(n)
    g = np.vstack([phi, a[None, :], a[None, :] * phi])
    anchor = rng.dirichlet(np.full(n, 5.0))
    g = g - (g @ anchor)[:, None]
    ell = ell_scale * rng.standard_normal(n)
    return BalancingProblem(g, ell)


def solve_tight(problem, tol=1e-12):
    return solve_dual(problem, SolverOptions(tol=tol, max_iter=500))


def grid_search_multipliers(problem, radius=5.0, final_spacing=1e-3):
    """Coarse-to-fine grid minimization of the dual objective.

    Entirely independent of the Newton path: evaluates the log-sum-exp
    objective on a full product grid and repeatedly zooms in on the best
    point.  The returned minimizer is accurate to about half the final
    grid spacing per coordinate.
    """
    g_mat = problem.constraints
    ell = problem.log_base_weights
    dim = g_mat.shape[0]
    points_per_axis = {1: 41, 2: 21, 3: 11, 4: 9, 5: 7, 6: 7, 7: 5}[dim]

    center = np.zeros(dim)
    half_width = radius
    spacing = 2.0 * half_width / (points_per_axis - 1)
    while True:
        axes = [np.linspace(c - half_width, c + half_width, points_per_axis) for c in center]
        mesh = np.meshgrid(*axes, indexing="ij")
        lams = np.stack([m.ravel() for m in mesh], axis=1)      # (P, dim)
        logits = -lams @ g_mat + ell[None, :]                    # (P, n)
        peak = logits.max(axis=1, keepdims=True)
        objective = peak[:, 0] + np.log(np.exp(logits - peak).sum(axis=1))
        center = lams[int(np.argmin(objective))]
        if spacing <= final_spacing:
            return center
        # Keep the true minimizer inside the next box even if it sits
        # just outside the winning cell.
        half_width = 1.5 * spacing
        spacing = 2.0 * half_width / (points_per_axis - 1)


def central_difference(fun, x0, step=1e-5):
    """Central finite-difference gradient of a scalar or vector function."""
    x0 = np.asarray(x0, dtype=float)
    probe = fun(x0)
    grad = np.empty(np.shape(probe) + x0.shape)
    for idx in np.ndindex(x0.shape):
        shift = np.zeros_like(x0)
        shift[idx] = step
        grad[(...,) + idx] = (fun(x0 + shift) - fun(x0 - shift)) / (2.0 * step)
    return grad


def relative_error(approx, exact):
    approx = np.asarray(approx, dtype=float)
    exact = np.asarray(exact, dtype=float)
    scale = max(np.abs(exact).max(), 1e-8)
    return float(np.abs(approx - exact).max() / scale)


@pytest.fixture
def rng():
    return np.random.default_rng(20260809)
