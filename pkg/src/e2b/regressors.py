"""Weighted causal-response estimators and their derivatives in the weights.

Both estimators are invariant to rescaling the weights (they only ever
use normalized weights), so their weight gradients are orthogonal to
the weight vector itself.  The closed forms:

  weighted least squares slope  b = sum w at yt / sum w at^2
      db/dw_j = at_j (yt_j - b at_j) / sum w at^2
      (at, yt are the weighted-mean-centered treatment and response)

  Nadaraya-Watson            mu(g) = sum w_i k_i y_i / sum w_i k_i
      dmu(g)/dw_j = k_j (y_j - mu(g)) / sum w_i k_i
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import silverman_bandwidth
from .errors import DataError, DegenerateDataError, SparseRegionError

Array = np.ndarray

_DENOM_FLOOR = 1e-12


@dataclass(frozen=True)
class KernelOptions:
    """Gaussian kernel with a rule-of-thumb bandwidth times a multiplier."""

    bandwidth: float | None = None   # explicit bandwidth wins over the rule
    multiplier: float = 1.0

    def resolve(self, a: Array) -> float:
        if self.bandwidth is not None:
            h = float(self.bandwidth)
        else:
            h = silverman_bandwidth(a) * self.multiplier
        if not h > 0:
            raise DataError("kernel bandwidth must be positive")
        return h


@dataclass(frozen=True)
class ResponseCurve:
    """Estimated mean potential outcome on a treatment grid."""

    grid: Array
    mu_hat: Array
    members: Array | None = None  # (n_members, m) per-ensemble curves

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        if grid.ndim != 1 or np.any(np.diff(grid) <= 0):
            raise DataError("curve grid must be strictly increasing")
        if not np.isfinite(np.asarray(self.mu_hat)).all():
            raise DataError("curve estimates must be finite")


def _check_weights(w: Array, n: int) -> Array:
    w = np.asarray(w, dtype=float)
    if w.shape != (n,):
        raise DataError(f"weights must have length {n}, got {w.shape}")
    return w


def wls_slope(a: Array, y: Array, w: Array, covariates: Array | None = None):
    """Weighted least-squares slope of y on a, with its weight gradient.

    Returns (slope, dslope_dw).  With ``covariates`` the regression is on
    [1, a, covariates] and the slope is the coefficient of a; the default
    regresses on [1, a] only, leaving confounder adjustment entirely to
    the weights.
    """
    a = np.asarray(a, dtype=float)
    y = np.asarray(y, dtype=float)
    w = _check_weights(w, a.shape[0])
    v = w / w.sum()

    if covariates is None:
        at = a - v @ a
        denom = float(v @ at**2)
        if denom < 1e-12:
            raise DegenerateDataError("weighted variance of the treatment is ~0")
        yt = y - v @ y
        slope = float(v @ (at * yt)) / denom
        grad_v = at * (yt - slope * at) / denom
        # chain through v = w / sum(w); the mean term vanishes exactly
        grad = (grad_v - v @ grad_v) / w.sum()
        return slope, grad

    covariates = np.asarray(covariates, dtype=float)
    design = np.column_stack([np.ones_like(a), a, covariates])
    wd = design * v[:, None]
    gram = wd.T @ design
    try:
        coef = np.linalg.solve(gram, wd.T @ y)
    except np.linalg.LinAlgError:
        raise DegenerateDataError("weighted design matrix is singular") from None
    resid = y - design @ coef
    # d coef / d v_j = gram^{-1} x_j resid_j; pick the slope component
    sens = np.linalg.solve(gram, design.T)  # (p, n)
    grad_v = sens[1, :] * resid
    grad = (grad_v - v @ grad_v) / w.sum()
    return float(coef[1]), grad


def kernel_curve(
    a: Array,
    y: Array,
    w: Array,
    grid: Array,
    opts: KernelOptions | None = None,
):
    """Weighted Nadaraya-Watson curve on a grid, with per-point weight gradients.

    Returns (ResponseCurve, dmu_dw) where dmu_dw has shape (m, n).
    Raises SparseRegionError naming the first grid point whose kernel
    mass falls below the floor.
    """
    opts = opts or KernelOptions()
    a = np.asarray(a, dtype=float)
    y = np.asarray(y, dtype=float)
    w = _check_weights(w, a.shape[0])
    grid = np.asarray(grid, dtype=float)
    h = opts.resolve(a)

    kern = np.exp(-0.5 * ((grid[:, None] - a[None, :]) / h) ** 2)  # (m, n)
    wk = kern * w[None, :]
    denom = wk.sum(axis=1)
    bad = np.flatnonzero(denom < _DENOM_FLOOR)
    if bad.size:
        raise SparseRegionError(
            f"no kernel mass at grid point a={grid[bad[0]]:.6g} (bandwidth {h:.4g})"
        )
    mu = (wk @ y) / denom
    dmu_dw = kern * (y[None, :] - mu[:, None]) / denom[:, None]
    return ResponseCurve(grid=grid, mu_hat=mu), dmu_dw


def evaluation_loss(estimate, truth, mode: str = "squared") -> float:
    """Error between an estimate and the known truth.

    squared: (b - b_true)^2 for scalars, mean squared error for curves.
    report:  |b - b_true| for scalars, root mean squared error for curves.
    """
    est = np.asarray(estimate, dtype=float)
    tru = np.asarray(truth, dtype=float)
    if est.shape != tru.shape:
        raise DataError(f"estimate shape {est.shape} != truth shape {tru.shape}")
    mse = float(np.mean((est - tru) ** 2))
    if mode == "squared":
        return mse
    if mode == "report":
        return float(np.sqrt(mse)) if est.ndim else float(abs(est - tru))
    raise DataError(f"unknown loss mode {mode!r}")
