"""Synthetic designs, pseudo-response sampling, and residual noise models.

Two benchmark designs share their confounder/treatment construction
bit-for-bit under equal seeds:

  confounders  x ~ N(0, S), S tridiagonal with diagonal 1.0 / off 0.2
  treatment    a ~ N(sin(b_xa' x), 0.3^2),  b_xa ~ Unif(-1, 1)^5

and differ in the response:

  linear       y ~ N(b_xy' x + b_ay a, 0.5^2)
  nonlinear    y ~ N(h_cxy(b_xy' x / ||Xb_xy||) + h_cay(a), 0.5^2)

where h_c is the degree-3 Hermite combination c0 + c1 z + c2 (z^2-1)
+ c3 (z^3-3z).  The normalization divides each projection by the
Euclidean norm of the whole projection vector; see
``projection_scores`` for the per-sample alternative.

Pseudo-response sampling redraws the response surface from a chosen
family while keeping (x, a) fixed, which is what lets training score
its causal estimates against a known truth.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .data import Dataset
from .errors import DataError, DegenerateDataError, RankError
from .streams import substream

Array = np.ndarray

SIGMA_A = 0.3
SIGMA_Y = 0.5
N_CONFOUNDERS = 5
CURVE_GRID = np.linspace(-2.0, 2.0, 100)

# Variance floor when sampling heteroskedastic noise at non-positive means.
VARIANCE_FLOOR = 1e-6


def tridiagonal_cov(r: int = N_CONFOUNDERS, diag: float = 1.0, off: float = 0.2) -> Array:
    cov = np.eye(r) * diag
    idx = np.arange(r - 1)
    cov[idx, idx + 1] = off
    cov[idx + 1, idx] = off
    return cov


def hermite(gamma: Array, z):
    """Degree-3 Hermite combination g0 + g1 z + g2 (z^2-1) + g3 (z^3-3z)."""
    gamma = np.asarray(gamma, dtype=float)
    if gamma.shape != (4,):
        raise DataError(f"hermite coefficients must have length 4, got {gamma.shape}")
    z = np.asarray(z, dtype=float)
    return gamma[0] + gamma[1] * z + gamma[2] * (z**2 - 1.0) + gamma[3] * (z**3 - 3.0 * z)


def projection_scores(x: Array, beta: Array, norm: str = "vector") -> Array:
    """Confounder projections x b scaled for the Hermite confounder term.

    "vector" divides by the Euclidean norm of the whole projection
    vector; "abs" divides each projection by its own absolute value
    (signs only).
    """
    t = np.asarray(x, dtype=float) @ np.asarray(beta, dtype=float)
    if norm == "vector":
        scale = float(np.linalg.norm(t))
        if scale == 0.0:
            raise DegenerateDataError("projection vector is identically zero")
        return t / scale
    if norm == "abs":
        if np.any(t == 0.0):
            raise DegenerateDataError("a projection is exactly zero; cannot take signs")
        return t / np.abs(t)
    raise DataError(f"unknown projection norm {norm!r}")


@dataclass(frozen=True)
class SynthDesign:
    """The drawn coefficients of one synthetic dataset."""

    kind: str                    # "linear" | "nonlinear"
    cov: Array                   # (5, 5) confounder covariance
    beta_xa: Array               # (5,) treatment projection, Unif(-1, 1)
    beta_xy: Array               # (5,) response projection, N(0, 1)
    beta_ay: float | None        # linear designs only
    gamma_xy: Array | None       # (4,) Hermite coefficients, nonlinear only
    gamma_ay: Array | None       # (4,)
    sigma_a: float = SIGMA_A
    sigma_y: float = SIGMA_Y

    def true_curve(self, grid: Array) -> Array:
        """The response surface's treatment component on a grid."""
        grid = np.asarray(grid, dtype=float)
        if self.kind == "linear":
            return self.beta_ay * grid
        return hermite(self.gamma_ay, grid)


def _draw_shared(seed: int, n: int):
    """Steps shared by both designs; identical streams, identical draws."""
    beta_xa = substream(seed, "coef-xa").uniform(-1.0, 1.0, size=N_CONFOUNDERS)
    cov = tridiagonal_cov()
    chol = np.linalg.cholesky(cov)
    x = substream(seed, "x").standard_normal((n, N_CONFOUNDERS)) @ chol.T
    a = np.sin(x @ beta_xa) + SIGMA_A * substream(seed, "a-noise").standard_normal(n)
    return cov, beta_xa, x, a


def gen_linear(seed: int, n: int = 1000) -> tuple[Dataset, SynthDesign]:
    cov, beta_xa, x, a = _draw_shared(seed, n)
    beta_xy = substream(seed, "coef-xy").standard_normal(N_CONFOUNDERS)
    beta_ay = float(substream(seed, "coef-ay").standard_normal())
    y = x @ beta_xy + beta_ay * a + SIGMA_Y * substream(seed, "y-noise").standard_normal(n)
    design = SynthDesign(
        kind="linear", cov=cov, beta_xa=beta_xa, beta_xy=beta_xy,
        beta_ay=beta_ay, gamma_xy=None, gamma_ay=None,
    )
    return Dataset(x=x, a=a, y=y), design


def gen_nonlinear(
    seed: int, n: int = 1000, projection_norm: str = "vector"
) -> tuple[Dataset, SynthDesign]:
    cov, beta_xa, x, a = _draw_shared(seed, n)
    beta_xy = substream(seed, "coef-xy").standard_normal(N_CONFOUNDERS)
    gammas = substream(seed, "coef-hermite").standard_normal(8)
    gamma_xy, gamma_ay = gammas[:4], gammas[4:]
    z = projection_scores(x, beta_xy, projection_norm)
    mu_y = hermite(gamma_xy, z) + hermite(gamma_ay, a)
    y = mu_y + SIGMA_Y * substream(seed, "y-noise").standard_normal(n)
    design = SynthDesign(
        kind="nonlinear", cov=cov, beta_xa=beta_xa, beta_xy=beta_xy,
        beta_ay=None, gamma_xy=gamma_xy, gamma_ay=gamma_ay,
    )
    return Dataset(x=x, a=a, y=y), design


@dataclass(frozen=True)
class NoiseModel:
    """Residual noise fitted from regressing y on [1, x, a].

    homoskedastic: constant standard deviation ``sigma``.
    heteroskedastic: variance ``c`` times the response mean, floored at
    VARIANCE_FLOOR when the mean is not positive.
    """

    kind: str
    sigma: float = 0.0
    c: float = 0.0

    def sample(self, rng: np.random.Generator, means: Array) -> Array:
        if self.kind == "homoskedastic":
            return self.sigma * rng.standard_normal(means.shape)
        variances = np.maximum(self.c * means, VARIANCE_FLOOR)
        return np.sqrt(variances) * rng.standard_normal(means.shape)


def estimate_noise(d: Dataset, kind: str = "homoskedastic") -> NoiseModel:
    """Fit the residual noise model of the observed responses."""
    if kind not in ("homoskedastic", "heteroskedastic"):
        raise DataError(f"unknown noise kind {kind!r}")
    n, r = d.n, d.r
    if n <= r + 2:
        raise DataError(f"need n > r+2 rows to fit the noise model, got n={n}, r={r}")
    design = np.column_stack([np.ones(n), d.x, d.a])
    coef, _, rank, _ = np.linalg.lstsq(design, d.y, rcond=None)
    if rank < design.shape[1]:
        raise RankError("noise regression design matrix is rank deficient")
    fitted = design @ coef
    resid = d.y - fitted
    if kind == "homoskedastic":
        sigma = float(np.sqrt(resid @ resid / (n - design.shape[1])))
        return NoiseModel(kind=kind, sigma=sigma)
    denom = float(fitted @ fitted)
    if denom == 0.0:
        raise DegenerateDataError("all fitted responses are zero; cannot scale variance")
    c = float((resid**2) @ fitted / denom)
    return NoiseModel(kind=kind, sigma=float(resid.std(ddof=1)), c=max(c, 0.0))


@dataclass(frozen=True)
class PseudoResponse:
    """One randomly drawn response surface evaluated on the sample."""

    ybar: Array                       # noisy pseudo-responses
    means: Array                      # noise-free means
    family: str
    slope: float | None               # linear family: the treatment coefficient
    curve: Callable[[Array], Array]   # treatment component as a function
    contribution: Array               # the treatment component at the sample points


def _mean_abs_shifted(values: Array, shifts: Array) -> Array:
    """mean_i |values_i + s| for each shift s, via sorting and prefix sums."""
    srt = np.sort(values)
    prefix = np.concatenate([[0.0], np.cumsum(srt)])
    total = prefix[-1]
    n = srt.shape[0]
    below = np.searchsorted(srt, -shifts, side="left")
    s_below = prefix[below]
    return (total + n * shifts - 2.0 * (s_below + below * shifts)) / n


PSEUDO_FAMILIES = ("linear", "hermite", "abs-hermite")


def gen_pseudo_responses(
    d: Dataset,
    noise: NoiseModel,
    family: str,
    seed: int,
    *path,
    projection_norm: str = "vector",
) -> PseudoResponse:
    """Draw one pseudo-response surface and noisy responses for the sample.

    Coefficient draw order within the substream: response projection
    (r normals), then the treatment coefficient (linear) or the two
    Hermite coefficient blocks (4 + 4 normals); noise comes last.
    """
    if family not in PSEUDO_FAMILIES:
        raise DataError(f"unknown pseudo-response family {family!r}")
    rng = substream(seed, "pseudo", *path)

    if family == "linear":
        beta_xy = rng.standard_normal(d.r)
        beta_ay = float(rng.standard_normal())
        contribution = beta_ay * d.a
        means = d.x @ beta_xy + contribution
        curve = lambda t: beta_ay * np.asarray(t, dtype=float)  # noqa: E731
        slope = beta_ay
    else:
        beta_xy = rng.standard_normal(d.r)
        gamma_xy = rng.standard_normal(4)
        gamma_ay = rng.standard_normal(4)
        z = projection_scores(d.x, beta_xy, projection_norm)
        conf_term = hermite(gamma_xy, z)
        contribution = hermite(gamma_ay, d.a)
        slope = None
        if family == "hermite":
            means = conf_term + contribution
            curve = lambda t: hermite(gamma_ay, t)  # noqa: E731
        else:
            means = np.abs(conf_term + contribution)
            # Curve under the empirical confounder distribution.
            curve = lambda t: _mean_abs_shifted(  # noqa: E731
                conf_term, hermite(gamma_ay, np.atleast_1d(np.asarray(t, dtype=float)))
            )
    ybar = means + noise.sample(rng, means)
    return PseudoResponse(
        ybar=ybar, means=means, family=family, slope=slope,
        curve=curve, contribution=contribution,
    )


class PseudoSampler:
    """Batched pseudo-response draws for the training loop.

    Each batch shares the observed (x, a); items differ in the response
    surface and noise.  Per item the draws replicate
    ``gen_pseudo_responses`` exactly (same substream, same order), so a
    batch is just a loop over items with derived stream paths.
    """

    def __init__(self, d: Dataset, noise: NoiseModel, family: str, seed: int,
                 projection_norm: str = "vector"):
        if family not in PSEUDO_FAMILIES:
            raise DataError(f"unknown pseudo-response family {family!r}")
        self.dataset = d
        self.noise = noise
        self.family = family
        self.seed = seed
        self.projection_norm = projection_norm

    def draw(self, *path) -> PseudoResponse:
        return gen_pseudo_responses(
            self.dataset, self.noise, self.family, self.seed, *path,
            projection_norm=self.projection_norm,
        )

    def batch(self, label, size: int, grid: Array | None = None):
        """Draw ``size`` items; returns (ybar (B,n), targets).

        targets is the vector of true slopes for the linear family, else
        the (B, m) matrix of true curves on ``grid``.
        """
        items = [self.draw(label, b) for b in range(size)]
        ybar = np.stack([it.ybar for it in items])
        if self.family == "linear":
            return ybar, np.array([it.slope for it in items])
        if grid is None:
            raise DataError("curve families need an evaluation grid")
        return ybar, np.stack([it.curve(grid) for it in items])


# Column schema of the bundled real-data-shaped sample generator: the
# treatment (fine-particle level), the response (cardiovascular
# mortality rate), and ten county-level confounders.
SCHEMA_COLUMNS = (
    "PM2.5", "CMR", "healthfac", "population", "ses", "unemploy", "HH_inc",
    "femaleHH", "vacant", "owner_occ", "eduattain", "pctfam_pover",
)
_SCHEMA_LOC = np.array([6.17, 255.25, 0.18, 10.78, 0.0, 7.85, 10.69, 11.92, 14.25, 71.44, 35.03, 11.25])
_SCHEMA_SCALE = np.array([1.45, 56.76, 0.5, 1.26, 0.96, 2.83, 0.24, 3.94, 8.71, 7.76, 7.07, 5.2])


def gen_schema_sample(seed: int, n: int = 500) -> tuple[tuple, Array]:
    """A sample matching the bundled 12-column observational schema.

    Confounders are correlated Gaussians rescaled to realistic county
    statistics; the treatment depends on a few confounders and the
    response is positive with variance proportional to its mean.
    Returns (column names, (n, 12) matrix).
    """
    rng = substream(seed, "schema-sample")
    r = 10
    cov = 0.3 * np.ones((r, r)) + 0.7 * np.eye(r)
    raw = rng.multivariate_normal(np.zeros(r), cov, size=n, method="cholesky")
    conf = _SCHEMA_LOC[2:] + _SCHEMA_SCALE[2:] * raw

    drivers = raw[:, :3] @ np.array([0.5, -0.3, 0.2])
    treatment = _SCHEMA_LOC[0] + _SCHEMA_SCALE[0] * (
        0.6 * np.tanh(drivers) + 0.8 * rng.standard_normal(n)
    )
    mean_response = (
        _SCHEMA_LOC[1]
        + 18.0 * (treatment - _SCHEMA_LOC[0])
        + raw[:, :4] @ np.array([20.0, 8.0, -12.0, 5.0])
    )
    mean_response = np.maximum(mean_response, 40.0)
    response = mean_response + np.sqrt(6.0 * mean_response) * rng.standard_normal(n)
    mat = np.column_stack([treatment, response, conf])
    return SCHEMA_COLUMNS, mat
