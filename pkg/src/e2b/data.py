"""Datasets, basis expansion, de-meaning, and balance-constraint features.

The balancing machinery works on a confounder basis phi(x) and the
treatment a, both centered to sample mean zero.  Per observation the
constraint feature vector is [phi(x_i), a_i, a_i * phi(x_i)], stacked
column-wise into a (2K+1) x n matrix.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace

import numpy as np

from .errors import DataError, DegenerateDataError, ParseError, SchemaError

Array = np.ndarray


@dataclass(frozen=True)
class Dataset:
    """An observational sample of confounders, treatment, and response."""

    x: Array            # (n, r) confounders
    a: Array            # (n,) treatment
    y: Array            # (n,) response
    demeaned_phi: bool = False
    demeaned_a: bool = False
    columns: tuple = ()  # confounder column names when loaded from CSV

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        a = np.asarray(self.a, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 2:
            raise DataError(f"x must be 2-D, got shape {x.shape}")
        n = x.shape[0]
        if a.shape != (n,) or y.shape != (n,):
            raise DataError(f"shape mismatch: x has {n} rows, a {a.shape}, y {y.shape}")
        if n < 2:
            raise DataError(f"need at least 2 rows, got {n}")
        if not (np.isfinite(x).all() and np.isfinite(a).all() and np.isfinite(y).all()):
            raise DataError("non-finite values in dataset")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def r(self) -> int:
        return self.x.shape[1]


@dataclass(frozen=True)
class BasisSpec:
    """Which confounder basis to expand: raw coordinates or degree-2 polynomial."""

    kind: str = "identity"

    def __post_init__(self):
        if self.kind not in ("identity", "poly2"):
            raise DataError(f"unknown basis kind {self.kind!r}")

    def dimension(self, r: int) -> int:
        if self.kind == "identity":
            return r
        return r + r * (r + 1) // 2


@dataclass(frozen=True)
class BasisExpansion:
    """Centered basis columns phi(x) plus the means removed from them."""

    phi: Array          # (n, K), each column mean zero
    phi_means: Array    # (K,) original column means
    a_mean: float       # mean removed from the treatment
    spec: BasisSpec

    @property
    def K(self) -> int:
        return self.phi.shape[1]


@dataclass(frozen=True)
class BalancingProblem:
    """Stacked constraint features and log-base-weights for one sample.

    Column i of ``constraints`` is [phi(x_i), a_i, a_i*phi(x_i)]; the
    layout is fixed so multipliers can be sliced into the phi block,
    the treatment row, and the interaction block.
    """

    constraints: Array       # (2K+1, n)
    log_base_weights: Array  # (n,)

    def __post_init__(self):
        g = np.asarray(self.constraints, dtype=float)
        ell = np.asarray(self.log_base_weights, dtype=float)
        if g.ndim != 2 or ell.ndim != 1 or g.shape[1] != ell.shape[0]:
            raise DataError(
                f"constraint matrix {g.shape} incompatible with log-base-weights {ell.shape}"
            )
        if not (np.isfinite(g).all() and np.isfinite(ell).all()):
            raise DataError("non-finite values in balancing problem")
        object.__setattr__(self, "constraints", g)
        object.__setattr__(self, "log_base_weights", ell)

    @property
    def n(self) -> int:
        return self.constraints.shape[1]

    @property
    def n_constraints(self) -> int:
        return self.constraints.shape[0]

    def with_log_base_weights(self, ell: Array) -> "BalancingProblem":
        return BalancingProblem(self.constraints, ell)


@dataclass(frozen=True)
class DensityFeatures:
    """Kernel density estimates of the treatment at the sample points."""

    p_hat: Array
    log_p_hat: Array
    bandwidth: float


def expand_basis(x: Array, spec: BasisSpec) -> Array:
    """Evaluate the basis columns (uncentered) in a deterministic order.

    identity: x_1 .. x_r.
    poly2: x_1 .. x_r, then x_j*x_k for j <= k in row-major (j outer) order.
    """
    x = np.asarray(x, dtype=float)
    if spec.kind == "identity":
        return x.copy()
    r = x.shape[1]
    cols = [x]
    for j in range(r):
        for k in range(j, r):
            cols.append((x[:, j] * x[:, k])[:, None])
    return np.hstack(cols)


def demean(d: Dataset, basis: BasisSpec | None = None) -> tuple[Dataset, BasisExpansion]:
    """Center the expanded basis columns and the treatment at mean zero.

    Centering happens after the basis expansion, so every phi column has
    exact sample mean zero.  The removed means are kept on the returned
    expansion for inverse mapping.  The response is left untouched.
    """
    basis = basis or BasisSpec()
    if d.a.std() == 0.0:
        raise DegenerateDataError("treatment is constant, cannot demean/balance")
    phi_raw = expand_basis(d.x, basis)
    phi_means = phi_raw.mean(axis=0)
    a_mean = float(d.a.mean())
    expansion = BasisExpansion(
        phi=phi_raw - phi_means, phi_means=phi_means, a_mean=a_mean, spec=basis
    )
    centered = replace(d, a=d.a - a_mean, demeaned_phi=True, demeaned_a=True)
    return centered, expansion


def build_problem(d: Dataset, expansion: BasisExpansion, ell: Array) -> BalancingProblem:
    """Stack [phi(x_i); a_i; a_i*phi(x_i)] into the constraint matrix."""
    if not (d.demeaned_phi and d.demeaned_a):
        raise DataError("build_problem requires a demeaned dataset")
    ell = np.asarray(ell, dtype=float)
    if ell.shape != (d.n,):
        raise DataError(f"log-base-weights must have length {d.n}, got {ell.shape}")
    if expansion.phi.shape[0] != d.n:
        raise DataError("basis expansion row count does not match dataset")
    phi_t = expansion.phi.T                      # (K, n)
    g = np.vstack([phi_t, d.a[None, :], d.a[None, :] * phi_t])
    return BalancingProblem(g, ell)


def silverman_bandwidth(a: Array) -> float:
    """Rule-of-thumb Gaussian KDE bandwidth 1.06 * sd * n^(-1/5)."""
    a = np.asarray(a, dtype=float)
    sd = float(a.std(ddof=1))
    return 1.06 * sd * a.shape[0] ** (-0.2)


def treatment_density(a: Array, bandwidth: float | None = None) -> DensityFeatures:
    """Gaussian-kernel KDE of the treatment evaluated at each sample point."""
    a = np.asarray(a, dtype=float)
    if a.shape[0] < 2:
        raise DataError("need at least 2 treatments for a density estimate")
    if bandwidth is None:
        bandwidth = silverman_bandwidth(a)
    if not bandwidth > 0.0:
        raise DegenerateDataError("zero bandwidth: all treatments equal")
    diffs = (a[:, None] - a[None, :]) / bandwidth
    p_hat = np.exp(-0.5 * diffs**2).mean(axis=1) / (bandwidth * np.sqrt(2.0 * np.pi))
    return DensityFeatures(p_hat=p_hat, log_p_hat=np.log(p_hat), bandwidth=float(bandwidth))


def evaluate_density(a: Array, at: Array, bandwidth: float) -> Array:
    """The same KDE as treatment_density, evaluated at arbitrary points."""
    a = np.asarray(a, dtype=float)
    at = np.asarray(at, dtype=float)
    diffs = (at[:, None] - a[None, :]) / bandwidth
    return np.exp(-0.5 * diffs**2).mean(axis=1) / (bandwidth * np.sqrt(2.0 * np.pi))


@dataclass(frozen=True)
class CsvSchema:
    """Column-role map for loading observational CSV files."""

    treatment: str
    response: str
    confounders: tuple = ()  # empty means: all remaining columns


def load_csv(path, schema: CsvSchema) -> Dataset:
    """Load a UTF-8 comma-separated file with a header row into a Dataset.

    The treatment and response columns are picked by name; the remaining
    columns (or the explicit subset in ``schema.confounders``) become the
    confounder matrix in header order.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        header = [h.strip() for h in header]
        for role, name in (("treatment", schema.treatment), ("response", schema.response)):
            if name not in header:
                raise SchemaError(f"{path}: {role} column {name!r} not in header {header}")
        if schema.confounders:
            missing = [c for c in schema.confounders if c not in header]
            if missing:
                raise SchemaError(f"{path}: confounder columns {missing} not in header")
            conf_names = list(schema.confounders)
        else:
            conf_names = [h for h in header if h not in (schema.treatment, schema.response)]
        if not conf_names:
            raise SchemaError(f"{path}: no confounder columns left after role assignment")

        col_idx = {name: header.index(name) for name in header}
        rows = []
        for row_num, row in enumerate(reader, start=2):
            if not row or all(cell.strip() == "" for cell in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}:{row_num}: expected {len(header)} cells, got {len(row)}")
            parsed = []
            for name in [schema.treatment, schema.response] + conf_names:
                cell = row[col_idx[name]].strip()
                try:
                    parsed.append(float(cell))
                except ValueError:
                    raise ParseError(
                        f"{path}:{row_num}: column {name!r}: cannot parse {cell!r} as a number"
                    ) from None
            rows.append(parsed)

    if len(rows) < 2:
        raise DataError(f"{path}: need at least 2 data rows, got {len(rows)}")
    mat = np.asarray(rows, dtype=float)
    return Dataset(x=mat[:, 2:], a=mat[:, 0], y=mat[:, 1], columns=tuple(conf_names))
