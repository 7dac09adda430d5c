"""Stabilized inverse-propensity weights with percentile Winsorization.

The marginal and conditional treatment densities are both modeled as
univariate normals; the conditional mean comes from a small two-layer
tanh network fit by minibatch Adam with early stopping, and the
conditional standard deviation from its residuals.  The density ratio
is computed in log space and normalized with a stable softmax, so
extreme standardized treatments cannot overflow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import DataError, TrainingError
from .lbwnet import AdamState, adam_step
from .streams import substream

Array = np.ndarray

HIDDEN = 30


@dataclass
class _Mlp:
    """Two dense layers with a tanh in between: x -> tanh(x W1 + b1) W2 + b2."""

    w1: Array
    b1: Array
    w2: Array
    b2: float

    def predict(self, x: Array) -> Array:
        return np.tanh(x @ self.w1 + self.b1) @ self.w2 + self.b2

    def as_list(self) -> list:
        return [self.w1, self.b1, self.w2, np.atleast_1d(self.b2)]

    @classmethod
    def from_list(cls, arrays: list) -> "_Mlp":
        return cls(w1=arrays[0], b1=arrays[1], w2=arrays[2], b2=float(arrays[3][0]))


def _mlp_loss_grads(net: _Mlp, x: Array, a: Array):
    hidden_in = x @ net.w1 + net.b1
    hidden = np.tanh(hidden_in)
    pred = hidden @ net.w2 + net.b2
    err = pred - a
    n = x.shape[0]
    loss = float(err @ err) / n
    d_pred = 2.0 * err / n
    d_w2 = hidden.T @ d_pred
    d_b2 = float(d_pred.sum())
    d_hidden = np.outer(d_pred, net.w2) * (1.0 - hidden**2)
    d_w1 = x.T @ d_hidden
    d_b1 = d_hidden.sum(axis=0)
    return loss, [d_w1, d_b1, d_w2, np.atleast_1d(d_b2)]


@dataclass(frozen=True)
class PropensityModel:
    """Normal marginal and conditional treatment models."""

    marginal_mean: float
    marginal_sd: float
    net: _Mlp
    conditional_sd: float

    def conditional_mean(self, x: Array) -> Array:
        return self.net.predict(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class PropensityTrainConfig:
    batch_size: int = 100
    max_epochs: int = 200
    lr: float = 0.02
    weight_decay: float = 2.5e-5
    validation_size: int = 400
    patience: int = 10
    hidden: int = HIDDEN


def fit_propensity(
    d: Dataset, seed: int, cfg: PropensityTrainConfig | None = None, *path
) -> PropensityModel:
    """Fit the conditional-mean network and both normal densities."""
    cfg = cfg or PropensityTrainConfig()
    if d.n <= 10:
        raise DataError(f"need more than 10 rows to fit a propensity model, got {d.n}")
    rng = substream(seed, "ipw", *path)

    x = d.x
    a = d.a
    n, r = x.shape
    bound1 = 1.0 / np.sqrt(r)
    bound2 = 1.0 / np.sqrt(cfg.hidden)
    net = _Mlp(
        w1=rng.uniform(-bound1, bound1, size=(r, cfg.hidden)),
        b1=rng.uniform(-bound1, bound1, size=cfg.hidden),
        w2=rng.uniform(-bound2, bound2, size=cfg.hidden),
        b2=0.0,
    )

    n_val = min(cfg.validation_size, max(n // 5, 2))
    perm = rng.permutation(n)
    val_idx, train_idx = perm[:n_val], perm[n_val:]
    x_train, a_train = x[train_idx], a[train_idx]
    x_val, a_val = x[val_idx], a[val_idx]

    opt = AdamState(lr=cfg.lr, weight_decay=cfg.weight_decay)
    best_val = np.inf
    best = [arr.copy() for arr in net.as_list()]
    stale = 0
    n_train = x_train.shape[0]
    for _ in range(cfg.max_epochs):
        order = rng.permutation(n_train)
        for start in range(0, n_train, cfg.batch_size):
            rows = order[start:start + cfg.batch_size]
            loss, grads = _mlp_loss_grads(net, x_train[rows], a_train[rows])
            if not np.isfinite(loss):
                raise TrainingError("propensity training loss is not finite")
            net = _Mlp.from_list(adam_step(opt, net.as_list(), grads))
        val_err = a_val - net.predict(x_val)
        val_loss = float(val_err @ val_err) / n_val
        if val_loss < best_val:
            best_val = val_loss
            best = [arr.copy() for arr in net.as_list()]
            stale = 0
        else:
            stale += 1
            if stale >= cfg.patience:
                break
    net = _Mlp.from_list(best)

    resid = a - net.predict(x)
    cond_sd = float(resid.std(ddof=1))
    if cond_sd <= 0:
        raise TrainingError("conditional residual standard deviation is zero")
    return PropensityModel(
        marginal_mean=float(a.mean()),
        marginal_sd=float(a.std(ddof=1)),
        net=net,
        conditional_sd=cond_sd,
    )


def _log_normal_pdf(value: Array, mean, sd: float) -> Array:
    z = (value - mean) / sd
    return -0.5 * z**2 - np.log(sd) - 0.5 * np.log(2.0 * np.pi)


def stabilized_weights(model: PropensityModel, d: Dataset) -> Array:
    """Normalized density-ratio weights marginal(a) / conditional(a | x)."""
    log_ratio = _log_normal_pdf(d.a, model.marginal_mean, model.marginal_sd) - _log_normal_pdf(
        d.a, model.conditional_mean(d.x), model.conditional_sd
    )
    shifted = log_ratio - log_ratio.max()
    e = np.exp(shifted)
    return e / e.sum()


def winsorize(w: Array, lo: float = 5.0, hi: float = 95.0) -> Array:
    """Clip weights to the [lo, hi] percentiles and renormalize to sum 1."""
    w = np.asarray(w, dtype=float)
    if np.any(w <= 0):
        raise DataError("weights must be positive")
    if not 0.0 <= lo < hi <= 100.0:
        raise DataError(f"bad percentile bounds [{lo}, {hi}]")
    low, high = np.percentile(w, [lo, hi])
    clipped = np.clip(w, low, high)
    return clipped / clipped.sum()
