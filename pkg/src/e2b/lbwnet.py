"""Log-base-weight network: a tiny scalar-to-scalar net with a linear skip.

    lbw(z) = c*z + dense3(elu(layer_norm(dense2(tanh(dense1(z))))))

dense1 maps 1 -> h with a bias, dense2 maps h -> h without a bias (the
following layer norm would absorb one), dense3 maps h -> 1 without a
bias and the skip carries none either (the downstream softmax is shift
invariant, so output offsets are unidentifiable).  Forward and backward
are written out by hand; gradients are exact, not approximated.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError
from .streams import substream

Array = np.ndarray

LN_EPS = 1e-5

PARAM_NAMES = ("skip", "dense1_w", "dense1_b", "dense2_w", "ln_gain", "ln_offset", "dense3_w")


@dataclass
class LbwNetParams:
    """Parameters of the log-base-weight network (hidden width h)."""

    skip: float          # c
    dense1_w: Array      # (h,)
    dense1_b: Array      # (h,)
    dense2_w: Array      # (h, h)
    ln_gain: Array       # (h,)
    ln_offset: Array     # (h,)
    dense3_w: Array      # (h,)

    @property
    def hidden(self) -> int:
        return self.dense1_w.shape[0]

    def as_list(self) -> list:
        return [np.atleast_1d(np.asarray(getattr(self, name), dtype=float)) for name in PARAM_NAMES]

    @classmethod
    def from_list(cls, arrays: list) -> "LbwNetParams":
        vals = dict(zip(PARAM_NAMES, arrays))
        return cls(
            skip=float(vals["skip"][0]),
            dense1_w=vals["dense1_w"],
            dense1_b=vals["dense1_b"],
            dense2_w=vals["dense2_w"],
            ln_gain=vals["ln_gain"],
            ln_offset=vals["ln_offset"],
            dense3_w=vals["dense3_w"],
        )

    def copy(self) -> "LbwNetParams":
        return LbwNetParams.from_list([a.copy() for a in self.as_list()])


def init_params(seed: int, hidden: int = 10, *path) -> LbwNetParams:
    """Uniform +-1/sqrt(fan_in) dense layers, zero skip, identity layer norm.

    Zero skip plus a fresh dense3 means the net starts as a small random
    perturbation of zero output, so training starts essentially at the
    plain entropy-balancing weights.  Draw order: dense1 weight, dense1
    bias, dense2, dense3.
    """
    rng = substream(seed, "lbw-init", *path)
    b1 = 1.0               # fan_in of dense1 is 1
    b2 = 1.0 / np.sqrt(hidden)
    return LbwNetParams(
        skip=0.0,
        dense1_w=rng.uniform(-b1, b1, size=hidden),
        dense1_b=rng.uniform(-b1, b1, size=hidden),
        dense2_w=rng.uniform(-b2, b2, size=(hidden, hidden)),
        ln_gain=np.ones(hidden),
        ln_offset=np.zeros(hidden),
        dense3_w=rng.uniform(-b2, b2, size=hidden),
    )


def constant_output_params(hidden: int = 10) -> LbwNetParams:
    """The canonical constant configuration: output is exactly 0 for any input."""
    return LbwNetParams(
        skip=0.0,
        dense1_w=np.zeros(hidden),
        dense1_b=np.zeros(hidden),
        dense2_w=np.zeros((hidden, hidden)),
        ln_gain=np.ones(hidden),
        ln_offset=np.zeros(hidden),
        dense3_w=np.zeros(hidden),
    )


@dataclass
class Tape:
    """Activations cached by the forward pass for the backward pass."""

    z: Array
    t1: Array       # tanh(dense1)
    xhat: Array     # layer-norm normalized activations
    inv_std: Array  # per-example 1/sqrt(var + eps)
    ln: Array       # layer-norm output
    act: Array      # elu(ln)
    hidden: int


def forward(params: LbwNetParams, z: Array) -> tuple[Array, Tape]:
    """Evaluate the net on a vector of scalar features; returns (output, tape)."""
    z = np.asarray(z, dtype=float)
    a1 = params.dense1_w[:, None] * z[None, :] + params.dense1_b[:, None]
    t1 = np.tanh(a1)
    a2 = params.dense2_w @ t1
    mu = a2.mean(axis=0)
    var = a2.var(axis=0)
    inv_std = 1.0 / np.sqrt(var + LN_EPS)
    xhat = (a2 - mu[None, :]) * inv_std[None, :]
    ln = params.ln_gain[:, None] * xhat + params.ln_offset[:, None]
    act = np.where(ln > 0.0, ln, np.expm1(ln))
    out = params.skip * z + params.dense3_w @ act
    return out, Tape(z=z, t1=t1, xhat=xhat, inv_std=inv_std, ln=ln, act=act, hidden=params.hidden)


@dataclass
class LbwNetGrads:
    skip: float
    dense1_w: Array
    dense1_b: Array
    dense2_w: Array
    ln_gain: Array
    ln_offset: Array
    dense3_w: Array
    z: Array  # gradient in the input features

    def as_list(self) -> list:
        return [np.atleast_1d(np.asarray(getattr(self, name), dtype=float)) for name in PARAM_NAMES]


def backward(params: LbwNetParams, tape: Tape, grad_out: Array) -> LbwNetGrads:
    """Exact reverse-mode gradients of sum_i grad_out_i * lbw(z_i)."""
    grad_out = np.asarray(grad_out, dtype=float)
    if tape.hidden != params.hidden:
        raise DataError("tape does not match the parameter shapes")
    if grad_out.shape != tape.z.shape:
        raise DataError("grad_out must match the forward batch")

    h = params.hidden
    d_skip = float(grad_out @ tape.z)
    d_w3 = tape.act @ grad_out
    d_act = params.dense3_w[:, None] * grad_out[None, :]

    elu_grad = np.where(tape.ln > 0.0, 1.0, tape.act + 1.0)  # exp(ln) below zero
    d_ln = d_act * elu_grad

    d_gain = (d_ln * tape.xhat).sum(axis=1)
    d_offset = d_ln.sum(axis=1)
    d_xhat = d_ln * params.ln_gain[:, None]
    # Layer-norm backward over the hidden axis, per example.
    d_a2 = tape.inv_std[None, :] * (
        d_xhat
        - d_xhat.mean(axis=0)[None, :]
        - tape.xhat * (d_xhat * tape.xhat).mean(axis=0)[None, :]
    )

    d_w2 = d_a2 @ tape.t1.T
    d_t1 = params.dense2_w.T @ d_a2
    d_a1 = d_t1 * (1.0 - tape.t1**2)
    d_w1 = d_a1 @ tape.z
    d_b1 = d_a1.sum(axis=1)
    d_z = params.dense1_w @ d_a1 + params.skip * grad_out

    return LbwNetGrads(
        skip=d_skip, dense1_w=d_w1, dense1_b=d_b1, dense2_w=d_w2,
        ln_gain=d_gain, ln_offset=d_offset, dense3_w=d_w3, z=d_z,
    )


@dataclass
class AdamState:
    """Adam with bias correction and coupled L2 weight decay."""

    lr: float = 0.02
    weight_decay: float = 2.5e-5
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)

    def _ensure_moments(self, params: list):
        if not self.m:
            self.m = [np.zeros_like(p) for p in params]
            self.v = [np.zeros_like(p) for p in params]
        for moment, p in zip(self.m, params):
            if moment.shape != p.shape:
                raise DataError("optimizer state does not match the parameter shapes")


def adam_step(state: AdamState, params: list, grads: list) -> list:
    """One Adam update over a list of arrays; returns the updated arrays."""
    state._ensure_moments(params)
    state.step += 1
    t = state.step
    bc1 = 1.0 - state.beta1**t
    bc2 = 1.0 - state.beta2**t
    out = []
    for i, (p, g) in enumerate(zip(params, grads)):
        g = g + state.weight_decay * p
        state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * g
        state.v[i] = state.beta2 * state.v[i] + (1.0 - state.beta2) * g**2
        m_hat = state.m[i] / bc1
        v_hat = state.v[i] / bc2
        out.append(p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps))
    return out


def save_checkpoint(params: LbwNetParams, path) -> None:
    """Write parameters as versioned JSON with named arrays and shapes."""
    payload = {
        "format": "lbw-params-v1",
        "hidden": params.hidden,
        "arrays": {
            name: np.asarray(getattr(params, name), dtype=float).tolist()
            for name in PARAM_NAMES
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def load_checkpoint(path) -> LbwNetParams:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != "lbw-params-v1":
        raise DataError(f"{path}: not a lbw-params-v1 checkpoint")
    arrays = payload["arrays"]
    h = int(payload["hidden"])
    params = LbwNetParams(
        skip=float(arrays["skip"]),
        dense1_w=np.asarray(arrays["dense1_w"], dtype=float),
        dense1_b=np.asarray(arrays["dense1_b"], dtype=float),
        dense2_w=np.asarray(arrays["dense2_w"], dtype=float),
        ln_gain=np.asarray(arrays["ln_gain"], dtype=float),
        ln_offset=np.asarray(arrays["ln_offset"], dtype=float),
        dense3_w=np.asarray(arrays["dense3_w"], dtype=float),
    )
    if params.hidden != h or params.dense2_w.shape != (h, h):
        raise DataError(f"{path}: checkpoint shapes inconsistent with hidden={h}")
    return params
