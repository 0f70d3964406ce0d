"""Parameter containers, recurrent cells, and the Adam optimizer.

Cell equations are the canonical ones: update/reset-gate GRU and the
standard LSTM with forget/input/output gates. Weights use fan-based
uniform (Glorot) initialization from a seedable RNG.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autograd as ag
from .autograd import Tensor


@dataclass
class ParamSet:
    """Named parameters plus per-parameter Adam moments.

    Mutation happens only in `adam_update` (single-writer); everything
    else treats the contents as read-only.
    """

    values: dict[str, Tensor] = field(default_factory=dict)
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0

    def add(self, name: str, array: np.ndarray) -> Tensor:
        if name in self.values:
            raise KeyError(f"duplicate parameter {name!r}")
        t = Tensor(array, requires_grad=True)
        self.values[name] = t
        self.m[name] = np.zeros_like(t.data)
        self.v[name] = np.zeros_like(t.data)
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self.values[name]

    def __contains__(self, name: str) -> bool:
        return name in self.values

    def names(self) -> list[str]:
        return list(self.values)

    def zero_grad(self) -> None:
        for t in self.values.values():
            t.grad = None

    def n_params(self) -> int:
        return sum(t.data.size for t in self.values.values())

    def arrays(self) -> dict[str, np.ndarray]:
        return {k: t.data for k, t in self.values.items()}

    def load_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for k, a in arrays.items():
            if k not in self.values:
                raise KeyError(f"unknown parameter {k!r}")
            if self.values[k].data.shape != a.shape:
                raise ag.ShapeError(
                    f"parameter {k!r}: expected {self.values[k].data.shape}, "
                    f"got {a.shape}"
                )
            self.values[k].data = np.asarray(a, dtype=np.float64)

    def copy(self) -> "ParamSet":
        out = ParamSet(step=self.step)
        for k, t in self.values.items():
            out.values[k] = Tensor(t.data.copy(), requires_grad=True)
            out.m[k] = self.m[k].copy()
            out.v[k] = self.v[k].copy()
        return out


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape=None):
    """Uniform(-limit, limit) with limit = sqrt(6 / (fan_in + fan_out))."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    if shape is None:
        shape = (fan_in, fan_out)
    return rng.uniform(-limit, limit, size=shape)


def add_dense(params: ParamSet, rng, name: str, d_in: int, d_out: int) -> None:
    params.add(f"{name}.w", glorot(rng, d_in, d_out))
    params.add(f"{name}.b", np.zeros(d_out))


def dense(params: ParamSet, name: str, x: Tensor) -> Tensor:
    return x @ params[f"{name}.w"] + params[f"{name}.b"]


# -- GRU -------------------------------------------------------------------


def add_gru(params: ParamSet, rng, name: str, d_in: int, d_hidden: int) -> None:
    # gate order along columns: update (z), reset (r)
    params.add(f"{name}.wx", glorot(rng, d_in, 2 * d_hidden, (d_in, 2 * d_hidden)))
    params.add(f"{name}.wh", glorot(rng, d_hidden, 2 * d_hidden, (d_hidden, 2 * d_hidden)))
    params.add(f"{name}.b", np.zeros(2 * d_hidden))
    params.add(f"{name}.wxc", glorot(rng, d_in, d_hidden))
    params.add(f"{name}.whc", glorot(rng, d_hidden, d_hidden))
    params.add(f"{name}.bc", np.zeros(d_hidden))


def gru_step(params: ParamSet, name: str, x: Tensor, h_prev: Tensor) -> Tensor:
    """One GRU step: h' = (1 - z) * h_prev + z * tanh-candidate."""
    d_hidden = h_prev.data.shape[-1]
    gates = ag.sigmoid(
        x @ params[f"{name}.wx"] + h_prev @ params[f"{name}.wh"] + params[f"{name}.b"]
    )
    z = ag.narrow(gates, -1, 0, d_hidden)
    r = ag.narrow(gates, -1, d_hidden, d_hidden)
    cand = ag.tanh(
        x @ params[f"{name}.wxc"]
        + (r * h_prev) @ params[f"{name}.whc"]
        + params[f"{name}.bc"]
    )
    return (1.0 - z) * h_prev + z * cand


# -- LSTM ------------------------------------------------------------------


def add_lstm(params: ParamSet, rng, name: str, d_in: int, d_hidden: int) -> None:
    # gate order along columns: input, forget, cell candidate, output
    params.add(f"{name}.wx", glorot(rng, d_in, 4 * d_hidden, (d_in, 4 * d_hidden)))
    params.add(f"{name}.wh", glorot(rng, d_hidden, 4 * d_hidden, (d_hidden, 4 * d_hidden)))
    params.add(f"{name}.b", np.zeros(4 * d_hidden))


def lstm_step(
    params: ParamSet, name: str, x: Tensor, h_prev: Tensor, c_prev: Tensor
) -> tuple[Tensor, Tensor]:
    """One LSTM step; returns (h, c)."""
    d_hidden = h_prev.data.shape[-1]
    acts = x @ params[f"{name}.wx"] + h_prev @ params[f"{name}.wh"] + params[f"{name}.b"]
    i = ag.sigmoid(ag.narrow(acts, -1, 0, d_hidden))
    f = ag.sigmoid(ag.narrow(acts, -1, d_hidden, d_hidden))
    g = ag.tanh(ag.narrow(acts, -1, 2 * d_hidden, d_hidden))
    o = ag.sigmoid(ag.narrow(acts, -1, 3 * d_hidden, d_hidden))
    c = f * c_prev + i * g
    h = o * ag.tanh(c)
    return h, c


# -- batch normalization -----------------------------------------------------


def add_batchnorm(params: ParamSet, name: str, d: int) -> None:
    params.add(f"{name}.gamma", np.ones(d))
    params.add(f"{name}.beta", np.zeros(d))


def batchnorm(
    params: ParamSet,
    name: str,
    x: Tensor,
    running: dict[str, np.ndarray],
    training: bool,
    momentum: float = 0.9,
    eps: float = 1e-5,
) -> Tensor:
    """Feature-wise normalization; evaluation uses the frozen running
    statistics accumulated during training."""
    if training:
        mean = ag.reduce_mean(x, axis=0)
        centered = x - mean
        var = ag.reduce_mean(centered * centered, axis=0)
        key_m, key_v = f"{name}.mean", f"{name}.var"
        if key_m not in running:
            running[key_m] = mean.data.copy()
            running[key_v] = var.data.copy()
        else:
            running[key_m] = momentum * running[key_m] + (1 - momentum) * mean.data
            running[key_v] = momentum * running[key_v] + (1 - momentum) * var.data
        normed = centered / ag.sqrt(var + eps)
    else:
        mean = Tensor(running[f"{name}.mean"])
        var = Tensor(running[f"{name}.var"])
        normed = (x - mean) / ag.sqrt(var + eps)
    return normed * params[f"{name}.gamma"] + params[f"{name}.beta"]


# -- optimizer ---------------------------------------------------------------


def adam_update(
    params: ParamSet,
    grads: dict[str, np.ndarray],
    lr: float = 1e-3,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> ParamSet:
    """Bias-corrected Adam step in place; increments the step counter.

    Parameters without an entry in `grads` are treated as zero-gradient.
    """
    params.step += 1
    t = params.step
    for name, tensor in params.values.items():
        g = grads.get(name)
        if g is None:
            g = np.zeros_like(tensor.data)
        if g.shape != tensor.data.shape:
            raise ag.ShapeError(
                f"gradient for {name!r} has shape {g.shape}, "
                f"parameter has {tensor.data.shape}"
            )
        ag.check_finite(g, f"gradient of {name!r}")
        m = params.m[name]
        v = params.v[name]
        m *= beta1
        m += (1 - beta1) * g
        v *= beta2
        v += (1 - beta2) * g**2
        m_hat = m / (1 - beta1**t)
        v_hat = v / (1 - beta2**t)
        tensor.data = tensor.data - lr * m_hat / (np.sqrt(v_hat) + eps)
    return params


def eval_with_gradients(computation, params: ParamSet, inputs: dict):
    """Run `computation(params, inputs)` and backpropagate its loss.

    `computation` returns a dict of named Tensors including a scalar
    "loss". Returns (outputs as numpy arrays, gradient arrays for every
    parameter; parameters the loss never touched get zeros).
    """
    params.zero_grad()
    outputs = computation(params, inputs)
    loss = outputs["loss"]
    if loss.data.size != 1:
        raise ag.ShapeError(f"loss must be scalar, got shape {loss.data.shape}")
    loss.backward()
    grads = {}
    for name, tensor in params.values.items():
        grads[name] = (
            tensor.grad if tensor.grad is not None else np.zeros_like(tensor.data)
        )
    out_arrays = {k: v.data for k, v in outputs.items()}
    return out_arrays, grads
