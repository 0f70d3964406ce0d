"""Shared test utilities: the finite-difference oracle and tiny trained
models reused across suites."""

from __future__ import annotations

import numpy as np

from uncm import autograd as ag
from uncm import nn


def finite_difference_check(
    compute, params: nn.ParamSet, inputs: dict, eps: float = 1e-5,
    rel_tol: float = 1e-5,
) -> int:
    """Compare every parameter gradient against a central finite
    difference; returns the number of failing components."""
    _, grads = nn.eval_with_gradients(compute, params, inputs)
    failures = 0
    for name, tensor in params.values.items():
        flat = tensor.data.reshape(-1)
        g = grads[name].reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + eps
            up = float(compute(params, inputs)["loss"].data)
            flat[i] = orig - eps
            down = float(compute(params, inputs)["loss"].data)
            flat[i] = orig
            fd = (up - down) / (2 * eps)
            scale = max(1.0, abs(fd), abs(g[i]))
            if abs(fd - g[i]) > rel_tol * scale:
                failures += 1
    return failures


def scalarize(t: ag.Tensor) -> ag.Tensor:
    """Reduce any tensor to a scalar through a fixed weighted sum so the
    checked gradient exercises every output component."""
    weights = ag.Tensor(
        np.linspace(0.3, 1.7, t.data.size).reshape(t.data.shape)
    )
    return ag.reduce_sum(t * weights)
