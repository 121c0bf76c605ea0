"""Central finite-difference checks for tape gradients."""

from __future__ import annotations

from typing import Callable, Dict, Sequence

import numpy as np

from . import tensor as T

DEFAULT_STEP = 1e-5
DEFAULT_RTOL = 1e-4
# below this magnitude errors are measured absolutely, not relatively
_SCALE_FLOOR = 1e-2


def numeric_gradient(fn: Callable[..., float], inputs: Sequence[np.ndarray], step=DEFAULT_STEP):
    """``(f(x + h e) - f(x - h e)) / 2h`` for every coordinate of every input."""
    values = [np.array(x, dtype=np.float64) for x in inputs]
    grads = []
    for x in values:
        g = np.zeros_like(x)
        flat, gflat = x.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = fn(*values)
            flat[i] = orig - step
            down = fn(*values)
            flat[i] = orig
            gflat[i] = (up - down) / (2.0 * step)
        grads.append(g)
    return grads


def tape_gradient(fn: Callable[..., T.Tensor], inputs: Sequence[np.ndarray]):
    leaves = [T.Tensor(np.array(x, dtype=np.float64), requires_grad=True) for x in inputs]
    out = fn(*leaves)
    T.backward(out)
    return [leaf.grad if leaf.grad is not None else np.zeros_like(leaf.value) for leaf in leaves]


def relative_error(analytic, numeric) -> float:
    a, n = np.asarray(analytic), np.asarray(numeric)
    scale = np.maximum(np.maximum(np.abs(a), np.abs(n)), _SCALE_FLOOR)
    return float(np.max(np.abs(a - n) / scale)) if a.size else 0.0


def check(fn: Callable[..., T.Tensor], inputs: Sequence[np.ndarray], step=DEFAULT_STEP) -> float:
    """Worst relative error between tape and finite-difference gradients.

    ``fn`` maps tensors to a scalar tensor; it is evaluated on plain
    arrays too (wrapped in constant tensors) for the numeric side.
    """
    analytic = tape_gradient(fn, inputs)
    numeric = numeric_gradient(lambda *xs: fn(*[T.Tensor(x) for x in xs]).item(), inputs, step)
    return max(relative_error(a, n) for a, n in zip(analytic, numeric))


def check_dict(fn: Callable[[Dict[str, T.Tensor]], T.Tensor], params: Dict[str, np.ndarray], step=DEFAULT_STEP) -> float:
    """Same as :func:`check` for a function of a named parameter dict."""
    names = sorted(params)

    def wrapped(*xs):
        return fn(dict(zip(names, xs)))

    return check(wrapped, [params[k] for k in names], step)
