"""Numpy reference implementations of the hot elementwise kernels.

Each function mirrors the compiled backend in `_opscy.pyx` operation for
operation, so the two backends produce bit-identical results for the
piecewise-linear kernels and the Adam/clip updates (the compiled build uses
-ffp-contract=off for that reason). `sigmoid` may differ in the last ulp
because numpy's vectorized exp and libm's exp are not guaranteed to round
identically.
"""

import numpy as np

BACKEND_NAME = "python"


def leaky_relu_fwd(x, slope):
    return np.where(x > 0.0, x, slope * x)


def leaky_relu_bwd(x, g, slope):
    return np.where(x > 0.0, g, slope * g)


def relu_fwd(x):
    return np.maximum(x, 0.0)


def relu_bwd(x, g):
    return np.where(x > 0.0, g, 0.0)


def sigmoid_fwd(x):
    # exp may overflow to inf for very negative x; 1/inf is the right 0
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-x))


def sigmoid_bwd(y, g):
    return g * (y * (1.0 - y))


def dropout_fwd(x, u, p):
    # inverted dropout: survivors are pre-scaled so eval mode is an identity
    inv = 1.0 / (1.0 - p)
    return np.where(u >= p, x * inv, 0.0)


def dropout_bwd(u, g, p):
    inv = 1.0 / (1.0 - p)
    return np.where(u >= p, g * inv, 0.0)


def adam_update(p, g, m, v, lr, beta1, beta2, eps, c1, c2):
    """One fused Adam step, in place on p, m, v.

    c1 = 1 - beta1**t and c2 = 1 - beta2**t are precomputed by the caller so
    both backends consume identical bias-correction scalars.
    """
    m *= beta1
    m += (1.0 - beta1) * g
    v *= beta2
    v += (1.0 - beta2) * (g * g)
    p -= lr * ((m / c1) / (np.sqrt(v / c2) + eps))


def clip_(w, c):
    np.clip(w, -c, c, out=w)
