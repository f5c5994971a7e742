# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled fused elementwise kernels.

Single-pass loops over contiguous float64 buffers; arithmetic matches the
numpy backend in ops_py.py expression for expression (built with
-ffp-contract=off so no FMA fusion changes the rounding).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fmax, fmin, sqrt

cnp.import_array()

BACKEND_NAME = "compiled"


cdef inline cnp.ndarray _flat(object a):
    # activations come off contiguous layer buffers; copy only if sliced
    return np.ascontiguousarray(a, dtype=np.float64).reshape(-1)


def leaky_relu_fwd(object x, double slope):
    cdef cnp.ndarray xf = _flat(x)
    cdef cnp.ndarray out = np.empty_like(xf)
    cdef const double[::1] xv = xf
    cdef double[::1] ov = out
    cdef Py_ssize_t i, n = xv.shape[0]
    for i in range(n):
        ov[i] = xv[i] if xv[i] > 0.0 else slope * xv[i]
    return out.reshape(np.shape(x))


def leaky_relu_bwd(object x, object g, double slope):
    cdef cnp.ndarray xf = _flat(x)
    cdef cnp.ndarray gf = _flat(g)
    cdef cnp.ndarray out = np.empty_like(xf)
    cdef const double[::1] xv = xf
    cdef const double[::1] gv = gf
    cdef double[::1] ov = out
    cdef Py_ssize_t i, n = xv.shape[0]
    for i in range(n):
        ov[i] = gv[i] if xv[i] > 0.0 else slope * gv[i]
    return out.reshape(np.shape(x))


def relu_fwd(object x):
    cdef cnp.ndarray xf = _flat(x)
    cdef cnp.ndarray out = np.empty_like(xf)
    cdef const double[::1] xv = xf
    cdef double[::1] ov = out
    cdef Py_ssize_t i, n = xv.shape[0]
    for i in range(n):
        ov[i] = fmax(xv[i], 0.0)
    return out.reshape(np.shape(x))


def relu_bwd(object x, object g):
    cdef cnp.ndarray xf = _flat(x)
    cdef cnp.ndarray gf = _flat(g)
    cdef cnp.ndarray out = np.empty_like(xf)
    cdef const double[::1] xv = xf
    cdef const double[::1] gv = gf
    cdef double[::1] ov = out
    cdef Py_ssize_t i, n = xv.shape[0]
    for i in range(n):
        ov[i] = gv[i] if xv[i] > 0.0 else 0.0
    return out.reshape(np.shape(x))


def sigmoid_fwd(object x):
    cdef cnp.ndarray xf = _flat(x)
    cdef cnp.ndarray out = np.empty_like(xf)
    cdef const double[::1] xv = xf
    cdef double[::1] ov = out
    cdef Py_ssize_t i, n = xv.shape[0]
    for i in range(n):
        ov[i] = 1.0 / (1.0 + exp(-xv[i]))
    return out.reshape(np.shape(x))


def sigmoid_bwd(object y, object g):
    cdef cnp.ndarray yf = _flat(y)
    cdef cnp.ndarray gf = _flat(g)
    cdef cnp.ndarray out = np.empty_like(yf)
    cdef const double[::1] yv = yf
    cdef const double[::1] gv = gf
    cdef double[::1] ov = out
    cdef Py_ssize_t i, n = yv.shape[0]
    for i in range(n):
        ov[i] = gv[i] * (yv[i] * (1.0 - yv[i]))
    return out.reshape(np.shape(y))


def dropout_fwd(object x, object u, double p):
    cdef cnp.ndarray xf = _flat(x)
    cdef cnp.ndarray uf = _flat(u)
    cdef cnp.ndarray out = np.empty_like(xf)
    cdef double inv = 1.0 / (1.0 - p)
    cdef const double[::1] xv = xf
    cdef const double[::1] uv = uf
    cdef double[::1] ov = out
    cdef Py_ssize_t i, n = xv.shape[0]
    for i in range(n):
        ov[i] = xv[i] * inv if uv[i] >= p else 0.0
    return out.reshape(np.shape(x))


def dropout_bwd(object u, object g, double p):
    cdef cnp.ndarray uf = _flat(u)
    cdef cnp.ndarray gf = _flat(g)
    cdef cnp.ndarray out = np.empty_like(gf)
    cdef double inv = 1.0 / (1.0 - p)
    cdef const double[::1] uv = uf
    cdef const double[::1] gv = gf
    cdef double[::1] ov = out
    cdef Py_ssize_t i, n = uv.shape[0]
    for i in range(n):
        ov[i] = gv[i] * inv if uv[i] >= p else 0.0
    return out.reshape(np.shape(g))


def adam_update(object p, object g, object m, object v,
                double lr, double beta1, double beta2, double eps,
                double c1, double c2):
    """One fused Adam step, in place on p, m, v (must be C-contiguous)."""
    if not (p.flags["C_CONTIGUOUS"] and m.flags["C_CONTIGUOUS"]
            and v.flags["C_CONTIGUOUS"]):
        raise ValueError("adam_update requires C-contiguous buffers")
    cdef cnp.ndarray gf = _flat(g)
    cdef double[::1] pv = p.reshape(-1)
    cdef const double[::1] gv = gf
    cdef double[::1] mv = m.reshape(-1)
    cdef double[::1] vv = v.reshape(-1)
    cdef Py_ssize_t i, n = pv.shape[0]
    for i in range(n):
        mv[i] = beta1 * mv[i] + (1.0 - beta1) * gv[i]
        vv[i] = beta2 * vv[i] + (1.0 - beta2) * (gv[i] * gv[i])
        pv[i] = pv[i] - lr * ((mv[i] / c1) / (sqrt(vv[i] / c2) + eps))


def clip_(object w, double c):
    """Elementwise clamp to [-c, c], in place (must be C-contiguous)."""
    if not w.flags["C_CONTIGUOUS"]:
        raise ValueError("clip_ requires a C-contiguous buffer")
    cdef double[::1] wv = w.reshape(-1)
    cdef Py_ssize_t i, n = wv.shape[0]
    for i in range(n):
        wv[i] = fmin(fmax(wv[i], -c), c)
