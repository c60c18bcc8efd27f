# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled implementation of the numerical kernels.

Mirrors geoembed._kernels_py function for function. Matrix products go
through BLAS (scipy.linalg.cython_blas) so the two backends agree to
rounding; the uint64 generator is integer-exact and must match the
NumPy fallback bit for bit.
"""

import numpy as np

cimport numpy as cnp
from libc.stdint cimport uint64_t
from libc.math cimport exp, log, pow, sqrt, tanh
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()


cdef inline uint64_t _rotl(uint64_t x, int k) nogil:
    return (x << k) | (x >> (64 - k))


def fill_u64(cnp.uint64_t[::1] state, cnp.uint64_t[::1] out):
    """Advance the xoshiro256** `state` (uint64[4]) filling `out` (uint64[n])."""
    cdef uint64_t s0 = state[0], s1 = state[1], s2 = state[2], s3 = state[3]
    cdef uint64_t r, t
    cdef Py_ssize_t i, n = out.shape[0]
    with nogil:
        for i in range(n):
            r = _rotl(s1 * <uint64_t>5, 7) * <uint64_t>9
            out[i] = r
            t = s1 << 17
            s2 ^= s0
            s3 ^= s1
            s1 ^= s2
            s0 ^= s3
            s2 ^= t
            s3 = _rotl(s3, 45)
    state[0] = s0
    state[1] = s1
    state[2] = s2
    state[3] = s3


def affine_forward(double[:, ::1] X, double[:, ::1] W, double[::1] b):
    """Z = X @ W.T + b with X (n,i), W (o,i), b (o,)."""
    cdef int n = <int>X.shape[0], i = <int>X.shape[1], o = <int>W.shape[0]
    Z_arr = np.empty((n, o), dtype=np.float64)
    cdef double[:, ::1] Z = Z_arr
    cdef double alpha = 1.0, beta = 0.0
    cdef Py_ssize_t r, c
    if n > 0 and o > 0:
        if i > 0:
            dgemm("T", "N", &o, &n, &i, &alpha, &W[0, 0], &i,
                  &X[0, 0], &i, &beta, &Z[0, 0], &o)
        else:
            Z_arr[:] = 0.0
        with nogil:
            for r in range(n):
                for c in range(o):
                    Z[r, c] += b[c]
    return Z_arr


def affine_backward(double[:, ::1] X, double[:, ::1] W, double[:, ::1] dZ):
    """Gradients of an affine layer: returns (dX, dW, db)."""
    cdef int n = <int>X.shape[0], i = <int>X.shape[1], o = <int>W.shape[0]
    dX_arr = np.zeros((n, i), dtype=np.float64)
    dW_arr = np.zeros((o, i), dtype=np.float64)
    db_arr = np.zeros(o, dtype=np.float64)
    cdef double[:, ::1] dX = dX_arr, dW = dW_arr
    cdef double[::1] db = db_arr
    cdef double alpha = 1.0, beta = 0.0
    cdef Py_ssize_t r, c
    if n > 0 and o > 0:
        if i > 0:
            # dX (n,i) = dZ (n,o) @ W (o,i)
            dgemm("N", "N", &i, &n, &o, &alpha, &W[0, 0], &i,
                  &dZ[0, 0], &o, &beta, &dX[0, 0], &i)
            # dW (o,i) = dZ.T (o,n) @ X (n,i)
            dgemm("N", "T", &i, &o, &n, &alpha, &X[0, 0], &i,
                  &dZ[0, 0], &o, &beta, &dW[0, 0], &i)
        with nogil:
            for r in range(n):
                for c in range(o):
                    db[c] += dZ[r, c]
    return dX_arr, dW_arr, db_arr


def relu_forward(double[:, ::1] Z):
    out_arr = np.empty((Z.shape[0], Z.shape[1]), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t r, c
    with nogil:
        for r in range(Z.shape[0]):
            for c in range(Z.shape[1]):
                out[r, c] = Z[r, c] if Z[r, c] > 0.0 else 0.0
    return out_arr


def relu_backward(double[:, ::1] Z, double[:, ::1] dA):
    out_arr = np.empty((Z.shape[0], Z.shape[1]), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t r, c
    with nogil:
        for r in range(Z.shape[0]):
            for c in range(Z.shape[1]):
                out[r, c] = dA[r, c] if Z[r, c] > 0.0 else 0.0
    return out_arr


def tanh_forward(double[:, ::1] Z):
    out_arr = np.empty((Z.shape[0], Z.shape[1]), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t r, c
    with nogil:
        for r in range(Z.shape[0]):
            for c in range(Z.shape[1]):
                out[r, c] = tanh(Z[r, c])
    return out_arr


def tanh_backward(double[:, ::1] A, double[:, ::1] dA):
    out_arr = np.empty((A.shape[0], A.shape[1]), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t r, c
    with nogil:
        for r in range(A.shape[0]):
            for c in range(A.shape[1]):
                out[r, c] = dA[r, c] * (1.0 - A[r, c] * A[r, c])
    return out_arr


def l2normalize_rows(double[:, ::1] Z):
    cdef Py_ssize_t n = Z.shape[0], d = Z.shape[1], r, c
    Y_arr = np.empty((n, d), dtype=np.float64)
    norms_arr = np.empty(n, dtype=np.float64)
    cdef double[:, ::1] Y = Y_arr
    cdef double[::1] norms = norms_arr
    cdef double s
    with nogil:
        for r in range(n):
            s = 0.0
            for c in range(d):
                s += Z[r, c] * Z[r, c]
            s = sqrt(s)
            norms[r] = s
            for c in range(d):
                Y[r, c] = Z[r, c] / s
    return Y_arr, norms_arr


def l2normalize_rows_backward(double[:, ::1] Y, double[::1] norms,
                              double[:, ::1] dY):
    cdef Py_ssize_t n = Y.shape[0], d = Y.shape[1], r, c
    out_arr = np.empty((n, d), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double dot
    with nogil:
        for r in range(n):
            dot = 0.0
            for c in range(d):
                dot += Y[r, c] * dY[r, c]
            for c in range(d):
                out[r, c] = (dY[r, c] - Y[r, c] * dot) / norms[r]
    return out_arr


def rowwise_sqdist(double[:, ::1] A, double[:, ::1] B):
    cdef Py_ssize_t n = A.shape[0], d = A.shape[1], r, c
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double s, t
    with nogil:
        for r in range(n):
            s = 0.0
            for c in range(d):
                t = A[r, c] - B[r, c]
                s += t * t
            out[r] = s
    return out_arr


def pairwise_sqdist(double[:, ::1] Y):
    cdef Py_ssize_t n = Y.shape[0], d = Y.shape[1], r, q, c
    out_arr = np.zeros((n, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double s, t
    with nogil:
        for r in range(n):
            for q in range(r + 1, n):
                s = 0.0
                for c in range(d):
                    t = Y[r, c] - Y[q, c]
                    s += t * t
                out[r, q] = s
                out[q, r] = s
    return out_arr


def softmax_rows(double[:, ::1] Z):
    cdef Py_ssize_t n = Z.shape[0], k = Z.shape[1], r, c
    out_arr = np.empty((n, k), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double m, s
    with nogil:
        for r in range(n):
            m = Z[r, 0]
            for c in range(1, k):
                if Z[r, c] > m:
                    m = Z[r, c]
            s = 0.0
            for c in range(k):
                out[r, c] = exp(Z[r, c] - m)
                s += out[r, c]
            for c in range(k):
                out[r, c] /= s
    return out_arr


def adam_update(double[::1] params, double[::1] grads, double[::1] m,
                double[::1] v, long t, double lr, double beta1,
                double beta2, double eps):
    """One bias-corrected Adam step, in place on params/m/v. `t` is the
    step count *after* this update (1 on the first call)."""
    cdef Py_ssize_t i, n = params.shape[0]
    cdef double c1 = 1.0 - pow(beta1, <double>t)
    cdef double c2 = 1.0 - pow(beta2, <double>t)
    cdef double mhat, vhat
    with nogil:
        for i in range(n):
            m[i] = beta1 * m[i] + (1.0 - beta1) * grads[i]
            v[i] = beta2 * v[i] + (1.0 - beta2) * grads[i] * grads[i]
            mhat = m[i] / c1
            vhat = v[i] / c2
            params[i] -= lr * mhat / (sqrt(vhat) + eps)
