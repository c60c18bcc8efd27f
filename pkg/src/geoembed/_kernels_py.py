"""NumPy implementation of the numerical kernels.

This module is the portable fallback for the compiled core
(``geoembed._core``). Both expose the same functions with the same
semantics; ``geoembed.backend`` selects one at import time. Anything in
here must stay free of Python-object state: pure array-in/array-out.

The uint64 generator is xoshiro256**; it must produce bit-identical
streams in both backends, so the update below mirrors the C reference
exactly (64-bit wrapping arithmetic).
"""

import numpy as np

_MASK = (1 << 64) - 1


def fill_u64(state, out):
    """Advance the xoshiro256** `state` (uint64[4]) filling `out` (uint64[n])."""
    s0, s1, s2, s3 = (int(x) for x in state)
    for i in range(out.shape[0]):
        r = (s1 * 5) & _MASK
        r = ((r << 7) | (r >> 57)) & _MASK
        out[i] = (r * 9) & _MASK
        t = (s1 << 17) & _MASK
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = ((s3 << 45) | (s3 >> 19)) & _MASK
    state[0] = s0
    state[1] = s1
    state[2] = s2
    state[3] = s3


def affine_forward(X, W, b):
    """Z = X @ W.T + b with X (n,i), W (o,i), b (o,)."""
    return X @ W.T + b


def affine_backward(X, W, dZ):
    """Gradients of an affine layer: returns (dX, dW, db)."""
    dX = dZ @ W
    dW = dZ.T @ X
    db = dZ.sum(axis=0)
    return dX, dW, db


def relu_forward(Z):
    return np.maximum(Z, 0.0)


def relu_backward(Z, dA):
    return dA * (Z > 0.0)


def tanh_forward(Z):
    return np.tanh(Z)


def tanh_backward(A, dA):
    """Backward through tanh given the *output* A = tanh(Z)."""
    return dA * (1.0 - A * A)


def l2normalize_rows(Z):
    """Row-normalize Z; returns (Y, norms). Rows with zero norm yield NaN/Inf —
    callers must inspect `norms` before trusting Y."""
    norms = np.sqrt((Z * Z).sum(axis=1))
    with np.errstate(divide="ignore", invalid="ignore"):
        Y = Z / norms[:, None]
    return Y, norms


def l2normalize_rows_backward(Y, norms, dY):
    dot = (Y * dY).sum(axis=1)
    return (dY - Y * dot[:, None]) / norms[:, None]


def rowwise_sqdist(A, B):
    D = A - B
    return np.einsum("ij,ij->i", D, D)


def pairwise_sqdist(Y):
    """Full (n,n) matrix of squared distances, clamped at 0."""
    sq = (Y * Y).sum(axis=1)
    D = sq[:, None] + sq[None, :] - 2.0 * (Y @ Y.T)
    np.maximum(D, 0.0, out=D)
    np.fill_diagonal(D, 0.0)
    return D


def softmax_rows(Z):
    shifted = Z - Z.max(axis=1, keepdims=True)
    E = np.exp(shifted)
    return E / E.sum(axis=1, keepdims=True)


def adam_update(params, grads, m, v, t, lr, beta1, beta2, eps):
    """One bias-corrected Adam step, in place on params/m/v. `t` is the
    step count *after* this update (1 on the first call)."""
    m *= beta1
    m += (1.0 - beta1) * grads
    v *= beta2
    v += (1.0 - beta2) * grads * grads
    mhat = m / (1.0 - beta1 ** t)
    vhat = v / (1.0 - beta2 ** t)
    params -= lr * mhat / (np.sqrt(vhat) + eps)
