"""Core numerics: seeded RNG, vector ops, and PCA.

Vectors and matrices are plain float64 ndarrays. Every operation here is
a pure function of its inputs (plus the explicit RNG state), which is
what makes whole experiment runs replayable from a seed.
"""

import math

import numpy as np

from .backend import kernels as K
from .errors import DegenerateEmbeddingError, DimensionMismatchError

MASK64 = (1 << 64) - 1
EPS_NORM = 1e-12

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3


def _splitmix64(x):
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return x, (z ^ (z >> 31))


def derive_seed(seed, label):
    """Deterministically derive a child seed from (seed, label).

    Used to give independent streams to sub-components (sampler, init,
    splits, ...) without coupling their draw counts.
    """
    h = _FNV_OFFSET
    for byte in str(label).encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & MASK64
    _, out = _splitmix64((int(seed) & MASK64) ^ h)
    return out


class Rng:
    """xoshiro256** random stream, seeded via SplitMix64.

    The same seed yields the same stream of draws on every platform and
    with either kernel backend: the uint64 sequence is integer-exact and
    all float derivations are fixed formulas on top of it. A single Rng
    must have a single owner; use spawn() for parallel components.
    """

    def __init__(self, seed):
        self.seed = int(seed) & MASK64
        state = np.empty(4, dtype=np.uint64)
        x = self.seed
        for i in range(4):
            x, s = _splitmix64(x)
            state[i] = s
        self._state = state
        self._one = np.empty(1, dtype=np.uint64)

    def spawn(self, label):
        """A new, independent Rng derived from this one's seed and `label`."""
        return Rng(derive_seed(self.seed, label))

    # -- uint64 stream ------------------------------------------------

    def u64_block(self, n):
        out = np.empty(n, dtype=np.uint64)
        if n:
            K.fill_u64(self._state, out)
        return out

    def next_u64(self):
        K.fill_u64(self._state, self._one)
        return int(self._one[0])

    # -- floats -------------------------------------------------------

    def random(self):
        """One float64 uniform in [0, 1)."""
        return (self.next_u64() >> 11) * 2.0 ** -53

    def uniform_block(self, n):
        return (self.u64_block(n) >> np.uint64(11)).astype(np.float64) * 2.0 ** -53

    def normal_block(self, n, std=1.0):
        """n standard-normal draws (times `std`) via Box-Muller pairs."""
        m = (n + 1) // 2
        u1 = self.uniform_block(m)
        u2 = self.uniform_block(m)
        r = np.sqrt(-2.0 * np.log1p(-u1))
        theta = (2.0 * math.pi) * u2
        out = np.empty(2 * m, dtype=np.float64)
        out[0::2] = r * np.cos(theta)
        out[1::2] = r * np.sin(theta)
        if std != 1.0:
            out *= std
        return out[:n]

    def normal(self, std=1.0):
        return float(self.normal_block(1, std=std)[0])

    # -- bounded integers ----------------------------------------------

    def randbelow(self, bound):
        """Uniform integer in [0, bound), unbiased via modulo rejection."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        rem = ((1 << 64) - bound) % bound  # == 2**64 % bound
        limit = (1 << 64) - rem
        while True:
            u = self.next_u64()
            if u < limit:
                return u % bound

    def randbelow_block(self, n, bounds):
        """n uniform integers, entry k in [0, bounds[k]) (bounds may be scalar)."""
        b = np.broadcast_to(np.asarray(bounds, dtype=np.uint64), (n,))
        if n and not (b > 0).all():
            raise ValueError("bounds must be positive")
        umax = np.uint64(0xFFFFFFFFFFFFFFFF)
        rem = (umax - b + np.uint64(1)) % b  # == 2**64 % b, wraparound-safe
        cutoff = umax - rem  # reject u > cutoff
        u = self.u64_block(n)
        reject = u > cutoff
        while reject.any():
            idx = np.nonzero(reject)[0]
            u[idx] = self.u64_block(len(idx))
            reject[idx] = u[idx] > cutoff[idx]
        return (u % b).astype(np.int64)

    def shuffle(self, items):
        """In-place Fisher-Yates shuffle of a list or 1-D array."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]

    def permutation(self, n):
        idx = list(range(n))
        self.shuffle(idx)
        return np.asarray(idx, dtype=np.int64)


# ---------------------------------------------------------------------
# vector ops
# ---------------------------------------------------------------------


def as_vec(a):
    v = np.asarray(a, dtype=np.float64)
    if v.ndim != 1:
        raise DimensionMismatchError(f"expected a 1-D vector, got shape {v.shape}")
    return v


def sq_l2_dist(a, b):
    """Squared Euclidean distance between two equal-length vectors."""
    a = as_vec(a)
    b = as_vec(b)
    if a.shape != b.shape:
        raise DimensionMismatchError(
            f"length mismatch: {a.shape[0]} vs {b.shape[0]}"
        )
    d = a - b
    return float(np.dot(d, d))


def l2_normalize(a):
    """a / ||a||, rejecting near-zero inputs (norm <= 1e-12)."""
    a = as_vec(a)
    norm = math.sqrt(float(np.dot(a, a)))
    if norm <= EPS_NORM:
        raise DegenerateEmbeddingError(
            f"cannot normalize a vector with norm {norm:.3e}"
        )
    return a / norm


# ---------------------------------------------------------------------
# PCA via power iteration with deflation
# ---------------------------------------------------------------------

_PCA_TOL = 1e-10
_PCA_MAX_ITER = 1000


def _dominant_eigvec(C, prev, rng):
    """Leading eigenpair of symmetric PSD C, kept orthogonal to rows of prev."""
    d = C.shape[0]
    v = rng.normal_block(d)
    if prev.size:
        v -= prev.T @ (prev @ v)
    nrm = np.linalg.norm(v)
    if nrm < 1e-300:  # pathological start; fall back to a basis vector
        v = np.zeros(d)
        v[0] = 1.0
        if prev.size:
            v -= prev.T @ (prev @ v)
        nrm = np.linalg.norm(v)
    v /= nrm
    for _ in range(_PCA_MAX_ITER):
        w = C @ v
        if prev.size:
            w -= prev.T @ (prev @ w)
        nrm = np.linalg.norm(w)
        if nrm < 1e-300:
            # C is (numerically) zero on the remaining subspace
            return 0.0, v
        w /= nrm
        if w @ v < 0.0:
            w = -w
        delta = np.linalg.norm(w - v)
        v = w
        if delta < _PCA_TOL:
            break
    lam = float(v @ (C @ v))
    return max(lam, 0.0), v


def pca_project(points, k):
    """Project mean-centered points onto their top-k principal directions.

    Returns (projections, explained_variance): an (n, k) array and the k
    leading sample-covariance eigenvalues in nonincreasing order. The
    directions are computed by power iteration with deflation (with
    re-orthogonalization each sweep, so they stay orthonormal even for
    clustered eigenvalues).
    """
    X = np.asarray(points, dtype=np.float64)
    if X.ndim != 2:
        X = np.stack([as_vec(p) for p in points])
    n, d = X.shape
    if n < 2:
        raise DimensionMismatchError("PCA needs at least 2 points")
    if not 1 <= k <= d:
        raise DimensionMismatchError(f"k={k} out of range for dimension {d}")
    Xc = X - X.mean(axis=0)
    C = (Xc.T @ Xc) / (n - 1)
    rng = Rng(derive_seed(0, f"pca-{n}-{d}-{k}"))
    comps = np.zeros((0, d))
    lams = []
    for _ in range(k):
        lam, v = _dominant_eigvec(C, comps, rng)
        # fix sign so the largest-magnitude entry is positive
        j = int(np.argmax(np.abs(v)))
        if v[j] < 0.0:
            v = -v
        comps = np.vstack([comps, v])
        lams.append(lam)
    order = sorted(range(k), key=lambda i: -lams[i])
    comps = comps[order]
    lams = [lams[i] for i in order]
    return Xc @ comps.T, lams
