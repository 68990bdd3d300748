"""Random sketching operators S (m x n) acting on residual space.

Three structured forms are supported, each normalised so that
E[S^T S] = I:

* ``gaussian`` -- dense, i.i.d. N(0, 1/m) entries.
* ``sampling`` -- m coordinate rows drawn uniformly with replacement,
  scaled by sqrt(n/m).
* ``hashing`` -- CountSketch style, s nonzeros per column at distinct rows,
  values +-1/sqrt(s).

``none`` is the identity and lets callers share a code path.
"""

from dataclasses import dataclass
from math import sqrt

import numpy as np
import scipy.sparse as sp

from .instrument import record

KINDS = ("none", "gaussian", "sampling", "hashing")

__all__ = [
    "KINDS",
    "SketchConfig",
    "SketchOperator",
    "make_sketch",
    "apply_to_vector",
    "apply_to_matrix_right",
    "densify",
]


@dataclass(frozen=True)
class SketchConfig:
    kind: str = "none"
    m: int = 1
    hash_nnz: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown sketch kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "none":
            return
        if int(self.m) < 1:
            raise ValueError(f"sketch size m must be >= 1, got {self.m}")
        if self.kind == "hashing" and not 1 <= int(self.hash_nnz) <= int(self.m):
            raise ValueError(
                f"hash_nnz must satisfy 1 <= hash_nnz <= m, got hash_nnz={self.hash_nnz}, m={self.m}"
            )
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")


@dataclass(frozen=True, eq=False)
class SketchOperator:
    """A realised sketch. Only the payload matching ``kind`` is populated.

    Attributes
    ----------
    matrix : (m, n) ndarray, gaussian only
    indices : (m,) int ndarray, sampling only
    scale : float, sampling only
    rows, values : (n, s) ndarrays, hashing only
        ``rows[j]`` are the distinct row indices stored in column j.
    """

    kind: str
    m: int
    n: int
    matrix: np.ndarray = None
    indices: np.ndarray = None
    scale: float = 1.0
    rows: np.ndarray = None
    values: np.ndarray = None
    _sparse: object = None

    @property
    def hash_nnz(self):
        return 0 if self.rows is None else self.rows.shape[1]

    @property
    def nnz(self):
        if self.kind == "none":
            return self.n
        if self.kind == "gaussian":
            return self.m * self.n
        if self.kind == "sampling":
            return self.m
        return self.rows.size


def _distinct_rows(rng, n, m, s):
    """For each of n columns draw s distinct integers from [0, m) uniformly.

    Column-vectorised sequential sampling without replacement: the t-th
    draw is uniform on [0, m - t) and is shifted past the values already
    taken in that column (visited in ascending order).
    """
    out = np.empty((n, s), dtype=np.int64)
    for t in range(s):
        cand = rng.integers(0, m - t, size=n)
        if t:
            taken = np.sort(out[:, :t], axis=1)
            for i in range(t):
                cand += cand >= taken[:, i]
        out[:, t] = cand
    return out


def make_sketch(config, n, rng=None):
    """Draw a sketch operator with n columns.

    Parameters
    ----------
    config : SketchConfig
    n : int
        Residual dimension.
    rng : numpy.random.Generator, optional
        Random stream to draw from; a fresh stream seeded with
        ``config.seed`` is used when omitted.
    """
    n = int(n)
    if n < 1:
        raise ValueError(f"residual dimension n must be >= 1, got {n}")
    if config.kind == "none":
        return SketchOperator("none", n, n)
    if rng is None:
        rng = np.random.default_rng(config.seed)
    m = int(config.m)

    if config.kind == "gaussian":
        mat = rng.standard_normal((m, n))
        mat *= 1.0 / sqrt(m)
        return SketchOperator("gaussian", m, n, matrix=mat)

    if config.kind == "sampling":
        idx = rng.integers(0, n, size=m)
        return SketchOperator("sampling", m, n, indices=idx, scale=sqrt(n / m))

    s = int(config.hash_nnz)
    rows = _distinct_rows(rng, n, m, s)
    signs = rng.integers(0, 2, size=(n, s)).astype(np.float64)
    values = (2.0 * signs - 1.0) / sqrt(s)
    # exactly s entries per column, so the CSC index pointer is a plain stride
    mat = sp.csc_matrix((values.ravel(), rows.ravel(), np.arange(0, n * s + 1, s)), shape=(m, n))
    return SketchOperator("hashing", m, n, rows=rows, values=values, _sparse=mat)


def apply_to_vector(S, v, counts=None):
    """Return S @ v."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 1 or v.shape[0] != S.n:
        raise ValueError(f"vector of length {S.n} expected, got shape {v.shape}")
    if S.kind == "none":
        return v.copy()
    if S.kind == "sampling":
        record(counts, "gathers", S.m)
        record(counts, "scalings", S.m)
        return S.scale * v[S.indices]
    if S.kind == "hashing":
        record(counts, "additions", S.rows.size)
        record(counts, "sign_applications", S.rows.size)
        return S._sparse @ v
    record(counts, "multiplies", S.m * S.n)
    record(counts, "additions", S.m * S.n)
    return S.matrix @ v


def apply_to_matrix_right(S, R, counts=None):
    """Return R @ S.T for R of shape (d, n).

    Column-major (Fortran ordered) R is the fast layout for all kinds.
    """
    R = np.asarray(R, dtype=float)
    if R.ndim != 2 or R.shape[1] != S.n:
        raise ValueError(f"matrix with {S.n} columns expected, got shape {R.shape}")
    d = R.shape[0]
    if S.kind == "none":
        return R.copy()
    if S.kind == "sampling":
        # pure column gather; the only arithmetic is the m*d scalings
        record(counts, "gathers", S.m * d)
        record(counts, "scalings", S.m * d)
        record(counts, "multiplies", 0)
        out = R[:, S.indices]
        out *= S.scale
        return out
    if S.kind == "hashing":
        record(counts, "additions", S.rows.size * d)
        record(counts, "sign_applications", S.rows.size * d)
        return (S._sparse @ R.T).T
    record(counts, "multiplies", S.m * S.n * d)
    record(counts, "additions", S.m * S.n * d)
    return R @ S.matrix.T


def densify(S):
    """Explicit dense (m, n) matrix of a sketch; meant for small test oracles."""
    if S.kind == "none":
        return np.eye(S.n)
    if S.kind == "gaussian":
        return S.matrix.copy()
    out = np.zeros((S.m, S.n))
    if S.kind == "sampling":
        for i, j in enumerate(S.indices):
            out[i, j] = S.scale
        return out
    for j in range(S.n):
        for r, val in zip(S.rows[j], S.values[j]):
            out[r, j] = val
    return out
