"""Tridiagonal matrix kernels.

Compact (diag, sub, super) storage plus the spectral machinery built on it:
Sturm sequences, a sign-count bisection eigensolver, null vectors of singular
unreduced matrices, diagonal similarity scalings, and Householder reduction of
a dense symmetric matrix to tridiagonal form.

All functions are pure; inputs are never mutated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit

__all__ = [
    "TridiagonalMatrix",
    "sturm_sequence",
    "eigenvalues",
    "null_vector",
    "twisted_null_pivots",
    "diag_similarity",
    "householder_tridiagonalize",
]

# Pivots smaller than this are clamped in the bisection count so that the
# recurrence never divides by zero or overflows.
_PIVMIN_FLOOR = 1e-300


@dataclass(eq=False)
class TridiagonalMatrix:
    """Square tridiagonal matrix of order n.

    diag holds a_1..a_n, sub holds c_2..c_n (entries below the diagonal),
    super holds b_2..b_n (entries above).  sub/super are empty for n = 1.
    """

    diag: np.ndarray
    sub: np.ndarray
    super: np.ndarray

    def __post_init__(self):
        self.diag = np.asarray(self.diag, dtype=float)
        self.sub = np.asarray(self.sub, dtype=float)
        self.super = np.asarray(self.super, dtype=float)
        n = self.diag.size
        if n < 1:
            raise ValueError("order must be >= 1")
        if self.sub.size != n - 1 or self.super.size != n - 1:
            raise ValueError(
                f"off-diagonals must have length {n - 1}, "
                f"got sub={self.sub.size}, super={self.super.size}"
            )
        for name, arr in (("diag", self.diag), ("sub", self.sub), ("super", self.super)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"non-finite entry in {name}")

    @property
    def n(self) -> int:
        return self.diag.size

    @property
    def unreduced(self) -> bool:
        """True when no sub- or super-diagonal entry vanishes."""
        return bool(np.all(self.sub != 0.0) and np.all(self.super != 0.0))

    def offdiag_products(self) -> np.ndarray:
        """Products b_k * c_k, k = 2..n (empty for n = 1)."""
        return self.super * self.sub

    def to_dense(self) -> np.ndarray:
        a = np.diag(self.diag)
        if self.n > 1:
            a += np.diag(self.super, 1) + np.diag(self.sub, -1)
        return a

    @classmethod
    def from_dense(cls, a: np.ndarray) -> "TridiagonalMatrix":
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("expected a square matrix")
        n = a.shape[0]
        mask = np.abs(np.arange(n)[:, None] - np.arange(n)[None, :]) > 1
        if np.any(a[mask] != 0.0):
            raise ValueError("matrix has entries outside the tridiagonal band")
        return cls(np.diag(a).copy(), np.diag(a, -1).copy(), np.diag(a, 1).copy())

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Matrix-vector (or blocked matrix-array) product T @ x.

        x may be shape (n,) or (n, m); rows of x are combined with the
        tridiagonal stencil, never forming the dense matrix.
        """
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self.n:
            raise ValueError(f"dimension mismatch: matrix order {self.n}, got {x.shape[0]}")
        if self.n == 1:
            return self.diag[0] * x
        shape = (-1,) + (1,) * (x.ndim - 1)
        y = self.diag.reshape(shape) * x
        y[:-1] += self.super.reshape(shape)[: self.n - 1] * x[1:]
        y[1:] += self.sub.reshape(shape)[: self.n - 1] * x[:-1]
        return y

    def inf_norm(self) -> float:
        return float(np.abs(self.to_dense()).sum(axis=1).max())

    def transpose(self) -> "TridiagonalMatrix":
        return TridiagonalMatrix(self.diag.copy(), self.super.copy(), self.sub.copy())

    def copy(self) -> "TridiagonalMatrix":
        return TridiagonalMatrix(self.diag.copy(), self.sub.copy(), self.super.copy())


def sturm_sequence(t: TridiagonalMatrix, lam: float) -> np.ndarray:
    """Characteristic polynomials of the leading principal minors at lam.

    Returns p_0..p_n with p_0 = 1, p_1 = lam - a_1 and
    p_j = (lam - a_j) p_{j-1} - (b_j c_j) p_{j-2}.  p_n is det(lam I - T).
    Only the products b_j c_j enter, so the result is shared by the whole
    diagonal-similarity class of T.  Raw values can overflow for large n far
    from the spectrum; the eigensolver uses a scaled variant internally.
    """
    n = t.n
    p = np.empty(n + 1)
    p[0] = 1.0
    p[1] = lam - t.diag[0]
    w = t.offdiag_products()
    for j in range(2, n + 1):
        p[j] = (lam - t.diag[j - 1]) * p[j - 1] - w[j - 2] * p[j - 2]
    return p


@njit(cache=True)
def _count_below_kernel(diag, prod, lams, pivmin):
    n = diag.shape[0]
    counts = np.empty(lams.shape[0], np.int64)
    for i in range(lams.shape[0]):
        lam = lams[i]
        d = diag[0] - lam
        if abs(d) < pivmin:
            d = -pivmin
        c = 1 if d < 0.0 else 0
        for j in range(1, n):
            d = (diag[j] - lam) - prod[j - 1] / d
            if abs(d) < pivmin:
                d = -pivmin
            if d < 0.0:
                c += 1
        counts[i] = c
    return counts


def _count_below(diag: np.ndarray, prod: np.ndarray, lams: np.ndarray) -> np.ndarray:
    """Number of eigenvalues strictly below each lam (vectorized).

    Uses the scaled pivot form of the Sturm recurrence, d_j = p_j / p_{j-1},
    so only signs are tracked and nothing overflows; pivots smaller than
    pivmin are clamped negative before counting, as in dstebz.
    """
    pivmin = _PIVMIN_FLOOR * max(1.0, float(prod.max(initial=0.0)))
    return _count_below_kernel(
        np.ascontiguousarray(diag),
        np.ascontiguousarray(prod),
        np.ascontiguousarray(lams, dtype=np.float64),
        pivmin,
    )


def eigenvalues(t: TridiagonalMatrix) -> np.ndarray:
    """All eigenvalues of T, sorted ascending, by Sturm-count bisection.

    Requires every product b_k c_k > 0, which makes T diagonally similar to a
    symmetric tridiagonal matrix and its spectrum real and simple.
    """
    if t.n == 1:
        return t.diag.copy()
    prod = t.offdiag_products()
    if np.any(prod <= 0.0):
        bad = int(np.argmax(prod <= 0.0))
        raise ValueError(
            f"offdiagonal product super[{bad}]*sub[{bad}] = {prod[bad]:g} <= 0; "
            "spectrum may be complex"
        )
    n = t.n
    radius = np.zeros(n)
    radius[:-1] += np.abs(t.super)
    radius[1:] += np.abs(t.sub)
    lo_all = float(np.min(t.diag - radius))
    hi_all = float(np.max(t.diag + radius))
    span = hi_all - lo_all

    lo = np.full(n, lo_all)
    hi = np.full(n, hi_all)
    want = np.arange(1, n + 1)
    eps = np.finfo(float).eps
    for _ in range(110):
        mid = 0.5 * (lo + hi)
        below = _count_below(t.diag, prod, mid) >= want
        hi = np.where(below, mid, hi)
        lo = np.where(below, lo, mid)
        width = hi - lo
        if np.all(width <= np.maximum(4.0 * eps * np.abs(mid), 1e-18 * span)):
            break
    return 0.5 * (lo + hi)


def twisted_null_pivots(t: TridiagonalMatrix) -> tuple[np.ndarray, np.ndarray, int]:
    """Forward and backward elimination pivots of T at shift 0, plus twist row.

    d comes from top-down elimination (d_1 = a_1), r from bottom-up
    (r_n = a_n); both use only the off-diagonal products.  The twist index
    minimizes |d_k + r_k - a_k|, which is the only row a null vector built
    from these pivot ratios fails to annihilate exactly.  Top-down ratios
    alone lose all accuracy once the null vector has decayed below roundoff
    relative to its peak; combining both directions around the peak keeps
    every ratio componentwise accurate.
    """
    n = t.n
    w = t.offdiag_products()
    d = np.empty(n)
    d[0] = t.diag[0]
    for j in range(1, n):
        if d[j - 1] == 0.0:
            raise ValueError("zero forward pivot; null vector ratios undefined")
        d[j] = t.diag[j] - w[j - 1] / d[j - 1]
    r = np.empty(n)
    r[-1] = t.diag[-1]
    for j in range(n - 2, -1, -1):
        if r[j + 1] == 0.0:
            raise ValueError("zero backward pivot; null vector ratios undefined")
        r[j] = t.diag[j] - w[j] / r[j + 1]
    gamma = d + r - t.diag
    return d, r, int(np.argmin(np.abs(gamma)))


def null_vector(t: TridiagonalMatrix, residual_tol: float = 1e-10) -> np.ndarray:
    """Unit null vector of a singular unreduced tridiagonal matrix.

    Components are built incrementally from pivot ratios (v_{j+1}/v_j =
    -d_j/b_{j+1} above the twist row, v_{j+1}/v_j = -c_{j+1}/r_{j+1} below),
    which is scale-free: no long product of off-diagonals is ever formed.
    The result satisfies ||T v||_inf <= residual_tol * ||T||_inf, has no zero
    component, and is normalized with v_1 > 0.
    """
    if t.n == 1:
        if t.diag[0] != 0.0:
            raise ValueError("1x1 matrix is not singular")
        return np.array([1.0])
    if not t.unreduced:
        raise ValueError("matrix is reduced; null vector structure not guaranteed")

    d, r, k = twisted_null_pivots(t)
    v = np.zeros(t.n)
    v[k] = 1.0
    for j in range(k - 1, -1, -1):
        v[j] = -(t.super[j] * v[j + 1]) / d[j]
    for j in range(k + 1, t.n):
        v[j] = -(t.sub[j - 1] * v[j - 1]) / r[j]
    if np.any(v == 0.0) or not np.all(np.isfinite(v)):
        raise ValueError("null vector component underflowed to zero or overflowed")
    v /= np.linalg.norm(v)
    if v[0] < 0.0:
        v = -v

    resid = float(np.abs(t.apply(v)).max())
    if resid > residual_tol * t.inf_norm():
        raise ValueError(
            f"matrix is not singular to tolerance: ||Tv||_inf = {resid:.3e} "
            f"exceeds {residual_tol:g} * ||T||_inf"
        )
    return v


def diag_similarity(t: TridiagonalMatrix, d: np.ndarray) -> TridiagonalMatrix:
    """Similarity transform D^{-1} T D with D = diag(d).

    The diagonal is untouched and each off-diagonal pair is rescaled by
    reciprocal factors, so the products b_k c_k (and hence the spectrum) are
    preserved.
    """
    d = np.asarray(d, dtype=float)
    if d.size != t.n:
        raise ValueError(f"scaling vector must have length {t.n}")
    if np.any(d == 0.0) or not np.all(np.isfinite(d)):
        raise ValueError("scaling entries must be nonzero and finite")
    if t.n == 1:
        return t.copy()
    factor = d[1:] / d[:-1]
    return TridiagonalMatrix(t.diag.copy(), t.sub / factor, t.super * factor)


def householder_tridiagonalize(a: np.ndarray) -> tuple[TridiagonalMatrix, np.ndarray]:
    """Reduce a symmetric matrix to tridiagonal form: H^T A H = S.

    Returns (S, H) with H orthogonal and H e_1 = e_1 (the first coordinate is
    never touched, so the leading row of the eigenvector basis is preserved).
    Reflector signs follow the usual rule that avoids cancellation in the
    pivot.  A matrix that is already tridiagonal comes back unchanged with
    H = I.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    n = a.shape[0]
    scale = float(np.abs(a).max(initial=0.0))
    if not np.allclose(a, a.T, atol=1e-12 * max(scale, 1.0), rtol=0.0):
        raise ValueError("matrix is not symmetric")

    b = a.copy()
    h = np.eye(n)
    for k in range(n - 2):
        x = b[k + 1 :, k]
        tail = np.linalg.norm(x[1:])
        if tail == 0.0:
            continue
        alpha = -np.copysign(np.linalg.norm(x), x[0] if x[0] != 0.0 else 1.0)
        v = x.copy()
        v[0] -= alpha
        tau = 2.0 / (v @ v)

        u = np.zeros(n)
        u[k + 1 :] = v
        p = tau * (b @ u)
        w = p - (0.5 * tau * (u @ p)) * u
        b -= np.outer(u, w) + np.outer(w, u)
        h[:, k + 1 :] -= np.outer(tau * (h[:, k + 1 :] @ v), v)

    off = np.diag(b, -1).copy()
    s = TridiagonalMatrix(np.diag(b).copy(), off, off.copy())
    return s, h
