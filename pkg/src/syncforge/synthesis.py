"""Inverse eigenvalue constructions for tridiagonal network Laplacians.

Builds a symmetric unreduced tridiagonal matrix with a prescribed spectrum,
rebalances it by a diagonal similarity so every row sums to zero (null vector
aligned with the all-ones vector), and provides the diffusive and bidiagonal
baseline couplings plus the 3x3 symmetric feasibility test.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .tridiag import (
    TridiagonalMatrix,
    diag_similarity,
    eigenvalues,
    householder_tridiagonalize,
    null_vector,
    twisted_null_pivots,
)

__all__ = [
    "SpectrumSpec",
    "SynthesisReport",
    "TridiagonalLaplacian",
    "SynthesisError",
    "place_eigenvalues",
    "diag2trid",
    "trid_zero_row_sum",
    "synthesize",
    "diffusive_laplacian",
    "diffusive_spectrum",
    "bidiagonal_optimal_laplacian",
    "Feasibility3x3",
    "symmetric_3x3_feasible",
    "symmetric_3x3_matrix",
    "matrix_to_json",
    "matrix_from_json",
    "matrix_to_matrix_market",
    "matrix_from_matrix_market",
]


class SynthesisError(RuntimeError):
    """Numerical failure inside a synthesis stage."""


@dataclass(eq=False)
class SpectrumSpec:
    """Strictly increasing target eigenvalues."""

    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 1 or self.values.size < 1:
            raise ValueError("spectrum must be a nonempty 1-d sequence")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("spectrum entries must be finite")
        if np.any(np.diff(self.values) <= 0.0):
            raise ValueError("spectrum must be strictly increasing")

    @property
    def n(self) -> int:
        return self.values.size

    @property
    def laplacian_valid(self) -> bool:
        """True when usable as a connected-Laplacian spectrum: 0 < rest."""
        return self.values[0] == 0.0 and (self.n == 1 or self.values[1] > 0.0)


@dataclass(eq=False)
class SynthesisReport:
    """Diagnostics of the zero-row-sum rebalancing stage."""

    alphas: np.ndarray            # scaling ratios alpha_2..alpha_N
    similarity: np.ndarray        # diagonal of D = diag(1, a2, a2*a3, ...)
    null_vec: np.ndarray          # unit null vector of the symmetric input
    row_sum_residual: float       # max |row sum| of the output Laplacian
    spectral_residual: float      # max |eigenvalue deviation| from the target
    offdiag_sign_ok: bool
    diag_positive_ok: bool


@dataclass(eq=False)
class TridiagonalLaplacian:
    """Tridiagonal out-degree Laplacian: diag > 0, off-diag < 0, zero row sums."""

    matrix: TridiagonalMatrix
    provenance: str = "unknown"

    def validate(self, row_sum_tol: float = 1e-12) -> None:
        m = self.matrix
        if m.n < 2:
            raise ValueError("a coupling Laplacian needs at least 2 nodes")
        norm = m.inf_norm()
        if np.any(m.diag <= 0.0):
            raise ValueError("Laplacian diagonal must be strictly positive")
        if np.any(m.sub >= 0.0) or np.any(m.super >= 0.0):
            raise ValueError("Laplacian off-diagonals must be strictly negative")
        if self.row_sum_residual() > row_sum_tol * norm:
            raise ValueError(
                f"row sums deviate from zero by {self.row_sum_residual():.3e} "
                f"(> {row_sum_tol:g} * ||L||_inf)"
            )

    def row_sum_residual(self) -> float:
        return float(np.abs(self.matrix.apply(np.ones(self.matrix.n))).max())


def place_eigenvalues(strategy: str, interval: tuple[float, float], count: int) -> SpectrumSpec:
    """Target spectrum {0} plus `count` points placed in [a, b], 0 < a < b.

    linear: equispaced including both endpoints (a single midpoint-free value
    degenerates to a for count 1).  chebyshev: first-kind Chebyshev nodes
    rescaled from (-1, 1) to [a, b].
    """
    a, b = float(interval[0]), float(interval[1])
    if not 0.0 < a < b:
        raise ValueError(f"need 0 < a < b, got [{a}, {b}]")
    if count < 1:
        raise ValueError("count must be >= 1")
    if strategy == "linear":
        pts = np.linspace(a, b, count)
    elif strategy == "chebyshev":
        k = np.arange(1, count + 1)
        nodes = np.cos((2.0 * k - 1.0) * np.pi / (2.0 * count))
        pts = np.sort(a + (b - a) * (1.0 + nodes) / 2.0)
    else:
        raise ValueError(f"unknown placement strategy: {strategy!r}")
    return SpectrumSpec(np.concatenate(([0.0], pts)))


def _first_column_reflection(q: np.ndarray) -> np.ndarray:
    """Orthogonal Q with Q e_1 = q (a single Householder reflection)."""
    n = q.size
    e1 = np.zeros(n)
    e1[0] = 1.0
    v = e1 - q
    vv = v @ v
    if vv < 1e-30:
        return np.eye(n)
    return np.eye(n) - np.outer(2.0 * v / vv, v)


def diag2trid(spec: SpectrumSpec, q: np.ndarray | None = None) -> TridiagonalMatrix:
    """Symmetric unreduced tridiagonal matrix with the given simple spectrum.

    The matrix is congruent to diag(values) through an orthogonal basis whose
    leading row is q (default: the flat vector e/sqrt(N)); a final +/-1
    diagonal similarity makes every off-diagonal entry strictly negative.
    """
    n = spec.n
    if n < 2:
        raise ValueError("need at least 2 eigenvalues")
    if q is None:
        q = np.full(n, 1.0 / math.sqrt(n))
    else:
        q = np.asarray(q, dtype=float)
        if q.size != n:
            raise ValueError(f"q must have length {n}")
        if abs(np.linalg.norm(q) - 1.0) > 1e-12:
            raise ValueError("q must be a unit vector")
        if np.any(q == 0.0):
            raise ValueError("q must have no zero component")

    big_q = _first_column_reflection(q)
    a = big_q.T @ np.diag(spec.values) @ big_q
    a = 0.5 * (a + a.T)
    s, _ = householder_tridiagonalize(a)

    span = float(spec.values[-1] - spec.values[0])
    if np.any(np.abs(s.super) < 1e-13 * span):
        k = int(np.argmin(np.abs(s.super)))
        raise SynthesisError(
            f"tridiagonalization produced a numerically reduced matrix: "
            f"|b_{k + 2}| = {abs(s.super[k]):.3e} < 1e-13 * span ({span:g})"
        )

    # Flip signs with a +/-1 similarity so all off-diagonals are negative.
    signs = np.ones(n)
    for i in range(n - 1):
        signs[i + 1] = -signs[i] * np.sign(s.super[i])
    return diag_similarity(s, signs)


def trid_zero_row_sum(
    s: TridiagonalMatrix,
    target: np.ndarray | None = None,
    singular_tol: float = 1e-8,
) -> tuple[TridiagonalLaplacian, SynthesisReport]:
    """Rebalance a symmetric singular tridiagonal matrix to zero row sums.

    Row k of the result is (b_k / alpha_k, a_k, alpha_{k+1} b_{k+1}) with the
    alpha_k chosen row by row so each of the first N-1 rows sums to zero; the
    last row comes out zero automatically because the result is D^{-1} S D and
    S annihilates a vector with no zero component.  The spectrum is untouched
    (off-diagonal products are preserved).
    """
    n = s.n
    if n < 2:
        raise ValueError("need order >= 2")
    if not np.array_equal(s.sub, s.super):
        raise ValueError("input must be symmetric (sub == super)")
    if not s.unreduced:
        raise ValueError("input must be unreduced")
    if np.any(s.super >= 0.0):
        raise ValueError("input off-diagonals must be strictly negative")

    eigs = eigenvalues(s)
    span = float(eigs[-1] - eigs[0])
    if abs(eigs[0]) > singular_tol * max(span, 1.0) or (n > 1 and eigs[1] <= 0.0):
        raise SynthesisError(
            f"input spectrum is not 0 plus positives: lambda_1 = {eigs[0]:.3e}, "
            f"lambda_2 = {eigs[1]:.3e}"
        )

    # alpha_{i+2} is the null-vector ratio v_{i+2}/v_{i+1}, taken from the
    # forward elimination pivots above the twist row and the backward ones
    # below it; every row of the result then sums to zero by construction
    # except the twist row, whose residual is the (tiny) singularity defect.
    a = s.diag
    b = s.super
    piv_d, piv_r, twist = twisted_null_pivots(s)
    alphas = np.empty(n - 1)
    for i in range(n - 1):
        alphas[i] = -piv_d[i] / b[i] if i < twist else -b[i] / piv_r[i + 1]
    if not np.all(np.isfinite(alphas)) or np.any(alphas <= 0.0):
        k = int(np.argmax(~(np.isfinite(alphas) & (alphas > 0.0))))
        raise SynthesisError(
            f"alpha_{k + 2} = {alphas[k]:g} is not a positive finite number; "
            "input violates the singular-plus-positive-spectrum precondition"
        )

    lap = TridiagonalMatrix(a.copy(), b / alphas, b * alphas)
    laplacian = TridiagonalLaplacian(lap, provenance="trid_zero_row_sum")
    laplacian.validate()

    ref = eigs if target is None else np.asarray(target, dtype=float)
    report = SynthesisReport(
        alphas=alphas,
        similarity=np.concatenate(([1.0], np.cumprod(alphas))),
        null_vec=null_vector(s),
        row_sum_residual=laplacian.row_sum_residual(),
        spectral_residual=float(np.abs(eigenvalues(lap) - ref).max()),
        offdiag_sign_ok=bool(np.all(lap.sub < 0.0) and np.all(lap.super < 0.0)),
        diag_positive_ok=bool(np.all(lap.diag > 0.0)),
    )
    return laplacian, report


def synthesize(
    spec: SpectrumSpec, q: np.ndarray | None = None
) -> tuple[TridiagonalLaplacian, SynthesisReport]:
    """Tridiagonal Laplacian with the given spectrum and all-ones null vector."""
    if not spec.laplacian_valid:
        raise ValueError("spectrum must be 0 followed by positive values")
    s = diag2trid(spec, q=q)
    laplacian, report = trid_zero_row_sum(s, target=spec.values)
    laplacian.provenance = "synthesized"

    v = null_vector(laplacian.matrix)
    flat = np.full(spec.n, 1.0 / math.sqrt(spec.n))
    if np.abs(v - flat).max() > 1e-10:
        raise SynthesisError(
            "null vector of the synthesized Laplacian is not aligned with the "
            f"all-ones vector (deviation {np.abs(v - flat).max():.3e})"
        )
    return laplacian, report


def diffusive_spectrum(sigma: float, n: int) -> np.ndarray:
    """Closed-form spectrum of the symmetric nearest-neighbor coupling."""
    k = np.arange(n)
    return 4.0 * sigma * np.sin(k * np.pi / (2.0 * n)) ** 2


def diffusive_laplacian(sigma: float, n: int) -> tuple[TridiagonalLaplacian, SpectrumSpec]:
    """Path-graph Laplacian sigma * T (diag 1,2,...,2,1, off-diagonals -1)."""
    if sigma <= 0.0:
        raise ValueError("coupling strength must be positive")
    if n < 2:
        raise ValueError("need at least 2 nodes")
    diag = np.full(n, 2.0 * sigma)
    diag[0] = diag[-1] = sigma
    off = np.full(n - 1, -sigma)
    lap = TridiagonalLaplacian(
        TridiagonalMatrix(diag, off, off.copy()), provenance="diffusive"
    )
    lap.validate()
    return lap, SpectrumSpec(diffusive_spectrum(sigma, n))


def bidiagonal_optimal_laplacian(lam: float, n: int) -> TridiagonalMatrix:
    """Upper bidiagonal coupling with eigenvalue lam of multiplicity N-1.

    Rows 1..N-1 are (lam, -lam); the last row is zero, so the last agent is
    uninfluenced by the rest.  Row sums vanish exactly and the nondiagonal
    spectrum is {0} with the single eigenvalue lam repeated N-1 times.
    """
    if lam <= 0.0:
        raise ValueError("eigenvalue must be positive")
    if n < 2:
        raise ValueError("need at least 2 nodes")
    diag = np.full(n, float(lam))
    diag[-1] = 0.0
    return TridiagonalMatrix(diag, np.zeros(n - 1), np.full(n - 1, -float(lam)))


@dataclass(eq=False)
class Feasibility3x3:
    feasible: bool
    solutions: list[tuple[float, float]] = field(default_factory=list)


def symmetric_3x3_matrix(x: float, y: float) -> TridiagonalMatrix:
    """The symmetric 3x3 zero-row-sum matrix [[x,-x,0],[-x,x+y,-y],[0,-y,y]]."""
    return TridiagonalMatrix([x, x + y, y], [-x, -y], [-x, -y])


def symmetric_3x3_feasible(lam2: float, lam3: float) -> Feasibility3x3:
    """Existence test for a symmetric 3x3 Laplacian with spectrum {0, l2, l3}.

    Feasible exactly when 10 l2 l3 <= 3 l2^2 + 3 l3^2; at equality the two
    closed-form (x, y) branches coincide and a single solution is returned.
    """
    if not 0.0 < lam2 < lam3:
        raise ValueError("need 0 < lam2 < lam3")
    disc = 3.0 * lam2**2 - 10.0 * lam2 * lam3 + 3.0 * lam3**2
    slack = 1e-12 * lam3**2
    if disc < -slack:
        return Feasibility3x3(feasible=False)
    root = math.sqrt(3.0 * max(disc, 0.0))
    base = 3.0 * (lam2 + lam3)
    if disc <= slack:
        x = base / 12.0
        return Feasibility3x3(feasible=True, solutions=[(x, x)])
    return Feasibility3x3(
        feasible=True,
        solutions=[
            ((base + root) / 12.0, (base - root) / 12.0),
            ((base - root) / 12.0, (base + root) / 12.0),
        ],
    )


# -- serialization ------------------------------------------------------------
# JSON uses shortest round-trip decimal formatting (Python repr), so values
# survive a write/read cycle bit-exactly.


def matrix_to_json(t: TridiagonalMatrix) -> str:
    return json.dumps(
        {
            "n": t.n,
            "diag": [float(v) for v in t.diag],
            "sub": [float(v) for v in t.sub],
            "super": [float(v) for v in t.super],
        }
    )


def matrix_from_json(text: str) -> TridiagonalMatrix:
    obj = json.loads(text)
    t = TridiagonalMatrix(obj["diag"], obj["sub"], obj["super"])
    if t.n != obj["n"]:
        raise ValueError(f"inconsistent order: n = {obj['n']} but {t.n} diagonal entries")
    return t


def matrix_to_matrix_market(t: TridiagonalMatrix) -> str:
    entries = []
    for i in range(t.n):
        entries.append((i + 1, i + 1, t.diag[i]))
        if i < t.n - 1:
            entries.append((i + 2, i + 1, t.sub[i]))
            entries.append((i + 1, i + 2, t.super[i]))
    lines = ["%%MatrixMarket matrix coordinate real general"]
    lines.append(f"{t.n} {t.n} {len(entries)}")
    for i, j, v in sorted(entries):
        lines.append(f"{i} {j} {float(v)!r}")
    return "\n".join(lines) + "\n"


def matrix_from_matrix_market(text: str) -> TridiagonalMatrix:
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("%")]
    n, m, nnz = (int(tok) for tok in lines[0].split())
    if n != m:
        raise ValueError("expected a square matrix")
    dense = np.zeros((n, n))
    if len(lines) - 1 != nnz:
        raise ValueError(f"expected {nnz} entries, found {len(lines) - 1}")
    for ln in lines[1:]:
        si, sj, sv = ln.split()
        dense[int(si) - 1, int(sj) - 1] = float(sv)
    return TridiagonalMatrix.from_dense(dense)
