"""Evaluation matrices (Vandermonde, alternant, design) and their factorizations.

Numerical policy: SVD decides rank, kernels, and pseudo-inverses; square
solves go through column-pivoted QR.  Monomial evaluation matrices are
notoriously ill-conditioned, so rank certification offers an affinely
rescaled build that preserves the exact rank while taming the spectrum.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import (
    DimensionMismatchError,
    LinearSolveError,
    RankDeficiencyError,
)
from .model_functions import ModelSpec
from .multiindex import LowerSet
from .placement import PointSet

#: Relative residual above which a square solve is rejected.
SOLVE_RESIDUAL_RTOL = 1e-8

#: Condition number beyond which estimator outputs carry a warning.
CONDITION_WARNING_THRESHOLD = 1e12

_EPS = float(np.finfo(float).eps)


@dataclass(frozen=True)
class RankReport:
    numerical_rank: int
    singular_values: tuple
    condition_number: float
    tolerance_used: float


@dataclass(frozen=True)
class ErrorSubspaceReport:
    """Coefficient-space kernel of a design matrix and its orthogonal complement.

    Functionals of the model coefficients are free of construction error
    exactly when they lie in the span of ``error_free_basis``.
    """

    null_basis: np.ndarray        # (k, d), orthonormal columns
    error_free_basis: np.ndarray  # (k, k - d), orthonormal columns
    tolerance_used: float

    @property
    def kernel_dim(self) -> int:
        return self.null_basis.shape[1]

    @property
    def error_free_dim(self) -> int:
        return self.error_free_basis.shape[1]


@dataclass(frozen=True)
class SystemMatrix:
    entries: np.ndarray
    kind: str  # vandermonde | alternant | design
    row_points: PointSet
    columns: object  # LowerSet (vandermonde) or ModelSpec (alternant/design)
    shift: np.ndarray | None = None

    @property
    def shape(self):
        return self.entries.shape

    def column_labels(self) -> list:
        if isinstance(self.columns, LowerSet):
            return [f"x^{a}" for a in self.columns.elements]
        return [f"f{i}[{f.kind}]" for i, f in enumerate(self.columns)]

    def to_csv(self, path):
        """Row-major dump with 17 significant digits, for external verification."""
        with open(path, "w", encoding="utf-8") as fh:
            for row in self.entries:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def _monomial_entries(points: np.ndarray, L: LowerSet) -> np.ndarray:
    A = np.array(L.elements, dtype=float)
    return np.prod(points[:, None, :] ** A[None, :, :], axis=2)


def build_vandermonde(X: PointSet, L: LowerSet, shift=None) -> SystemMatrix:
    """entries[i, k] = (x_i - shift)^alpha_k with columns in canonical order."""
    if X.dim != L.dim:
        raise DimensionMismatchError(f"points have dimension {X.dim}, exponents {L.dim}")
    if len(X) != len(L):
        raise ValueError(f"need as many points as exponents: {len(X)} vs {len(L)}")
    if shift is None:
        shift = np.zeros(X.dim)
    else:
        shift = np.asarray(shift, dtype=float)
        if shift.shape != (X.dim,):
            raise DimensionMismatchError(f"shift must have dimension {X.dim}")
    entries = _monomial_entries(X.points - shift, L)
    return SystemMatrix(entries, "vandermonde", X, L, shift)


def _evaluate_functions(X: PointSet, F: ModelSpec) -> np.ndarray:
    if X.dim != F.dim:
        raise DimensionMismatchError(f"points have dimension {X.dim}, model {F.dim}")
    out = np.empty((len(X), len(F)))
    for j, f in enumerate(F):
        for i in range(len(X)):
            out[i, j] = f.eval(X.points[i])
    return out


def build_alternant(X: PointSet, F: ModelSpec) -> SystemMatrix:
    """Square evaluation matrix: rows are points, columns are model functions."""
    if len(X) != len(F):
        raise ValueError(f"alternant needs as many points as functions: {len(X)} vs {len(F)}")
    return SystemMatrix(_evaluate_functions(X, F), "alternant", X, F)


def build_design(X: PointSet, F: ModelSpec) -> SystemMatrix:
    """Rectangular evaluation matrix with at least as many points as functions."""
    if len(X) < len(F):
        raise ValueError(f"design matrix needs p >= k, got p={len(X)}, k={len(F)}")
    return SystemMatrix(_evaluate_functions(X, F), "design", X, F)


def _entries_of(matrix) -> np.ndarray:
    if isinstance(matrix, SystemMatrix):
        return matrix.entries
    return np.asarray(matrix, dtype=float)


def rank_report(matrix, tol: float | None = None) -> RankReport:
    """Singular values, numerical rank, and condition number sigma_max/sigma_rank."""
    a = _entries_of(matrix)
    s = np.linalg.svd(a, compute_uv=False)
    smax = float(s[0]) if s.size else 0.0
    if tol is None:
        tol = max(a.shape) * _EPS * smax
    rank = int(np.sum(s > tol))
    cond = np.inf if rank == 0 else smax / float(s[rank - 1])
    return RankReport(rank, tuple(float(v) for v in s), cond, float(tol))


def _kernel_summary(a: np.ndarray, labels, tol: float) -> str:
    _, s, vt = np.linalg.svd(a)
    combos = []
    for row in vt[np.sum(s > tol):]:
        parts = [
            f"{row[j]:+.3g}*{labels[j]}"
            for j in range(len(row))
            if abs(row[j]) > 1e-10
        ]
        combos.append(" ".join(parts))
    return "; ".join(combos) if combos else "(kernel basis unavailable)"


def solve(matrix, rhs, transpose: bool = False, residual_rtol: float = SOLVE_RESIDUAL_RTOL) -> np.ndarray:
    """Solve the square system (optionally transposed) by column-pivoted QR.

    Raises :class:`RankDeficiencyError` when the numerical rank is short
    (pointing at the vanishing column combinations) and
    :class:`LinearSolveError` when the verified residual exceeds
    ``residual_rtol * |rhs|``.
    """
    a = _entries_of(matrix)
    if transpose:
        a = a.T
    n, m = a.shape
    if n != m:
        raise ValueError(f"solve needs a square system, got {a.shape}")
    rhs_arr = np.asarray(rhs, dtype=float)
    if rhs_arr.shape[0] != n:
        raise ValueError(f"right-hand side of length {rhs_arr.shape[0]} for a {n}x{n} system")
    report = rank_report(a)
    if report.numerical_rank < n:
        labels = (
            matrix.column_labels()
            if isinstance(matrix, SystemMatrix)
            else [f"col{j}" for j in range(m)]
        )
        raise RankDeficiencyError(
            f"system has numerical rank {report.numerical_rank} < {n}; "
            f"vanishing combinations: {_kernel_summary(_entries_of(matrix), labels, report.tolerance_used)}; "
            "use error_subspace() to see what remains estimable",
            report=report,
        )
    q, r, piv = scipy.linalg.qr(a, mode="economic", pivoting=True)
    y = scipy.linalg.solve_triangular(r, q.T @ rhs_arr)
    x = np.empty_like(y)
    x[piv] = y
    resid = np.linalg.norm(a @ x - rhs_arr, axis=0)
    bound = residual_rtol * np.maximum(np.linalg.norm(rhs_arr, axis=0), _EPS)
    if np.any(resid > bound):
        raise LinearSolveError(
            f"solve residual {float(np.max(resid)):.3e} exceeds {residual_rtol:g} * |rhs|"
        )
    return x


def _whiten(entries: np.ndarray, omega):
    """Return (whitened matrix, unwhiten(c_w) -> c) for an SPD weight spec.

    ``omega`` may be None (identity), a positive diagonal given as a vector,
    or a full SPD matrix (factored once by Cholesky).
    """
    if omega is None:
        return entries, lambda cw: cw
    w = np.asarray(omega, dtype=float)
    if w.ndim == 1:
        if w.shape[0] != entries.shape[0] or np.any(w <= 0):
            raise ValueError("diagonal weight spec must be positive with one entry per row")
        root = np.sqrt(w)
        return entries / root[:, None], lambda cw: cw / root
    if w.ndim == 2:
        if w.shape != (entries.shape[0],) * 2:
            raise ValueError(f"weight matrix must be {entries.shape[0]} x {entries.shape[0]}")
        try:
            chol = np.linalg.cholesky(w)
        except np.linalg.LinAlgError:
            raise ValueError("weight matrix must be symmetric positive definite") from None
        whitened = scipy.linalg.solve_triangular(chol, entries, lower=True)
        return whitened, lambda cw: scipy.linalg.solve_triangular(chol, cw, lower=True, trans="T")
    raise ValueError("weight spec must be a vector (diagonal) or a matrix")


def weighted_pseudo_inverse_apply(matrix, b, omega=None) -> np.ndarray:
    """Sensor-space coefficients c with c . F = b . beta_hat under GLS weighting.

    Uses the minimum-norm pseudo-solution when the normal matrix is rank
    deficient; whether ``b`` leaks into the kernel is the caller's check (see
    :func:`error_subspace`).
    """
    entries = _entries_of(matrix)
    b = np.asarray(b, dtype=float)
    if b.shape != (entries.shape[1],):
        raise ValueError(f"target vector must have length {entries.shape[1]}")
    whitened, unwhiten = _whiten(entries, omega)
    u, s, vt = np.linalg.svd(whitened, full_matrices=False)
    tol = max(entries.shape) * _EPS * (float(s[0]) if s.size else 0.0)
    inv = np.where(s > tol, 1.0 / np.where(s > tol, s, 1.0), 0.0)
    # pinv(Xw) = V diag(1/s) U^T, so pinv(Xw)^T b = U diag(1/s) V b
    cw = u @ (inv * (vt @ b))
    return unwhiten(cw)


def error_subspace(matrix, omega=None) -> ErrorSubspaceReport:
    """Orthonormal kernel basis of the design matrix in coefficient space.

    An SPD row weighting never changes the kernel, so the bases are computed
    from the unweighted entries and the certificate |X v| <= tol |v| holds
    verbatim.
    """
    entries = _entries_of(matrix)
    _, s, vt = np.linalg.svd(entries, full_matrices=True)
    smax = float(s[0]) if s.size else 0.0
    tol = max(entries.shape) * _EPS * smax
    rank = int(np.sum(s > tol))
    null = vt[rank:].T
    free = vt[:rank].T
    return ErrorSubspaceReport(null, free, tol)


def vandermonde_rank_certificate(X: PointSet, L: LowerSet, tol: float | None = None) -> RankReport:
    """Rank of the Vandermonde system, decided on an affinely rescaled copy.

    Mapping every axis onto [-1, 1] is a change of polynomial basis whose
    coefficient matrix is triangular and invertible for any downward-closed
    exponent family, so the rank equals that of the unscaled system while the
    singular-value spread stays decidable even at high degree.
    """
    pts = X.points
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    half = (hi - lo) / 2.0
    half[half == 0.0] = 1.0
    scaled = (pts - (lo + hi) / 2.0) / half
    return rank_report(_monomial_entries(scaled, L), tol)
