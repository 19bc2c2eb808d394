"""Dense linear algebra for weighted row sets.

Rows are carried as an ``(n, d)`` float array plus a length-``n`` weight
vector; a weight scales the outer product ``a a^T`` (not the row itself).
``WeightedRow`` is the per-row record for callers who prefer objects; every
function here also accepts plain arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np
from scipy.linalg import solve_triangular

__all__ = [
    "DimensionError",
    "RankDeficiencyError",
    "IndefiniteError",
    "WeightedRow",
    "GramAccumulator",
    "SpectralReport",
    "as_arrays",
    "gram",
    "leverage_scores",
    "isotropize",
    "spectral_check",
    "emit_matrix",
    "rank_cutoff",
]

RANK_RTOL = 1e-12
PSD_RTOL = 1e-10


class DimensionError(ValueError):
    """Row length does not match the ambient dimension."""


class RankDeficiencyError(ValueError):
    def __init__(self, rank: int, dim: int):
        super().__init__(f"Gram matrix is rank deficient: numerical rank {rank} < {dim}")
        self.rank = rank
        self.dim = dim


class IndefiniteError(ValueError):
    """Reference matrix has a significantly negative eigenvalue."""


@dataclass
class WeightedRow:
    row: np.ndarray
    weight: float = 1.0
    leverage_estimate: Optional[float] = None
    origin_id: int = -1

    def __post_init__(self):
        self.row = np.asarray(self.row, dtype=np.float64)
        if self.weight < 0:
            raise ValueError("weight must be nonnegative")
        if not np.all(np.isfinite(self.row)):
            raise ValueError("row entries must be finite")


RowsLike = Union[np.ndarray, Sequence[WeightedRow], Sequence[Sequence[float]]]


def as_arrays(rows: RowsLike, weights=None, dim: Optional[int] = None):
    """Normalize ``rows`` (and optional ``weights``) to ``(A, w)`` arrays.

    ``rows`` may be a sequence of :class:`WeightedRow`, in which case their
    weights are used and ``weights`` must be None.
    """
    if len(rows) and isinstance(rows[0], WeightedRow):
        if weights is not None:
            raise ValueError("weights given twice")
        if dim is None:
            dim = rows[0].row.shape[0]
        for r in rows:
            if r.row.shape != (dim,):
                raise DimensionError(f"row of length {r.row.shape[0]} in dimension {dim}")
        A = np.array([r.row for r in rows], dtype=np.float64).reshape(len(rows), dim)
        w = np.array([r.weight for r in rows], dtype=np.float64)
        return A, w

    A = np.asarray(rows, dtype=np.float64)
    if A.ndim == 1 and A.size == 0:
        A = A.reshape(0, dim if dim is not None else 0)
    if A.ndim != 2:
        raise DimensionError(f"expected a 2-d row array, got shape {A.shape}")
    if dim is not None and A.shape[1] != dim:
        raise DimensionError(f"rows have length {A.shape[1]}, expected {dim}")
    if weights is None:
        w = np.ones(A.shape[0])
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (A.shape[0],):
            raise DimensionError("weights must have one entry per row")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
    return A, w


def rank_cutoff(eigvals: np.ndarray, dim: int) -> float:
    """Eigenvalues at or below this are treated as zero."""
    top = float(np.max(np.abs(eigvals))) if eigvals.size else 0.0
    return dim * top * RANK_RTOL


@dataclass
class GramAccumulator:
    """Symmetric PSD ``d x d`` matrix with a lazily cached eigendecomposition.

    The cached factorization backs pseudo-inverse solves and range
    restriction; mutate ``matrix`` only through a new accumulator or call
    :meth:`invalidate` afterwards.
    """

    matrix: np.ndarray
    _eig: Optional[tuple] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=np.float64)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
            raise DimensionError(f"Gram matrix must be square, got {self.matrix.shape}")

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def identity(cls, dim: int) -> "GramAccumulator":
        return cls(np.eye(dim))

    @classmethod
    def zeros(cls, dim: int) -> "GramAccumulator":
        return cls(np.zeros((dim, dim)))

    def factorize(self):
        """Return ``(eigvals, eigvecs, cutoff)`` for the full spectrum (cached)."""
        if self._eig is None:
            vals, vecs = np.linalg.eigh(self.matrix)
            self._eig = (vals, vecs, rank_cutoff(vals, self.dim))
        return self._eig

    def invalidate(self):
        self._eig = None

    @property
    def rank(self) -> int:
        vals, _, cut = self.factorize()
        return int(np.count_nonzero(vals > cut))

    def range_basis(self):
        """Eigenvectors and eigenvalues of the numerical range."""
        vals, vecs, cut = self.factorize()
        keep = vals > cut
        return vals[keep], vecs[:, keep]

    def pinv_half(self) -> np.ndarray:
        """``P`` with ``P P^T = M^+``; shape ``(d, rank)``."""
        vals, vecs = self.range_basis()
        return vecs / np.sqrt(vals)

    def min_eigenvalue(self) -> float:
        return float(self.factorize()[0][0])

    def norm(self) -> float:
        vals = self.factorize()[0]
        return float(np.max(np.abs(vals))) if vals.size else 0.0

    def copy(self) -> "GramAccumulator":
        return GramAccumulator(self.matrix.copy())


def _mirror_upper(M: np.ndarray) -> np.ndarray:
    return np.triu(M) + np.triu(M, 1).T


def gram(rows: RowsLike, weights=None, dim: Optional[int] = None) -> GramAccumulator:
    """Weighted Gram matrix ``sum_i w_i a_i a_i^T``."""
    A, w = as_arrays(rows, weights, dim)
    M = (A * w[:, None]).T @ A
    return GramAccumulator(_mirror_upper(M))


def leverage_scores(rows: RowsLike, weights=None, dim: Optional[int] = None,
                    reference: Optional[GramAccumulator] = None) -> np.ndarray:
    """Weighted leverage scores ``w_j a_j^T M^+ a_j``.

    ``M`` is the Gram matrix of the rows themselves unless ``reference`` is
    supplied, in which case scores are taken with respect to that matrix
    (used to compare stale and fresh estimates). Rank deficiency is handled
    through the pseudo-inverse.
    """
    A, w = as_arrays(rows, weights, dim)
    if A.shape[0] == 0:
        raise ValueError("leverage_scores needs at least one row")
    M = gram(A, w) if reference is None else reference
    if M.dim != A.shape[1]:
        raise DimensionError("reference dimension does not match rows")
    Z = A @ M.pinv_half()
    return w * np.einsum("ij,ij->i", Z, Z)


def isotropize(rows: RowsLike, dim: Optional[int] = None) -> np.ndarray:
    """Map rows into isotropic position so their Gram matrix is the identity.

    Each row ``a`` becomes ``L^{-1} a`` where ``L L^T = sum a a^T`` is the
    Cholesky factor. Raises :class:`RankDeficiencyError` when the Gram
    matrix is singular.
    """
    A, _ = as_arrays(rows, None, dim)
    G = gram(A)
    r = G.rank
    if r < G.dim:
        raise RankDeficiencyError(r, G.dim)
    L = np.linalg.cholesky(G.matrix)
    # rows of A L^{-T}: solve L X = A^T
    return solve_triangular(L, A.T, lower=True).T


@dataclass
class SpectralReport:
    lambda_min: float
    lambda_max: float
    epsilon: float
    passed: bool
    rank_reference: int
    rank_candidate: int
    leakage: float = 0.0

    def to_dict(self) -> dict:
        return {
            "lambda_min": self.lambda_min,
            "lambda_max": self.lambda_max,
            "epsilon": self.epsilon,
            "passed": self.passed,
            "rank_reference": self.rank_reference,
            "rank_candidate": self.rank_candidate,
            "leakage": self.leakage,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SpectralReport":
        return cls(**data)


def spectral_check(candidate: GramAccumulator, reference: GramAccumulator,
                   epsilon: float) -> SpectralReport:
    """Certify ``(1-eps) R <= C <= (1+eps) R`` in the PSD order.

    The pencil ``(C, R)`` is reduced to a symmetric eigenproblem on the range
    of ``R`` by the congruence ``P^T C P`` with ``P = V diag(lambda)^{-1/2}``.
    Candidate mass outside that range (``leakage``, relative to ``||C||``)
    must be negligible, otherwise the check fails even if the restricted
    eigenvalues are fine.
    """
    if candidate.dim != reference.dim:
        raise DimensionError(f"candidate dimension {candidate.dim} != reference {reference.dim}")
    ref_vals, ref_vecs, ref_cut = reference.factorize()
    ref_norm = reference.norm()
    if ref_vals.size and ref_vals[0] < -PSD_RTOL * max(ref_norm, np.finfo(float).tiny):
        raise IndefiniteError(f"reference has eigenvalue {ref_vals[0]:.3e}")

    keep = ref_vals > ref_cut
    rank_ref = int(np.count_nonzero(keep))
    rank_cand = candidate.rank
    if rank_ref == 0:
        lo = hi = 1.0 if rank_cand == 0 else float("inf")
    else:
        P = ref_vecs[:, keep] / np.sqrt(ref_vals[keep])
        S = _mirror_upper(P.T @ candidate.matrix @ P)
        ev = np.linalg.eigvalsh(S)
        lo, hi = float(ev[0]), float(ev[-1])

    leakage = 0.0
    if rank_ref < reference.dim:
        N = ref_vecs[:, ~keep]
        cand_norm = candidate.norm()
        if cand_norm > 0:
            leakage = float(np.linalg.norm(N.T @ candidate.matrix @ N, 2)) / cand_norm
    leak_ok = leakage <= candidate.dim * RANK_RTOL * 1e3

    passed = bool(1 - epsilon <= lo and hi <= 1 + epsilon
                  and rank_cand == rank_ref and leak_ok)
    return SpectralReport(lo, hi, float(epsilon), passed, rank_ref, rank_cand, leakage)


def emit_matrix(rows: RowsLike, weights=None, dim: Optional[int] = None) -> np.ndarray:
    """Flatten weighted rows: each row is scaled by ``sqrt(weight)``; zero weights drop out."""
    A, w = as_arrays(rows, weights, dim)
    keep = w > 0
    return A[keep] * np.sqrt(w[keep])[:, None]
