"""Dense linear-algebra kernels shared by the whole package.

Everything here is a pure function over float64 arrays: jittered Cholesky of
positive-semidefinite matrices, truncated SVD, forward substitution, and the
activation-weighted squared Frobenius norm trace(A H A^T). All higher-level
routines (whitened factorization, the joint optimizer, the metrics) are built
from these four operations.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
import scipy.linalg

SYMMETRY_RTOL = 1e-9
JITTER_FACTOR = 4.0
MAX_JITTER_STEPS = 10


class NonSymmetricError(ValueError):
    """Input matrix is not symmetric within tolerance (or not square)."""


class NotFactorizableError(np.linalg.LinAlgError):
    """Cholesky failed even after exhausting all jitter escalations."""


class RankTooLargeError(ValueError):
    """Requested rank exceeds min(rows, cols)."""


class DimensionMismatchError(ValueError):
    """Operand shapes are incompatible."""


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate and return `a` as a non-empty, finite, float64 2-D array."""
    arr = np.ascontiguousarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got ndim={arr.ndim}")
    if arr.size == 0:
        raise ValueError(f"{name} must be non-empty")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def _hessian_mat(h) -> np.ndarray:
    # Accepts either a plain symmetric array or anything exposing `.mat`
    # (the calibration module's Hessian), so masked submatrices work too.
    return getattr(h, "mat", h)


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower-triangular factor S with S S^T = A + jitter * I."""

    mat: np.ndarray
    jitter: float

    @property
    def dim(self) -> int:
        return self.mat.shape[0]


class SvdTriple(NamedTuple):
    """Top-q singular triple; `v` holds right singular vectors as columns."""

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray


def check_symmetric(a: np.ndarray, rtol: float = SYMMETRY_RTOL) -> None:
    if a.shape[0] != a.shape[1]:
        raise NonSymmetricError(f"matrix is not square: {a.shape}")
    scale = np.abs(a).max()
    if np.abs(a - a.T).max() > rtol * max(scale, np.finfo(np.float64).tiny):
        raise NonSymmetricError("matrix is not symmetric within tolerance")


def default_jitter_base(a: np.ndarray) -> float:
    """Jitter starting point proportional to the mean diagonal magnitude."""
    return 1e-10 * abs(float(np.trace(a))) / a.shape[0]


def cholesky_psd(a, jitter_base: float = 0.0) -> CholeskyFactor:
    """Cholesky-factorize a symmetric PSD matrix, escalating diagonal jitter.

    Tries lambda in {0, jitter_base, jitter_base*4, ...} (at most
    ``MAX_JITTER_STEPS`` jittered attempts) and returns the factor of
    ``a + lambda I`` for the first lambda that succeeds, together with the
    lambda actually applied.

    Raises:
        NonSymmetricError: `a` is not square/symmetric within 1e-9 relative.
        NotFactorizableError: every escalation failed.
    """
    a = as_matrix(a, "a")
    check_symmetric(a)
    if jitter_base < 0:
        raise ValueError("jitter_base must be non-negative")
    candidates = [0.0]
    if jitter_base > 0:
        candidates += [jitter_base * JITTER_FACTOR**i for i in range(MAX_JITTER_STEPS)]
    eye = np.eye(a.shape[0])
    for lam in candidates:
        try:
            factor = np.linalg.cholesky(a + lam * eye if lam else a)
        except np.linalg.LinAlgError:
            continue
        return CholeskyFactor(mat=factor, jitter=lam)
    raise NotFactorizableError(
        f"Cholesky failed for all jitter values up to {candidates[-1]:g}"
    )


def truncated_svd(a, r: int) -> SvdTriple:
    """Top-r singular triple of `a` via full SVD plus truncation.

    The reconstruction u @ diag(sigma) @ v.T is the best rank-r Frobenius
    approximation of `a`.
    """
    a = as_matrix(a, "a")
    if r < 1:
        raise RankTooLargeError("rank must be >= 1")
    if r > min(a.shape):
        raise RankTooLargeError(f"rank {r} exceeds min{a.shape}")
    u, sigma, vt = np.linalg.svd(a, full_matrices=False)
    return SvdTriple(
        u=np.ascontiguousarray(u[:, :r]),
        sigma=sigma[:r].copy(),
        v=np.ascontiguousarray(vt[:r].T),
    )


def solve_lower(s, b) -> np.ndarray:
    """Solve s @ y = b by forward substitution for lower-triangular s.

    Applying to the identity yields the explicit inverse of s.
    """
    s = as_matrix(getattr(s, "mat", s), "s")
    b = as_matrix(b, "b")
    if s.shape[0] != s.shape[1]:
        raise DimensionMismatchError(f"s must be square, got {s.shape}")
    if s.shape[0] != b.shape[0]:
        raise DimensionMismatchError(
            f"s has dim {s.shape[0]} but b has {b.shape[0]} rows"
        )
    return scipy.linalg.solve_triangular(s, b, lower=True, check_finite=False)


def act_fro_norm2(a, h) -> float:
    """Activation-weighted squared Frobenius norm trace(A H A^T).

    Equals ||A X||_F^2 exactly when H = X X^T; `h` may be a plain symmetric
    array or a calibration Hessian.
    """
    a = as_matrix(a, "a")
    hm = _hessian_mat(h)
    if hm.shape[0] != hm.shape[1]:
        raise DimensionMismatchError(f"h must be square, got {hm.shape}")
    if a.shape[1] != hm.shape[0]:
        raise DimensionMismatchError(
            f"a has {a.shape[1]} cols but h has dim {hm.shape[0]}"
        )
    value = float(np.sum((a @ hm) * a))
    # trace(A H A^T) >= 0 for PSD H; clamp away rounding-level negatives
    return value if value > 0.0 else 0.0
