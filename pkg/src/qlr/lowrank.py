"""Low-rank factorization under the activation-weighted metric.

Three initialization strategies for the factor pair (L, R):

- zero_init: L = R = 0, so the quantizer sees the raw matrix first.
- lr_approx: the exact rank-r minimizer of trace((A - LR) H (A - LR)^T),
  computed by whitening with a Cholesky factor of H, truncating the SVD in
  the whitened space, and mapping back.
- odlri_init: outlier-driven low-rank initialization. Whitens only the
  top-k energy channels and builds factors that reproduce the matrix's
  action on those channels exactly, leaving everything else to the
  quantizer.

lplr is the alternating variant that keeps both factors on a quantization
grid, interleaving factor quantization with least-squares refits.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .calibration import Hessian, select_outlier_channels
from .linalg import (
    DimensionMismatchError,
    RankTooLargeError,
    act_fro_norm2,
    as_matrix,
    cholesky_psd,
    default_jitter_base,
    solve_lower,
    truncated_svd,
)
from .quantize import QuantSpec, QuantizedMatrix, dequantize, quantize

# Pseudoinverse cutoff: singular values below this fraction of sigma_max
# are treated as zero.
PINV_RTOL = 1e-12


class SingularFactorWarning(RuntimeWarning):
    """A factor collapsed below the target rank; iteration continues via pinv."""


@dataclass(frozen=True)
class FactorQuantMeta:
    """Grid parameters of a quantized factor pair."""

    bits_l: int
    bits_r: int
    scales_l: np.ndarray
    scales_r: np.ndarray


@dataclass(frozen=True)
class FactorPair:
    """Low-rank factors L (m x rank) and R (rank x n)."""

    l: np.ndarray
    r: np.ndarray
    rank: int
    quant_meta: FactorQuantMeta | None = None

    def __post_init__(self):
        if self.l.ndim != 2 or self.r.ndim != 2:
            raise ValueError("factors must be 2-D")
        if self.l.shape[1] != self.rank or self.r.shape[0] != self.rank:
            raise DimensionMismatchError(
                f"factor shapes {self.l.shape} x {self.r.shape} do not match rank {self.rank}"
            )

    def product(self) -> np.ndarray:
        return self.l @ self.r


@dataclass(frozen=True)
class InitStrategy:
    """Which factor initialization the joint optimizer starts from."""

    kind: str
    k: int | None = None

    _KINDS = ("zero", "lrapprox", "odlri")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown init strategy {self.kind!r}")
        if self.kind == "odlri":
            if self.k is not None and self.k < 1:
                raise ValueError("odlri k must be >= 1")
        elif self.k is not None:
            raise ValueError(f"{self.kind} init takes no k")

    @classmethod
    def zero(cls) -> "InitStrategy":
        return cls("zero")

    @classmethod
    def lrapprox(cls) -> "InitStrategy":
        return cls("lrapprox")

    @classmethod
    def odlri(cls, k: int | None = None) -> "InitStrategy":
        """Outlier-driven init; k = None defers to the rank-dependent policy."""
        return cls("odlri", k=None if k is None else int(k))


def zero_init(m: int, n: int, rank: int) -> FactorPair:
    """All-zero factors: the optimizer's first quantize step sees W unchanged."""
    if m < 1 or n < 1 or rank < 1:
        raise ValueError("dimensions must be positive")
    return FactorPair(l=np.zeros((m, rank)), r=np.zeros((rank, n)), rank=rank)


def lr_approx(a, h: Hessian, rank: int) -> FactorPair:
    """Exact rank-r minimizer of the activation-weighted approximation error.

    With S a Cholesky factor of H and (U, Sigma, V) the top-r SVD of a S,
    the factors are L = U sqrt(Sigma) and R = sqrt(Sigma) V^T S^{-1}, which
    minimize trace((a - LR) H (a - LR)^T) over all rank-r pairs (up to the
    jitter applied to make S exist).
    """
    a = as_matrix(a, "a")
    if h.dim != a.shape[1]:
        raise DimensionMismatchError(f"a has {a.shape[1]} cols but h has dim {h.dim}")
    if rank > min(a.shape):
        raise RankTooLargeError(f"rank {rank} exceeds min{a.shape}")
    s = h.cholesky().mat
    u, sigma, v = truncated_svd(a @ s, rank)
    sq = np.sqrt(sigma)
    s_inv = solve_lower(s, np.eye(h.dim))
    return FactorPair(l=u * sq, r=(sq[:, None] * v.T) @ s_inv, rank=rank)


def _factor_rank(f: np.ndarray) -> int:
    sigma = np.linalg.svd(f, compute_uv=False)
    if sigma[0] == 0:
        return 0
    return int(np.count_nonzero(sigma > PINV_RTOL * sigma[0]))


def lplr(
    a,
    h: Hessian,
    rank: int,
    bits_l: int,
    bits_r: int,
    inner_iters: int,
) -> FactorPair:
    """Alternating low-precision factorization.

    Starts from the exact activation-aware pair, then per inner iteration:
    quantize L, refit R = pinv(L_q) a (the activation-weighted optimum for
    fixed L, independent of the whitening), quantize R, and refit
    L = a S pinv(R_q S) in the whitened space. Returns the quantized pair
    with the lowest recorded activation-aware error; alternating quantized
    updates are not monotone, so the best iterate can precede the last.
    """
    if inner_iters < 1:
        raise ValueError("inner_iters must be >= 1")
    start = lr_approx(a, h, rank)
    a = as_matrix(a, "a")
    s = h.cholesky().mat
    a_s = a @ s
    spec_l = QuantSpec(bits_l)
    spec_r = QuantSpec(bits_r)
    l = start.l
    best: tuple[float, np.ndarray, np.ndarray, QuantizedMatrix, QuantizedMatrix] | None = None
    for _ in range(inner_iters):
        lq = quantize(l, spec_l)
        l_deq = dequantize(lq)
        if _factor_rank(l_deq) < rank:
            warnings.warn(
                f"left factor collapsed below rank {rank}; continuing with pinv",
                SingularFactorWarning,
                stacklevel=2,
            )
        r = np.linalg.pinv(l_deq, rcond=PINV_RTOL) @ a
        rq = quantize(r, spec_r)
        r_deq = dequantize(rq)
        err = act_fro_norm2(a - l_deq @ r_deq, h)
        if best is None or err < best[0]:
            best = (err, l_deq, r_deq, lq, rq)
        l = a_s @ np.linalg.pinv(r_deq @ s, rcond=PINV_RTOL)
    _, l_deq, r_deq, lq, rq = best
    meta = FactorQuantMeta(
        bits_l=bits_l, bits_r=bits_r, scales_l=lq.scales, scales_r=rq.scales
    )
    return FactorPair(l=l_deq, r=r_deq, rank=rank, quant_meta=meta)


def odlri_init(w, h: Hessian, rank: int, k: int) -> FactorPair:
    """Outlier-driven low-rank initialization.

    Selects the k highest-energy channels I, whitens the k x k principal
    Hessian submatrix H[I, I] with a jittered Cholesky factor S_k, truncates
    the SVD of W[:, I] S_k, and scatters the resulting factors back:

        L0 = [U sqrt(Sigma) | 0]          (m x rank)
        R0[:k, I] = sqrt(Sigma) V^T S_k^{-1}, zero elsewhere

    For k <= rank the SVD is not truncated, so W - L0 R0 vanishes exactly on
    the selected columns (up to roundoff): the factor pair reproduces the
    matrix's action on the outlier channels and the quantizer sees a residual
    with those columns removed.
    """
    w = as_matrix(w, "w")
    if h.dim != w.shape[1]:
        raise DimensionMismatchError(f"w has {w.shape[1]} cols but h has dim {h.dim}")
    k = int(k)
    if not 1 <= k <= min(rank, h.dim):
        raise ValueError(f"k must be in [1, min(rank, n)] = [1, {min(rank, h.dim)}]")
    idx = select_outlier_channels(h, k)
    h_kk = h.mat[np.ix_(idx, idx)]
    s_k = cholesky_psd(h_kk, default_jitter_base(h_kk)).mat
    u, sigma, v = truncated_svd(w[:, idx] @ s_k, k)
    sq = np.sqrt(sigma)
    l = np.zeros((w.shape[0], rank))
    l[:, :k] = u * sq
    r = np.zeros((rank, w.shape[1]))
    r[np.ix_(np.arange(k), idx)] = (sq[:, None] * v.T) @ solve_lower(s_k, np.eye(k))
    return FactorPair(l=l, r=r, rank=rank)
