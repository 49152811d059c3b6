"""Calibration-side machinery: Hessians, outlier channels, synthetic data.

The Hessian here is the second-moment matrix H = X X^T of calibration
activations X (channels x samples). Its diagonal measures per-channel
activation energy and drives outlier-channel selection; principal submatrices
of H feed the outlier-aware factorization.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import (
    CholeskyFactor,
    as_matrix,
    check_symmetric,
    cholesky_psd,
    default_jitter_base,
)

# Stream tags for the seeded Philox generator; keeping them distinct guarantees
# activations and weights drawn for the same seed are independent.
STREAM_ACTIVATIONS = 0
STREAM_WEIGHTS = 1


class KOutOfRangeError(ValueError):
    """Requested top-k is outside [1, dim]."""


class IndexOutOfRangeError(ValueError):
    """A channel index falls outside [0, dim) or the set is empty/duplicated."""


def seeded_generator(seed: int, stream: int = 0) -> np.random.Generator:
    """Deterministic generator: Philox 4x64 keyed by SeedSequence([seed, stream]).

    Philox is counter-based and platform-independent, so equal (seed, stream)
    pairs reproduce bit-identical draws everywhere.
    """
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(stream)])))


@dataclass
class Hessian:
    """Symmetric PSD second-moment matrix with a cached Cholesky factor.

    Immutable after construction: the stored array is read-only and the
    factor cache is write-once per jitter base.
    """

    mat: np.ndarray
    _chol_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        mat = as_matrix(self.mat, "hessian").copy()
        check_symmetric(mat)
        diag = np.diagonal(mat)
        if diag.min() < 0:
            raise ValueError("hessian diagonal must be non-negative")
        mat.flags.writeable = False
        object.__setattr__(self, "mat", mat)

    @property
    def dim(self) -> int:
        return self.mat.shape[0]

    @property
    def diag_energy(self) -> np.ndarray:
        return np.diagonal(self.mat)

    def cholesky(self, jitter_base: float | None = None) -> CholeskyFactor:
        """Jittered Cholesky of the matrix; factors are cached per jitter base."""
        if jitter_base is None:
            jitter_base = default_jitter_base(self.mat)
        if jitter_base not in self._chol_cache:
            self._chol_cache[jitter_base] = cholesky_psd(self.mat, jitter_base)
        return self._chol_cache[jitter_base]


@dataclass(frozen=True)
class OutlierSplit:
    """H masked onto the selected channel block and its complement.

    h_o keeps entries H_ij with both i, j selected; h_r keeps entries with
    neither selected. Cross-block entries belong to neither part, so
    h_o + h_r != h in general.
    """

    indices: np.ndarray
    h_o: np.ndarray
    h_r: np.ndarray


def hessian_from_activations(x) -> Hessian:
    """Build H = x x^T from activations x (channels x samples)."""
    x = as_matrix(x, "x")
    h = x @ x.T
    # BLAS can leave rounding-level asymmetry; make symmetry exact.
    h = (h + h.T) / 2
    return Hessian(h)


def select_outlier_channels(h: Hessian, k: int) -> np.ndarray:
    """Indices of the k channels with largest diagonal energy, sorted ascending.

    Ties break toward the lower index.
    """
    k = int(k)
    if not 1 <= k <= h.dim:
        raise KOutOfRangeError(f"k must be in [1, {h.dim}], got {k}")
    # stable argsort of the negated diagonal keeps lower indices first on ties
    order = np.argsort(-h.diag_energy, kind="stable")
    return np.sort(order[:k])


def k_for_rank(r: int, n: int) -> int:
    """Outlier-count policy: k = p * n with rank-dependent percentage p.

    p is 0.1% / 0.2% / 0.4% for ranks 64 / 128 / 256; other ranks use the
    linear extension p = r / 65536, which reproduces those three settings at
    n = 4096. The result is clamped to [1, min(r, n)].
    """
    r, n = int(r), int(n)
    if r < 1 or n < 1:
        raise ValueError("r and n must be positive")
    table = {64: 0.001, 128: 0.002, 256: 0.004}
    if r in table:
        k = round(table[r] * n)
    else:
        k = max(1, round(n * r / 65536))
    return int(min(max(k, 1), min(r, n)))


def split_hessian(h: Hessian, indices) -> OutlierSplit:
    """Mask H onto the selected channel block and its complement block."""
    idx = np.asarray(indices, dtype=np.int64).ravel()
    if idx.size == 0:
        raise IndexOutOfRangeError("index set must be non-empty")
    if idx.min() < 0 or idx.max() >= h.dim:
        raise IndexOutOfRangeError(f"indices must lie in [0, {h.dim})")
    if np.unique(idx).size != idx.size:
        raise IndexOutOfRangeError("indices must be distinct")
    idx = np.sort(idx)
    rest = np.setdiff1d(np.arange(h.dim), idx)
    h_o = np.zeros_like(h.mat)
    h_o[np.ix_(idx, idx)] = h.mat[np.ix_(idx, idx)]
    h_r = np.zeros_like(h.mat)
    if rest.size:
        h_r[np.ix_(rest, rest)] = h.mat[np.ix_(rest, rest)]
    return OutlierSplit(indices=idx, h_o=h_o, h_r=h_r)


def synth_activations(
    n: int, d: int, outlier_count: int, outlier_gain: float, seed: int
) -> tuple[np.ndarray, np.ndarray]:
    """Standard-normal activations with `outlier_count` channels amplified.

    Draws an n x d matrix from the seeded Philox stream, picks
    `outlier_count` distinct channels at random, multiplies those rows by
    `outlier_gain`, and returns the matrix together with the planted channel
    indices (sorted ascending). Identical arguments reproduce identical bits.
    """
    n, d, outlier_count = int(n), int(d), int(outlier_count)
    if n < 1 or d < 1:
        raise ValueError("n and d must be positive")
    if not 0 <= outlier_count <= n:
        raise ValueError(f"outlier_count must be in [0, {n}]")
    if outlier_gain < 1:
        raise ValueError("outlier_gain must be >= 1")
    rng = seeded_generator(seed, STREAM_ACTIVATIONS)
    x = rng.standard_normal((n, d))
    if outlier_count:
        planted = np.sort(rng.choice(n, size=outlier_count, replace=False))
        x[planted] *= outlier_gain
    else:
        planted = np.empty(0, dtype=np.int64)
    return x, planted.astype(np.int64)
