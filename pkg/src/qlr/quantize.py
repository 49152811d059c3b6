"""Uniform scalar quantizer on a symmetric odd-level grid.

The grid for b bits is {-(2^(b-1)-1), ..., -1, 0, 1, ..., 2^(b-1)-1} scaled by
a fitted step size, so zero is exactly representable and the largest-magnitude
entry of each scaling group lands exactly on the grid edge. Scales can be
fitted per matrix (default) or per column.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .linalg import as_matrix


class Granularity(enum.Enum):
    PER_MATRIX = "matrix"
    PER_COLUMN = "column"


@dataclass(frozen=True)
class QuantSpec:
    """Bit width (2..16) and scale granularity."""

    bits: int
    granularity: Granularity = Granularity.PER_MATRIX

    def __post_init__(self):
        if not 2 <= self.bits <= 16:
            raise ValueError(f"bits must be in [2, 16], got {self.bits}")
        if not isinstance(self.granularity, Granularity):
            raise ValueError(f"bad granularity: {self.granularity!r}")

    @property
    def qmax(self) -> int:
        return 2 ** (self.bits - 1) - 1


@dataclass(frozen=True)
class QuantizedMatrix:
    """Integer codes plus the scale(s) that map them back to reals."""

    codes: np.ndarray
    scales: np.ndarray
    spec: QuantSpec

    def __post_init__(self):
        if self.codes.ndim != 2:
            raise ValueError("codes must be 2-D")
        if not np.issubdtype(self.codes.dtype, np.integer):
            raise ValueError("codes must be integer-typed")
        qmax = self.spec.qmax
        if np.abs(self.codes).max(initial=0) > qmax:
            raise ValueError(f"codes exceed the symmetric range +-{qmax}")
        expected = 1 if self.spec.granularity is Granularity.PER_MATRIX else self.codes.shape[1]
        if self.scales.shape != (expected,):
            raise ValueError(f"expected {expected} scale(s), got {self.scales.shape}")
        if not np.all(self.scales > 0):
            raise ValueError("scales must be strictly positive")

    @property
    def shape(self) -> tuple[int, int]:
        return self.codes.shape


def fit_scale(w, spec: QuantSpec) -> np.ndarray:
    """Fit the grid step per scaling group: s = maxabs / (2^(bits-1) - 1).

    An all-zero group gets the default scale 1.0.
    """
    w = as_matrix(w, "w")
    if spec.granularity is Granularity.PER_MATRIX:
        maxabs = np.array([np.abs(w).max()])
    else:
        maxabs = np.abs(w).max(axis=0)
    return np.where(maxabs > 0, maxabs / spec.qmax, 1.0)


def quantize(w, spec: QuantSpec) -> QuantizedMatrix:
    """Round w onto the fitted grid: clamp(round_half_to_even(w / s), -qmax, qmax)."""
    w = as_matrix(w, "w")
    scales = fit_scale(w, spec)
    divisor = scales[0] if spec.granularity is Granularity.PER_MATRIX else scales[None, :]
    codes = np.clip(np.round(w / divisor), -spec.qmax, spec.qmax).astype(np.int32)
    return QuantizedMatrix(codes=codes, scales=scales, spec=spec)


def dequantize(q: QuantizedMatrix) -> np.ndarray:
    """Map codes back to reals: entry = code * group scale."""
    if q.spec.granularity is Granularity.PER_MATRIX:
        return q.codes * q.scales[0]
    return q.codes * q.scales[None, :]


def current_scale(q: QuantizedMatrix) -> float:
    """Reported scale metric: the single scale, or the mean of column scales."""
    if q.spec.granularity is Granularity.PER_MATRIX:
        return float(q.scales[0])
    return float(q.scales.mean())
