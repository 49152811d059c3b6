"""Joint quantize-plus-low-rank optimization loop.

Alternates, for a fixed number of outer iterations,

    Q_t  <- Quantize(W - L_{t-1} R_{t-1})
    L_t, R_t <- LRApprox(W - Q_t)

from a configurable factor initialization, recording per-iteration metrics:
the quantizer scale, the activation norms of Q and LR relative to W, and the
normalized activation-aware error ||(W - Q - LR) X||_F^2 / ||W X||_F^2. All
metrics are evaluated through the Hessian trace form, never materializing X.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .calibration import Hessian, k_for_rank
from .linalg import act_fro_norm2, as_matrix
from .lowrank import FactorPair, InitStrategy, lplr, lr_approx, odlri_init, zero_init
from .quantize import (
    Granularity,
    QuantSpec,
    QuantizedMatrix,
    current_scale,
    dequantize,
    quantize,
)


class ConfigError(ValueError):
    """Optimizer configuration is inconsistent with the problem instance."""


@dataclass(frozen=True)
class OptimizerConfig:
    """Knobs of one joint optimization run.

    lr_bits = None keeps the factors at full precision (exact refits);
    an integer routes the factor refits through the alternating quantized
    procedure with that bit width.
    """

    rank: int
    outer_iters: int = 15
    inner_iters: int = 10
    q_bits: int = 2
    lr_bits: int | None = None
    init: InitStrategy = field(default_factory=InitStrategy.zero)
    q_granularity: Granularity = Granularity.PER_MATRIX
    seed: int = 0

    def __post_init__(self):
        if self.rank < 1:
            raise ConfigError("rank must be >= 1")
        if self.outer_iters < 1:
            raise ConfigError("outer_iters must be >= 1")
        if self.inner_iters < 1:
            raise ConfigError("inner_iters must be >= 1")
        if not 2 <= self.q_bits <= 16:
            raise ConfigError("q_bits must be in [2, 16]")
        if self.lr_bits is not None and not 2 <= self.lr_bits <= 16:
            raise ConfigError("lr_bits must be None or in [2, 16]")


@dataclass(frozen=True)
class IterationRecord:
    """Metrics of one outer iteration, taken after both substeps.

    act_err_pre_lr is a diagnostic: the normalized error measured with the
    fresh Q_t but the previous factors, i.e. just before the LRApprox substep.
    It is not part of the exported report schema.
    """

    t: int
    q_scale: float
    norm_q: float
    norm_lr: float
    act_err: float
    act_err_pre_lr: float


@dataclass(frozen=True)
class Trajectory:
    """Per-iteration records plus the final decomposition."""

    records: tuple[IterationRecord, ...]
    final_q: QuantizedMatrix
    final_factors: FactorPair


def _initial_factors(w: np.ndarray, h: Hessian, cfg: OptimizerConfig, lr_step) -> FactorPair:
    m, n = w.shape
    if cfg.init.kind == "zero":
        return zero_init(m, n, cfg.rank)
    if cfg.init.kind == "lrapprox":
        # the same operator the outer loop uses, applied to W itself
        return lr_step(w)
    k = cfg.init.k if cfg.init.k is not None else k_for_rank(cfg.rank, n)
    if not 1 <= k <= min(cfg.rank, n):
        raise ConfigError(f"odlri k={k} must be in [1, min(rank, n)] = [1, {min(cfg.rank, n)}]")
    return odlri_init(w, h, cfg.rank, k)


def run(w, h: Hessian, cfg: OptimizerConfig) -> Trajectory:
    """Run the alternating loop for cfg.outer_iters iterations.

    Deterministic in (w, h, cfg): repeated calls produce bit-identical
    trajectories.
    """
    w = as_matrix(w, "w")
    if h.dim != w.shape[1]:
        raise ConfigError(f"w has {w.shape[1]} cols but h has dim {h.dim}")
    wx2 = act_fro_norm2(w, h)
    if wx2 == 0.0:
        raise ConfigError("w has zero activation-weighted norm; ratios undefined")

    if cfg.lr_bits is None:
        def lr_step(a):
            return lr_approx(a, h, cfg.rank)
    else:
        def lr_step(a):
            return lplr(a, h, cfg.rank, cfg.lr_bits, cfg.lr_bits, cfg.inner_iters)

    factors = _initial_factors(w, h, cfg, lr_step)
    qspec = QuantSpec(cfg.q_bits, cfg.q_granularity)

    records = []
    q = None
    for t in range(1, cfg.outer_iters + 1):
        q = quantize(w - factors.product(), qspec)
        residual = w - dequantize(q)
        err_pre = act_fro_norm2(residual - factors.product(), h) / wx2
        factors = lr_step(residual)
        lr_prod = factors.product()
        records.append(
            IterationRecord(
                t=t,
                q_scale=current_scale(q),
                norm_q=math.sqrt(act_fro_norm2(dequantize(q), h) / wx2),
                norm_lr=math.sqrt(act_fro_norm2(lr_prod, h) / wx2),
                act_err=act_fro_norm2(residual - lr_prod, h) / wx2,
                act_err_pre_lr=err_pre,
            )
        )
    return Trajectory(records=tuple(records), final_q=q, final_factors=factors)


def compare_inits(
    w, h: Hessian, cfg_base: OptimizerConfig, strategies: list[InitStrategy]
) -> list[Trajectory]:
    """One run per strategy with otherwise identical configuration, in order."""
    if not strategies:
        raise ConfigError("strategies must be non-empty")
    return [run(w, h, replace(cfg_base, init=s)) for s in strategies]
