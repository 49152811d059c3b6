"""Synthetic problem instances for experiments and tests.

One seed determines a full instance: weights are drawn from the seed's
weight stream and activations (with planted outlier channels) from its
activation stream, so instances are bit-reproducible and the two draws are
independent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .calibration import (
    STREAM_WEIGHTS,
    Hessian,
    hessian_from_activations,
    seeded_generator,
    synth_activations,
)

# Default planted-outlier ensemble used by the sweep command and the demos.
DEFAULT_M = 64
DEFAULT_N = 64
DEFAULT_D = 256
DEFAULT_OUTLIERS = 4
DEFAULT_GAIN = 10.0


@dataclass(frozen=True)
class SynthInstance:
    w: np.ndarray
    x: np.ndarray
    h: Hessian
    outliers: np.ndarray


def synth_weights(m: int, n: int, seed: int) -> np.ndarray:
    """Standard-normal m x n weights from the seed's weight stream."""
    if m < 1 or n < 1:
        raise ValueError("m and n must be positive")
    return seeded_generator(seed, STREAM_WEIGHTS).standard_normal((m, n))


def synth_instance(
    m: int = DEFAULT_M,
    n: int = DEFAULT_N,
    d: int = DEFAULT_D,
    outliers: int = DEFAULT_OUTLIERS,
    gain: float = DEFAULT_GAIN,
    seed: int = 0,
) -> SynthInstance:
    """Weights, activations, Hessian, and planted indices for one seed."""
    w = synth_weights(m, n, seed)
    x, idx = synth_activations(n, d, outliers, gain, seed)
    return SynthInstance(w=w, x=x, h=hessian_from_activations(x), outliers=idx)
