"""qlr: decompose a weight matrix into a quantized part plus a low-rank product.

The decomposition W ~ Q + L R is found by alternating a uniform scalar
quantizer with an activation-aware low-rank refit, starting from a pluggable
factor initialization (zero, full low-rank, or outlier-driven). Quality is
measured through a calibration Hessian H = X X^T rather than raw weight
space.
"""

__version__ = "0.1.0"

from .calibration import (
    Hessian,
    IndexOutOfRangeError,
    KOutOfRangeError,
    OutlierSplit,
    hessian_from_activations,
    k_for_rank,
    seeded_generator,
    select_outlier_channels,
    split_hessian,
    synth_activations,
)
from .ensemble import SynthInstance, synth_instance, synth_weights
from .linalg import (
    CholeskyFactor,
    DimensionMismatchError,
    NonSymmetricError,
    NotFactorizableError,
    RankTooLargeError,
    SvdTriple,
    act_fro_norm2,
    cholesky_psd,
    solve_lower,
    truncated_svd,
)
from .lowrank import (
    FactorPair,
    FactorQuantMeta,
    InitStrategy,
    SingularFactorWarning,
    lplr,
    lr_approx,
    odlri_init,
    zero_init,
)
from .matfile import (
    BadDtypeError,
    BadMagicError,
    BadVersionError,
    MatrixFileError,
    NonFinitePayloadError,
    TruncatedError,
    read_matrix,
    write_matrix,
)
from .optimizer import (
    ConfigError,
    IterationRecord,
    OptimizerConfig,
    Trajectory,
    compare_inits,
    run,
)
from .quantize import (
    Granularity,
    QuantSpec,
    QuantizedMatrix,
    current_scale,
    dequantize,
    fit_scale,
    quantize,
)

__all__ = [
    "__version__",
    # linalg kernels
    "CholeskyFactor", "SvdTriple", "cholesky_psd", "truncated_svd",
    "solve_lower", "act_fro_norm2",
    "NonSymmetricError", "NotFactorizableError", "RankTooLargeError",
    "DimensionMismatchError",
    # quantizer
    "Granularity", "QuantSpec", "QuantizedMatrix",
    "fit_scale", "quantize", "dequantize", "current_scale",
    # calibration
    "Hessian", "OutlierSplit", "hessian_from_activations",
    "select_outlier_channels", "k_for_rank", "split_hessian",
    "synth_activations", "seeded_generator",
    "KOutOfRangeError", "IndexOutOfRangeError",
    # low-rank factorization
    "FactorPair", "FactorQuantMeta", "InitStrategy", "SingularFactorWarning",
    "lr_approx", "lplr", "odlri_init", "zero_init",
    # joint optimizer
    "OptimizerConfig", "IterationRecord", "Trajectory", "ConfigError",
    "run", "compare_inits",
    # synthetic instances
    "SynthInstance", "synth_instance", "synth_weights",
    # matrix files
    "read_matrix", "write_matrix", "MatrixFileError", "BadMagicError",
    "BadVersionError", "BadDtypeError", "TruncatedError",
    "NonFinitePayloadError",
]
