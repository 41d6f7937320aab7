"""Mixed-precision QR factorizations over simulated floating-point arithmetic."""

from mpqr.errors import DomainError, InvalidLevels, MPQRError, Overflow, RankDeficient, ZeroVector
from mpqr.floatsim import (
    FP16,
    FP16_FP32,
    FP32,
    FP64,
    ArithmeticContext,
    FpFormat,
    PrecisionPair,
    SimValue,
    bfma_4x4,
    bfma_gemm,
    dot_mixed,
    dot_uniform,
    round_to_format,
    sim_op,
)

__version__ = "0.1.0"
