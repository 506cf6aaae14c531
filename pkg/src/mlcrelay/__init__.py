"""Multilevel coset coding for two-way relaying: decode-function algebra, rate bounds and LDPC checks."""

from .errors import (
    ConstructionFailed,
    DimensionMismatch,
    EllTooLarge,
    EmptySubset,
    GeneratorMismatch,
    MlcRelayError,
    QuadratureDivergence,
    SingularMatrix,
    WindowNotBracketing,
    ZeroCoefficient,
)
from .f2algebra import (
    BinMatrix,
    DecodeFunction,
    Gf4Element,
    PartitionSpec,
    decode_function_from_name,
    enumerate_invertible,
    enumerate_partitions,
    gf4_embed,
    invert,
    iter_decode_functions,
    partition_transform,
    rotated_xor_function,
    xor_function,
)
from .mlc import CosetCode, encode, random_coset_code, recover_peer, relay_effective_code
from .modulation import (
    ChannelPair,
    LabeledConstellation,
    NoiseModel,
    channel_sample,
    likelihood,
    qpsk_gray,
    relay_constellation,
)
from .rates import (
    RateReport,
    df_rate,
    gf4_rate,
    gf4_universal_rate,
    mixture_entropy,
    rate_f,
    threshold_snr_db,
    universal_rate,
)

__version__ = "0.1.0"
