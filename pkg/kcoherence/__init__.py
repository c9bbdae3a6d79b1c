from typing import Any, Type, TypeVar

from .core import Codec
from .codecs.json import JSONCodec, json_field, JSON_MISSING, json_codec, JSONSerializable, JSONDeserializable
from .codecs.csv import CSVCodec, csv_codec
from .errors import (
    CoherenceError, CodecError, InvalidStateError, InvalidOperatorError,
    LevelOutOfRangeError, NotAResourceStateError, InvalidEffectError,
    InvalidScaleError, BoundViolationError, InvalidConstraintError, OracleError,
)
from .statespace import (
    PureState, DensityOperator, CoherenceLevel, CanonicalForm,
    coherence_rank, pure_in_Ik, sorted_coeff_magnitudes, outer_product,
    canonicalize, parse_state, load_state, dump_state,
)
from .measures import (
    RobustnessResult, GeometricResult, RobustnessBound,
    robustness_k, geometric_k, robustness_k_oracle, geometric_k_oracle,
    conversion_ratio, nonisolation_threshold, split_indices,
)
from .oracles import (
    OracleBudget, CertificateComponent, IkCertificate, OptimalDelta,
    certify_in_Ik, optimal_delta, sample_pure, sample_Ik_mixture, haar_unitary, METHODS,
)
from .maps import (
    TwoOutcomeMap, KCoherencePreservingMap, TrialOutcome, VerificationReport,
    build_two_outcome, apply, build_k_preserving, verify_preserves_Ik,
)
from .transforms import (
    ConversionReport, NonIsolationWitness, CorollaryCheck,
    max_conversion_probability, deterministic_feasible, convert,
    nonisolation_witness, corollary_check,
)

_T = TypeVar("_T")


def encode(obj: Any, codec: Codec = json_codec, **kwargs: Any) -> Any:
    """Encode a dataclass using the specified codec.

    By default, the JSON codec is used. See: `kcoherence.codecs.json` for more details.
    """
    return codec.encode(obj, **kwargs)


def decode(cls: Type[_T], data: Any, codec: Codec = json_codec, **kwargs: Any) -> _T:
    """Decode data to a dataclass using the specified codec."""
    return codec.decode(cls, data, **kwargs)


def to_json(obj: Any, **kwargs: Any) -> str:
    """Convert dataclass to JSON string; ``kwargs`` go to `json.dumps`."""
    return json_codec.to_json(obj, **kwargs)


def from_json(cls: Type[_T], json_str: str, **kwargs: Any) -> _T:
    """Convert JSON string to dataclass, validating it on construction."""
    return json_codec.from_json(cls, json_str, **kwargs)


__all__ = [
    'Codec', 'JSONCodec', 'JSONSerializable', 'JSONDeserializable',
    'json_field', 'JSON_MISSING', 'json_codec', 'CSVCodec', 'csv_codec',
    'encode', 'decode', 'to_json', 'from_json',
    'CoherenceError', 'CodecError', 'InvalidStateError', 'InvalidOperatorError',
    'LevelOutOfRangeError', 'NotAResourceStateError', 'InvalidEffectError',
    'InvalidScaleError', 'BoundViolationError', 'InvalidConstraintError', 'OracleError',
    'PureState', 'DensityOperator', 'CoherenceLevel', 'CanonicalForm',
    'coherence_rank', 'pure_in_Ik', 'sorted_coeff_magnitudes', 'outer_product',
    'canonicalize', 'parse_state', 'load_state', 'dump_state',
    'RobustnessResult', 'GeometricResult', 'RobustnessBound',
    'robustness_k', 'geometric_k', 'robustness_k_oracle', 'geometric_k_oracle',
    'conversion_ratio', 'nonisolation_threshold', 'split_indices',
    'OracleBudget', 'CertificateComponent', 'IkCertificate', 'OptimalDelta',
    'certify_in_Ik', 'optimal_delta', 'sample_pure', 'sample_Ik_mixture', 'haar_unitary', 'METHODS',
    'TwoOutcomeMap', 'KCoherencePreservingMap', 'TrialOutcome', 'VerificationReport',
    'build_two_outcome', 'apply', 'build_k_preserving', 'verify_preserves_Ik',
    'ConversionReport', 'NonIsolationWitness', 'CorollaryCheck',
    'max_conversion_probability', 'deterministic_feasible', 'convert',
    'nonisolation_witness', 'corollary_check',
]
