"""
Two-outcome maps sigma -> p Tr(A sigma) rho1 + Tr((1 - A) sigma) rho2 and the
k-coherence-preserving conversion maps built from them.

Maps are stored in this affine form (effect, outputs, scale) rather than as
Kraus operators. JSON holds effect, out1 and out2 as row-major complex
matrices.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, List, Optional

import numpy as np

from .codecs.json import (
    JSONSerializable, JSONDeserializable, decode_complex_array, json_field,
)
from .errors import (
    InvalidEffectError, InvalidOperatorError, InvalidScaleError, BoundViolationError,
)
from .measures import conversion_ratio, geometric_k, robustness_k
from .oracles import (
    IkCertificate, OptimalDelta, OracleBudget,
    certify_in_Ik, optimal_delta, sample_Ik_mixture,
)
from .statespace import (
    HERMITIAN_TOL, DensityOperator, LevelLike, PureState,
    as_level, outer_product,
)

logger = logging.getLogger(__name__)

EFFECT_TOL = 1e-10
BOUND_SLACK = 1e-12
TRACE_CHECK_TOL = 1e-10
OVERLAP_SLACK = 1e-12


def _operator_matrix(op: DensityOperator) -> np.ndarray:
    return op.matrix


def _decode_operator(raw: Any) -> DensityOperator:
    return DensityOperator.from_matrix(decode_complex_array(raw))


def _operator_field() -> Any:
    return json_field(serializer=_operator_matrix, deserializer=_decode_operator)


@dataclass(frozen=True, eq=False)
class TwoOutcomeMap(JSONSerializable, JSONDeserializable):
    """Measure the effect A; keep out1 with weight ``scale`` on success, prepare out2 otherwise.

    Completely positive for 0 <= A <= 1 and trace preserving when scale is 1.
    """
    effect: np.ndarray
    out1: DensityOperator = _operator_field()
    out2: DensityOperator = _operator_field()
    scale: float = json_field(json_name="p", default=1.0)

    def __post_init__(self):
        effect = np.array(self.effect, dtype=np.complex128)
        dim = self.out1.dim
        if effect.shape != (dim, dim) or self.out2.dim != dim:
            raise InvalidOperatorError(
                f"effect {effect.shape}, out1 dim {dim} and out2 dim {self.out2.dim} do not match"
            )
        if np.max(np.abs(effect - effect.conj().T)) > HERMITIAN_TOL:
            raise InvalidEffectError("effect is not Hermitian")
        effect = (effect + effect.conj().T) / 2
        eigenvalues = np.linalg.eigvalsh(effect)
        if eigenvalues[0] < -EFFECT_TOL or eigenvalues[-1] > 1.0 + EFFECT_TOL:
            raise InvalidEffectError(
                f"effect eigenvalues [{eigenvalues[0]!r}, {eigenvalues[-1]!r}] leave [0, 1]"
            )
        for name, out in (("out1", self.out1), ("out2", self.out2)):
            if not out.is_normalized:
                raise InvalidOperatorError(f"{name} has trace {out.trace!r}, expected 1")
        if isinstance(self.scale, bool) or not 0.0 < self.scale <= 1.0:
            raise InvalidScaleError(f"scale p={self.scale!r} outside (0, 1]")
        effect.setflags(write=False)
        object.__setattr__(self, "effect", effect)
        object.__setattr__(self, "scale", float(self.scale))

    @property
    def dim(self) -> int:
        return self.out1.dim

    def __call__(self, sigma: DensityOperator) -> DensityOperator:
        return apply(self, sigma)


@dataclass(frozen=True, eq=False)
class KCoherencePreservingMap(JSONSerializable, JSONDeserializable):
    """Two-outcome map with effect |source><source|, out1 |target><target| and out2 the optimal delta.

    Sends source to scale * target and maps I_k into (multiples of) I_k.
    """
    base: TwoOutcomeMap
    level: int = json_field(json_name="k")
    delta_cert: OptimalDelta
    source: PureState
    target: PureState

    def __post_init__(self):
        k = as_level(self.level).check(self.base.dim, low=2, high=self.base.dim - 1)
        if self.source.dim != self.base.dim or self.target.dim != self.base.dim:
            raise InvalidOperatorError("source and target must match the map dimension")
        object.__setattr__(self, "level", k)

    @property
    def scale(self) -> float:
        return self.base.scale

    @property
    def bound(self) -> float:
        """Largest scale the construction admits for this source and target."""
        return conversion_ratio(self.source, self.target, self.level)

    def __call__(self, sigma: DensityOperator) -> DensityOperator:
        return apply(self.base, sigma)


def build_two_outcome(effect, out1: DensityOperator, out2: DensityOperator, p: float) -> TwoOutcomeMap:
    """Validated two-outcome map.

    Raises:
        InvalidEffectError: effect has an eigenvalue outside [0, 1].
        InvalidScaleError: p outside (0, 1].
    """
    return TwoOutcomeMap(np.asarray(effect, dtype=np.complex128), out1, out2, p)


def apply(channel: TwoOutcomeMap, sigma: DensityOperator) -> DensityOperator:
    """p Tr(A sigma) rho1 + Tr((1 - A) sigma) rho2; the trace drops by (1 - p) Tr(A sigma)."""
    if sigma.dim != channel.dim:
        raise InvalidOperatorError(f"input has dim {sigma.dim}, map acts on dim {channel.dim}")
    accepted = float(np.trace(channel.effect @ sigma.matrix).real)
    rejected = sigma.trace - accepted
    matrix = channel.scale * accepted * channel.out1.matrix + rejected * channel.out2.matrix
    return DensityOperator(channel.dim, matrix)


def build_k_preserving(
    source: PureState,
    target: PureState,
    level: LevelLike,
    p: float,
    budget: Optional[OracleBudget] = None,
) -> KCoherencePreservingMap:
    """Map sending ``source`` to ``p`` times ``target`` while keeping I_k inside I_k.

    Raises:
        InvalidScaleError: p outside (0, 1].
        LevelOutOfRangeError: unless 2 <= k <= d - 1.
        NotAResourceStateError: source or target has coherence rank <= k.
        BoundViolationError: p above G_{k+1}(source) / (R_k(target) (1 - G_{k+1}(source))).
    """
    if isinstance(p, bool) or not 0.0 < p <= 1.0:
        raise InvalidScaleError(f"scale p={p!r} outside (0, 1]")
    k = as_level(level).check(source.dim, low=2, high=source.dim - 1)
    bound = conversion_ratio(source, target, k)
    if p > bound + BOUND_SLACK:
        raise BoundViolationError(p, bound)

    witness = optimal_delta(target, k, budget, method="split")
    if not witness.converged:
        logger.warning("building map with a non-converged delta (s=%r)", witness.s_value)
    base = build_two_outcome(outer_product(source).matrix, outer_product(target), witness.delta, p)
    logger.debug("built k=%d map with p=%r, bound %r", k, p, bound)
    return KCoherencePreservingMap(base, k, witness, source, target)


@dataclass(frozen=True, eq=False)
class TrialOutcome(JSONSerializable, JSONDeserializable):
    """Checks on one sampled free input sigma.

    ``overlap`` is Tr(source sigma). ``scalar_condition`` is
    (1/p)(1/overlap - 1) >= R_k(target), vacuous when the overlap is 0.
    """
    overlap: float
    trace_ok: bool
    scalar_condition: bool
    overlap_bound: bool
    certified: bool
    residual: Optional[float] = None
    certificate: Optional[IkCertificate] = None

    @property
    def passed(self) -> bool:
        return self.trace_ok and self.scalar_condition and self.overlap_bound and self.certified


@dataclass(frozen=True, eq=False)
class VerificationReport(JSONSerializable, JSONDeserializable):
    level: int = json_field(json_name="k")
    scale: float
    trials: List[TrialOutcome] = field(default_factory=list)

    @property
    def scalar_passes(self) -> int:
        return sum(trial.scalar_condition for trial in self.trials)

    @property
    def certified_count(self) -> int:
        return sum(trial.certified for trial in self.trials)

    @property
    def failures(self) -> List[int]:
        return [i for i, trial in enumerate(self.trials) if not trial.passed]

    @property
    def all_passed(self) -> bool:
        return not self.failures


def verify_preserves_Ik(
    channel: KCoherencePreservingMap,
    trials: int,
    budget: Optional[OracleBudget] = None,
    rng_seed: int = 0,
) -> VerificationReport:
    """Apply the map to random members of I_k and certify every renormalized output.

    Inputs come from `kcoherence.oracles.sample_Ik_mixture`. The certificates
    of delta and of the target's mixture with delta are offered as candidate
    components, which makes every admissible output an exact non-negative fit.
    """
    budget = budget or OracleBudget()
    k = channel.level
    p = channel.scale
    robustness = robustness_k(channel.target, k).value
    overlap_limit = 1.0 - geometric_k(channel.source, k + 1).value
    hints = [
        component.coeffs
        for certificate in (channel.delta_cert.delta_certificate, channel.delta_cert.mix_certificate)
        for component in certificate.components
    ]
    effect = channel.base.effect

    rng = np.random.default_rng(rng_seed)
    outcomes = []
    for trial in range(trials):
        sigma, _ = sample_Ik_mixture(channel.base.dim, k, rng)
        overlap = float(np.trace(effect @ sigma.matrix).real)
        output = apply(channel.base, sigma)
        trace_ok = abs(output.trace - (sigma.trace - (1.0 - p) * overlap)) <= TRACE_CHECK_TOL
        scalar = overlap <= 0.0 or (1.0 / p) * (1.0 / overlap - 1.0) >= robustness - BOUND_SLACK
        within = overlap <= overlap_limit + OVERLAP_SLACK
        certificate = certify_in_Ik(output.normalized(), k, budget, atoms=hints)
        if not (scalar and trace_ok and within and certificate):
            logger.warning(
                "trial %d: trace %s, scalar condition %s, overlap bound %s, certified %s",
                trial, trace_ok, scalar, within, certificate is not None,
            )
        outcomes.append(TrialOutcome(
            overlap=overlap,
            trace_ok=trace_ok,
            scalar_condition=scalar,
            overlap_bound=within,
            certified=certificate is not None,
            residual=certificate.residual if certificate else None,
            certificate=certificate,
        ))
    return VerificationReport(k, p, outcomes)
