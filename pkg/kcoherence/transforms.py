"""
Conversion decisions between pure resource states.

A source psi1 converts to a target psi2 under k-coherence-preserving maps
with probability at least

    p_max = min(1, G_{k+1}(psi1) / (R_k(psi2) [1 - G_{k+1}(psi1)]))

Expanded in the sorted source magnitudes mu and target magnitudes nu, with
l and s_l from `kcoherence.measures.robustness_k`, the ratio reads

    (k - l + 1) (1 - sum_{i=1}^{k} mu_i^2)
    / ([s_l^2 - (k - l + 1) sum_{i=l}^{d} nu_i^2] sum_{i=1}^{k} mu_i^2)

with s_l = sum_{i=l}^{d} nu_i. Both sums over the target run to the
dimension d. Write-ups of this expression that put an index n in those
upper limits mean d; there is no separate n.

The source converts deterministically when the unclamped ratio reaches 1.
The condition is sufficient, not necessary: ``deterministic_feasible == False``
means "not certified by this construction", not "impossible".
"""

import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional, Union

import numpy as np

from .codecs.json import JSONSerializable, JSONDeserializable, JSONOptional, JSON_MISSING
from .errors import CoherenceError, NotAResourceStateError, OracleError
from .maps import KCoherencePreservingMap, apply, build_k_preserving
from .measures import conversion_ratio, geometric_k, nonisolation_threshold, robustness_k
from .oracles import OracleBudget, random_pure, sample_pure
from .statespace import (
    LevelLike, PureState, as_level, coherence_rank, outer_product,
)

logger = logging.getLogger(__name__)

FEASIBILITY_SLACK = 1e-12
CONVERSION_TOL = 1e-10
DISTINCT_TOL = 1e-6
_PERTURBATION_STEPS = 20


@dataclass(frozen=True, eq=False)
class ConversionReport(JSONSerializable, JSONDeserializable):
    """Measures, bound and feasibility for one source/target pair at level k.

    ``ratio`` is the unclamped G_{k+1}(source) / (R_k(target) (1 - G_{k+1}(source))),
    ``p_max`` the same value clamped to 1.
    """
    source: PureState
    target: PureState
    level: int
    g_source: float
    r_target: float
    ratio: float
    p_max: float
    deterministic_feasible: bool
    map: Union[KCoherencePreservingMap, JSONOptional] = JSON_MISSING


def _report(source: PureState, target: PureState, k: int) -> ConversionReport:
    ratio = conversion_ratio(source, target, k)
    feasible = ratio >= 1.0 - FEASIBILITY_SLACK
    return ConversionReport(
        source=source,
        target=target,
        level=k,
        g_source=geometric_k(source, k + 1).value,
        r_target=robustness_k(target, k).value,
        ratio=ratio,
        p_max=1.0 if feasible else ratio,
        deterministic_feasible=feasible,
    )


def _check_conversion(channel: KCoherencePreservingMap) -> None:
    output = apply(channel.base, outer_product(channel.source))
    expected = channel.scale * outer_product(channel.target).matrix
    error = float(np.max(np.abs(output.matrix - expected)))
    if error > CONVERSION_TOL:
        raise OracleError(f"map sends source to scale * target only within {error:.3e}")


def max_conversion_probability(source: PureState, target: PureState, level: LevelLike) -> float:
    """min(1, G_{k+1}(source) / (R_k(target) [1 - G_{k+1}(source)])), always positive.

    Raises:
        NotAResourceStateError: source or target has coherence rank <= k.
    """
    k = as_level(level).check(source.dim, low=2, high=source.dim - 1)
    return _report(source, target, k).p_max


def deterministic_feasible(
    source: PureState,
    target: PureState,
    level: LevelLike,
    budget: Optional[OracleBudget] = None,
) -> ConversionReport:
    """Report whose ``deterministic_feasible`` flag is the ratio >= 1 test.

    When feasible the report carries the p = 1 map, already checked to send
    the source exactly onto the target.
    """
    k = as_level(level).check(source.dim, low=2, high=source.dim - 1)
    report = _report(source, target, k)
    if not report.deterministic_feasible:
        return report
    channel = build_k_preserving(source, target, k, 1.0, budget)
    _check_conversion(channel)
    return replace(report, map=channel)


def convert(
    source: PureState,
    target: PureState,
    level: LevelLike,
    p: Optional[float] = None,
    budget: Optional[OracleBudget] = None,
) -> ConversionReport:
    """Report for the pair, with the map at scale ``p`` attached when ``p`` is given.

    Raises:
        BoundViolationError: ``p`` exceeds the conversion bound.
    """
    k = as_level(level).check(source.dim, low=2, high=source.dim - 1)
    report = _report(source, target, k)
    if p is None:
        return report
    channel = build_k_preserving(source, target, k, p, budget)
    _check_conversion(channel)
    return replace(report, map=channel)


@dataclass(frozen=True, eq=False)
class NonIsolationWitness(JSONSerializable, JSONDeserializable):
    """A source other than the target that converts deterministically onto it.

    ``perturbed`` is False only when the search fell back to the maximally
    coherent state itself.
    """
    witness: PureState
    g_witness: float
    threshold: float
    perturbed: bool
    map: KCoherencePreservingMap


def _projector_distance(a: PureState, b: PureState) -> float:
    return float(np.linalg.norm(outer_product(a).matrix - outer_product(b).matrix))


def nonisolation_witness(
    target: PureState,
    level: LevelLike,
    budget: Optional[OracleBudget] = None,
    rng_seed: int = 0,
) -> NonIsolationWitness:
    """Find phi != target with G_{k+1}(phi) >= 1 - 1/(R_k(target) + 1) and the map phi -> target.

    Candidates are the maximally coherent state with random phases plus a
    Gaussian perturbation whose size halves until the pair is deterministically
    convertible; phases alone always qualify since the maximally coherent
    state maximizes G_{k+1}.

    Raises:
        NotAResourceStateError: target has coherence rank <= k.
    """
    budget = budget or OracleBudget()
    dim = target.dim
    k = as_level(level).check(dim, low=2, high=dim - 1)
    rank = coherence_rank(target)
    if rank <= k:
        raise NotAResourceStateError("target", k, rank)
    threshold = nonisolation_threshold(target, k)
    flat = PureState.maximally_coherent(dim)
    rng = np.random.default_rng(rng_seed)

    def acceptable(candidate: PureState) -> bool:
        return (
            coherence_rank(candidate) > k
            and conversion_ratio(candidate, target, k) >= 1.0 - FEASIBILITY_SLACK
            and _projector_distance(candidate, target) > DISTINCT_TOL
            and _projector_distance(candidate, flat) > DISTINCT_TOL
        )

    witness, perturbed = None, True
    for attempt in range(budget.restarts):
        phased = np.exp(2j * np.pi * rng.uniform(size=dim)) / np.sqrt(dim)
        noise = random_pure(dim, rng)
        scale = 0.5
        for _ in range(_PERTURBATION_STEPS):
            candidate = PureState.from_amplitudes(phased + scale * noise)
            if acceptable(candidate):
                witness = candidate
                break
            scale /= 2
        else:
            candidate = PureState(dim, phased)
            if acceptable(candidate):
                witness = candidate
        if witness is not None:
            logger.debug("witness found on attempt %d at perturbation %.3g", attempt, scale)
            break
    if witness is None:
        logger.warning("no perturbed witness found, falling back to the maximally coherent state")
        witness, perturbed = flat, False

    channel = build_k_preserving(witness, target, k, 1.0, budget)
    _check_conversion(channel)
    return NonIsolationWitness(
        witness=witness,
        g_witness=geometric_k(witness, k + 1).value,
        threshold=threshold,
        perturbed=perturbed,
        map=channel,
    )


@dataclass(frozen=True)
class CorollaryCheck(JSONSerializable, JSONDeserializable):
    """Outcome of converting the maximally coherent state into random targets; truthy iff all passed."""
    dim: int
    level: int
    trials: int
    failures: List[PureState] = field(default_factory=list)

    def __bool__(self) -> bool:
        return not self.failures


def corollary_check(
    dim: int,
    level: LevelLike,
    trials: int,
    rng_seed: int,
    budget: Optional[OracleBudget] = None,
) -> CorollaryCheck:
    """Check that the maximally coherent state converts deterministically to ``trials`` random resource targets.

    Raises:
        LevelOutOfRangeError: unless 2 <= k <= dim - 1.
    """
    k = as_level(level).check(dim, low=2, high=dim - 1)
    source = PureState.maximally_coherent(dim)
    seeds = np.random.default_rng(rng_seed).integers(0, 2 ** 63 - 1, size=trials)
    failures = []
    for seed in seeds:
        target = sample_pure(dim, int(seed), min_rank=k + 1)
        try:
            report = deterministic_feasible(source, target, k, budget)
            passed = report.deterministic_feasible
        except CoherenceError as e:
            logger.warning("target from seed %d failed: %s", seed, e)
            passed = False
        if not passed:
            logger.warning("maximally coherent state does not convert to %s", target.to_json())
            failures.append(target)
    return CorollaryCheck(dim, k, trials, failures)
