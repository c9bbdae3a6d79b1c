"""
Multilevel coherence measures of pure states.

`robustness_k` and `geometric_k` are the closed forms; `robustness_k_oracle`
and `geometric_k_oracle` recompute the same quantities from their
definitions (minimal admixture of a free state, maximal overlap with a
low-rank state) and serve as independent cross-checks.
"""

import itertools
import logging
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, List, Optional, Union

import numpy as np

from .codecs.json import JSONSerializable, JSONDeserializable, json_field
from .errors import InvalidStateError, NotAResourceStateError
from .statespace import (
    DensityOperator, LevelLike, PureState,
    as_level, coherence_rank, sorted_coeff_magnitudes,
)

if TYPE_CHECKING:
    from .oracles import OptimalDelta, OracleBudget

logger = logging.getLogger(__name__)


def _decode_witness(raw: Any) -> "OptimalDelta":
    from .oracles import OptimalDelta

    return OptimalDelta.from_dict(raw)


@dataclass(frozen=True)
class RobustnessResult(JSONSerializable, JSONDeserializable):
    """R_k of a pure state together with the split index of the closed form.

    ``l_star`` is the largest l in {2, ..., k} with nu_{l-1} >= s_l/(k-l+1)
    (1 when none qualifies) and ``tail_sum`` is s_l = sum_{i>=l} nu_i.
    ``split_unique`` is False when more than one l in {2, ..., k} satisfies
    that inequality.
    """
    value: float
    l_star: int
    tail_sum: float
    split_unique: bool = True


@dataclass(frozen=True)
class GeometricResult(JSONSerializable, JSONDeserializable):
    value: float


@dataclass(frozen=True, eq=False)
class RobustnessBound(JSONSerializable, JSONDeserializable):
    """Certified upper bound on R_k from the robustness oracle.

    ``converged`` is True when the bound is known to be the minimum. For pure
    states the column-generation search closes the gap to its own dual lower
    bound; mixed states never converge.
    """
    value: float
    converged: bool
    witness: Optional["OptimalDelta"] = json_field(default=None, deserializer=_decode_witness)

    def __float__(self) -> float:
        return self.value


def split_indices(magnitudes: np.ndarray, k: int) -> List[int]:
    """Every l in {2, ..., k}, largest first, with nu_{l-1} >= s_l/(k-l+1).

    ``magnitudes`` must be sorted in non-increasing order.
    """
    return [
        l for l in range(k, 1, -1)
        if magnitudes[l - 2] >= magnitudes[l - 1:].sum() / (k - l + 1)
    ]


def _split_value(magnitudes: np.ndarray, l: int, k: int) -> float:
    tail = magnitudes[l - 1:]
    return float(tail.sum()) ** 2 / (k - l + 1) - float(np.dot(tail, tail))


def robustness_k(state: PureState, level: LevelLike) -> RobustnessResult:
    """Closed-form robustness of k-coherence of a pure state.

    The state is first reduced to sorted non-negative magnitudes nu_1 >= ... >= nu_d,
    which leaves R_k unchanged. Then

        R_k = s_l^2 / (k - l + 1) - sum_{i >= l} nu_i^2

    with l and s_l as described on `RobustnessResult`. States of coherence
    rank at most k get exactly 0. When several indices satisfy the defining
    inequality the largest is used, and all of them are logged with the values
    they would give.
    """
    k = as_level(level).check(state.dim, low=2)
    nu = sorted_coeff_magnitudes(state)

    candidates = split_indices(nu, k)
    l_star = candidates[0] if candidates else 1
    tail_sum = float(nu[l_star - 1:].sum())
    unique = len(candidates) <= 1
    if not unique:
        logger.info(
            "split index is not unique for k=%d: l in %s gives %s, using l=%d",
            k, candidates, [_split_value(nu, l, k) for l in candidates], l_star,
        )

    if coherence_rank(state) <= k:
        return RobustnessResult(0.0, l_star, tail_sum, unique)
    value = _split_value(nu, l_star, k)
    return RobustnessResult(max(0.0, value), l_star, tail_sum, unique)


def geometric_k(state: PureState, level: LevelLike) -> GeometricResult:
    """Closed-form geometric measure: the squared moduli below the k-1 largest.

    The tail is summed directly, so the value stays positive for every state
    of coherence rank at least k however small its tail is.
    """
    k = as_level(level).check(state.dim, low=2)
    tail = sorted_coeff_magnitudes(state)[k - 1:]
    return GeometricResult(min(float(np.dot(tail, tail)), 1.0))


def geometric_k_oracle(state: PureState, level: LevelLike) -> float:
    """Geometric measure by enumeration of (k-1)-element supports.

    On a fixed support S the closest pure state is the renormalized restriction
    of the input, with squared overlap sum_{i in S} |c_i|^2. The measure is the
    smallest weight left outside a support.
    """
    k = as_level(level).check(state.dim, low=2)
    weights = np.abs(state.coeffs) ** 2
    best = 1.0
    for support in itertools.combinations(range(state.dim), k - 1):
        outside = np.ones(state.dim, dtype=bool)
        outside[list(support)] = False
        best = min(best, float(weights[outside].sum()))
    return best


def robustness_k_oracle(
    state: Union[DensityOperator, PureState],
    level: LevelLike,
    budget: Optional["OracleBudget"] = None,
) -> RobustnessBound:
    """Upper bound on R_k from its definition, certified by explicit decompositions.

    Pure inputs (including rank-one density operators) go through
    `optimal_delta` with the column-generation search, which never consults
    `robustness_k`; mixed inputs through the convexity bound refined by
    bisection. See `kcoherence.oracles`.
    """
    from .oracles import OracleBudget, robustness_upper_bound

    return robustness_upper_bound(state, level, budget or OracleBudget())


def conversion_ratio(source: PureState, target: PureState, level: LevelLike) -> float:
    """G_{k+1}(source) / (R_k(target) [1 - G_{k+1}(source)]), unclamped.

    Both states must be resource states at level k (coherence rank above k).
    """
    if source.dim != target.dim:
        raise InvalidStateError(f"source has dim {source.dim} but target has dim {target.dim}")
    k = as_level(level).check(source.dim, low=2, high=source.dim - 1)
    _require_resource(source, k, "source")
    _require_resource(target, k, "target")
    g = geometric_k(source, k + 1).value
    r = robustness_k(target, k).value
    return g / (r * (1.0 - g))


def nonisolation_threshold(target: PureState, level: LevelLike) -> float:
    """1 - 1/(R_k(target) + 1): sources above it convert deterministically to target."""
    r = robustness_k(target, level).value
    return 1.0 - 1.0 / (r + 1.0)


def _require_resource(state: PureState, k: int, role: str) -> None:
    rank = coherence_rank(state)
    if rank <= k:
        raise NotAResourceStateError(role, k, rank)

