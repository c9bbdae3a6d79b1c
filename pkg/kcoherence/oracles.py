"""
Numerical oracles for the I_k hierarchy: membership certificates for density
operators, the optimal free admixture behind the robustness of a pure state,
and seeded random sampling.

Every positive answer is constructive. A certificate lists pure components of
coherence rank at most k together with the Frobenius distance between their
mixture and the certified operator. A failed certification proves nothing.
"""

import itertools
import logging
from dataclasses import dataclass, replace
from math import comb
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import linprog, minimize, nnls
from scipy.special import logsumexp, softmax

from .codecs.json import JSONSerializable, JSONDeserializable
from .errors import (
    InvalidConstraintError, InvalidOperatorError, InvalidStateError,
    NotAResourceStateError, OracleError,
)
from .measures import RobustnessBound, robustness_k
from .statespace import (
    CanonicalForm, DensityOperator, LevelLike, PureState,
    as_level, canonicalize, coherence_rank,
)

logger = logging.getLogger(__name__)

CERTIFICATE_ZERO_TOL = 1e-9
ORACLE_AGREEMENT = 1e-3
WEIGHT_TOL = 1e-8

_DROP_TOL = 1e-14
_DOMINANCE_SLACK = 1e-10
_INCLUSION_SLACK = 1e-12
_MARGINAL_TOL = 1e-11
_RANK_ONE_TOL = 1e-10
_CHECK_EVERY = 25
_BISECTION_STEPS = 30
_MAX_REJECTIONS = 10_000
_PRICING_TOL = 1e-7
_SEARCH_GAP = 1e-6
_LP_OPTIONS = {"primal_feasibility_tolerance": 1e-9, "dual_feasibility_tolerance": 1e-9}

METHODS = ("search", "split")


@dataclass(frozen=True)
class OracleBudget(JSONSerializable, JSONDeserializable):
    """Iteration, restart and tolerance limits shared by the oracles."""
    max_iterations: int = 2000
    restarts: int = 20
    seed: int = 0
    tolerance: float = 1e-7

    def __post_init__(self):
        for name in ("max_iterations", "restarts"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, np.integer)) or value < 1:
                raise ValueError(f"{name} must be a positive integer, got: {value!r}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)) \
                or not 0 <= self.seed < 2 ** 64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got: {self.seed!r}")
        if not (np.isfinite(self.tolerance) and self.tolerance > 0):
            raise ValueError(f"tolerance must be positive, got: {self.tolerance!r}")

    def scaled(self, factor: int) -> "OracleBudget":
        """Same seed and tolerance with ``factor`` times the iterations and restarts."""
        return replace(
            self,
            max_iterations=self.max_iterations * factor,
            restarts=self.restarts * factor,
        )

    def rng(self, *salt: int) -> np.random.Generator:
        return np.random.default_rng([int(self.seed), *(int(s) for s in salt)])


@dataclass(frozen=True, eq=False)
class CertificateComponent(JSONSerializable, JSONDeserializable):
    """One term ``weight |coeffs><coeffs|`` of a certificate; ``coeffs`` has unit norm."""
    weight: float
    coeffs: np.ndarray

    def __post_init__(self):
        if not (np.isfinite(self.weight) and self.weight > 0):
            raise InvalidStateError(f"component weight must be positive, got: {self.weight!r}")
        coeffs = np.array(self.coeffs, dtype=np.complex128).reshape(-1)
        norm2 = float(np.vdot(coeffs, coeffs).real)
        if abs(norm2 - 1.0) > CERTIFICATE_ZERO_TOL:
            raise InvalidStateError(f"component has squared norm {norm2!r}")
        coeffs.setflags(write=False)
        object.__setattr__(self, "weight", float(self.weight))
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def rank(self) -> int:
        return int(np.count_nonzero(np.abs(self.coeffs) > CERTIFICATE_ZERO_TOL))

    @property
    def state(self) -> PureState:
        return PureState.from_amplitudes(self.coeffs)


@dataclass(frozen=True, eq=False)
class IkCertificate(JSONSerializable, JSONDeserializable):
    """Decomposition of an operator into pure states of coherence rank <= level."""
    level: int
    components: List[CertificateComponent]
    residual: float

    def __post_init__(self):
        if isinstance(self.level, bool) or not isinstance(self.level, (int, np.integer)) or self.level < 1:
            raise ValueError(f"level must be a positive integer, got: {self.level!r}")
        if not self.components:
            raise ValueError("certificate has no components")
        if not self.residual >= 0:
            raise ValueError(f"residual must be non-negative, got: {self.residual!r}")
        object.__setattr__(self, "level", int(self.level))
        object.__setattr__(self, "components", list(self.components))
        object.__setattr__(self, "residual", float(self.residual))

    @property
    def dim(self) -> int:
        return self.components[0].coeffs.shape[0]

    @property
    def total_weight(self) -> float:
        return float(sum(component.weight for component in self.components))

    def operator(self) -> np.ndarray:
        """sum_i weight_i |c_i><c_i|."""
        coeffs = np.stack([component.coeffs for component in self.components])
        weights = np.array([component.weight for component in self.components])
        return (coeffs.T * weights) @ coeffs.conj()

    def distance_to(self, op: Union[DensityOperator, np.ndarray]) -> float:
        return float(np.linalg.norm(self.operator() - _matrix(op)))

    def is_valid(self, op: Union[DensityOperator, np.ndarray], tolerance: float = 1e-7) -> bool:
        matrix = _matrix(op)
        trace = float(np.trace(matrix).real)
        return (
            all(component.rank <= self.level for component in self.components)
            and all(component.weight <= 1.0 + WEIGHT_TOL for component in self.components)
            and abs(self.total_weight - trace) <= WEIGHT_TOL
            and self.distance_to(matrix) <= tolerance
        )

    def lifted(self, form: CanonicalForm) -> "IkCertificate":
        """The same certificate for the input-frame operator of a canonical form."""
        components = [
            CertificateComponent(component.weight, form.lift(component.coeffs))
            for component in self.components
        ]
        return IkCertificate(self.level, components, self.residual)


@dataclass(frozen=True, eq=False)
class OptimalDelta(JSONSerializable, JSONDeserializable):
    """A free state delta and weight s with (target + s delta)/(1 + s) in I_k.

    Both memberships come with certificates. ``converged`` is True when both
    certificates are valid and s is known to be minimal within
    `ORACLE_AGREEMENT`, by a dual bound or by the closed form depending on
    the backend that produced it.
    """
    delta: DensityOperator
    s_value: float
    delta_certificate: IkCertificate
    mix_certificate: IkCertificate
    converged: bool


def _matrix(op: Union[DensityOperator, np.ndarray]) -> np.ndarray:
    if isinstance(op, DensityOperator):
        return op.matrix
    return np.asarray(op, dtype=np.complex128)


def _component(weight: float, vector: np.ndarray) -> CertificateComponent:
    """``weight |vector><vector|`` rewritten with a unit vector."""
    vector = np.asarray(vector, dtype=np.complex128)
    norm2 = float(np.vdot(vector, vector).real)
    return CertificateComponent(weight * norm2, vector / np.sqrt(norm2))


def _certificate(matrix: np.ndarray, k: int, components: Sequence[CertificateComponent]) -> IkCertificate:
    certificate = IkCertificate(k, list(components), 0.0)
    return replace(certificate, residual=certificate.distance_to(matrix))


def _basis(dim: int, index: int) -> np.ndarray:
    vector = np.zeros(dim, dtype=np.complex128)
    vector[index] = 1.0
    return vector


# Certification strategies. Each returns candidate components or None when it does not apply.

_Strategy = Callable[[np.ndarray, int, "OracleBudget", Optional[List[np.ndarray]]], Optional[List[CertificateComponent]]]


def _diagonal_components(matrix, k, budget, atoms):
    dim = matrix.shape[0]
    if np.max(np.abs(matrix - np.diag(matrix.diagonal()))) > _DROP_TOL:
        return None
    return [
        _component(weight, _basis(dim, i))
        for i, weight in enumerate(matrix.diagonal().real) if weight > _DROP_TOL
    ]


def _eigen_components(matrix: np.ndarray) -> List[CertificateComponent]:
    values, vectors = np.linalg.eigh(matrix)
    return [_component(value, column) for value, column in zip(values, vectors.T) if value > _DROP_TOL]


def _spectral_components(matrix, k, budget, atoms):
    components = _eigen_components(matrix)
    if any(component.rank > k for component in components):
        return None
    return components


def _atom_components(matrix, k, budget, atoms):
    if not atoms:
        return None
    atoms = [a for a in atoms if np.count_nonzero(np.abs(a) > CERTIFICATE_ZERO_TOL) <= k]
    if not atoms:
        return None
    return _nnls_fit(matrix, atoms)


def _nnls_fit(matrix: np.ndarray, atoms: Sequence[np.ndarray]) -> Optional[List[CertificateComponent]]:
    """Non-negative least squares over the projectors of ``atoms``.

    The active-set solution keeps at most as many atoms as the real dimension
    of the Hermitian matrices, d^2.
    """
    units = [np.asarray(a, dtype=np.complex128) / np.linalg.norm(a) for a in atoms]
    projectors = np.stack([np.outer(u, u.conj()).reshape(-1) for u in units], axis=1)
    design = np.vstack([projectors.real, projectors.imag])
    goal = np.concatenate([matrix.reshape(-1).real, matrix.reshape(-1).imag])
    weights, _ = nnls(design, goal, maxiter=50 * design.shape[1])
    components = [_component(w, u) for w, u in zip(weights, units) if w > _DROP_TOL]
    return components or None


def _dominant_components(matrix, k, budget, atoms):
    """Two-level decomposition of a (scaled) diagonally dominant operator.

    Each off-diagonal entry m_ij becomes |m_ij| times the projector of
    sqrt(t) e_i + (conj(m_ij)/|m_ij|)/sqrt(t) e_j; the remaining diagonal is
    covered by basis states. t = 1 first, then t = sqrt(rho_jj / rho_ii).
    """
    if k < 2:
        return None
    dim = matrix.shape[0]
    diagonal = matrix.diagonal().real
    root = np.sqrt(np.clip(diagonal, 0.0, None))
    for scaled in (False, True):
        components = []
        rest = diagonal.copy()
        for i, j in itertools.combinations(range(dim), 2):
            size = abs(matrix[i, j])
            if size <= _DROP_TOL:
                continue
            if scaled and (root[i] == 0 or root[j] == 0):
                break
            t = root[j] / root[i] if scaled else 1.0
            vector = np.zeros(dim, dtype=np.complex128)
            vector[i] = np.sqrt(t)
            vector[j] = np.conj(matrix[i, j]) / size / np.sqrt(t)
            rest[i] -= size * t
            rest[j] -= size / t
            components.append(_component(size, vector))
        else:
            if rest.min() >= -_DOMINANCE_SLACK:
                components.extend(
                    _component(weight, _basis(dim, i))
                    for i, weight in enumerate(rest) if weight > _DROP_TOL
                )
                if components:
                    return components
    return None


def _project_psd(blocks: np.ndarray) -> np.ndarray:
    blocks = (blocks + blocks.conj().swapaxes(-1, -2)) / 2
    values, vectors = np.linalg.eigh(blocks)
    values = np.clip(values, 0.0, None)
    return (vectors * values[..., None, :]) @ vectors.conj().swapaxes(-1, -2)


def _block_components(matrix, k, budget, atoms):
    """Accelerated projected gradient over PSD blocks on all k-subsets.

    Minimizes ||sum_S X_S - rho||_F^2 with X_S >= 0 supported on S. The
    gradient is Lipschitz with constant 2 C(d-1, k-1), the largest number of
    blocks covering one entry. Momentum restarts whenever it points uphill.
    """
    dim = matrix.shape[0]
    supports = np.array(list(itertools.combinations(range(dim), k)))
    shape = (len(supports), k, k)
    rows = np.broadcast_to(supports[:, :, None], shape)
    cols = np.broadcast_to(supports[:, None, :], shape)
    cover = comb(dim - 1, k - 1)
    step = 1.0 / cover

    def assemble(blocks):
        total = np.zeros((dim, dim), dtype=np.complex128)
        np.add.at(total, (rows, cols), blocks)
        return total

    blocks = _project_psd(matrix[rows, cols] / cover)
    momentum = blocks.copy()
    t = 1.0
    error = np.inf
    for iteration in range(1, budget.max_iterations + 1):
        gradient = (assemble(momentum) - matrix)[rows, cols]
        updated = _project_psd(momentum - step * gradient)
        if np.sum(((momentum - updated).conj() * (updated - blocks)).real) > 0:
            t = 1.0
            momentum = updated
        else:
            t_next = (1.0 + np.sqrt(1.0 + 4.0 * t * t)) / 2.0
            momentum = updated + ((t - 1.0) / t_next) * (updated - blocks)
            t = t_next
        blocks = updated
        if iteration % _CHECK_EVERY == 0:
            error = float(np.linalg.norm(assemble(blocks) - matrix))
            logger.debug("block search k=%d iteration %d: residual %.3e", k, iteration, error)
            if error <= budget.tolerance / 10:
                break

    values, vectors = np.linalg.eigh(blocks)
    units = []
    weights = []
    for support, block_values, block_vectors in zip(supports, values, vectors):
        for value, column in zip(block_values, block_vectors.T):
            if value > _DROP_TOL:
                vector = np.zeros(dim, dtype=np.complex128)
                vector[support] = column
                units.append(vector)
                weights.append(value)
    if not units:
        return None
    weights = np.array(weights) * (np.trace(matrix).real / np.sum(weights))
    components = [_component(w, u) for w, u in zip(weights, units)]
    if len(components) > dim * dim:
        components = _nnls_fit(matrix, units)
    return components


_STRATEGIES: Tuple[Tuple[str, _Strategy], ...] = (
    ("diagonal", _diagonal_components),
    ("spectral", _spectral_components),
    ("atoms", _atom_components),
    ("dominance", _dominant_components),
    ("blocks", _block_components),
)


def certify_in_Ik(
    op: DensityOperator,
    level: LevelLike,
    budget: Optional[OracleBudget] = None,
    atoms: Optional[Sequence[Union[PureState, np.ndarray]]] = None,
) -> Optional[IkCertificate]:
    """Search for a decomposition of ``op`` into pure states of coherence rank <= k.

    Exact constructions are tried first (diagonal operators, eigenvectors of
    low rank, which settles k = d, non-negative fits over the optional
    ``atoms``, two-level decompositions of diagonally dominant operators),
    then a projected-gradient search over PSD blocks on all k-subsets.

    Returns:
        A certificate with residual at most ``budget.tolerance``, or None. None
        does not prove that ``op`` lies outside I_k, except for rank-one
        operators where membership is decided exactly.
    """
    if not isinstance(op, DensityOperator):
        raise InvalidOperatorError(f"expected a DensityOperator, got: {type(op).__name__}")
    budget = budget or OracleBudget()
    k = as_level(level).check(op.dim)
    matrix = op.matrix
    vectors = None
    if atoms is not None:
        vectors = [a.coeffs if isinstance(a, PureState) else np.asarray(a, dtype=np.complex128) for a in atoms]

    rank_one = np.linalg.eigvalsh(matrix)[-2] <= _RANK_ONE_TOL * op.trace
    for name, strategy in _STRATEGIES:
        components = strategy(matrix, k, budget, vectors)
        if components is None:
            if name == "spectral" and rank_one:
                logger.debug("rank-one operator has coherence rank above k=%d", k)
                return None
            continue
        certificate = _certificate(matrix, k, components)
        if certificate.is_valid(matrix, budget.tolerance):
            logger.debug(
                "certified in I_%d by %s: %d components, residual %.3e",
                k, name, len(certificate.components), certificate.residual,
            )
            return certificate
        logger.debug("%s decomposition rejected, residual %.3e", name, certificate.residual)
    logger.debug("no I_%d certificate within budget", k)
    return None


@dataclass(frozen=True)
class _Split:
    head: int
    s_value: float
    norm2: float
    weights: np.ndarray
    atoms: np.ndarray


def _max_entropy_design(incidence: np.ndarray, marginals: np.ndarray, budget: OracleBudget) -> np.ndarray:
    """Weights over fixed-size subsets, proportional to prod_{j in Q} w_j, with given inclusion marginals.

    Fits log w by minimizing the convex dual logsumexp(B theta) - pi . theta
    with theta_0 fixed at 0 (the objective is invariant under a common shift).
    """
    def full(x):
        return np.concatenate(([0.0], x))

    def objective(x):
        theta = full(x)
        return logsumexp(incidence @ theta) - marginals @ theta

    def gradient(x):
        p = softmax(incidence @ full(x))
        return (incidence.T @ p - marginals)[1:]

    def hessian(x):
        p = softmax(incidence @ full(x))
        mean = incidence.T @ p
        return ((incidence.T * p) @ incidence - np.outer(mean, mean))[1:, 1:]

    start = np.log(marginals / (1.0 - marginals))
    start = start[1:] - start[0]
    rng = budget.rng(*incidence.shape)
    best_error, best_weights = np.inf, None
    for restart in range(budget.restarts):
        x0 = start if restart == 0 else start + rng.normal(size=start.shape)
        result = minimize(
            objective, x0, jac=gradient, hess=hessian, method="trust-exact",
            options={"maxiter": budget.max_iterations, "gtol": _MARGINAL_TOL},
        )
        weights = softmax(incidence @ full(result.x))
        error = float(np.max(np.abs(incidence.T @ weights - marginals)))
        if error < best_error:
            best_error, best_weights = error, weights
        if error <= _MARGINAL_TOL:
            break
    if best_error > _MARGINAL_TOL:
        logger.warning("subset design misses its marginals by %.3e", best_error)
    return best_weights


def _split_candidate(nu: np.ndarray, head: int, k: int, budget: OracleBudget) -> Optional[_Split]:
    """Mixture of rank-k atoms that keep the top ``head`` magnitudes and flatten the tail.

    Every atom equals nu on the head and beta = (sum of tail)/(k - head) on a
    (k - head)-subset of the tail. The subset distribution has inclusion
    probabilities nu_j / beta, which requires nu_j <= beta on the whole tail.
    """
    dim = nu.shape[0]
    slots = k - head
    tail = nu[head:]
    beta = float(tail.sum()) / slots
    inclusion = tail / beta
    if inclusion.max() > 1.0 + _INCLUSION_SLACK:
        return None

    forced = np.flatnonzero(inclusion >= 1.0 - _INCLUSION_SLACK)
    free = np.flatnonzero((inclusion < 1.0 - _INCLUSION_SLACK) & (tail > CERTIFICATE_ZERO_TOL))
    picks = slots - len(forced)
    if picks <= 0 or picks >= len(free):
        subsets = [np.concatenate([forced, free[:max(picks, 0)]])]
        weights = np.ones(1)
    else:
        combos = list(itertools.combinations(range(len(free)), picks))
        incidence = np.zeros((len(combos), len(free)))
        for row, combo in enumerate(combos):
            incidence[row, list(combo)] = 1.0
        marginals = inclusion[free] * (picks / inclusion[free].sum())
        weights = _max_entropy_design(incidence, marginals, budget)
        subsets = [np.concatenate([forced, free[list(combo)]]) for combo in combos]

    atoms = np.zeros((len(subsets), dim))
    atoms[:, :head] = nu[:head]
    for row, subset in enumerate(subsets):
        atoms[row, head + subset.astype(int)] = beta
    norm2 = float(np.dot(nu[:head], nu[:head])) + slots * beta * beta
    return _Split(head, norm2 - 1.0, norm2, weights, atoms)


def _laplacian(matrix: np.ndarray) -> np.ndarray:
    """Symmetric part of ``matrix`` with off-diagonals clipped to <= 0 and zero row sums."""
    symmetric = (matrix + matrix.T) / 2
    off = np.minimum(symmetric, 0.0)
    np.fill_diagonal(off, 0.0)
    return off - np.diag(off.sum(axis=1))


def optimal_delta(
    target: PureState,
    level: LevelLike,
    budget: Optional[OracleBudget] = None,
    method: str = "search",
) -> OptimalDelta:
    """Free state delta minimizing s subject to (target + s delta)/(1 + s) in I_k.

    ``method`` selects the backend:

    * ``"search"`` (default) solves the definition numerically by column
      generation over rank-k pure states and never consults the closed form;
      ``converged`` means the dual bound closes within `ORACLE_AGREEMENT`.
    * ``"split"`` builds delta directly from the sorted magnitudes of the
      target; ``converged`` means s agrees with `robustness_k`.

    Raises:
        LevelOutOfRangeError: unless 2 <= k <= d - 1.
        NotAResourceStateError: when the target has coherence rank <= k.
        ValueError: for an unknown ``method``.
    """
    if method not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got: {method!r}")
    budget = budget or OracleBudget()
    k = as_level(level).check(target.dim, low=2, high=target.dim - 1)
    rank = coherence_rank(target)
    if rank <= k:
        raise NotAResourceStateError("target", k, rank)
    if method == "split":
        return _split_delta(target, k, budget)
    return _searched_delta(target, k, budget)


def _split_delta(target: PureState, k: int, budget: OracleBudget) -> OptimalDelta:
    """Optimal delta from the split structure of the sorted magnitudes nu.

    Searches over the number of leading magnitudes kept intact. For each
    feasible split the mixture tau of rank-k atoms (see `_split_candidate`)
    satisfies N^2 tau = |nu><nu| + M, where M is a weighted graph Laplacian on
    the tail with trace s = N^2 - 1. Then delta = M/s, and both delta and tau
    come with explicit certificates. The smallest s over all splits is kept;
    the results are mapped back through the permutation and phases of the target.
    """
    form = canonicalize(target)
    nu = form.magnitudes
    best: Optional[_Split] = None
    for head in range(k):
        candidate = _split_candidate(nu, head, k, budget)
        if candidate is None:
            continue
        logger.debug("split head=%d: s=%.12g over %d atoms", head, candidate.s_value, len(candidate.atoms))
        if best is None or candidate.s_value < best.s_value:
            best = candidate
    if best is None:
        raise OracleError(f"no feasible split for k={k}")

    mixture = (best.atoms.T * best.weights) @ best.atoms
    excess = _laplacian(mixture - np.outer(nu, nu))
    s_value = best.s_value
    unitary = form.unitary()

    canonical_delta = (excess / np.trace(excess)).astype(np.complex128)
    delta_matrix = unitary @ canonical_delta @ unitary.conj().T
    delta_matrix = (delta_matrix + delta_matrix.conj().T) / 2
    delta = DensityOperator(target.dim, delta_matrix / np.trace(delta_matrix).real)

    components = _dominant_components(canonical_delta, k, budget, None)
    if components is None:
        logger.warning("optimal delta is not diagonally dominant, falling back to block search")
        delta_certificate = (
            certify_in_Ik(delta, k, budget)
            or _certificate(delta.matrix, k, _eigen_components(delta.matrix))
        )
    else:
        delta_certificate = _certificate(canonical_delta, k, components).lifted(form)
        delta_certificate = replace(delta_certificate, residual=delta_certificate.distance_to(delta))

    mix_target = (np.outer(target.coeffs, target.coeffs.conj()) + s_value * delta.matrix) / (1.0 + s_value)
    mix_components = [
        CertificateComponent(weight, form.lift(atom / np.sqrt(best.norm2)))
        for weight, atom in zip(best.weights, best.atoms) if weight > _DROP_TOL
    ]
    if len(mix_components) > target.dim ** 2:
        mix_components = _nnls_fit(mix_target, [c.coeffs for c in mix_components])
    mix_certificate = _certificate(mix_target, k, mix_components)

    analytic = robustness_k(target, k).value
    converged = (
        delta_certificate.is_valid(delta, budget.tolerance)
        and mix_certificate.is_valid(mix_target, budget.tolerance)
        and abs(s_value - analytic) <= ORACLE_AGREEMENT
    )
    if not converged:
        logger.warning(
            "optimal delta for k=%d not converged: s=%r, closed form %r, residuals %.3e/%.3e",
            k, s_value, analytic, delta_certificate.residual, mix_certificate.residual,
        )
    return OptimalDelta(delta, float(s_value), delta_certificate, mix_certificate, converged)


@dataclass(frozen=True)
class _Search:
    """Solution of the restricted problem after the last pricing round."""
    s_value: float
    lower: float
    mixed: np.ndarray
    mixed_weights: np.ndarray
    free: np.ndarray
    free_weights: np.ndarray

    @property
    def gap(self) -> float:
        return self.s_value - self.lower


class _HermitianCoordinates:
    """Real coordinates of d x d Hermitian matrices: Re of the upper triangle, then Im above the diagonal."""

    def __init__(self, dim: int):
        self.dim = dim
        self.rows, self.cols = np.triu_indices(dim)
        self.off = self.rows != self.cols

    def of_matrix(self, matrix: np.ndarray) -> np.ndarray:
        upper = matrix[self.rows, self.cols]
        return np.concatenate([upper.real, upper[self.off].imag])

    def of_projectors(self, atoms: np.ndarray) -> np.ndarray:
        """One column per row of ``atoms``: the coordinates of |a><a|."""
        upper = atoms[:, self.rows] * atoms[:, self.cols].conj()
        return np.hstack([upper.real, upper[:, self.off].imag]).T

    def dual_matrix(self, duals: np.ndarray) -> np.ndarray:
        """Hermitian W with tr(W M) equal to ``duals`` dotted with the coordinates of M."""
        count = len(self.rows)
        upper = duals[:count].astype(np.complex128)
        upper[self.off] = (duals[:count][self.off] + 1j * duals[count:]) / 2
        matrix = np.zeros((self.dim, self.dim), dtype=np.complex128)
        matrix[self.rows, self.cols] = upper
        return matrix + np.triu(matrix, 1).conj().T


def _seed_atoms(target: PureState, supports: Sequence[np.ndarray], rng: np.random.Generator) -> np.ndarray:
    """Basis and two-level states, restrictions of the target, and d^2 random rank-k states."""
    dim = target.dim
    atoms = [_basis(dim, i) for i in range(dim)]
    for i, j in itertools.combinations(range(dim), 2):
        for phase in (1.0, -1.0, 1j, -1j):
            vector = np.zeros(dim, dtype=np.complex128)
            vector[i], vector[j] = 1.0, phase
            atoms.append(vector / np.sqrt(2.0))
    for support in supports:
        vector = np.zeros(dim, dtype=np.complex128)
        vector[support] = target.coeffs[support]
        norm = np.linalg.norm(vector)
        if norm > CERTIFICATE_ZERO_TOL:
            atoms.append(vector / norm)
    for _ in range(dim * dim):
        atoms.append(random_pure(dim, rng, supports[int(rng.integers(len(supports)))]))
    return np.array(atoms)


def _embed(dim: int, support: np.ndarray, vector: np.ndarray) -> np.ndarray:
    full = np.zeros(dim, dtype=np.complex128)
    full[support] = vector
    return full


def _column_generation(target: PureState, k: int, budget: OracleBudget, rng: np.random.Generator) -> Optional[_Search]:
    """Minimize tr(T) - 1 over T = |target><target| + Y with T and Y in the cone of I_k.

    Both cones are generated by pure states of coherence rank <= k. The
    restricted problem over a finite set of them is a linear program; its dual
    matrix W prices new states: a mixture state a improves the objective when
    <a|W|a> > 1, a free state b when <b|W|b> < 0, and the extreme cases on each
    k-subset are eigenvectors of the corresponding block of W. Shifting and
    scaling W into the dual cone gives a lower bound on the minimum.
    """
    dim = target.dim
    coordinates = _HermitianCoordinates(dim)
    goal = coordinates.of_matrix(np.outer(target.coeffs, target.coeffs.conj()))
    supports = [np.array(support) for support in itertools.combinations(range(dim), k)]
    mixed = free = _seed_atoms(target, supports, rng)

    search = None
    for iteration in range(budget.max_iterations):
        design = np.hstack([coordinates.of_projectors(mixed), -coordinates.of_projectors(free)])
        cost = np.concatenate([np.ones(len(mixed)), np.zeros(len(free))])
        result = linprog(cost, A_eq=design, b_eq=goal, bounds=(0, None), method="highs", options=_LP_OPTIONS)
        if result.status != 0:
            logger.warning("restricted problem failed at iteration %d: %s", iteration, result.message)
            break
        duals = np.asarray(result.eqlin.marginals)
        if np.dot(goal, duals) < 0:
            duals = -duals
        dual = coordinates.dual_matrix(duals)

        top, bottom = -np.inf, np.inf
        new_mixed, new_free = [], []
        for support in supports:
            values, vectors = np.linalg.eigh(dual[np.ix_(support, support)])
            top, bottom = max(top, values[-1]), min(bottom, values[0])
            if values[-1] > 1.0 + _PRICING_TOL:
                new_mixed.append(_embed(dim, support, vectors[:, -1]))
            if values[0] < -_PRICING_TOL:
                new_free.append(_embed(dim, support, vectors[:, 0]))

        shift = max(0.0, -bottom)
        overlap = float(np.vdot(target.coeffs, dual @ target.coeffs).real)
        lower = (overlap + shift) / max(1.0, top + shift) - 1.0
        weights = np.asarray(result.x)
        free_weights = weights[len(mixed):]
        search = _Search(
            s_value=float(free_weights.sum()),
            lower=max(0.0, lower),
            mixed=mixed,
            mixed_weights=weights[:len(mixed)],
            free=free,
            free_weights=free_weights,
        )
        logger.debug("column generation iteration %d: s=%.12g, lower bound %.12g", iteration, search.s_value, lower)
        if not new_mixed and not new_free:
            break
        if new_mixed:
            mixed = np.vstack([mixed, np.array(new_mixed)])
        if new_free:
            free = np.vstack([free, np.array(new_free)])
    return search


def _searched_delta(target: PureState, k: int, budget: OracleBudget) -> OptimalDelta:
    """Optimal delta by column generation, restarted from random sets of rank-k states.

    The restart with the smallest s wins (the earliest on ties); restarts stop
    once the dual bound is within `_SEARCH_GAP`. With delta fixed, s is then
    bisected between the dual bound and the primal value while the two differ
    by more than `_SEARCH_GAP`, with `certify_in_Ik` deciding feasibility of
    each mixture.
    """
    best: Optional[_Search] = None
    for restart in range(budget.restarts):
        search = _column_generation(target, k, budget, budget.rng(target.dim, k, restart))
        if search is None or search.s_value <= _DROP_TOL:
            continue
        logger.debug("restart %d: s=%.12g, gap %.3e", restart, search.s_value, search.gap)
        if best is None or search.s_value < best.s_value:
            best = search
        if best.gap <= _SEARCH_GAP:
            break
    if best is None:
        raise OracleError(f"column generation found no admissible delta for k={k}")

    dim = target.dim
    keep = best.free_weights > _DROP_TOL
    delta_components = [
        CertificateComponent(w / best.s_value, atom)
        for w, atom in zip(best.free_weights[keep], best.free[keep])
    ]
    delta_matrix = IkCertificate(k, delta_components, 0.0).operator()
    delta_matrix = (delta_matrix + delta_matrix.conj().T) / 2
    delta = DensityOperator(dim, delta_matrix / np.trace(delta_matrix).real)
    if len(delta_components) > dim * dim:
        delta_components = _nnls_fit(delta.matrix, [c.coeffs for c in delta_components])
    delta_certificate = _certificate(delta.matrix, k, delta_components)

    projector = np.outer(target.coeffs, target.coeffs.conj())

    def mixture(s: float) -> DensityOperator:
        return DensityOperator(dim, (projector + s * delta.matrix) / (1.0 + s))

    hints = [atom for w, atom in zip(best.mixed_weights, best.mixed) if w > _DROP_TOL]
    hints += [c.coeffs for c in delta_components]
    low, high = best.lower, best.s_value
    mix_certificate = certify_in_Ik(mixture(high), k, budget, atoms=hints)
    if mix_certificate is None:
        mix_certificate = _certificate(mixture(high).matrix, k, [
            _component(w / (1.0 + high), atom)
            for w, atom in zip(best.mixed_weights, best.mixed) if w > _DROP_TOL
        ])
    else:
        for step in range(_BISECTION_STEPS):
            if high - low <= _SEARCH_GAP:
                break
            middle = (low + high) / 2
            certificate = certify_in_Ik(mixture(middle), k, budget, atoms=hints)
            logger.debug("bisection step %d: s=%.6g %s", step, middle, "feasible" if certificate else "not certified")
            if certificate is None:
                low = middle
            else:
                high, mix_certificate = middle, certificate

    converged = (
        delta_certificate.is_valid(delta, budget.tolerance)
        and mix_certificate.is_valid(mixture(high), budget.tolerance)
        and high - best.lower <= ORACLE_AGREEMENT
    )
    if not converged:
        logger.warning(
            "delta search for k=%d not converged: s=%r, dual bound %r, residuals %.3e/%.3e",
            k, high, best.lower, delta_certificate.residual, mix_certificate.residual,
        )
    return OptimalDelta(delta, float(high), delta_certificate, mix_certificate, converged)


def random_pure(dim: int, rng: np.random.Generator, support: Optional[Sequence[int]] = None) -> np.ndarray:
    """Unit vector from the rotation-invariant distribution, optionally restricted to ``support``."""
    support = np.arange(dim) if support is None else np.asarray(support)
    vector = np.zeros(dim, dtype=np.complex128)
    vector[support] = rng.normal(size=len(support)) + 1j * rng.normal(size=len(support))
    return vector / np.linalg.norm(vector)


def sample_pure(dim: int, rng_seed: int, min_rank: Optional[int] = None) -> PureState:
    """Seeded random pure state; with ``min_rank``, resampled until its coherence rank reaches it."""
    if isinstance(dim, bool) or not isinstance(dim, (int, np.integer)) or dim < 2:
        raise InvalidStateError(f"dim must be an integer >= 2, got: {dim!r}")
    if min_rank is not None and not 1 <= min_rank <= dim:
        raise InvalidConstraintError(f"min_rank {min_rank} outside [1, {dim}]")
    rng = np.random.default_rng(rng_seed)
    for _ in range(_MAX_REJECTIONS):
        state = PureState(int(dim), random_pure(int(dim), rng))
        if min_rank is None or coherence_rank(state) >= min_rank:
            return state
    raise OracleError(f"no state of coherence rank >= {min_rank} after {_MAX_REJECTIONS} draws")


def sample_Ik_mixture(dim: int, level: LevelLike, rng: np.random.Generator) -> Tuple[DensityOperator, IkCertificate]:
    """Random element of I_k with its decomposition.

    The number of components is uniform in 1..d^2, weights are flat-Dirichlet,
    and each component is a random state on a random support of size 1..k.
    """
    k = as_level(level).check(dim)
    count = int(rng.integers(1, dim * dim, endpoint=True))
    weights = rng.dirichlet(np.ones(count))
    components = []
    for weight in weights:
        size = int(rng.integers(1, k, endpoint=True))
        support = rng.choice(dim, size=size, replace=False)
        if weight > 0:
            components.append(CertificateComponent(weight, random_pure(dim, rng, support)))
    certificate = IkCertificate(k, components, 0.0)
    op = DensityOperator(dim, certificate.operator() / certificate.total_weight)
    return op, _certificate(op.matrix, k, components)


def haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random n x n unitary: QR of a complex Gaussian matrix with the phases of R divided out."""
    z = (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    diagonal = np.diagonal(r)
    return q * (diagonal / np.abs(diagonal))


def robustness_upper_bound(
    state: Union[DensityOperator, PureState],
    level: LevelLike,
    budget: OracleBudget,
) -> RobustnessBound:
    """Backend of `kcoherence.measures.robustness_k_oracle`."""
    if isinstance(state, PureState):
        return _pure_bound(state, level, budget)
    if not isinstance(state, DensityOperator):
        raise InvalidOperatorError(f"expected a PureState or DensityOperator, got: {type(state).__name__}")

    op = state.normalized()
    k = as_level(level).check(op.dim, low=2)
    values, vectors = np.linalg.eigh(op.matrix)
    if values[-1] >= 1.0 - _RANK_ONE_TOL:
        return _pure_bound(PureState.from_amplitudes(vectors[:, -1]), k, budget)
    if k == op.dim or certify_in_Ik(op, k, budget) is not None:
        return RobustnessBound(0.0, True)
    return _mixed_bound(op, k, values, vectors, budget)


def _pure_bound(state: PureState, level: LevelLike, budget: OracleBudget) -> RobustnessBound:
    k = as_level(level).check(state.dim, low=2)
    if k == state.dim or coherence_rank(state) <= k:
        return RobustnessBound(0.0, True)
    witness = optimal_delta(state, k, budget)
    return RobustnessBound(witness.s_value, witness.converged, witness)


def _mixed_bound(
    op: DensityOperator,
    k: int,
    values: np.ndarray,
    vectors: np.ndarray,
    budget: OracleBudget,
) -> RobustnessBound:
    """Convexity bound over pure decompositions, tightened by bisection.

    Decompositions are the eigen-decomposition and its Haar-random re-mixings.
    The delta of the best one (the weighted optimal deltas of its components)
    stays fixed while s is bisected; for fixed delta feasibility is monotone in s.
    """
    keep = values > _DROP_TOL
    columns = vectors[:, keep] * np.sqrt(values[keep])
    rng = budget.rng()
    best = None
    for restart in range(budget.restarts):
        mixed = columns if restart == 0 else columns @ haar_unitary(columns.shape[1], rng)
        weights = np.sum(np.abs(mixed) ** 2, axis=0)
        parts = [
            (float(w), PureState.from_amplitudes(mixed[:, j]))
            for j, w in enumerate(weights) if w > _DROP_TOL
        ]
        bound = sum(w * robustness_k(psi, k).value for w, psi in parts)
        logger.debug("decomposition %d: convexity bound %.6g", restart, bound)
        if best is None or bound < best[0]:
            best = (bound, parts)

    _, parts = best
    witnesses = [
        (w, psi, optimal_delta(psi, k, budget, method="split") if coherence_rank(psi) > k else None)
        for w, psi in parts
    ]
    total = sum(w * od.s_value for w, _, od in witnesses if od is not None)
    if total <= 0:
        return RobustnessBound(0.0, True)

    delta_matrix = sum(w * od.s_value * od.delta.matrix for w, _, od in witnesses if od is not None) / total
    delta = DensityOperator(op.dim, delta_matrix)
    delta_components = [
        CertificateComponent(c.weight * w * od.s_value / total, c.coeffs)
        for w, _, od in witnesses if od is not None
        for c in od.delta_certificate.components
    ]
    mix_components = []
    for w, psi, od in witnesses:
        if od is None:
            mix_components.append(CertificateComponent(w / (1.0 + total), psi.coeffs))
        else:
            mix_components.extend(
                CertificateComponent(c.weight * w * (1.0 + od.s_value) / (1.0 + total), c.coeffs)
                for c in od.mix_certificate.components
            )

    def mixture(s: float) -> DensityOperator:
        return DensityOperator(op.dim, (op.matrix + s * delta.matrix) / (1.0 + s))

    delta_certificate = _certificate(delta.matrix, k, delta_components)
    mix_certificate = _certificate(mixture(total).matrix, k, mix_components)
    hints = [c.coeffs for c in delta_components + mix_components]

    low, high = 0.0, total
    for step in range(_BISECTION_STEPS):
        if high - low <= budget.tolerance:
            break
        middle = (low + high) / 2
        certificate = certify_in_Ik(mixture(middle), k, budget, atoms=hints)
        logger.debug("bisection step %d: s=%.6g %s", step, middle, "feasible" if certificate else "not certified")
        if certificate is None:
            low = middle
        else:
            high, mix_certificate = middle, certificate

    witness = OptimalDelta(delta, float(high), delta_certificate, mix_certificate, False)
    return RobustnessBound(float(high), False, witness)
