"""
Pure states and density operators in a fixed reference basis, coherence rank
and the I_k hierarchy for pure states.

The JSON state format is ``{"dim": d, "coeffs": [[re, im], ...]}``.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .codecs.json import JSONSerializable, JSONDeserializable, json_codec
from .errors import InvalidOperatorError, InvalidStateError, LevelOutOfRangeError

NORM_TOL = 1e-12
ZERO_TOL = 1e-12
MAX_ZERO_TOL = 1e-6
HERMITIAN_TOL = 1e-10
PSD_TOL = 1e-10
TRACE_TOL = 1e-10


def _check_dim(dim: object, error: type) -> int:
    if isinstance(dim, bool) or not isinstance(dim, (int, np.integer)):
        raise error(f"dim must be an integer, got: {dim!r}")
    if dim < 2:
        raise error(f"dim must be at least 2, got: {dim}")
    return int(dim)


@dataclass(frozen=True, eq=False)
class PureState(JSONSerializable, JSONDeserializable):
    """Unit vector of complex coefficients c_i in the reference basis."""
    dim: int
    coeffs: np.ndarray

    def __post_init__(self):
        dim = _check_dim(self.dim, InvalidStateError)
        coeffs = np.array(self.coeffs, dtype=np.complex128)
        if coeffs.ndim != 1 or coeffs.shape[0] != dim:
            raise InvalidStateError(f"expected {dim} coefficients, got shape {coeffs.shape}")
        if not np.all(np.isfinite(coeffs)):
            raise InvalidStateError("coefficients must be finite")
        norm2 = float(np.vdot(coeffs, coeffs).real)
        if norm2 == 0.0:
            raise InvalidStateError("all-zero coefficient vector")
        if abs(norm2 - 1.0) > NORM_TOL:
            raise InvalidStateError(f"squared norm {norm2!r} differs from 1 by more than {NORM_TOL}")
        coeffs.setflags(write=False)
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def from_amplitudes(cls, amplitudes) -> "PureState":
        """Normalize an arbitrary nonzero amplitude vector."""
        vector = np.asarray(amplitudes, dtype=np.complex128).reshape(-1)
        norm = np.linalg.norm(vector)
        if norm == 0.0 or not np.isfinite(norm):
            raise InvalidStateError("all-zero coefficient vector")
        return cls(vector.shape[0], vector / norm)

    @classmethod
    def maximally_coherent(cls, dim: int) -> "PureState":
        dim = _check_dim(dim, InvalidStateError)
        return cls(dim, np.full(dim, 1.0 / np.sqrt(dim), dtype=np.complex128))

    @classmethod
    def basis(cls, dim: int, index: int) -> "PureState":
        dim = _check_dim(dim, InvalidStateError)
        if not 0 <= index < dim:
            raise InvalidStateError(f"basis index {index} outside [0, {dim})")
        coeffs = np.zeros(dim, dtype=np.complex128)
        coeffs[index] = 1.0
        return cls(dim, coeffs)


@dataclass(frozen=True, eq=False)
class DensityOperator(JSONSerializable, JSONDeserializable):
    """Hermitian positive semidefinite matrix with 0 < trace <= 1.

    Sub-normalized operators are the outputs of trace non-increasing maps.
    """
    dim: int
    matrix: np.ndarray

    def __post_init__(self):
        dim = _check_dim(self.dim, InvalidOperatorError)
        matrix = np.array(self.matrix, dtype=np.complex128)
        if matrix.shape != (dim, dim):
            raise InvalidOperatorError(f"expected a {dim}x{dim} matrix, got shape {matrix.shape}")
        if not np.all(np.isfinite(matrix)):
            raise InvalidOperatorError("matrix entries must be finite")
        if np.max(np.abs(matrix - matrix.conj().T)) > HERMITIAN_TOL:
            raise InvalidOperatorError("matrix is not Hermitian")
        matrix = (matrix + matrix.conj().T) / 2
        smallest = float(np.linalg.eigvalsh(matrix)[0])
        if smallest < -PSD_TOL:
            raise InvalidOperatorError(f"matrix has negative eigenvalue {smallest!r}")
        trace = float(np.trace(matrix).real)
        if not 0.0 < trace <= 1.0 + TRACE_TOL:
            raise InvalidOperatorError(f"trace {trace!r} outside (0, 1]")
        matrix.setflags(write=False)
        object.__setattr__(self, "dim", dim)
        object.__setattr__(self, "matrix", matrix)

    @classmethod
    def from_matrix(cls, matrix) -> "DensityOperator":
        matrix = np.asarray(matrix, dtype=np.complex128)
        if matrix.ndim != 2:
            raise InvalidOperatorError(f"expected a square matrix, got shape {matrix.shape}")
        return cls(matrix.shape[0], matrix)

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    @property
    def is_normalized(self) -> bool:
        return abs(self.trace - 1.0) <= TRACE_TOL

    def normalized(self) -> "DensityOperator":
        return DensityOperator(self.dim, self.matrix / self.trace)


@dataclass(frozen=True)
class CoherenceLevel:
    """Index k of the free-state set I_k."""
    k: int

    def __post_init__(self):
        if isinstance(self.k, bool) or not isinstance(self.k, (int, np.integer)):
            raise TypeError(f"k must be an integer, got: {self.k!r}")
        if self.k < 1:
            raise LevelOutOfRangeError(int(self.k), 1, None)
        object.__setattr__(self, "k", int(self.k))

    def check(self, dim: int, low: int = 1, high: int | None = None) -> int:
        """Return k after checking ``low <= k <= high`` (``high`` defaults to dim)."""
        high = dim if high is None else high
        if not low <= self.k <= high:
            raise LevelOutOfRangeError(self.k, low, high)
        return self.k


LevelLike = Union[CoherenceLevel, int]


def as_level(level: LevelLike) -> CoherenceLevel:
    if isinstance(level, CoherenceLevel):
        return level
    return CoherenceLevel(level)


def coherence_rank(state: PureState, zero_tol: float = ZERO_TOL) -> int:
    """Number of coefficients with modulus above ``zero_tol``."""
    if not 0.0 <= zero_tol <= MAX_ZERO_TOL:
        raise ValueError(f"zero_tol must lie in [0, {MAX_ZERO_TOL}], got: {zero_tol!r}")
    rank = int(np.count_nonzero(np.abs(state.coeffs) > zero_tol))
    if rank == 0:
        raise InvalidStateError("all-zero coefficient vector")
    return rank


def pure_in_Ik(state: PureState, level: LevelLike) -> bool:
    k = as_level(level).check(state.dim)
    return coherence_rank(state) <= k


def sorted_coeff_magnitudes(state: PureState) -> np.ndarray:
    """Moduli |c_i| in descending order."""
    return np.sort(np.abs(state.coeffs))[::-1]


def outer_product(state: PureState) -> DensityOperator:
    return DensityOperator(state.dim, np.outer(state.coeffs, state.coeffs.conj()))


@dataclass(frozen=True, eq=False)
class CanonicalForm:
    """A state written as U|nu> with nu real, non-negative and sorted descending.

    U maps canonical basis vector i to ``phases[order[i]] |order[i]>``; it is
    a permutation times a diagonal unitary, so it preserves every I_k.
    """
    magnitudes: np.ndarray
    order: np.ndarray
    phases: np.ndarray

    def lift(self, vector: np.ndarray) -> np.ndarray:
        """Map a canonical-frame vector (or matrix columns) to the input frame."""
        vector = np.asarray(vector, dtype=np.complex128)
        lifted = np.zeros_like(vector)
        lifted[self.order] = self.phases[self.order].reshape((-1,) + (1,) * (vector.ndim - 1)) * vector
        return lifted

    def unitary(self) -> np.ndarray:
        return self.lift(np.eye(len(self.order), dtype=np.complex128))


def canonicalize(state: PureState) -> CanonicalForm:
    moduli = np.abs(state.coeffs)
    order = np.argsort(-moduli, kind="stable")
    phases = np.ones(state.dim, dtype=np.complex128)
    nonzero = moduli > 0
    phases[nonzero] = state.coeffs[nonzero] / moduli[nonzero]
    return CanonicalForm(magnitudes=moduli[order], order=order, phases=phases)


def parse_state(text: str) -> PureState:
    """Parse and validate a JSON state; failures raise `CodecError`."""
    return PureState.from_json(text)


def load_state(path: Union[str, Path]) -> PureState:
    return json_codec.load(PureState, path)


def dump_state(state: PureState, path: Union[str, Path]) -> None:
    json_codec.dump(state, path)
