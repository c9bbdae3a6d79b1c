import unittest
from unittest import mock

import numpy as np
import numpy.testing as npt

from kcoherence.errors import (
    InvalidConstraintError, InvalidOperatorError, InvalidStateError,
    LevelOutOfRangeError, NotAResourceStateError,
)
from kcoherence.measures import robustness_k, robustness_k_oracle
from kcoherence.oracles import (
    METHODS, CertificateComponent, IkCertificate, OptimalDelta, OracleBudget,
    certify_in_Ik, haar_unitary, optimal_delta, sample_Ik_mixture, sample_pure,
)
from kcoherence.statespace import DensityOperator, PureState, coherence_rank, outer_product


def _flat(dim: int, support) -> np.ndarray:
    vector = np.zeros(dim, dtype=np.complex128)
    vector[list(support)] = 1.0
    return np.outer(vector, vector) / len(support)


class TestOracleBudget(unittest.TestCase):

    def test_defaults(self):
        budget = OracleBudget()
        self.assertEqual((budget.max_iterations, budget.restarts, budget.seed), (2000, 20, 0))
        self.assertEqual(budget.tolerance, 1e-7)

    def test_validation(self):
        with self.assertRaises(ValueError):
            OracleBudget(max_iterations=0)
        with self.assertRaises(ValueError):
            OracleBudget(restarts=True)
        with self.assertRaises(ValueError):
            OracleBudget(seed=-1)
        with self.assertRaises(ValueError):
            OracleBudget(tolerance=0.0)

    def test_scaled(self):
        budget = OracleBudget(max_iterations=10, restarts=3, seed=5).scaled(4)
        self.assertEqual((budget.max_iterations, budget.restarts, budget.seed), (40, 12, 5))

    def test_rng_is_deterministic(self):
        budget = OracleBudget(seed=9)
        npt.assert_array_equal(budget.rng(1, 2).normal(size=3), budget.rng(1, 2).normal(size=3))


class TestCertificate(unittest.TestCase):

    def test_component_validation(self):
        with self.assertRaises(InvalidStateError):
            CertificateComponent(0.0, [1.0, 0.0])
        with self.assertRaises(InvalidStateError):
            CertificateComponent(0.5, [1.0, 1.0])

    def test_rank_and_operator(self):
        certificate = IkCertificate(2, [
            CertificateComponent(0.5, np.array([1.0, 1.0, 0.0]) / np.sqrt(2)),
            CertificateComponent(0.5, [0.0, 0.0, 1.0]),
        ], 0.0)
        self.assertEqual([c.rank for c in certificate.components], [2, 1])
        self.assertAlmostEqual(certificate.total_weight, 1.0)
        expected = np.array([[0.25, 0.25, 0], [0.25, 0.25, 0], [0, 0, 0.5]])
        npt.assert_allclose(certificate.operator(), expected, atol=1e-15)
        self.assertTrue(certificate.is_valid(expected))
        self.assertFalse(certificate.is_valid(np.diag([0.5, 0.5, 0.0])))
        self.assertFalse(IkCertificate(1, certificate.components, 0.0).is_valid(expected))

    def test_json_round_trip(self):
        op, certificate = sample_Ik_mixture(3, 2, np.random.default_rng(1))
        decoded = IkCertificate.from_json(certificate.to_json())
        self.assertEqual(decoded.level, 2)
        self.assertTrue(decoded.is_valid(op))


class TestCertifyInIk(unittest.TestCase):

    def test_diagonal(self):
        certificate = certify_in_Ik(DensityOperator.from_matrix(np.diag([0.5, 0.3, 0.2])), 1)
        self.assertIsNotNone(certificate)
        self.assertEqual(len(certificate.components), 3)
        self.assertLess(certificate.residual, 1e-12)

    def test_low_rank_pure_state(self):
        op = outer_product(PureState.from_amplitudes([1, 1j, 0, 0]))
        certificate = certify_in_Ik(op, 2)
        self.assertEqual(len(certificate.components), 1)
        self.assertLess(certificate.residual, 1e-12)

    def test_rank_one_resource_is_rejected(self):
        self.assertIsNone(certify_in_Ik(outer_product(PureState.maximally_coherent(3)), 2))

    def test_full_level_always_certifies(self):
        for seed in range(5):
            op, _ = sample_Ik_mixture(4, 4, np.random.default_rng(seed))
            certificate = certify_in_Ik(op, 4)
            self.assertIsNotNone(certificate)
            self.assertTrue(certificate.is_valid(op))

    def test_dominant_operator(self):
        matrix = 0.4 * _flat(3, [0, 1, 2]) + 0.6 * np.eye(3) / 3
        certificate = certify_in_Ik(DensityOperator.from_matrix(matrix), 2)
        self.assertIsNotNone(certificate)
        self.assertTrue(all(c.rank <= 2 for c in certificate.components))

    def test_block_search(self):
        matrix = 0.4 * _flat(4, [0, 1, 2]) + 0.4 * _flat(4, [1, 2, 3]) + 0.05 * np.eye(4)
        budget = OracleBudget(max_iterations=20000, tolerance=1e-6)
        op = DensityOperator.from_matrix(matrix)
        certificate = certify_in_Ik(op, 3, budget)
        self.assertIsNotNone(certificate)
        self.assertTrue(certificate.is_valid(op, 1e-6))
        self.assertLessEqual(len(certificate.components), 16)

    def test_atoms(self):
        vectors = [np.array([1, 1, 0]) / np.sqrt(2), np.array([0, 1, -1j]) / np.sqrt(2)]
        matrix = 0.3 * np.outer(vectors[0], vectors[0].conj()) + 0.7 * np.outer(vectors[1], vectors[1].conj())
        certificate = certify_in_Ik(DensityOperator.from_matrix(matrix), 2, atoms=vectors)
        self.assertIsNotNone(certificate)
        self.assertLess(certificate.residual, 1e-10)

    def test_residual_is_recomputable(self):
        for seed in range(5):
            op, _ = sample_Ik_mixture(3, 2, np.random.default_rng(seed))
            certificate = certify_in_Ik(op, 2, atoms=None)
            if certificate is not None:
                self.assertAlmostEqual(certificate.distance_to(op), certificate.residual, delta=1e-12)

    def test_rejects_non_operator(self):
        with self.assertRaises(InvalidOperatorError):
            certify_in_Ik(np.eye(2) / 2, 1)

    def test_level_range(self):
        with self.assertRaises(LevelOutOfRangeError):
            certify_in_Ik(DensityOperator.from_matrix(np.eye(2) / 2), 3)


class TestOptimalDelta(unittest.TestCase):

    # s agrees with the closed form to within these, per backend
    PRECISION = {"search": 1e-5, "split": 1e-9}

    def _check(self, target: PureState, k: int, method: str) -> OptimalDelta:
        best = optimal_delta(target, k, method=method)
        self.assertTrue(best.converged)
        self.assertTrue(best.delta.is_normalized)
        self.assertTrue(best.delta_certificate.is_valid(best.delta))
        self.assertTrue(all(c.rank <= k for c in best.delta_certificate.components))
        self.assertLessEqual(len(best.delta_certificate.components), target.dim ** 2)
        mixture = (outer_product(target).matrix + best.s_value * best.delta.matrix) / (1 + best.s_value)
        self.assertTrue(best.mix_certificate.is_valid(mixture))
        self.assertTrue(all(c.rank <= k for c in best.mix_certificate.components))
        self.assertAlmostEqual(best.s_value, robustness_k(target, k).value, delta=self.PRECISION[method])
        return best

    def test_maximally_coherent(self):
        for method in METHODS:
            with self.subTest(method=method):
                self.assertAlmostEqual(self._check(PureState.maximally_coherent(3), 2, method).s_value, 0.5, delta=1e-5)
                self.assertAlmostEqual(self._check(PureState.maximally_coherent(4), 2, method).s_value, 1.0, delta=1e-5)

    def test_rank_three_state(self):
        target = PureState(3, np.sqrt([0.5, 0.3, 0.2]))
        for method in METHODS:
            with self.subTest(method=method):
                self._check(target, 2, method)

    def test_random_targets(self):
        for seed in range(4):
            target = sample_pure(5, seed, min_rank=5)
            for k in (2, 3, 4):
                for method in METHODS:
                    with self.subTest(seed=seed, k=k, method=method):
                        self._check(target, k, method)

    def test_phases_and_order_are_restored(self):
        target = PureState.from_amplitudes([0.2j, -1.0, 0.5, 0.7 - 0.3j])
        for method in METHODS:
            with self.subTest(method=method):
                self._check(target, 2, method)

    def test_split_delta_is_certified_for_many_targets(self):
        # design marginals carry round-off of order 1e-12 into the row sums of delta
        target = sample_pure(3, 14)
        best = optimal_delta(target, 2, method="split")
        self.assertTrue(best.converged)
        self.assertTrue(best.delta_certificate.is_valid(best.delta))
        self.assertLessEqual(max(c.rank for c in best.delta_certificate.components), 2)
        failures = []
        for seed in range(200):
            for dim in (3, 4):
                target = sample_pure(dim, seed, min_rank=dim)
                for k in range(2, dim):
                    best = optimal_delta(target, k, method="split")
                    if not (best.converged and best.delta_certificate.is_valid(best.delta)):
                        failures.append((seed, dim, k))
        self.assertEqual(failures, [])

    def test_backends_agree(self):
        for seed in range(40):
            dim = 3 + seed % 3
            k = 2 + seed % (dim - 2)
            target = sample_pure(dim, 300 + seed, min_rank=dim)
            with self.subTest(seed=seed, dim=dim, k=k):
                searched = optimal_delta(target, k, method="search")
                split = optimal_delta(target, k, method="split")
                self.assertTrue(searched.converged)
                self.assertAlmostEqual(searched.s_value, split.s_value, delta=1e-5)
                self.assertGreaterEqual(searched.s_value, split.s_value - 1e-6)

    def test_search_does_not_use_the_closed_form(self):
        target = sample_pure(4, 9, min_rank=4)
        with mock.patch("kcoherence.oracles.robustness_k", side_effect=AssertionError("closed form used")):
            best = optimal_delta(target, 2, method="search")
        self.assertTrue(best.converged)
        self.assertAlmostEqual(best.s_value, robustness_k(target, 2).value, delta=1e-5)

    def test_search_is_deterministic(self):
        target = sample_pure(4, 12, min_rank=4)
        budget = OracleBudget(seed=5)
        first = optimal_delta(target, 3, budget)
        second = optimal_delta(target, 3, budget)
        self.assertEqual(first.to_json(), second.to_json())

    def test_unknown_method(self):
        with self.assertRaises(ValueError):
            optimal_delta(PureState.maximally_coherent(3), 2, method="analytic")

    def test_free_target(self):
        with self.assertRaises(NotAResourceStateError) as context:
            optimal_delta(PureState.from_amplitudes([1, 1, 0]), 2)
        self.assertEqual(context.exception.role, "target")

    def test_level_range(self):
        with self.assertRaises(LevelOutOfRangeError):
            optimal_delta(PureState.maximally_coherent(3), 3)

    def test_json_round_trip(self):
        best = optimal_delta(PureState.maximally_coherent(3), 2)
        decoded = OptimalDelta.from_json(best.to_json())
        self.assertEqual(decoded.s_value, best.s_value)
        self.assertTrue(decoded.delta_certificate.is_valid(decoded.delta))


class TestMixedRobustness(unittest.TestCase):

    def setUp(self):
        self.budget = OracleBudget(max_iterations=500, restarts=5)

    def test_noisy_maximally_coherent(self):
        op = DensityOperator.from_matrix(0.9 * _flat(3, [0, 1, 2]) + 0.1 * np.eye(3) / 3)
        bound = robustness_k_oracle(op, 2, self.budget)
        self.assertLessEqual(bound.value, 0.5 + 1e-9)
        self.assertGreater(bound.value, 0.0)
        self.assertFalse(bound.converged)
        witness = bound.witness
        self.assertTrue(witness.delta_certificate.is_valid(witness.delta, 1e-6))
        mixture = (op.matrix + witness.s_value * witness.delta.matrix) / (1 + witness.s_value)
        self.assertTrue(witness.mix_certificate.is_valid(mixture, 1e-6))

    def test_diagonal_state(self):
        bound = robustness_k_oracle(DensityOperator.from_matrix(np.diag([0.5, 0.3, 0.2])), 2, self.budget)
        self.assertEqual(bound.value, 0.0)
        self.assertTrue(bound.converged)

    def test_rank_one_operator(self):
        bound = robustness_k_oracle(outer_product(PureState.maximally_coherent(4)), 2, self.budget)
        self.assertAlmostEqual(bound.value, 1.0, delta=1e-5)
        self.assertTrue(bound.converged)


class TestSampling(unittest.TestCase):

    def test_sample_pure_is_deterministic(self):
        npt.assert_array_equal(sample_pure(4, 17).coeffs, sample_pure(4, 17).coeffs)
        self.assertFalse(np.allclose(sample_pure(4, 17).coeffs, sample_pure(4, 18).coeffs))

    def test_sample_pure_min_rank(self):
        for seed in range(10):
            self.assertEqual(coherence_rank(sample_pure(5, seed, min_rank=5)), 5)

    def test_sample_pure_constraints(self):
        with self.assertRaises(InvalidConstraintError):
            sample_pure(3, 0, min_rank=4)
        with self.assertRaises(InvalidConstraintError):
            sample_pure(3, 0, min_rank=0)
        with self.assertRaises(InvalidStateError):
            sample_pure(1, 0)

    def test_haar_unitary(self):
        rng = np.random.default_rng(3)
        for n in (1, 2, 5):
            unitary = haar_unitary(n, rng)
            npt.assert_allclose(unitary.conj().T @ unitary, np.eye(n), atol=1e-12)

    def test_sample_Ik_mixture(self):
        rng = np.random.default_rng(4)
        for k in (1, 2, 3):
            op, certificate = sample_Ik_mixture(4, k, rng)
            self.assertTrue(op.is_normalized)
            self.assertTrue(certificate.is_valid(op, 1e-10))
            self.assertTrue(all(c.rank <= k for c in certificate.components))


if __name__ == "__main__":
    unittest.main()
