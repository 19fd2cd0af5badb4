import unittest
import logging
import math

import numpy as np

from specshift.exceptions import DomainError, InputError
from specshift.operators import (
    HermitianOperator,
    Interval,
    SpectralSample,
    apply_function,
    counting_function,
    g_z,
    inertia,
    random_hermitian,
    random_hermitian_with_gap,
    spawn_seeds,
    spectral_projection,
    trace_norm
)


class TestHermitianOperator(unittest.TestCase):
    logger = logging.getLogger(__name__)
    logging.basicConfig(format = '%(asctime)s %(module)s %(levelname)s: %(message)s',
                    datefmt = '%m/%d/%Y %I:%M:%S %p', level = logging.INFO)

    def test_rejects_non_hermitian(self):
        self.logger.info('Building a non-Hermitian matrix')
        with self.assertRaises(InputError) as context:
            HermitianOperator([[1.0, 2.0], [3.0, 1.0]])
        self.assertIn('entry (0, 1)', str(context.exception))

    def test_rejects_non_square(self):
        with self.assertRaises(InputError):
            HermitianOperator(np.zeros((2, 3)))

    def test_scalar_is_one_by_one(self):
        H = HermitianOperator(2.5)
        self.assertEqual(H.n, 1)
        self.assertEqual(float(H.eigenvalues[0]), 2.5)

    def test_decomposition(self):
        self.logger.info('Checking the cached eigendecomposition of a random matrix')
        H = random_hermitian(7, 6)
        U, values = H.eigenvectors, H.eigenvalues
        self.assertTrue(np.all(np.diff(values) >= 0))
        np.testing.assert_allclose(U.conj().T @ U, np.eye(6), atol=1e-12)
        np.testing.assert_allclose((U * values) @ U.conj().T, H.entries, atol=1e-12)

    def test_entries_are_read_only(self):
        H = HermitianOperator.from_diagonal([1.0, 2.0])
        with self.assertRaises(ValueError):
            H.entries[0, 0] = 3.0

    def test_arithmetic(self):
        A = HermitianOperator.from_diagonal([1.0, -1.0])
        B = HermitianOperator.from_diagonal([0.5, 0.5])
        np.testing.assert_allclose((A + B).eigenvalues, [-0.5, 1.5])
        np.testing.assert_allclose((A - B).eigenvalues, [-1.5, 0.5])
        np.testing.assert_allclose((2 * A).eigenvalues, [-2.0, 2.0])
        self.assertTrue((A - A).is_zero)
        with self.assertRaises(InputError):
            A * 1j
        with self.assertRaises(InputError):
            A + HermitianOperator.zeros(3)


class TestSpectralCalculus(unittest.TestCase):
    logger = logging.getLogger(__name__)
    logging.basicConfig(format = '%(asctime)s %(module)s %(levelname)s: %(message)s',
                    datefmt = '%m/%d/%Y %I:%M:%S %p', level = logging.INFO)

    def test_counting_function_is_strict(self):
        H = HermitianOperator.from_diagonal([-1.0, 1.0, 2.0])
        self.assertEqual(counting_function(H, 1.0), 1)
        self.assertEqual(counting_function(H, 0.999), 2)
        self.assertEqual(counting_function(H, -5.0), 3)

    def test_spectral_projection(self):
        H = HermitianOperator.from_diagonal([-1.0, 0.0, 1.0])
        negative = spectral_projection(H, Interval(upper=0.0))
        self.assertAlmostEqual(negative.trace(), 1.0)
        nonnegative = spectral_projection(H, Interval(lower=0.0))
        self.assertAlmostEqual(nonnegative.trace(), 2.0)
        np.testing.assert_allclose(negative.entries @ negative.entries, negative.entries, atol=1e-12)

    def test_interval(self):
        closed = Interval(-1.0, 1.0, upper_closed=True)
        self.assertTrue(closed.contains(1.0))
        self.assertFalse(Interval(-1.0, 1.0).contains(1.0))
        self.assertEqual(closed.length, 2.0)
        with self.assertRaises(InputError):
            Interval(1.0, -1.0)

    def test_apply_function(self):
        H = random_hermitian(3, 4)
        exponential = apply_function(H, np.exp)
        inverse = apply_function(H, lambda x: np.exp(-x))
        np.testing.assert_allclose(exponential @ inverse, np.eye(4), atol=1e-10)

    def test_apply_function_reports_poles(self):
        H = HermitianOperator.from_diagonal([1.0, 2.0])
        with np.errstate(divide='ignore'):
            with self.assertRaises(DomainError):
                apply_function(H, lambda x: 1.0 / (x - 1.0))

    def test_g_z(self):
        self.assertAlmostEqual(complex(g_z(1.0, -1.0)).real, 1 / math.sqrt(2))
        self.assertAlmostEqual(complex(g_z(-1.0, -1.0)).real, -1 / math.sqrt(2))
        with self.assertRaises(DomainError):
            g_z(1.0, 0.5)

    def test_inertia_and_trace_norm(self):
        H = HermitianOperator.from_diagonal([-1.0, 0.0, 2.0])
        self.assertEqual(inertia(H), (1, 1, 1))
        self.assertEqual(trace_norm(H), 3.0)


class TestRandomMatrices(unittest.TestCase):
    logger = logging.getLogger(__name__)
    logging.basicConfig(format = '%(asctime)s %(module)s %(levelname)s: %(message)s',
                    datefmt = '%m/%d/%Y %I:%M:%S %p', level = logging.INFO)

    def test_seeds_are_reproducible(self):
        self.assertEqual(spawn_seeds(0, 3), spawn_seeds(0, 3))
        self.assertEqual(len(set(spawn_seeds(0, 3))), 3)
        np.testing.assert_array_equal(random_hermitian(5, 3).entries, random_hermitian(5, 3).entries)

    def test_gap(self):
        self.logger.info('Sampling matrices with a spectral gap around 0')
        for seed in spawn_seeds(11, 10):
            H = random_hermitian_with_gap(seed, 6, gap=0.5)
            self.assertGreaterEqual(np.min(np.abs(H.eigenvalues)), 0.5 - 1e-10)


class TestSpectralSample(unittest.TestCase):
    logger = logging.getLogger(__name__)
    logging.basicConfig(format = '%(asctime)s %(module)s %(levelname)s: %(message)s',
                    datefmt = '%m/%d/%Y %I:%M:%S %p', level = logging.INFO)

    def test_validation(self):
        with self.assertRaises(InputError):
            SpectralSample([1.0, 0.0], [0.0, 0.0])
        with self.assertRaises(InputError):
            SpectralSample([0.0, 1.0], [0.0, np.nan])

    def test_frame_keeps_matching_meta(self):
        sample = SpectralSample([0.0, 1.0], [2.0, 3.0], meta={'lhs': [1.0, 1.0], 'route': 'test'})
        frame = sample.to_frame('lambda', 'residual')
        self.assertEqual(list(frame.columns), ['lambda', 'residual', 'lhs'])
