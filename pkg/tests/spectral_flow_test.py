import unittest
import logging

import numpy as np

from specshift.exceptions import InputError, NotFredholmError
from specshift.model_operator import OperatorPath, assemble, kernel_dims
from specshift.operators import HermitianOperator, random_hermitian_with_gap, spawn_seeds
from specshift.spectral_flow import (
    bounded_transform,
    flow_identity_check,
    fredholm_pair_index,
    negative_projection,
    spectral_flow
)
from specshift.witten import witten_closed_form


class TestPairIndex(unittest.TestCase):
    logger = logging.getLogger(__name__)
    logging.basicConfig(format = '%(asctime)s %(module)s %(levelname)s: %(message)s',
                    datefmt = '%m/%d/%Y %I:%M:%S %p', level = logging.INFO)

    def test_rank_difference(self):
        P = np.zeros((2, 2))
        Q = np.diag([1.0, 0.0])
        self.assertEqual(fredholm_pair_index(P, Q), 1)
        self.assertEqual(fredholm_pair_index(Q, P), -1)
        self.assertEqual(fredholm_pair_index(Q, Q), 0)

    def test_rotated_projections(self):
        angle = 0.3
        vector = np.array([np.cos(angle), np.sin(angle)])
        P = np.diag([1.0, 0.0])
        Q = np.outer(vector, vector)
        self.assertEqual(fredholm_pair_index(P, Q), 0)

    def test_rejects_non_projection(self):
        with self.assertRaises(InputError):
            fredholm_pair_index(np.diag([0.5, 0.0]), np.zeros((2, 2)))

    def test_bounded_transform(self):
        F = bounded_transform(HermitianOperator.from_diagonal([-3.0, 0.0, 100.0]))
        self.assertTrue(np.all(np.abs(F.eigenvalues) < 1.0))
        self.assertAlmostEqual(F.eigenvalues[1], 0.0)


class TestSpectralFlow(unittest.TestCase):
    logger = logging.getLogger(__name__)
    logging.basicConfig(format = '%(asctime)s %(module)s %(levelname)s: %(message)s',
                    datefmt = '%m/%d/%Y %I:%M:%S %p', level = logging.INFO)

    def setUp(self):
        self.path = OperatorPath(HermitianOperator(-1.0), HermitianOperator(2.0), profile='logistic')

    def test_scalar_switch(self):
        flow, partition = spectral_flow(self.path)
        self.assertEqual(flow, 1)
        self.assertEqual(len(partition.times), len(partition.levels) + 1)
        self.assertTrue(all(gap < 0.25 for gap in partition.gaps))

    def test_reversed_path(self):
        self.assertEqual(spectral_flow(self.path.reversed())[0], -1)

    def test_crossing_pair_cancels(self):
        self.logger.info('One eigenvalue crosses upwards and one downwards')
        path = OperatorPath(HermitianOperator.from_diagonal([-1.0, 1.0]),
                            HermitianOperator.from_diagonal([2.0, -2.0]), profile='tanh')
        self.assertEqual(spectral_flow(path)[0], 0)
        D = assemble(path, 10.0, 200)
        self.assertEqual(kernel_dims(D), (1, 1))
        self.assertEqual(flow_identity_check(path, D), (0, 0, 0, 0, 0))

    def test_identities(self):
        D = assemble(self.path, 12.0, 600)
        self.assertEqual(flow_identity_check(self.path, D), (1, 1, 1, 1, 1))

    def test_identities_on_random_endpoints(self):
        self.logger.info('Index identities on 20 seeded gapped scenarios')
        for index, seed in enumerate(spawn_seeds(4, 20)):
            first, second = spawn_seeds(seed, 2)
            n = 1 + index % 4
            a_minus = random_hermitian_with_gap(first, n)
            a_plus = random_hermitian_with_gap(second, n)
            path = OperatorPath(a_minus, a_plus - a_minus, profile='tanh')
            values = flow_identity_check(path, assemble(path, 10.0, 200))
            expected = int(round(negative_projection(a_minus).trace() - negative_projection(a_plus).trace()))
            self.assertEqual(values, (expected,) * 5)
            self.assertEqual(witten_closed_form(a_plus, a_minus), expected)

    def test_identities_need_invertible_endpoints(self):
        path = OperatorPath(HermitianOperator(0.0), HermitianOperator(1.0))
        with self.assertRaises(NotFredholmError):
            flow_identity_check(path, assemble(path, 12.0, 200))
