import unittest
import logging
import math

from unittest import mock

import numpy as np
import scipy.special

from specshift.exceptions import DomainError, InputError, TruncationError
from specshift.model_operator import (
    OperatorPath,
    adjoint_matrix,
    asymptotes,
    assemble,
    essential_spectrum_lines,
    is_fredholm,
    kernel_dims,
    local_counting_difference,
    ptf_residual,
    resolvent_trace_diff,
    semigroup_horizon,
    semigroup_trace_diff
)
from specshift.operators import HermitianOperator, g_z, random_hermitian_with_gap, spawn_seeds


def switch_path(profile: str = 'logistic') -> OperatorPath:
    return OperatorPath(HermitianOperator(-1.0), HermitianOperator(2.0), profile=profile)


class TestOperatorPath(unittest.TestCase):
    logger = logging.getLogger(__name__)
    logging.basicConfig(format = '%(asctime)s %(module)s %(levelname)s: %(message)s',
                    datefmt = '%m/%d/%Y %I:%M:%S %p', level = logging.INFO)

    def test_profiles_switch_from_zero_to_one(self):
        for profile in ('logistic', 'tanh', 'ramp'):
            path = switch_path(profile)
            self.assertAlmostEqual(float(path.theta(-30.0)), 0.0, places=10)
            self.assertAlmostEqual(float(path.theta(30.0)), 1.0, places=10)
            self.assertAlmostEqual(float(path.theta(0.0)), 0.5)
            # θ(−x) = 1 − θ(x)
            self.assertAlmostEqual(float(path.theta(-0.7) + path.theta(0.7)), 1.0)

    def test_derivative(self):
        path = OperatorPath(HermitianOperator(-1.0), HermitianOperator(2.0), profile='tanh', time_scale=2.0)
        step = 1e-6
        numeric = (path.theta(0.3 + step) - path.theta(0.3 - step)) / (2 * step)
        self.assertAlmostEqual(float(path.dtheta(0.3)), float(numeric), places=6)

    def test_validation(self):
        with self.assertRaises(InputError):
            OperatorPath(HermitianOperator(-1.0), HermitianOperator(2.0), profile='sigmoid')
        with self.assertRaises(InputError):
            OperatorPath(HermitianOperator(-1.0), HermitianOperator.zeros(2))

    def test_asymptotes(self):
        path = switch_path()
        a_minus, a_plus = asymptotes(path)
        self.assertEqual((float(a_minus.eigenvalues[0]), float(a_plus.eigenvalues[0])), (-1.0, 1.0))
        pair = OperatorPath(HermitianOperator.from_diagonal([-1.0, 2.0]), HermitianOperator.from_diagonal([2.0, 1.0]))
        np.testing.assert_allclose(asymptotes(pair)[1].eigenvalues, [1.0, 3.0])
        self.assertAlmostEqual(pair.endpoint_gap, 1.0)
        self.assertAlmostEqual(path.a_plus.eigenvalues[0], 1.0)
        self.assertTrue(is_fredholm(path))
        self.assertEqual(essential_spectrum_lines(path), (-1.0, 1.0))
        self.assertFalse(is_fredholm(OperatorPath(HermitianOperator(0.0), HermitianOperator(1.0))))
        reversed_path = path.reversed()
        self.assertAlmostEqual(float(reversed_path.theta(2.0)), float(1.0 - path.theta(2.0)))
        self.assertAlmostEqual(reversed_path.a_plus.eigenvalues[0], -1.0)

    def test_flat_horizon(self):
        horizon = switch_path().flat_horizon(1e-8)
        self.assertAlmostEqual(float(switch_path().dtheta(horizon)), 1e-8, delta=1e-10)


class TestAssembly(unittest.TestCase):
    logger = logging.getLogger(__name__)
    logging.basicConfig(format = '%(asctime)s %(module)s %(levelname)s: %(message)s',
                    datefmt = '%m/%d/%Y %I:%M:%S %p', level = logging.INFO)

    @classmethod
    def setUpClass(cls):
        cls.logger.info('Assembling the scalar switch from -1 to 1 on [-12, 12]')
        cls.D = assemble(switch_path(), 12.0, 1200)

    def test_shape(self):
        self.assertEqual(self.D.rows, 1199)
        self.assertEqual(self.D.cols, 1200)

    def test_kernel(self):
        dims = kernel_dims(self.D)
        self.assertEqual(dims, (1, 0))
        self.assertEqual(dims.index, 1)

    def test_truncation(self):
        with self.assertRaises(TruncationError):
            assemble(switch_path(), 5.0, 200)
        with self.assertRaises(InputError):
            assemble(switch_path(), 12.0, 8)

    def test_adjoint(self):
        self.logger.info('Comparing D* with the direct discretization of -d/dt + A')
        a_minus = random_hermitian_with_gap(spawn_seeds(2, 1)[0], 2)
        path = OperatorPath(a_minus, HermitianOperator(np.diag([1.5, -2.0])), profile='tanh')
        D = assemble(path, 10.0, 40)
        np.testing.assert_allclose(adjoint_matrix(D), D.matrix().conj().T, atol=1e-12)

    def test_resolvent_trace(self):
        value = resolvent_trace_diff(self.D, -1.0)
        self.assertAlmostEqual(value.value.real, -1 / math.sqrt(2), delta=0.02 / math.sqrt(2))
        self.assertLess(value.error, 0.01)
        self.assertAlmostEqual(resolvent_trace_diff(self.D, -1.0, local=False).value.real, -1.0)
        with self.assertRaises(DomainError):
            resolvent_trace_diff(self.D, 0.5)

    def test_constant_path(self):
        path = OperatorPath(HermitianOperator(-1.0), HermitianOperator(0.0))
        D = assemble(path, 12.0, 200)
        self.assertEqual(resolvent_trace_diff(D, -1.0).value, 0)
        self.assertEqual(semigroup_trace_diff(D, 2.0), 0.0)

    def test_semigroup_trace(self):
        self.assertLess(8.0, semigroup_horizon(self.D))
        self.assertAlmostEqual(semigroup_trace_diff(self.D, 8.0), 1.0, delta=0.02)
        self.assertAlmostEqual(semigroup_trace_diff(self.D, 0.5), float(scipy.special.erf(math.sqrt(0.5))), delta=0.02)

    def test_horizon_without_endpoint_gap(self):
        gapless = assemble(OperatorPath(HermitianOperator(0.0), HermitianOperator(1.0)), 12.0, 400)
        # d = 6, no gap: the horizon is d²/4
        self.assertAlmostEqual(semigroup_horizon(gapless), 9.0)
        self.assertAlmostEqual(semigroup_horizon(self.D), (24.0 / math.pi) ** 2)

    def test_semigroup_trace_from_resolvent_sweeps(self):
        self.logger.info('Heat trace by contour quadrature against the dense spectrum')
        a_minus = random_hermitian_with_gap(spawn_seeds(4, 1)[0], 2, gap=1.0)
        path = OperatorPath(a_minus, HermitianOperator(np.diag([2.5, -2.5])), profile='tanh')
        D = assemble(path, 10.0, 300)
        dense = [semigroup_trace_diff(D, t) for t in (0.3, 1.0, 4.0)]
        with mock.patch('specshift.model_operator.MAX_DENSE_SIZE', 100):
            swept = [semigroup_trace_diff(assemble(path, 10.0, 300), t) for t in (0.3, 1.0, 4.0)]
        np.testing.assert_allclose(swept, dense, atol=1e-6)

    def test_counting_difference_vanishes_below_zero(self):
        self.assertAlmostEqual(float(local_counting_difference(self.D, -1.0, 0.05)), 0.0, delta=0.05)

    def test_ptf_residual(self):
        for z in (-4.0, -1.0, -0.25):
            self.assertLess(ptf_residual(self.D.path, self.D, z), 0.05)

    def test_ptf_residual_random_endpoints(self):
        self.logger.info('Principal trace formula on 10 seeded Fredholm paths')
        checked = 0
        for index, seed in enumerate(spawn_seeds(9, 10)):
            first, second = spawn_seeds(seed, 2)
            n = 2 + index % 2
            a_minus = random_hermitian_with_gap(first, n)
            a_plus = random_hermitian_with_gap(second, n)
            path = OperatorPath(a_minus, a_plus - a_minus, profile='tanh')
            D = assemble(path, 12.0, 1200)
            for z in (-4.0, -1.0, -0.25):
                rhs = np.sum(g_z(a_plus.eigenvalues, z)) - np.sum(g_z(a_minus.eigenvalues, z))
                rhs = abs(float(np.real(rhs))) / (2 * abs(z))
                if rhs < 0.05:
                    continue
                checked += 1
                self.assertLess(ptf_residual(path, D, z), 0.05 * rhs)
        self.assertGreaterEqual(checked, 10)

    def test_discretization_converges(self):
        self.logger.info('Doubling Nt on the tanh switch')
        path = switch_path('tanh')
        errors = [abs(resolvent_trace_diff(assemble(path, 10.0, Nt), -1.0).value.real + 1 / math.sqrt(2))
                  for Nt in (51, 101, 201)]
        self.logger.info(f'Errors {errors}')
        self.assertLessEqual(errors[2], 0.75 * errors[0])
