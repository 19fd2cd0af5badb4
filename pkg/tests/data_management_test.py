import unittest
import logging
import json
import os
import tempfile

import numpy as np

from specshift.data_management import (
    dirac_model_from_dict,
    file_hash,
    load_dirac_model,
    load_pair,
    load_scenario,
    operator_from_dict,
    operator_to_dict,
    read_json,
    scenario_from_dict,
    scenario_to_dict,
    write_atomic
)
from specshift.exceptions import InputError
from specshift.run_management import RunLedger, RunRecord, ledger_url


class TestInputFiles(unittest.TestCase):
    logger = logging.getLogger(__name__)
    logging.basicConfig(format = '%(asctime)s %(module)s %(levelname)s: %(message)s',
                    datefmt = '%m/%d/%Y %I:%M:%S %p', level = logging.INFO)

    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.directory.cleanup()

    def write(self, name: str, content) -> str:
        path = os.path.join(self.directory.name, name)
        with open(path, 'w') as file:
            file.write(content if isinstance(content, str) else json.dumps(content))
        return path

    def test_matrix_encodings(self):
        self.assertEqual(operator_from_dict([[1.0, 0.0], [0.0, 2.0]]).n, 2)
        np.testing.assert_allclose(operator_from_dict({'diag': [3.0, -1.0]}).eigenvalues, [-1.0, 3.0])
        complex_matrix = operator_from_dict({'n': 2, 're': [[0, 0], [0, 0]], 'im': [[0, 1], [-1, 0]]})
        np.testing.assert_allclose(complex_matrix.eigenvalues, [-1.0, 1.0], atol=1e-12)
        encoded = operator_to_dict(complex_matrix)
        np.testing.assert_allclose(operator_from_dict(encoded).entries, complex_matrix.entries)

    def test_matrix_validation(self):
        with self.assertRaises(InputError):
            operator_from_dict({'n': 3, 're': [[0, 0], [0, 0]]})
        with self.assertRaises(InputError):
            operator_from_dict({'random': {'n': 3}})
        with self.assertRaises(InputError):
            operator_from_dict({'values': [1, 2]})
        with self.assertRaises(InputError):
            operator_from_dict([[0.0, 1.0], [0.0, 0.0]])

    def test_random_matrices_follow_the_seed(self):
        first = operator_from_dict({'random': {'n': 4, 'gap': 0.5}}, seed=7)
        second = operator_from_dict({'random': {'n': 4, 'gap': 0.5}}, seed=7)
        np.testing.assert_allclose(first.entries, second.entries)
        self.assertGreaterEqual(np.min(np.abs(first.eigenvalues)), 0.5)

    def test_pair(self):
        path = self.write('pair.json', {'H0': {'diag': [-1, 1]}, 'H': {'diag': [-2, 2]}})
        H0, H = load_pair(path)
        np.testing.assert_allclose(H.eigenvalues, [-2.0, 2.0])
        with self.assertRaises(InputError):
            load_pair(self.write('half.json', {'H0': [[1.0]]}))

    def test_malformed_json(self):
        path = self.write('broken.json', '{\n  "H0": [[1.0]],\n  "H": \n}')
        with self.assertRaises(InputError) as context:
            read_json(path)
        self.assertIn('line 4', str(context.exception))
        with self.assertRaises(InputError):
            read_json(os.path.join(self.directory.name, 'missing.json'))

    def test_nested_scenario(self):
        path = self.write('switch.json', {
            'A_minus': [[-1.0]],
            'delta_A': [[2.0]],
            'profile': {'kind': 'tanh', 'time_scale': 0.5},
            'discretization': {'T': 10.0, 'Nt': 400},
            'lambda_grid': [0.5, 1.0]
        })
        scenario = load_scenario(path)
        self.assertEqual(scenario.name, 'switch.json')
        self.assertEqual(scenario.path.profile, 'tanh')
        self.assertEqual(scenario.path.time_scale, 0.5)
        self.assertEqual((scenario.T, scenario.Nt), (10.0, 400))
        self.assertEqual(scenario.options, {'lambda_grid': [0.5, 1.0]})
        self.assertAlmostEqual(scenario.path.a_plus.eigenvalues[0], 1.0)

    def test_flat_scenario(self):
        scenario = scenario_from_dict({'A_minus': {'diag': [-1.0, 1.0]}, 'A_plus': {'diag': [1.0, -1.0]},
                                       'profile': 'ramp', 'T': 8, 'Nt': 100})
        self.assertEqual(scenario.path.profile, 'ramp')
        np.testing.assert_allclose(scenario.path.delta.eigenvalues, [-2.0, 2.0])
        self.assertEqual(scenario.Nt, 100)
        restored = scenario_from_dict(scenario_to_dict(scenario))
        np.testing.assert_allclose(restored.path.delta.entries, scenario.path.delta.entries)
        self.assertEqual(restored.T, scenario.T)

    def test_scenario_validation(self):
        with self.assertRaises(InputError):
            scenario_from_dict({'A_minus': [[1.0]]})
        with self.assertRaises(InputError):
            scenario_from_dict({'A_minus': [[-1.0]], 'delta_A': [[2.0]], 'profile': 'sigmoid'})
        with self.assertRaises(InputError):
            scenario_from_dict({'A_minus': [[-1.0]], 'delta_A': [[2.0]], 'Nt': 'many'})

    def test_dirac_model(self):
        model = dirac_model_from_dict({'L': 64.0, 'modes': 32, 'f': {'kind': 'gaussian', 'amp': 1.0, 'width': 2.0}})
        self.assertEqual(model.dimension, 65)
        constant = dirac_model_from_dict({'L': 10.0, 'modes': 4, 'f': {'kind': 'constant', 'value': 0.3}})
        self.assertAlmostEqual(constant.mean, 0.3)
        with self.assertRaises(InputError):
            dirac_model_from_dict({'L': 10.0, 'modes': 4})
        with self.assertRaises(InputError):
            dirac_model_from_dict({'L': 10.0, 'modes': 4, 'f': {'kind': 'square'}})
        with self.assertRaises(InputError):
            dirac_model_from_dict({'L': 10.0, 'modes': 4, 'f': {'kind': 'samples', 'values': [0.0] * 10}})

    def test_dirac_model_file(self):
        constant = {'L': 10.0, 'modes': 4, 'f': {'kind': 'constant', 'value': 0.3}}
        model, options = load_dirac_model(self.write('model.json', constant))
        self.assertEqual(model.dimension, 9)
        self.assertIsNone(options)
        _, options = load_dirac_model(self.write('witten.json', dict(constant, witten={'Nt': 128})))
        self.assertEqual(options, {'Nt': 128})
        with self.assertRaises(InputError):
            load_dirac_model(self.write('bad.json', dict(constant, witten=[128])))


class TestRunRecords(unittest.TestCase):
    logger = logging.getLogger(__name__)
    logging.basicConfig(format = '%(asctime)s %(module)s %(levelname)s: %(message)s',
                    datefmt = '%m/%d/%Y %I:%M:%S %p', level = logging.INFO)

    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.directory.cleanup()

    def test_write_atomic(self):
        path = os.path.join(self.directory.name, 'result.json')
        write_atomic(path, 'first')
        write_atomic(path, 'second')
        with open(path) as file:
            self.assertEqual(file.read(), 'second')
        self.assertEqual(os.listdir(self.directory.name), ['result.json'])
        self.assertEqual(len(file_hash(path)), 64)

    def test_record(self):
        path = os.path.join(self.directory.name, 'run.json')
        record = RunRecord(command='ssf', input_hash='0' * 64, flags={'seed': 0}, payload={'xi': [0.0]})
        record.save(path)
        saved = read_json(path)
        self.assertEqual(saved['command'], 'ssf')
        self.assertEqual(saved['status'], 'ok')
        self.assertEqual(saved['payload'], {'xi': [0.0]})

    def test_ledger(self):
        self.logger.info('Recording runs in a sqlite ledger')
        url = 'sqlite:///' + os.path.join(self.directory.name, 'runs.db')
        ledger = RunLedger(url)
        first = ledger.add(RunRecord(command='ssf', input_hash='a' * 64, wall_time=0.1))
        second = ledger.add(RunRecord(command='flow', input_hash='b' * 64, status='warned'))
        self.assertLess(first, second)
        runs = ledger.list_runs()
        self.assertEqual(list(runs['command']), ['ssf', 'flow'])
        flows = RunLedger(url).list_runs('flow')
        self.assertEqual(len(flows), 1)
        self.assertEqual(flows['status'].iloc[0], 'warned')
        ledger.engine.dispose()

    def test_ledger_url(self):
        self.assertEqual(ledger_url('sqlite://'), 'sqlite://')
        previous = os.environ.pop('SPECSHIFT_LEDGER_URL', None)
        try:
            self.assertIsNone(ledger_url())
            os.environ['SPECSHIFT_LEDGER_URL'] = 'sqlite:///runs.db'
            self.assertEqual(ledger_url(), 'sqlite:///runs.db')
        finally:
            os.environ.pop('SPECSHIFT_LEDGER_URL', None)
            if previous is not None:
                os.environ['SPECSHIFT_LEDGER_URL'] = previous
