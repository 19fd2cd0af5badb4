import unittest
import logging
import json
import math
import os
import tempfile

from click.testing import CliRunner

from specshift import __version__
from specshift.cli import cli
from specshift.run_management import RunLedger


SWITCH = {'A_minus': [[-1.0]], 'delta_A': [[2.0]],
          'profile': {'kind': 'logistic', 'time_scale': 1.0},
          'discretization': {'T': 12.0, 'Nt': 1200}}


class TestCommandLine(unittest.TestCase):
    logger = logging.getLogger(__name__)
    logging.basicConfig(format = '%(asctime)s %(module)s %(levelname)s: %(message)s',
                    datefmt = '%m/%d/%Y %I:%M:%S %p', level = logging.INFO)

    def setUp(self):
        self.directory = tempfile.TemporaryDirectory()
        self.runner = CliRunner()

    def tearDown(self):
        self.directory.cleanup()

    def path(self, name: str) -> str:
        return os.path.join(self.directory.name, name)

    def write(self, name: str, content) -> str:
        with open(self.path(name), 'w') as file:
            file.write(content if isinstance(content, str) else json.dumps(content))
        return self.path(name)

    def run_command(self, *args, env: dict = None):
        """Run with --out and return (exit code, parsed output document)."""
        out = self.path('out.json')
        if os.path.exists(out):
            os.remove(out)
        result = self.runner.invoke(cli, [*args, '--out', out], env=env)
        self.logger.info(f'{" ".join(args[:1])}: exit code {result.exit_code}')
        if not os.path.exists(out):
            return result.exit_code, None
        with open(out) as file:
            return result.exit_code, json.load(file)

    def test_identical_pair(self):
        pair = self.write('pair.json', {'H0': {'diag': [1.0, 2.0]}, 'H': {'diag': [1.0, 2.0]}})
        code, document = self.run_command('ssf', pair)
        self.assertEqual(code, 0)
        self.assertEqual(document['payload'], {'breakpoints': [], 'levels': [0.0]})
        self.assertEqual(document['status'], 'ok')
        self.assertEqual(document['version'], __version__)
        self.assertNotIn('wall_time', document)

    def test_diagonal_pair(self):
        pair = self.write('pair.json', {'H0': {'diag': [-1.0, 1.0]}, 'H': {'diag': [-2.0, 2.0]}})
        code, document = self.run_command('ssf', pair)
        self.assertEqual(code, 0)
        self.assertEqual(document['payload']['levels'], [0.0, -1.0, 0.0, 1.0, 0.0])

    def test_malformed_input(self):
        broken = self.write('broken.json', '{"H0": [[1.0]], "H": ')
        code, document = self.run_command('ssf', broken)
        self.assertEqual(code, 2)
        self.assertIsNone(document)
        code, _ = self.run_command('ssf', self.write('bad.json', {'H0': [[0.0, 1.0], [0.0, 0.0]], 'H': [[1.0]]}))
        self.assertEqual(code, 2)

    def test_closed_form_witten(self):
        code, document = self.run_command('witten', self.write('switch.json', SWITCH), '--method', 'closed')
        self.assertEqual(code, 0)
        self.assertEqual(document['payload']['exact'], '1')

    def test_resolvent_witten(self):
        code, document = self.run_command('witten', self.write('switch.json', SWITCH))
        self.assertEqual(code, 0)
        self.assertAlmostEqual(document['payload']['w_r'], 1.0, delta=0.05)

    def test_strict_non_fredholm(self):
        scenario = dict(SWITCH, A_minus=[[0.0]], delta_A=[[1.0]], discretization={'T': 12.0, 'Nt': 400})
        path = self.write('half.json', scenario)
        code, document = self.run_command('witten', path, '--method', 'semigroup', '--strict')
        self.assertEqual(code, 3)
        self.assertNotEqual(document['status'], 'ok')
        self.assertTrue(document['warnings'])

    def test_flow(self):
        code, document = self.run_command('flow', self.write('switch.json', SWITCH))
        self.assertEqual(code, 0)
        self.assertEqual(document['payload']['flow'], 1)

    def test_ptf_on_constant_path(self):
        scenario = dict(SWITCH, delta_A=[[0.0]], discretization={'T': 12.0, 'Nt': 200})
        code, document = self.run_command('ptf', self.write('constant.json', scenario))
        self.assertEqual(code, 0)
        self.assertEqual(document['payload']['residual'], [0.0, 0.0, 0.0])

    def test_dirac(self):
        model = {'L': 64.0, 'modes': 512, 'f': {'kind': 'gaussian', 'amp': math.sqrt(2 * math.pi) / 2.0, 'width': 2.0}}
        code, document = self.run_command('dirac1d', self.write('dirac.json', model))
        self.assertEqual(code, 0)
        self.assertAlmostEqual(document['payload']['ssf'], 1.0, delta=0.05)

    def test_csv_and_run_record(self):
        pair = self.write('pair.json', {'H0': {'diag': [-1.0, 1.0]}, 'H': {'diag': [-2.0, 2.0]}})
        out = self.path('xi.csv')
        result = self.runner.invoke(cli, ['ssf', pair, '--format', 'csv', '--out', out])
        self.assertEqual(result.exit_code, 0)
        with open(out) as file:
            lines = file.read().splitlines()
        self.assertEqual(lines[0], f'# specshift {__version__}')
        self.assertTrue(lines[1].startswith('# input_hash '))
        self.assertEqual(lines[2], 'lambda,xi')
        self.assertEqual(len(lines), 7)
        with open(out + '.run.json') as file:
            record = json.load(file)
        self.assertEqual(record['command'], 'ssf')
        self.assertIn('wall_time', record)

    def test_csv_needs_a_table(self):
        result = self.runner.invoke(cli, ['witten', self.write('switch.json', SWITCH), '--method', 'closed',
                                          '--format', 'csv'])
        self.assertEqual(result.exit_code, 2)

    def test_deterministic_output(self):
        pair = self.write('pair.json', {'H0': {'random': {'n': 6}}, 'H': {'random': {'n': 6}}})
        first = self.run_command('ssf', pair, '--seed', '11')[1]
        second = self.run_command('ssf', pair, '--seed', '11')[1]
        other = self.run_command('ssf', pair, '--seed', '12')[1]
        self.assertEqual(first, second)
        self.assertNotEqual(first['payload'], other['payload'])

    def test_ledger(self):
        url = 'sqlite:///' + self.path('runs.db')
        pair = self.write('pair.json', {'H0': {'diag': [1.0]}, 'H': {'diag': [2.0]}})
        self.run_command('ssf', pair, env={'SPECSHIFT_LEDGER_URL': url})
        self.run_command('ssf', pair, '--ledger', url)
        runs = RunLedger(url).list_runs('ssf')
        self.assertEqual(len(runs), 2)
        self.assertEqual(set(runs['status']), {'ok'})
