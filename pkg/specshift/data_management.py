"""
Reading and writing the JSON files the command line works with: matrix pairs,
operator-path scenarios and periodic Dirac models.
"""

import hashlib
import json
import logging
import os
import tempfile

from dataclasses import dataclass, field

import numpy as np

from specshift.dirac import PeriodicDiracModel
from specshift.exceptions import InputError
from specshift.model_operator import DEFAULT_WINDOW, OperatorPath
from specshift.operators import HermitianOperator, random_hermitian, random_hermitian_with_gap, spawn_seeds

logger = logging.getLogger(__name__)


def read_json(path: str) -> dict:
    """Load a JSON file, reporting decoding errors with their line and column."""
    try:
        with open(path, 'r') as file:
            return json.load(file)
    except json.JSONDecodeError as error:
        raise InputError(f'{path}: line {error.lineno} column {error.colno}: {error.msg}')
    except OSError as error:
        raise InputError(f'{path}: {error.strerror}')


def file_hash(path: str) -> str:
    with open(path, 'rb') as file:
        return hashlib.sha256(file.read()).hexdigest()


def write_atomic(path: str, text: str):
    """Write through a temporary file in the target directory, then rename over the target."""
    directory = os.path.dirname(os.path.abspath(path))
    with tempfile.NamedTemporaryFile('w', dir=directory, prefix='.specshift_', delete=False) as temporary:
        temporary.write(text)
        temporary.flush()
        os.fsync(temporary.fileno())
    os.replace(temporary.name, path)


def operator_from_dict(data, seed: int = None, label: str = 'matrix') -> HermitianOperator:
    """
    Build a Hermitian matrix from one of the accepted encodings.

    - nested list of real entries
    - {"diag": [...]}
    - {"n": int, "re": [[...]], "im": [[...]]} (im optional)
    - {"random": {"n": int, "scale": float, "gap": float}} (gap optional, needs a seed)
    """
    if isinstance(data, list):
        return HermitianOperator(np.asarray(data, dtype=float))
    if not isinstance(data, dict):
        raise InputError(f'{label}: expected a list or an object')
    if 'diag' in data:
        return HermitianOperator.from_diagonal(data['diag'])
    if 'random' in data:
        options = data['random']
        if seed is None:
            raise InputError(f'{label}: random matrices need a seed')
        if 'gap' in options:
            return random_hermitian_with_gap(seed, int(options['n']), float(options['gap']),
                                             float(options.get('scale', 2.0)))
        return random_hermitian(seed, int(options['n']), float(options.get('scale', 1.0)))
    if 're' in data:
        real = np.asarray(data['re'], dtype=float)
        imaginary = np.asarray(data.get('im', np.zeros_like(real)), dtype=float)
        if real.shape != imaginary.shape:
            raise InputError(f'{label}: "re" and "im" have different shapes')
        if 'n' in data and real.shape != (data['n'], data['n']):
            raise InputError(f'{label}: declared n={data["n"]} but entries have shape {real.shape}')
        try:
            return HermitianOperator(real + 1j * imaginary)
        except InputError as error:
            raise InputError(f'{label}: {error}')
    raise InputError(f'{label}: unknown matrix encoding with keys {sorted(data)}')


def operator_to_dict(H: HermitianOperator) -> dict:
    return {'n': H.n, 're': H.entries.real.tolist(), 'im': H.entries.imag.tolist()}


def load_pair(path: str, seed: int = 0):
    """(H0, H) from a file {"H0": matrix, "H": matrix}."""
    data = read_json(path)
    missing = {'H0', 'H'} - set(data)
    if missing:
        raise InputError(f'{path}: missing {sorted(missing)}')
    seeds = spawn_seeds(seed, 2)
    return (operator_from_dict(data['H0'], seeds[0], 'H0'),
            operator_from_dict(data['H'], seeds[1], 'H'))


@dataclass
class Scenario:
    """An operator path together with its discretization parameters."""
    name: str
    path: OperatorPath
    T: float
    Nt: int
    window: float = DEFAULT_WINDOW
    options: dict = field(default_factory=dict)


def scenario_from_dict(data: dict, seed: int = 0, name: str = 'scenario') -> Scenario:
    """
    Scenario files hold "A_minus" and one of "delta_A" or "A_plus", a "profile"
    given as {"kind", "time_scale"} or by its name, and the discretization
    {"T", "Nt", "window"}. Any other key is kept in `options` for the command that reads it.
    """
    delta_key = next((key for key in ('delta_A', 'delta') if key in data), None)
    if 'A_minus' not in data or (delta_key is None and 'A_plus' not in data):
        raise InputError(f'{name}: a scenario needs "A_minus" and one of "delta_A" or "A_plus"')
    seeds = spawn_seeds(seed, 2)
    a_minus = operator_from_dict(data['A_minus'], seeds[0], 'A_minus')
    if delta_key is not None:
        delta = operator_from_dict(data[delta_key], seeds[1], delta_key)
    else:
        delta = operator_from_dict(data['A_plus'], seeds[1], 'A_plus') - a_minus

    profile = data.get('profile', 'logistic')
    if not isinstance(profile, dict):
        profile = {'kind': profile, 'time_scale': data.get('time_scale', 1.0)}
    discretization = data.get('discretization', data)
    known = {'name', 'A_minus', 'delta', 'delta_A', 'A_plus', 'profile', 'time_scale',
             'discretization', 'T', 'Nt', 'window'}
    try:
        path = OperatorPath(a_minus, delta,
                            profile=profile.get('kind', 'logistic'),
                            time_scale=float(profile.get('time_scale', 1.0)))
        return Scenario(name=data.get('name', name),
                        path=path,
                        T=float(discretization.get('T', 12.0)),
                        Nt=int(discretization.get('Nt', 1200)),
                        window=float(discretization.get('window', DEFAULT_WINDOW)),
                        options={key: value for key, value in data.items() if key not in known})
    except InputError:
        raise
    except (TypeError, ValueError) as error:
        raise InputError(f'{name}: {error}')


def load_scenario(path: str, seed: int = 0) -> Scenario:
    return scenario_from_dict(read_json(path), seed, name=os.path.basename(path))


def scenario_to_dict(scenario: Scenario) -> dict:
    return {'name': scenario.name,
            'A_minus': operator_to_dict(scenario.path.a_minus),
            'delta_A': operator_to_dict(scenario.path.delta),
            'profile': {'kind': scenario.path.profile, 'time_scale': scenario.path.time_scale},
            'discretization': {'T': scenario.T, 'Nt': scenario.Nt, 'window': scenario.window},
            **scenario.options}


def dirac_model_from_dict(data: dict, name: str = 'model') -> PeriodicDiracModel:
    """
    Dirac model files hold "L", "modes" and "f", where f is one of
    {"kind": "gaussian", "amp", "width", "center"?},
    {"kind": "constant", "value"} or {"kind": "samples", "values": [...]}.
    """
    try:
        length, modes, profile = float(data['L']), int(data['modes']), data['f']
        kind = profile.get('kind')
        if kind == 'gaussian':
            amplitude = profile['amp'] if 'amp' in profile else profile['amplitude']
            return PeriodicDiracModel.gaussian(length, modes, float(amplitude),
                                               float(profile['width']), profile.get('center'))
        if kind == 'constant':
            return PeriodicDiracModel.constant(length, modes, float(profile['value']))
        if kind == 'samples':
            return PeriodicDiracModel(length, modes, np.asarray(profile['values'], dtype=float))
    except KeyError as missing:
        raise InputError(f'{name}: missing {missing}')
    except AttributeError:
        raise InputError(f'{name}: "f" must be an object')
    raise InputError(f'{name}: unknown profile kind "{kind}"')


def load_dirac_model(path: str) -> tuple:
    """The model in a Dirac model file and its optional "witten" options (None when absent)."""
    name = os.path.basename(path)
    data = read_json(path)
    if not isinstance(data, dict):
        raise InputError(f'{name}: a Dirac model file holds a JSON object')
    witten_options = data.get('witten')
    if witten_options is not None and not isinstance(witten_options, dict):
        raise InputError(f'{name}: "witten" must be an object of witten_dirac options')
    return dirac_model_from_dict(data, name=name), witten_options
