"""
Finite-dimensional self-adjoint operators: spectral decomposition, functional
calculus, spectral projections and counting functions.
"""

import logging
import math

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, NamedTuple

import numpy as np
import pandas as pd
import scipy.linalg

from specshift.exceptions import DomainError, InputError, InvariantViolation

logger = logging.getLogger(__name__)

HERMITICITY_TOL = 1e-12
DECOMPOSITION_TOL = 1e-10


class HermitianOperator:
    """
    Immutable Hermitian matrix with a cached spectral decomposition.

    The entries are symmetrized on construction after checking that
    ‖H − H*‖_F ≤ 1e-12·max(1, ‖H‖_F). Eigenvalues are ascending and the
    eigenvectors orthonormal (columns).
    """

    def __init__(self, entries):
        matrix = np.array(entries, dtype=complex)
        if matrix.ndim == 0:
            matrix = matrix.reshape(1, 1)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1] or matrix.shape[0] == 0:
            raise InputError(f'Expected a non-empty square matrix, got shape {matrix.shape}')
        if not np.all(np.isfinite(matrix)):
            raise InputError('Matrix has non-finite entries')

        defect = matrix - matrix.conj().T
        scale = max(1.0, float(np.linalg.norm(matrix)))
        if np.linalg.norm(defect) > HERMITICITY_TOL * scale:
            i, j = np.unravel_index(np.argmax(np.abs(defect)), defect.shape)
            raise InputError(f'Matrix is not Hermitian: entry ({i}, {j}) differs from the conjugate '
                             f'of entry ({j}, {i}) by {abs(defect[i, j]):.3e}')

        matrix = 0.5 * (matrix + matrix.conj().T)
        matrix.setflags(write=False)
        self.entries = matrix

    @classmethod
    def from_diagonal(cls, values):
        return cls(np.diag(np.asarray(values, dtype=float)))

    @classmethod
    def zeros(cls, n: int):
        return cls(np.zeros((n, n)))

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @cached_property
    def _decomposition(self):
        eigenvalues, eigenvectors = scipy.linalg.eigh(self.entries)
        residual = np.linalg.norm(self.entries @ eigenvectors - eigenvectors * eigenvalues)
        if residual > DECOMPOSITION_TOL * max(1.0, float(np.linalg.norm(self.entries))):
            raise InvariantViolation(f'Eigendecomposition residual {residual:.3e} above tolerance')
        eigenvalues.setflags(write=False)
        eigenvectors.setflags(write=False)
        return eigenvalues, eigenvectors

    @property
    def eigenvalues(self) -> np.ndarray:
        return self._decomposition[0]

    @property
    def eigenvectors(self) -> np.ndarray:
        return self._decomposition[1]

    @property
    def norm(self) -> float:
        """Operator (spectral) norm."""
        return float(np.max(np.abs(self.eigenvalues)))

    @property
    def is_zero(self) -> bool:
        return not np.any(self.entries)

    def trace(self) -> float:
        return float(np.sum(self.eigenvalues))

    def __add__(self, other: 'HermitianOperator') -> 'HermitianOperator':
        _check_same_dimension(self, other)
        return HermitianOperator(self.entries + other.entries)

    def __sub__(self, other: 'HermitianOperator') -> 'HermitianOperator':
        _check_same_dimension(self, other)
        return HermitianOperator(self.entries - other.entries)

    def __neg__(self) -> 'HermitianOperator':
        return HermitianOperator(-self.entries)

    def __mul__(self, scalar: float) -> 'HermitianOperator':
        if np.iscomplexobj(scalar) and np.imag(scalar) != 0:
            raise InputError('Hermitian operators can only be scaled by real numbers')
        return HermitianOperator(float(np.real(scalar)) * self.entries)

    __rmul__ = __mul__

    def __repr__(self):
        return f'HermitianOperator(n={self.n}, spectrum=[{self.eigenvalues[0]:.4g}, {self.eigenvalues[-1]:.4g}])'


def _check_same_dimension(first: HermitianOperator, second: HermitianOperator):
    if first.n != second.n:
        raise InputError(f'Dimension mismatch: {first.n} vs {second.n}')


@dataclass(frozen=True)
class Interval:
    """Real interval, closed at the lower end and open at the upper end by default."""
    lower: float = -math.inf
    upper: float = math.inf
    lower_closed: bool = True
    upper_closed: bool = False

    def __post_init__(self):
        if self.lower > self.upper:
            raise InputError(f'Empty interval ({self.lower}, {self.upper})')

    def contains(self, x):
        x = np.asarray(x, dtype=float)
        above = x >= self.lower if self.lower_closed else x > self.lower
        below = x <= self.upper if self.upper_closed else x < self.upper
        return above & below

    @property
    def length(self) -> float:
        return self.upper - self.lower


class Inertia(NamedTuple):
    positive: int
    negative: int
    null: int


def counting_function(H: HermitianOperator, t: float) -> int:
    """Number of eigenvalues strictly greater than t, with multiplicity."""
    return int(np.count_nonzero(H.eigenvalues > t))


def spectral_projection(H: HermitianOperator, interval: Interval) -> HermitianOperator:
    """Orthogonal projection onto the eigenvectors whose eigenvalues lie in `interval`."""
    selected = H.eigenvectors[:, interval.contains(H.eigenvalues)]
    return HermitianOperator(selected @ selected.conj().T)


def apply_function(H: HermitianOperator, f: Callable) -> np.ndarray:
    """
    Functional calculus U·diag(f(λ))·U*.

    `f` must accept an array of eigenvalues. Complex-valued functions are
    allowed, so the result is returned as a plain matrix.
    """
    values = evaluate_function(f, H.eigenvalues)
    if not np.all(np.isfinite(values)):
        bad = H.eigenvalues[~np.isfinite(values)][0]
        raise DomainError(f'Function is not finite at eigenvalue {bad:.6g}')
    return (H.eigenvectors * values) @ H.eigenvectors.conj().T


def evaluate_function(f: Callable, x) -> np.ndarray:
    """Evaluate a vectorized scalar map, broadcasting constant results to the input shape."""
    x = np.asarray(x, dtype=float)
    return np.broadcast_to(np.asarray(f(x)), x.shape)


def g_z(x, z: complex):
    """g_z(x) = x·(x² − z)^{-1/2} with the principal square root, z ∉ [0, ∞)."""
    z = complex(z)
    if z.imag == 0 and z.real >= 0:
        raise DomainError(f'g_z is undefined for z = {z.real} on the half-line [0, ∞)')
    x = np.asarray(x, dtype=float)
    return x / np.sqrt(x.astype(complex) ** 2 - z)


def inertia(H: HermitianOperator, tol: float = None) -> Inertia:
    if tol is None:
        tol = 1e-10 * max(1.0, H.norm)
    eigenvalues = H.eigenvalues
    return Inertia(positive=int(np.count_nonzero(eigenvalues > tol)),
                   negative=int(np.count_nonzero(eigenvalues < -tol)),
                   null=int(np.count_nonzero(np.abs(eigenvalues) <= tol)))


def trace_norm(V: HermitianOperator) -> float:
    return float(np.sum(np.abs(V.eigenvalues)))


def spawn_seeds(seed: int, count: int) -> list:
    """Independent child seeds, so ensemble members do not depend on evaluation order."""
    return [int(child.generate_state(1)[0]) for child in np.random.SeedSequence(seed).spawn(count)]


def random_hermitian(seed: int, n: int, scale: float = 1.0) -> HermitianOperator:
    rng = np.random.default_rng(seed)
    matrix = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return HermitianOperator(0.5 * scale * (matrix + matrix.conj().T))


def random_hermitian_with_gap(seed: int, n: int, gap: float = 0.5, scale: float = 2.0) -> HermitianOperator:
    """Random Hermitian matrix whose spectrum avoids (−gap, gap), with random signs and eigenbasis."""
    rng = np.random.default_rng(seed)
    magnitudes = rng.uniform(gap, gap + scale, size=n)
    signs = rng.choice([-1.0, 1.0], size=n)
    q, r = np.linalg.qr(rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n)))
    q = q * (np.diag(r) / np.abs(np.diag(r)))
    return HermitianOperator((q * (signs * magnitudes)) @ q.conj().T)


@dataclass
class SpectralSample:
    """Values of a real curve on a strictly increasing grid, with free-form metadata."""
    grid: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.grid = np.asarray(self.grid, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.grid.ndim != 1 or self.grid.shape != self.values.shape:
            raise InputError('Grid and values must be one-dimensional arrays of the same length')
        if np.any(np.diff(self.grid) <= 0):
            raise InputError('Sample grid must be strictly increasing')
        if not np.all(np.isfinite(self.values)):
            raise InputError('Sample values must be finite')

    def __len__(self):
        return len(self.grid)

    def to_frame(self, x_name: str = 'x', value_name: str = 'value') -> pd.DataFrame:
        frame = pd.DataFrame({x_name: self.grid, value_name: self.values})
        for key, column in self.meta.items():
            if np.ndim(column) == 1 and len(column) == len(self.grid):
                frame[key] = np.asarray(column)
        return frame

    def to_dict(self) -> dict:
        return {'grid': self.grid.tolist(), 'values': self.values.tolist()}

