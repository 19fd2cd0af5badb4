"""
The model operator D_A = d/dt + A(t) on a truncated time interval.

A(t) = A₋ + θ(t/s)·Δ interpolates between the asymptotes A₋ and A₊ = A₋ + Δ.
On [−T, T] the operator is discretized with a node-to-midpoint scheme (values
on Nt nodes, equations at the Nt − 1 midpoints) and spectral (APS) boundary
conditions: at −T the nonnegative spectral subspace of A(−T) is removed, at +T
the negative one. The discrete D is therefore rectangular and its index
(#neg A(−T)) − (#neg A(T)) matches the continuum Fredholm index.

Traces that compare |D|² = D*D with |D*|² = DD* are taken over an interior
window |t| ≤ ω·T: on a finite interval the two operators are isospectral away
from their kernels, and the continuum trace difference is recovered as the
windowed one because its density is localized where A(t) varies.
"""

import logging
import math
import warnings

from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np
import scipy.linalg
import scipy.special

from specshift.exceptions import (
    BoundaryDegeneracyWarning,
    DomainError,
    FiniteIntervalWarning,
    IllSeparatedKernelWarning,
    InputError,
    TruncationError,
)
from specshift.operators import HermitianOperator, _check_same_dimension, g_z

logger = logging.getLogger(__name__)

PROFILES = ('logistic', 'tanh', 'ramp')
DEFAULT_WINDOW = 0.5
DEFAULT_FLAT_TOL = 1e-5
MIN_NODES = 16
MAX_DENSE_SIZE = 12_000
BOUNDARY_ZERO_TOL = 1e-10
HORIZON_EXPONENT = 4.0
CONTOUR_POINTS = 24


def profile_values(profile: str, x):
    """θ(x) and θ′(x) for the unit-scale switching profiles."""
    x = np.asarray(x, dtype=float)
    if profile == 'logistic':
        theta = scipy.special.expit(x)
        return theta, theta * (1.0 - theta)
    if profile == 'tanh':
        th = np.tanh(x)
        return 0.5 * (1.0 + th), 0.5 * (1.0 - th ** 2)
    if profile == 'ramp':
        # C¹ cubic on [−1, 1], constant outside
        u = np.clip(0.5 * (x + 1.0), 0.0, 1.0)
        return u * u * (3.0 - 2.0 * u), 3.0 * u * (1.0 - u)
    raise InputError(f'Unknown profile "{profile}", expected one of {PROFILES}')


@dataclass(frozen=True)
class OperatorPath:
    """
    A(t) = A₋ + θ(t/time_scale)·Δ.

    Args:
        a_minus (HermitianOperator): Asymptote at −∞.
        delta (HermitianOperator): A₊ − A₋.
        profile (str): 'logistic', 'tanh' or 'ramp'.
        time_scale (float): Stretch factor of the profile.
    """
    a_minus: HermitianOperator
    delta: HermitianOperator
    profile: str = 'logistic'
    time_scale: float = 1.0

    def __post_init__(self):
        _check_same_dimension(self.a_minus, self.delta)
        if self.profile not in PROFILES:
            raise InputError(f'Unknown profile "{self.profile}", expected one of {PROFILES}')
        if not self.time_scale > 0:
            raise InputError('time_scale must be positive')

    @property
    def n(self) -> int:
        return self.a_minus.n

    @cached_property
    def a_plus(self) -> HermitianOperator:
        return self.a_minus + self.delta

    @property
    def is_constant(self) -> bool:
        return self.delta.is_zero

    def theta(self, t):
        return profile_values(self.profile, np.asarray(t) / self.time_scale)[0]

    def dtheta(self, t):
        return profile_values(self.profile, np.asarray(t) / self.time_scale)[1] / self.time_scale

    def matrix_at(self, t: float) -> np.ndarray:
        return self.a_minus.entries + float(self.theta(t)) * self.delta.entries

    def at(self, t: float) -> HermitianOperator:
        return HermitianOperator(self.matrix_at(t))

    @property
    def endpoint_gap(self) -> float:
        """Distance of σ(A₋) ∪ σ(A₊) to 0."""
        return float(min(np.min(np.abs(a.eigenvalues)) for a in asymptotes(self)))

    def reversed(self) -> 'OperatorPath':
        """The path t ↦ A(−t); exact because every profile satisfies θ(−x) = 1 − θ(x)."""
        return OperatorPath(a_minus=self.a_plus, delta=-self.delta,
                            profile=self.profile, time_scale=self.time_scale)

    def flat_horizon(self, tol: float = 1e-8) -> float:
        """Smallest t > 0 with θ′(±t) ≤ tol."""
        if self.dtheta(0.0) <= tol:
            return 0.0
        high = self.time_scale
        while self.dtheta(high) > tol:
            high *= 2.0
        low = 0.0
        for _ in range(80):
            middle = 0.5 * (low + high)
            if self.dtheta(middle) > tol:
                low = middle
            else:
                high = middle
        return high


def asymptotes(path: OperatorPath) -> tuple:
    """(A₋, A₊), the limits of A(t) as t → −∞ and t → +∞."""
    return path.a_minus, path.a_plus


def is_fredholm(path: OperatorPath, tol: float = 1e-8) -> bool:
    """D_A is Fredholm exactly when 0 is in neither σ(A₋) nor σ(A₊)."""
    return path.endpoint_gap > tol


def essential_spectrum_lines(path: OperatorPath) -> tuple:
    """Real parts of the vertical lines {λ + iν} making up the essential spectrum of D_A."""
    return tuple(float(x) for x in np.unique(np.concatenate([a.eigenvalues for a in asymptotes(path)])))


class KernelDims(NamedTuple):
    kernel: int
    cokernel: int

    @property
    def index(self) -> int:
        return self.kernel - self.cokernel


@dataclass
class TraceDifference:
    value: complex
    error: float


class DiscretizedDA:
    """
    Block-bidiagonal matrix of D_A on [−T, T], built by `assemble`.

    Row k (midpoint t_k + h/2) couples node k through `left_blocks[k]` and node
    k+1 through `right_blocks[k]`. Interior nodes carry n unknowns; the first
    and last nodes carry only the subspaces kept by the boundary conditions.
    """

    def __init__(self, path: OperatorPath, T: float, Nt: int, window: float,
                 left_blocks: list, right_blocks: list, column_dims: list):
        self.path = path
        self.T = T
        self.Nt = Nt
        self.h = 2.0 * T / (Nt - 1)
        self.times = np.linspace(-T, T, Nt)
        self.midpoint_times = self.times[:-1] + 0.5 * self.h
        self.window = window
        self.left_blocks = left_blocks
        self.right_blocks = right_blocks
        self.column_dims = column_dims

        inside = np.nonzero(np.abs(self.times) <= window * T)[0]
        self.window_nodes = np.arange(max(int(inside[0]), 1), min(int(inside[-1]), Nt - 2) + 1)

    @property
    def n(self) -> int:
        return self.path.n

    @property
    def rows(self) -> int:
        return self.n * (self.Nt - 1)

    @property
    def cols(self) -> int:
        return int(sum(self.column_dims))

    @property
    def column_offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.column_dims)])

    def window_columns(self, fraction: float = 1.0) -> np.ndarray:
        nodes = self.window_subset(fraction)
        offsets = self.column_offsets
        return np.concatenate([np.arange(offsets[i], offsets[i + 1]) for i in nodes])

    def window_rows(self, fraction: float = 1.0) -> np.ndarray:
        return np.concatenate([np.arange(k * self.n, (k + 1) * self.n) for k in self.window_subset(fraction)])

    def window_subset(self, fraction: float) -> np.ndarray:
        if fraction >= 1.0:
            return self.window_nodes
        limit = fraction * self.window * self.T
        return np.array([i for i in self.window_nodes if abs(self.times[i]) <= limit])

    def matrix(self) -> np.ndarray:
        if max(self.rows, self.cols) > MAX_DENSE_SIZE:
            raise InputError(f'Dense matrix of size {self.rows}x{self.cols} requested; use the windowed sweeps')
        D = np.zeros((self.rows, self.cols), dtype=complex)
        offsets = self.column_offsets
        n = self.n
        for k in range(self.Nt - 1):
            D[k * n:(k + 1) * n, offsets[k]:offsets[k + 1]] = self.left_blocks[k]
            D[k * n:(k + 1) * n, offsets[k + 1]:offsets[k + 2]] = self.right_blocks[k]
        return D

    def column_gram_chain(self):
        """Diagonal and upper blocks of D*D (one block per node with unknowns)."""
        last = self.Nt - 1
        diag, upper = [], []
        for i in range(self.Nt):
            block = np.zeros((self.column_dims[i], self.column_dims[i]), dtype=complex)
            if i < last:
                block += self.left_blocks[i].conj().T @ self.left_blocks[i]
            if i > 0:
                block += self.right_blocks[i - 1].conj().T @ self.right_blocks[i - 1]
            diag.append(block)
            if i < last:
                upper.append(self.left_blocks[i].conj().T @ self.right_blocks[i])
        first = 1 if self.column_dims[0] == 0 else 0
        stop = last if self.column_dims[last] == 0 else last + 1
        return diag[first:stop], upper[first:stop - 1], first

    def row_gram_chain(self):
        """Diagonal and upper blocks of DD* (one block per midpoint)."""
        diag = [lb @ lb.conj().T + rb @ rb.conj().T for lb, rb in zip(self.left_blocks, self.right_blocks)]
        upper = [self.right_blocks[k] @ self.left_blocks[k + 1].conj().T for k in range(self.Nt - 2)]
        return diag, upper, 0

    @cached_property
    def column_spectrum(self):
        """Eigenvalues of D*D and their weights on the window columns."""
        D = self.matrix()
        return _windowed_spectrum(D.conj().T @ D, self.window_columns())

    @cached_property
    def row_spectrum(self):
        D = self.matrix()
        return _windowed_spectrum(D @ D.conj().T, self.window_rows())


def _windowed_spectrum(gram: np.ndarray, window: np.ndarray):
    logger.info(f'Diagonalizing Gram matrix of size {gram.shape[0]}')
    eigenvalues, eigenvectors = scipy.linalg.eigh(gram)
    weights = np.sum(np.abs(eigenvectors[window, :]) ** 2, axis=0)
    return eigenvalues, weights


def assemble(path: OperatorPath,
             T: float,
             Nt: int,
             window: float = DEFAULT_WINDOW,
             flat_tol: float = DEFAULT_FLAT_TOL) -> DiscretizedDA:
    """
    Discretize D_A on [−T, T] with Nt nodes and APS boundary conditions.

    :param path (OperatorPath): The operator path A(t).
    :param T (float): Half-length of the time interval.
    :param Nt (int): Number of nodes, at least 16.
    :param window (float, optional): Fraction ω of T used for local traces. Defaults to 0.5.
    :param flat_tol (float, optional): Maximal θ′ at ±T. Defaults to 1e-5.

    :returns DiscretizedDA: the rectangular discrete operator.
    """
    if Nt < MIN_NODES:
        raise InputError(f'At least {MIN_NODES} nodes are required, got {Nt}')
    if not T > 0:
        raise InputError('T must be positive')
    if not 0 < window < 1:
        raise InputError('window must lie in (0, 1)')
    slope = max(float(path.dtheta(-T)), float(path.dtheta(T)))
    if slope > flat_tol:
        raise TruncationError(f'Profile not flat at ±T={T}: θ′ = {slope:.2e} exceeds {flat_tol:.0e}')

    n = path.n
    h = 2.0 * T / (Nt - 1)
    times = np.linspace(-T, T, Nt)

    start_values, start_vectors = scipy.linalg.eigh(path.matrix_at(-T))
    end_values, end_vectors = scipy.linalg.eigh(path.matrix_at(T))
    for label, values in (('-T', start_values), ('+T', end_values)):
        if np.min(np.abs(values)) < BOUNDARY_ZERO_TOL * max(1.0, np.max(np.abs(values))):
            message = f'A({label}) has an eigenvalue at 0; the spectral boundary condition is degenerate'
            warnings.warn(message, BoundaryDegeneracyWarning)
            logger.warning(message)
    start_basis = start_vectors[:, start_values < 0]
    end_basis = end_vectors[:, end_values >= 0]

    identity = np.eye(n)
    bases = [start_basis] + [identity] * (Nt - 2) + [end_basis]
    left_blocks, right_blocks = [], []
    for k in range(Nt - 1):
        a_mid = path.matrix_at(times[k] + 0.5 * h)
        left_blocks.append((-identity / h + 0.5 * a_mid) @ bases[k])
        right_blocks.append((identity / h + 0.5 * a_mid) @ bases[k + 1])

    discretized = DiscretizedDA(path, T, Nt, window, left_blocks, right_blocks,
                                [b.shape[1] for b in bases])
    logger.info(f'Assembled D_A: {discretized.rows} rows, {discretized.cols} columns, h={h:.4g}')
    return discretized


def adjoint_matrix(D: DiscretizedDA) -> np.ndarray:
    """
    Direct discretization of −d/dt + A(t) from midpoints to nodes.

    Node i receives −(g_i − g_{i−1})/h + ½(A(m_i)g_i + A(m_{i−1})g_{i−1}),
    restricted to the subspace kept at the boundary nodes. Equal to D* when
    the adjoint of d/dt + A is −d/dt + A with the adjoint boundary conditions.
    """
    path, n, h = D.path, D.n, D.h
    identity = np.eye(n)
    adjoint = np.zeros((D.cols, D.rows), dtype=complex)
    offsets = D.column_offsets
    start_basis = _kept_basis(path, -D.T, negative=True)
    end_basis = _kept_basis(path, D.T, negative=False)
    for i in range(D.Nt):
        rows = slice(offsets[i], offsets[i + 1])
        projector = start_basis if i == 0 else end_basis if i == D.Nt - 1 else identity
        if i < D.Nt - 1:
            a_mid = path.matrix_at(D.midpoint_times[i])
            adjoint[rows, i * n:(i + 1) * n] = projector.conj().T @ (-identity / h + 0.5 * a_mid)
        if i > 0:
            a_mid = path.matrix_at(D.midpoint_times[i - 1])
            adjoint[rows, (i - 1) * n:i * n] = projector.conj().T @ (identity / h + 0.5 * a_mid)
    return adjoint


def _kept_basis(path: OperatorPath, t: float, negative: bool) -> np.ndarray:
    values, vectors = scipy.linalg.eigh(path.matrix_at(t))
    return vectors[:, values < 0] if negative else vectors[:, values >= 0]


def kernel_dims(D: DiscretizedDA, tau: float = None) -> KernelDims:
    """
    (dim ker D, dim ker D*) from the singular values of the discrete operator.

    The rank counts singular values above τ, by default 100·eps·σ_max·max(rows, cols).
    """
    singular_values = scipy.linalg.svdvals(D.matrix())
    if tau is None:
        tau = 100 * np.finfo(float).eps * float(singular_values[0]) * max(D.rows, D.cols)
    if np.any((singular_values > tau / 10) & (singular_values < 10 * tau)):
        message = f'Singular values within a decade of the rank threshold {tau:.2e}'
        warnings.warn(message, IllSeparatedKernelWarning)
        logger.warning(message)
    rank = int(np.count_nonzero(singular_values > tau))
    return KernelDims(kernel=D.cols - rank, cokernel=D.rows - rank)


def block_tridiagonal_resolvent_diagonal(diag: list, upper: list, z: complex, indices) -> list:
    """
    Traces of the diagonal blocks ((M − z)⁻¹)_ii for a Hermitian block-tridiagonal M.

    Recursive Green's function sweeps from both ends; `upper[i]` is M_{i,i+1}.
    """
    count = len(diag)
    eyes = [np.eye(block.shape[0]) for block in diag]
    left = [None] * count
    right = [None] * count
    left[0] = np.linalg.inv(diag[0] - z * eyes[0])
    for i in range(1, count):
        coupling = upper[i - 1].conj().T @ left[i - 1] @ upper[i - 1]
        left[i] = np.linalg.inv(diag[i] - z * eyes[i] - coupling)
    right[-1] = np.linalg.inv(diag[-1] - z * eyes[-1])
    for i in range(count - 2, -1, -1):
        coupling = upper[i] @ right[i + 1] @ upper[i].conj().T
        right[i] = np.linalg.inv(diag[i] - z * eyes[i] - coupling)

    traces = []
    for i in indices:
        self_energy = np.zeros_like(diag[i], dtype=complex)
        if i > 0:
            self_energy += upper[i - 1].conj().T @ left[i - 1] @ upper[i - 1]
        if i < count - 1:
            self_energy += upper[i] @ right[i + 1] @ upper[i].conj().T
        traces.append(complex(np.trace(np.linalg.inv(diag[i] - z * eyes[i] - self_energy))))
    return traces


def _check_resolvent_point(z: complex):
    z = complex(z)
    if z.imag == 0 and z.real >= 0:
        raise DomainError(f'Resolvent traces need z outside [0, ∞), got {z.real}')
    return z


def _windowed_resolvent_trace(chain, nodes: np.ndarray, inner: np.ndarray, z: complex):
    diag, upper, shift = chain
    positions = [i - shift for i in nodes]
    traces = dict(zip(nodes, block_tridiagonal_resolvent_diagonal(diag, upper, z, positions)))
    return sum(traces.values()), sum(traces[i] for i in inner)


def resolvent_trace_diff(D: DiscretizedDA, z: complex, local: bool = True) -> TraceDifference:
    """
    tr((DD* − z)⁻¹ − (D*D − z)⁻¹), the left side of the principal trace formula.

    With `local=True` the traces run over the window nodes (midpoints for DD*)
    and `error` is the change when the window shrinks to 80 %. With
    `local=False` the full finite traces cancel except on the kernels and the
    result is (dim ker D − dim ker D*)/z.
    """
    z = _check_resolvent_point(z)
    if D.path.is_constant:
        return TraceDifference(0j, 0.0)
    if not local:
        dims = kernel_dims(D)
        return TraceDifference(dims.index / z, 0.0)

    nodes = D.window_nodes
    inner = D.window_subset(0.8)
    rows_full, rows_inner = _windowed_resolvent_trace(D.row_gram_chain(), nodes, inner, z)
    cols_full, cols_inner = _windowed_resolvent_trace(D.column_gram_chain(), nodes, inner, z)
    value = rows_full - cols_full
    return TraceDifference(value, abs(value - (rows_inner - cols_inner)))


def semigroup_horizon(D: DiscretizedDA) -> float:
    """
    Largest t at which the windowed heat traces still ignore the interval ends.

    The level spacing near 0 caps t at (2T/π)². Boundary effects reach the
    window edge, a distance d = (1 − ω)T from the ends, with weight
    exp(−d²/t − gap²·t), so for small endpoint gaps t must also stay below
    the smaller root of d²/t + gap²·t = HORIZON_EXPONENT.
    """
    cap = (2.0 * D.T / math.pi) ** 2
    distance = (1.0 - D.window) * D.T
    gap = D.path.endpoint_gap
    if 2.0 * distance * gap >= HORIZON_EXPONENT:
        return cap
    root = math.sqrt(HORIZON_EXPONENT ** 2 - 4.0 * (gap * distance) ** 2)
    return min(cap, 2.0 * distance ** 2 / (HORIZON_EXPONENT + root))


def _contour_heat_trace_diff(D: DiscretizedDA, t: float, points: int = CONTOUR_POINTS) -> float:
    """
    Windowed tr(e^{−tD*D} − e^{−tDD*}) from resolvent sweeps on a parabolic contour.

    e^{−tx} = (2πi)⁻¹∫ e^{s}(s + tx)⁻¹ ds along s(θ) = N(0.1309 − 0.1194θ² + 0.25iθ),
    θ ∈ [−π, π], with the midpoint rule in θ. Conjugate nodes give conjugate
    terms, so only the upper half of the contour is evaluated.
    """
    theta = (np.arange(points // 2, points) + 0.5) * 2.0 * math.pi / points - math.pi
    nodes = points * (0.1309 - 0.1194 * theta ** 2 + 0.25j * theta)
    slopes = points * (-0.2388 * theta + 0.25j)
    traces = np.array([resolvent_trace_diff(D, -s / t).value for s in nodes])
    # resolvent_trace_diff is the row trace minus the column trace
    return float(-2.0 / (points * t) * np.sum(np.imag(np.exp(nodes) * slopes * traces)))


def semigroup_trace_diff(D: DiscretizedDA, t: float, local: bool = True) -> float:
    """tr(e^{−tD*D} − e^{−tDD*}) over the window, which tends to the index as t → ∞."""
    if not t > 0:
        raise DomainError('The semigroup trace needs t > 0')
    if t > semigroup_horizon(D):
        message = f't={t:.4g} beyond the trust horizon {semigroup_horizon(D):.4g} of T={D.T}'
        warnings.warn(message, FiniteIntervalWarning)
        logger.warning(message)
    if D.path.is_constant:
        return 0.0
    if not local:
        return float(kernel_dims(D).index)
    if max(D.rows, D.cols) > MAX_DENSE_SIZE:
        return _contour_heat_trace_diff(D, t)
    column_values, column_weights = D.column_spectrum
    row_values, row_weights = D.row_spectrum
    return float(np.sum(column_weights * np.exp(-t * np.maximum(column_values, 0.0)))
                 - np.sum(row_weights * np.exp(-t * np.maximum(row_values, 0.0))))


def local_counting_difference(D: DiscretizedDA, lam, epsilon):
    """
    Windowed ξ(λ; DD*, D*D), regularized by a Poisson kernel of width ε.

    Each eigenvalue e contributes its window weight times ½ + π⁻¹·arctan((e − λ)/ε),
    the smoothed indicator of e > λ. The result vanishes below 0 because both
    windows hold the same number of sites.
    """
    lam = np.asarray(lam, dtype=float)
    epsilon = np.broadcast_to(np.asarray(epsilon, dtype=float), lam.shape)
    column_values, column_weights = D.column_spectrum
    row_values, row_weights = D.row_spectrum

    def smoothed_count(values, weights):
        x = (values[None, :] - lam.reshape(-1, 1)) / epsilon.reshape(-1, 1)
        return (0.5 + np.arctan(x) / math.pi) @ weights

    return (smoothed_count(row_values, row_weights) - smoothed_count(column_values, column_weights)).reshape(lam.shape)


def ptf_residual(path: OperatorPath, D: DiscretizedDA, z: complex) -> float:
    """|tr((DD* − z)⁻¹ − (D*D − z)⁻¹) − (2z)⁻¹·tr(g_z(A₊) − g_z(A₋))|."""
    z = _check_resolvent_point(z)
    rhs = np.sum(g_z(path.a_plus.eigenvalues, z)) - np.sum(g_z(path.a_minus.eigenvalues, z))
    return float(abs(resolvent_trace_diff(D, z).value - rhs / (2 * z)))
