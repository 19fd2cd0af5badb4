"""
Spectral flow of t ↦ A(t) through 0, counted with Phillips' construction on
the bounded transform F_t = A(t)(1 + A(t)²)^{−1/2}, and the chain of integers
that must all agree with it for a Fredholm path.
"""

import logging

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from specshift.exceptions import DegeneratePathError, InputError, InvariantViolation, NotFredholmError
from specshift.model_operator import DiscretizedDA, OperatorPath, is_fredholm, kernel_dims
from specshift.operators import HermitianOperator, Interval, apply_function, spectral_projection
from specshift.ssf import ssf_count
from specshift.witten import fredholm_index_via_ssf

logger = logging.getLogger(__name__)

DEFAULT_GAP = 0.25
INITIAL_NODES = 9
ZERO_EIGENVALUE_TOL = 1e-12
PROJECTION_TOL = 1e-8


def bounded_transform(A: HermitianOperator) -> HermitianOperator:
    """F = A(1 + A²)^{−1/2}, with spectrum in (−1, 1)."""
    return HermitianOperator(apply_function(A, lambda x: x / np.sqrt(1.0 + x * x)))


def _as_projection(P) -> np.ndarray:
    matrix = P.entries if isinstance(P, HermitianOperator) else np.asarray(P, dtype=complex)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise InputError('A projection must be a square matrix')
    if np.linalg.norm(matrix @ matrix - matrix) > PROJECTION_TOL * max(1.0, np.linalg.norm(matrix)) \
            or np.linalg.norm(matrix - matrix.conj().T) > PROJECTION_TOL:
        raise InputError('Matrix is not an orthogonal projection')
    return matrix


def _range_basis(P: np.ndarray) -> np.ndarray:
    values, vectors = scipy.linalg.eigh(P)
    return vectors[:, values > 0.5]


def fredholm_pair_index(P, Q) -> int:
    """
    Index of PQ : ran Q → ran P, as dim ker − dim coker of the restricted map.

    Every pair of projections on a finite-dimensional space is a Fredholm pair,
    so the index is always defined; it equals rank Q − rank P.
    """
    P, Q = _as_projection(P), _as_projection(Q)
    if P.shape != Q.shape:
        raise InputError(f'Projections act on different spaces: {P.shape} vs {Q.shape}')
    range_p, range_q = _range_basis(P), _range_basis(Q)
    p, q = range_p.shape[1], range_q.shape[1]
    rank = 0
    if p and q:
        singular_values = scipy.linalg.svdvals(range_p.conj().T @ range_q)
        rank = int(np.count_nonzero(singular_values > 1e-10))
    return (q - rank) - (p - rank)


@dataclass
class ProjectionPartition:
    """
    Partition t_0 < … < t_m with one level a_j per interval.

    `gaps[j]` is ‖χ_[a_j,∞)(F_{t_j}) − χ_[a_j,∞)(F_{t_{j+1}})‖ and `summands[j]`
    the change of rank of χ_[0,a_j)(F) across the interval.
    """
    times: list = field(default_factory=list)
    levels: list = field(default_factory=list)
    gaps: list = field(default_factory=list)
    summands: list = field(default_factory=list)
    ranks: list = field(default_factory=list)

    @property
    def flow(self) -> int:
        return int(sum(self.summands))


class _BoundedSpectra:
    """Cache of the eigen-decomposition of F_t; F_t shares the eigenvectors of A(t)."""

    def __init__(self, path: OperatorPath):
        self.path = path
        self.cache = {}

    def __call__(self, t: float):
        if t not in self.cache:
            values, vectors = scipy.linalg.eigh(self.path.matrix_at(t))
            self.cache[t] = (values / np.sqrt(1.0 + values ** 2), vectors)
        return self.cache[t]

    def projection(self, t: float, lower: float, upper: float = np.inf) -> np.ndarray:
        values, vectors = self(t)
        selected = vectors[:, (values >= lower) & (values < upper)]
        return selected @ selected.conj().T

    def count(self, t: float, lower: float, upper: float = np.inf) -> int:
        values, _ = self(t)
        return int(np.count_nonzero((values >= lower) & (values < upper)))


def _choose_level(spectra: _BoundedSpectra, times) -> float:
    """Midpoint of the widest gap of {|F_t| eigenvalues} ∪ {0, 1} over the sampled times."""
    magnitudes = np.concatenate([np.abs(spectra(t)[0]) for t in times] + [[0.0, 1.0]])
    magnitudes = np.unique(np.clip(magnitudes, 0.0, 1.0))
    widest = int(np.argmax(np.diff(magnitudes)))
    return float(0.5 * (magnitudes[widest] + magnitudes[widest + 1]))


def _avoid_zero_eigenvalue(path: OperatorPath, t: float, width: float) -> float:
    """Move a node off an exact zero eigenvalue of A(t)."""
    for _ in range(8):
        if np.min(np.abs(scipy.linalg.eigvalsh(path.matrix_at(t)))) > ZERO_EIGENVALUE_TOL:
            return t
        t += 1e-3 * width
    return t


def spectral_flow(path: OperatorPath,
                  t_span: tuple = None,
                  gap: float = DEFAULT_GAP,
                  min_step: float = 1e-6):
    """
    Net number of eigenvalues of A(t) crossing 0 upwards over `t_span`.

    :param path (OperatorPath): The operator path.
    :param t_span (tuple, optional): (t_start, t_end). Defaults to the interval outside which θ′ < 1e-8.
    :param gap (float, optional): Gap δ required on every partition interval. Defaults to 0.25.
    :param min_step (float, optional): Refinement floor. Defaults to 1e-6.

    :returns (int, ProjectionPartition): the spectral flow and the partition it was counted on.
    """
    if t_span is None:
        horizon = max(path.flat_horizon(1e-8), path.time_scale)
        t_span = (-horizon, horizon)
    t_start, t_end = t_span
    if not t_start < t_end:
        raise InputError('t_span must be increasing')

    spectra = _BoundedSpectra(path)
    partition = ProjectionPartition()
    nodes = list(np.linspace(t_start, t_end, INITIAL_NODES))
    pending = list(zip(nodes[:-1], nodes[1:]))[::-1]
    while pending:
        left, right = pending.pop()
        middle = 0.5 * (left + right)
        level = _choose_level(spectra, (left, middle, right))
        distance = float(np.linalg.norm(spectra.projection(left, level) - spectra.projection(right, level), 2))
        if distance >= gap:
            if right - left < min_step:
                if distance >= 1.0 - 1e-12:
                    raise DegeneratePathError(f'No spectral gap around ±{level:.3g} on [{left:.6g}, {right:.6g}]')
                logger.warning(f'Accepting gap {distance:.3f} at the refinement floor near t={left:.6g}')
            else:
                middle = _avoid_zero_eigenvalue(path, middle, right - left)
                logger.debug(f'Refining [{left:.6g}, {right:.6g}], gap {distance:.3f}')
                pending.extend([(middle, right), (left, middle)])
                continue
        partition.times.append(left)
        partition.levels.append(level)
        partition.gaps.append(distance)
        partition.ranks.append(spectra.count(left, 0.0))
        partition.summands.append(spectra.count(right, 0.0, level) - spectra.count(left, 0.0, level))
    partition.times.append(t_end)
    partition.ranks.append(spectra.count(t_end, 0.0))

    if partition.flow != partition.ranks[-1] - partition.ranks[0]:
        raise InvariantViolation('Phillips summands do not telescope to the change of rank of E[0,∞)')
    logger.info(f'Spectral flow {partition.flow} on {len(partition.levels)} intervals')
    return partition.flow, partition


def negative_projection(A: HermitianOperator) -> HermitianOperator:
    return spectral_projection(A, Interval(upper=0.0))


def flow_identity_check(path: OperatorPath, D: DiscretizedDA, tol: float = 1e-8) -> tuple:
    """
    The five integers that coincide for a Fredholm path.

    (spectral flow, tr(E_{A₋}(−∞,0) − E_{A₊}(−∞,0)), ξ(0; A₊, A₋),
    index of the discretized D_A, pair index ind(E_{A₋}(−∞,0), E_{A₊}(−∞,0))).
    """
    if not is_fredholm(path, tol):
        raise NotFredholmError('Spectral flow identities need invertible asymptotes')
    a_minus, a_plus = path.a_minus, path.a_plus
    negative_minus, negative_plus = negative_projection(a_minus), negative_projection(a_plus)

    values = (spectral_flow(path)[0],
              int(round(negative_minus.trace() - negative_plus.trace())),
              fredholm_index_via_ssf(ssf_count(a_minus, a_plus), a_plus, a_minus, tol),
              kernel_dims(D).index,
              fredholm_pair_index(negative_plus, negative_minus))
    if len(set(values)) != 1:
        raise InvariantViolation(f'Index identities disagree: {values}')
    return values
