"""
Spectral shift function of a pair (H0, H) of Hermitian matrices.

Two independent routes are provided: eigenvalue counting, which returns the
exact integer-valued step function ξ(λ) = N_H(λ) − N_H0(λ), and the
perturbation determinant, whose branch-tracked logarithm gives
ξ(λ) = π⁻¹·lim Im log Δ(λ + iε).
"""

import logging
import math
import warnings

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
import pandas as pd
import scipy.linalg
import scipy.optimize

from specshift.exceptions import (
    DomainError,
    EndpointCollisionWarning,
    InputError,
    InvariantViolation,
    NonConvergenceError,
    PrecisionWarning,
)
from specshift.operators import HermitianOperator, _check_same_dimension, apply_function, evaluate_function

logger = logging.getLogger(__name__)

CONTINUATION_BUDGET = 1_000_000
GUARD_BAND = 10.0


@dataclass(frozen=True)
class StepFunction:
    """
    Piecewise-constant function with compact support.

    `levels` has one entry more than `breakpoints`: levels[0] is the value
    left of the first breakpoint and levels[-1] the value right of the last
    one, both 0. The function is right-continuous, which is the convention of
    the counting function N(t) = #{eigenvalues > t}.
    """
    breakpoints: np.ndarray
    levels: np.ndarray

    def __post_init__(self):
        breakpoints = np.asarray(self.breakpoints, dtype=float).reshape(-1)
        levels = np.asarray(self.levels, dtype=float).reshape(-1)
        if len(levels) != len(breakpoints) + 1:
            raise InputError(f'{len(breakpoints)} breakpoints need {len(breakpoints) + 1} levels, got {len(levels)}')
        if np.any(np.diff(breakpoints) <= 0):
            raise InputError('Breakpoints must be strictly increasing')
        if levels[0] != 0 or levels[-1] != 0:
            raise InputError('A step function must vanish outside its breakpoints')
        breakpoints.setflags(write=False)
        levels.setflags(write=False)
        object.__setattr__(self, 'breakpoints', breakpoints)
        object.__setattr__(self, 'levels', levels)

    @classmethod
    def canonical(cls, breakpoints, levels) -> 'StepFunction':
        """Merge adjacent segments with equal levels, so that every breakpoint is a jump."""
        breakpoints = np.asarray(breakpoints, dtype=float)
        levels = np.asarray(levels, dtype=float)
        jumps = levels[1:] != levels[:-1]
        keep_levels = np.concatenate([[True], jumps])
        return cls(breakpoints[jumps], levels[keep_levels])

    @classmethod
    def zero(cls) -> 'StepFunction':
        return cls(np.empty(0), np.zeros(1))

    def __call__(self, x):
        index = np.searchsorted(self.breakpoints, np.asarray(x, dtype=float), side='right')
        return self.levels[index]

    def left_limit(self, x: float) -> float:
        return float(self.levels[np.searchsorted(self.breakpoints, x, side='left')])

    def right_limit(self, x: float) -> float:
        return float(self.levels[np.searchsorted(self.breakpoints, x, side='right')])

    @property
    def is_zero(self) -> bool:
        return len(self.breakpoints) == 0

    @property
    def is_integer_valued(self) -> bool:
        return bool(np.all(self.levels == np.round(self.levels)))

    @property
    def support(self):
        if self.is_zero:
            return None
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    def segments(self):
        """Inner segments as (left, right, level) triples."""
        return list(zip(self.breakpoints[:-1], self.breakpoints[1:], self.levels[1:-1]))

    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.breakpoints[:-1] + self.breakpoints[1:])

    def jump(self, x: float) -> float:
        return self.right_limit(x) - self.left_limit(x)

    def integral(self, lower: float = -math.inf, upper: float = math.inf) -> float:
        """Exact integral over (lower, upper)."""
        if self.is_zero or upper <= lower:
            return 0.0
        left = np.clip(self.breakpoints[:-1], lower, upper)
        right = np.clip(self.breakpoints[1:], lower, upper)
        return float(np.sum(self.levels[1:-1] * (right - left)))

    def abs_integral(self) -> float:
        return float(np.sum(np.abs(self.levels[1:-1]) * np.diff(self.breakpoints)))

    def integrate_derivative(self, f: Callable) -> float:
        """Exact ∫ f′ ξ, evaluated segmentwise as Σ level·(f(b_{k+1}) − f(b_k))."""
        if self.is_zero:
            return 0.0
        values = np.asarray(evaluate_function(f, self.breakpoints), dtype=float)
        return float(np.sum(self.levels[1:-1] * np.diff(values)))

    def _combine(self, other: 'StepFunction', operation) -> 'StepFunction':
        breakpoints = np.union1d(self.breakpoints, other.breakpoints)
        if len(breakpoints) == 0:
            return StepFunction.zero()
        sample_points = np.concatenate([[breakpoints[0] - 1.0], breakpoints])
        return StepFunction.canonical(breakpoints, operation(self(sample_points), other(sample_points)))

    def __add__(self, other: 'StepFunction') -> 'StepFunction':
        return self._combine(other, np.add)

    def __sub__(self, other: 'StepFunction') -> 'StepFunction':
        return self._combine(other, np.subtract)

    def __neg__(self) -> 'StepFunction':
        return StepFunction(self.breakpoints, -self.levels)

    def to_dict(self) -> dict:
        return {'breakpoints': self.breakpoints.tolist(), 'levels': self.levels.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> 'StepFunction':
        try:
            return cls(data['breakpoints'], data['levels'])
        except KeyError as missing:
            raise InputError(f'Step function is missing the {missing} field')

    def to_frame(self) -> pd.DataFrame:
        """One row per breakpoint: the level to its right."""
        return pd.DataFrame({'lambda': self.breakpoints, 'xi': self.levels[1:]})


@dataclass
class DeterminantTrace:
    """Branch-tracked log Δ(λ + iε) along the vertical path from λ + iY down to λ + iε."""
    lambda_: float
    epsilon: float
    value: complex
    path_steps: int
    warnings: list = field(default_factory=list)

    @property
    def ssf(self) -> float:
        return self.value.imag / math.pi


@dataclass
class AveragingResult:
    value: float
    tolerance: float
    nodes: int
    crossings: list = field(default_factory=list)
    warnings: list = field(default_factory=list)


def union_grid(H0: HermitianOperator, H: HermitianOperator) -> np.ndarray:
    return np.union1d(H0.eigenvalues, H.eigenvalues)


def ssf_count(H0: HermitianOperator, H: HermitianOperator) -> StepFunction:
    """
    ξ(λ; H, H0) = N_H(λ) − N_H0(λ) with N(λ) = #{eigenvalues > λ}.

    Exact and integer-valued; breakpoints are the points of the union of the
    two spectra where ξ actually jumps.
    """
    _check_same_dimension(H0, H)
    grid = union_grid(H0, H)
    sample_points = np.concatenate([[grid[0] - 1.0], grid])
    counts_h = len(H.eigenvalues) - np.searchsorted(H.eigenvalues, sample_points, side='right')
    counts_h0 = len(H0.eigenvalues) - np.searchsorted(H0.eigenvalues, sample_points, side='right')
    return StepFunction.canonical(grid, (counts_h - counts_h0).astype(float))


def _pair_eigenvalues(H0: HermitianOperator, H: HermitianOperator):
    """Greedy nearest-neighbour pairing of the two spectra; pairing keeps the ratio product well scaled."""
    remaining = list(H0.eigenvalues)
    pairs = []
    for lam in H.eigenvalues:
        k = int(np.argmin(np.abs(np.asarray(remaining) - lam)))
        pairs.append((lam, remaining.pop(k)))
    return pairs


def _paired_factors(pairs: np.ndarray, z: complex) -> np.ndarray:
    return (pairs[:, 0] - z) / (pairs[:, 1] - z)


def perturbation_determinant(H0: HermitianOperator, H: HermitianOperator, z: complex) -> complex:
    """Δ(z) = det((H − z)(H0 − z)⁻¹), as a product of paired eigenvalue ratios."""
    _check_same_dimension(H0, H)
    z = complex(z)
    if z.imag == 0:
        raise DomainError('The perturbation determinant is only evaluated off the real axis')
    return complex(np.prod(_paired_factors(np.array(_pair_eigenvalues(H0, H)), z)))


def rank_one_determinant(H0: HermitianOperator, gamma: float, h, z: complex) -> complex:
    """1 + γ·((H0 − z)⁻¹h, h), the determinant of the rank-one perturbation H0 + γ(·, h)h."""
    h = np.asarray(h, dtype=complex)
    resolvent_h = scipy.linalg.solve(H0.entries - complex(z) * np.eye(H0.n), h)
    return complex(1.0 + gamma * np.vdot(h, resolvent_h))


def krein_log_det(H0: HermitianOperator, H: HermitianOperator, z: complex) -> complex:
    """Closed form Σ[Log(λ_i − z) − Log(μ_i − z)], the branch with log Δ → 0 at i∞ (Im z > 0)."""
    z = complex(z)
    if z.imag <= 0:
        raise DomainError('The closed-form branch is only used in the upper half-plane')
    return complex(np.sum(np.log(H.eigenvalues - z)) - np.sum(np.log(H0.eigenvalues - z)))


def _default_epsilon(H0: HermitianOperator, H: HermitianOperator) -> float:
    grid = union_grid(H0, H)
    gaps = np.diff(grid)
    gaps = gaps[gaps > 0]
    smallest = float(np.min(gaps)) if len(gaps) else 1.0
    return max(1e-6 * smallest, 1e-12)


def log_det_tracked(H0: HermitianOperator,
                    H: HermitianOperator,
                    lambda_: float,
                    epsilon: float = None,
                    height: float = None,
                    budget: int = CONTINUATION_BUDGET) -> DeterminantTrace:
    """
    Continue log Δ from λ + iY (principal value) down to λ + iε.

    The path is followed in the logarithm of the height, so that the step
    adapts to the scale of each eigenvalue. A step is accepted only when the
    argument of Δ changes by less than π/2 across it, otherwise it is halved.

    :param H0 (HermitianOperator): Unperturbed operator.
    :param H (HermitianOperator): Perturbed operator, same dimension.
    :param lambda_ (float): Real evaluation point.
    :param epsilon (float, optional): Final height. Defaults to 1e-6 times the smallest gap of the joint spectrum.
    :param height (float, optional): Starting height Y. Defaults to 10·max(1, |λ|, ‖H‖, ‖H0‖).
    :param budget (int, optional): Maximal number of determinant evaluations.

    :returns DeterminantTrace: the tracked logarithm and the number of accepted steps.
    """
    _check_same_dimension(H0, H)
    if epsilon is None:
        epsilon = _default_epsilon(H0, H)
    if epsilon <= 0:
        raise DomainError('epsilon must be positive')
    if height is None:
        height = 10.0 * max(1.0, abs(lambda_), H.norm, H0.norm)
    height = max(height, epsilon)

    # Each paired factor stays close to 1 at height Y, so the sum of their
    # principal logarithms is the branch with log Δ → 0 at i∞ for any n.
    pairs = np.array(_pair_eigenvalues(H0, H))
    current = _paired_factors(pairs, complex(lambda_, height))
    value = complex(np.sum(np.log(current)))
    u, u_end = math.log(height), math.log(epsilon)
    max_step = (u - u_end) / 64 if u > u_end else 1.0
    du = max_step
    evaluations, accepted = 0, 0

    while u > u_end:
        u_next = max(u - du, u_end)
        candidate = _paired_factors(pairs, complex(lambda_, math.exp(u_next)))
        evaluations += 1
        if evaluations > budget:
            raise NonConvergenceError(f'Continuation budget of {budget} evaluations exhausted at λ={lambda_}')

        ratios = candidate / current
        if np.max(np.abs(np.angle(ratios))) >= math.pi / 2:
            du /= 2
            logger.debug(f'Halving continuation step to {du:.3e} at height {math.exp(u):.3e}')
            continue

        value += complex(np.sum(np.log(ratios)))
        current, u = candidate, u_next
        accepted += 1
        du = min(1.5 * du, max_step)

    trace = DeterminantTrace(lambda_=lambda_, epsilon=epsilon, value=value, path_steps=accepted)
    distance = float(np.min(np.abs(union_grid(H0, H) - lambda_)))
    if distance < GUARD_BAND * epsilon:
        message = f'λ={lambda_} lies within {distance:.2e} of an eigenvalue, below {GUARD_BAND}·ε'
        trace.warnings.append(message)
        warnings.warn(message, PrecisionWarning)
        logger.warning(message)
    return trace


def ssf_det(H0: HermitianOperator, H: HermitianOperator, lambda_: float, epsilon: float = None) -> float:
    """ξ(λ) from the determinant route: Im of the tracked log Δ(λ + iε), divided by π."""
    return log_det_tracked(H0, H, lambda_, epsilon=epsilon).ssf


def trace_formula_residual(H0: HermitianOperator, H: HermitianOperator, f: Callable) -> float:
    """
    |tr(f(H) − f(H0)) − ∫ f′ ξ| for a vectorized scalar map f.

    The integral is exact segmentwise, so no derivative is needed.
    """
    xi = ssf_count(H0, H)
    lhs = float(np.sum(evaluate_function(f, H.eigenvalues)) - np.sum(evaluate_function(f, H0.eigenvalues)))
    return abs(lhs - xi.integrate_derivative(f))


def _sorted_eigenvalues(H0: HermitianOperator, V: HermitianOperator, s: float) -> np.ndarray:
    return scipy.linalg.eigvalsh(H0.entries + s * V.entries)


def _endpoint_crossings(H0: HermitianOperator, V: HermitianOperator, endpoints, scan: int = 129) -> list:
    """Parameters s in (0, 1) where a sorted eigenvalue of H0 + sV crosses an endpoint."""
    grid = np.linspace(0.0, 1.0, scan)
    spectra = np.array([_sorted_eigenvalues(H0, V, s) for s in grid])
    crossings = []
    for c in endpoints:
        if not np.isfinite(c):
            continue
        shifted = spectra - c
        for j in range(spectra.shape[1]):
            signs = np.sign(shifted[:, j])
            for k in np.nonzero(signs[:-1] * signs[1:] < 0)[0]:
                root = scipy.optimize.brentq(lambda s: _sorted_eigenvalues(H0, V, s)[j] - c,
                                             grid[k], grid[k + 1], xtol=1e-14)
                crossings.append(root)
    return sorted(set(crossings))


def spectral_averaging(H0: HermitianOperator,
                       H: HermitianOperator,
                       intervals: Sequence,
                       nodes: int = 8,
                       tol: float = 1e-10,
                       max_nodes: int = 1024) -> AveragingResult:
    """
    ∫₀¹ tr(V·E_{H0+sV}(X)) ds for a finite union X of intervals.

    The s-range is split where eigenvalues cross an endpoint of X; on each
    piece the integrand is analytic and Gauss–Legendre quadrature is doubled
    until two successive estimates agree to `tol`. The result equals ∫_X ξ.
    """
    _check_same_dimension(H0, H)
    intervals = [(float(a), float(b)) for a, b in intervals]
    if any(b < a for a, b in intervals):
        raise InputError('Intervals must satisfy lower ≤ upper')
    V = H - H0
    endpoints = sorted({x for pair in intervals for x in pair})
    crossings = _endpoint_crossings(H0, V, endpoints)
    pieces = np.unique(np.concatenate([[0.0, 1.0], crossings]))
    logger.debug(f'Spectral averaging split into {len(pieces) - 1} pieces')

    result = AveragingResult(value=0.0, tolerance=0.0, nodes=0, crossings=list(crossings))

    def integrand(s: float) -> float:
        eigenvalues, eigenvectors = scipy.linalg.eigh(H0.entries + s * V.entries)
        inside = np.zeros(len(eigenvalues), dtype=bool)
        for a, b in intervals:
            inside |= (eigenvalues > a) & (eigenvalues < b)
        distance = min(abs(eigenvalues - c).min() for c in endpoints) if endpoints else math.inf
        if distance < 1e-12:
            message = f'An eigenvalue meets an interval endpoint at s={s:.6g}'
            if message not in result.warnings:
                result.warnings.append(message)
                warnings.warn(message, EndpointCollisionWarning)
        selected = eigenvectors[:, inside]
        return float(np.real(np.einsum('ij,ik,kj->', selected.conj(), V.entries, selected)))

    for left, right in zip(pieces[:-1], pieces[1:]):
        count, previous, estimate = nodes, None, None
        while True:
            x, w = np.polynomial.legendre.leggauss(count)
            s_values = 0.5 * (right - left) * x + 0.5 * (right + left)
            estimate = 0.5 * (right - left) * sum(wk * integrand(s) for wk, s in zip(w, s_values))
            result.nodes += count
            if previous is not None and abs(estimate - previous) < tol:
                break
            if count >= max_nodes:
                logger.warning(f'Quadrature on [{left:.4g}, {right:.4g}] stopped at {count} nodes')
                break
            previous, count = estimate, 2 * count
        result.value += estimate
        result.tolerance += abs(estimate - previous) if previous is not None else 0.0
    return result


def invariance_check(H0: HermitianOperator,
                     H: HermitianOperator,
                     phi: Callable,
                     dphi: Callable = None) -> int:
    """
    Check ξ(λ; H, H0) = sgn(φ′)·ξ(φ(λ); φ(H), φ(H0)) at all segment midpoints.

    Returns the common defect (0 when the principle holds exactly) and raises
    InvariantViolation when the defect is not constant.
    """
    grid = union_grid(H0, H)
    midpoints = np.concatenate([[grid[0] - 1.0], 0.5 * (grid[:-1] + grid[1:]), [grid[-1] + 1.0]])
    if dphi is not None:
        sign = float(np.sign(evaluate_function(dphi, midpoints[len(midpoints) // 2])))
    else:
        sign = float(np.sign(evaluate_function(phi, grid[-1] + 1.0) - evaluate_function(phi, grid[0] - 1.0)))
    if sign == 0:
        raise DomainError('phi must be strictly monotone')

    xi = ssf_count(H0, H)
    xi_phi = ssf_count(HermitianOperator(apply_function(H0, phi)), HermitianOperator(apply_function(H, phi)))
    defects = xi(midpoints) - sign * xi_phi(evaluate_function(phi, midpoints))
    if np.any(defects != defects[0]):
        raise InvariantViolation(f'Invariance principle violated, defects range over {np.unique(defects)}')
    return int(defects[0])
