"""
Abel-type transforms linking the spectral shift function of (A₊, A₋) with
that of (DD*, D*D), and a Lebesgue-point estimator for one-sided limits.
"""

import logging
import math
import warnings

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Union

import numpy as np
import scipy.integrate
import scipy.special

from specshift.exceptions import DomainError, InputError, LebesguePointError
from specshift.model_operator import DiscretizedDA, OperatorPath, local_counting_difference
from specshift.operators import SpectralSample, evaluate_function
from specshift.ssf import StepFunction, ssf_count

logger = logging.getLogger(__name__)

ABEL_NODES = 64
BREAKPOINT_EXCLUSION = 1e-2
SIDES = ('right', 'left', 'both')


@lru_cache(maxsize=32)
def gauss_legendre(order: int):
    nodes, weights = scipy.special.roots_legendre(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def _composite_rule(lower: float, upper: float, panels: int, order: int):
    """Nodes and weights of composite Gauss–Legendre quadrature on [lower, upper]."""
    x, w = gauss_legendre(order)
    edges = np.linspace(lower, upper, panels + 1)
    half = 0.5 * np.diff(edges)
    centers = 0.5 * (edges[:-1] + edges[1:])
    return (centers[:, None] + half[:, None] * x[None, :]).ravel(), (half[:, None] * w[None, :]).ravel()


def _check_spectral_parameter(lam):
    lam = np.asarray(lam, dtype=float)
    if np.any(lam < 0):
        raise DomainError('The Abel transform is evaluated at λ ≥ 0')
    return lam


def _step_arcsine_sum(f: StepFunction, root: np.ndarray, lower_clip: float) -> np.ndarray:
    """Σ level·(arcsin(b/√λ) − arcsin(a/√λ)) over the segments, clipped to the integration range."""
    safe = np.where(root > 0, root, 1.0)
    angles = np.arcsin(np.clip(f.breakpoints[None, :] / safe.reshape(-1, 1), lower_clip, 1.0))
    return (np.diff(angles, axis=1) @ f.levels[1:-1]) / math.pi


def abel_transform(f: Union[StepFunction, Callable], lam, nodes: int = ABEL_NODES):
    """
    (Sf)(λ) = π⁻¹∫_{−√λ}^{√λ} f(ν)(λ − ν²)^{−1/2} dν.

    With ν = √λ·sin θ the weight disappears. Step functions are integrated
    exactly through arcsine differences; other functions use Gauss–Legendre
    quadrature in θ and must accept arrays.
    """
    lam = _check_spectral_parameter(lam)
    root = np.sqrt(lam).reshape(-1)
    if isinstance(f, StepFunction):
        if f.is_zero:
            return np.zeros_like(lam)[()]
        values = _step_arcsine_sum(f, root, -1.0)
        values = np.where(root > 0, values, f(0.0))
    else:
        x, w = gauss_legendre(nodes)
        samples = evaluate_function(f, root[:, None] * np.sin(0.5 * math.pi * x)[None, :])
        values = 0.5 * (samples @ w)
    return values.reshape(lam.shape)[()]


def half_abel_transform(f: Union[StepFunction, Callable], lam, nodes: int = ABEL_NODES):
    """One-sided (Sf)(λ) = π⁻¹∫₀^{√λ} f(ν)(λ − ν²)^{−1/2} dν; maps the indicator of (0, ∞) to ½."""
    lam = _check_spectral_parameter(lam)
    root = np.sqrt(lam).reshape(-1)
    if isinstance(f, StepFunction):
        if f.is_zero:
            return np.zeros_like(lam)[()]
        values = _step_arcsine_sum(f, root, 0.0)
        values = np.where(root > 0, values, 0.5 * f(0.0))
    else:
        x, w = gauss_legendre(nodes)
        samples = evaluate_function(f, root[:, None] * np.sin(0.25 * math.pi * (x + 1.0))[None, :])
        values = 0.25 * (samples @ w)
    return values.reshape(lam.shape)[()]


def t_transform(f: Union[StepFunction, Callable], z: float, epsrel: float = 1e-10) -> float:
    """
    (𝐓f)(z) = −z∫ f(ν)(ν² − z)^{−3/2} dν for z < 0.

    The weight has total mass 2 and concentrates on |ν| ≲ √|z|. Step functions
    use the antiderivative ν(ν² + |z|)^{−1/2}; other functions are integrated
    with adaptive quadrature split at 0 and ±√|z|.
    """
    if not z < 0:
        raise DomainError(f'The T transform is defined for z < 0, got {z}')
    a = -float(z)
    if isinstance(f, StepFunction):
        antiderivative = f.breakpoints / np.sqrt(f.breakpoints ** 2 + a)
        return float(np.diff(antiderivative) @ f.levels[1:-1]) if not f.is_zero else 0.0

    def integrand(nu):
        return float(evaluate_function(f, nu)) * a * (nu * nu + a) ** -1.5

    scale = math.sqrt(a)
    total = 0.0
    with warnings.catch_warnings():
        warnings.simplefilter('error', scipy.integrate.IntegrationWarning)
        try:
            for lower, upper in ((-math.inf, -scale), (-scale, 0.0), (0.0, scale), (scale, math.inf)):
                total += scipy.integrate.quad(integrand, lower, upper, epsrel=epsrel, limit=200)[0]
        except scipy.integrate.IntegrationWarning as failure:
            raise DomainError(f'Weighted integral does not converge at z={z}: {failure}')
    if not math.isfinite(total):
        raise DomainError(f'Weighted integral is not finite at z={z}')
    return total


@dataclass
class LebesguePointEstimate:
    side: str
    value: float
    h_sequence: list = field(default_factory=list)
    deviations: list = field(default_factory=list)
    converged: bool = False


@dataclass
class LebesguePointEstimator:
    """
    One-sided Lebesgue point estimation on dyadic scales h = h0·2⁻ᵏ.

    At each scale the candidate α is the one-sided mean of f over (x, x+h)
    (or (x−h, x), or (x−h, x+h) for side 'both') and the deviation is
    h⁻¹∫|f − α|. The point is accepted when the last deviation is below `tol`
    and the last four deviations decrease, exact zeros included.
    """
    h0: float = 1.0
    tol: float = 1e-3
    max_levels: int = 24
    panels: int = 1024
    order: int = 4

    def estimate(self, f: Callable, x: float, side: str = 'right') -> LebesguePointEstimate:
        if side not in SIDES:
            raise InputError(f'side must be one of {SIDES}, got "{side}"')
        result = LebesguePointEstimate(side=side, value=math.nan)
        for level in range(self.max_levels + 1):
            h = self.h0 * 2.0 ** -level
            lower = x if side == 'right' else x - h
            upper = x if side == 'left' else x + h
            points, weights = _composite_rule(lower, upper, self.panels, self.order)
            values = np.asarray(evaluate_function(f, points), dtype=float)
            width = upper - lower
            mean = float(weights @ values) / width
            deviation = float(weights @ np.abs(values - mean)) / width
            result.h_sequence.append(h)
            result.deviations.append(deviation)
            result.value = mean
            if len(result.deviations) >= 4 and max(result.deviations[-4:]) <= self._floor(mean):
                break

        last = result.deviations[-4:]
        decreasing = all(after < before or after <= self._floor(result.value) for before, after in zip(last, last[1:]))
        result.converged = bool(len(last) == 4 and decreasing and result.deviations[-1] < self.tol)
        logger.debug(f'Lebesgue point at {x} ({side}): value {result.value:.6g}, '
                     f'deviation {result.deviations[-1]:.3g}, converged={result.converged}')
        return result

    @staticmethod
    def _floor(value: float) -> float:
        return 1e-13 * max(1.0, abs(value))


def lebesgue_point(f: Callable, x: float, side: str = 'right', h0: float = 1.0, tol: float = 1e-3) -> LebesguePointEstimate:
    return LebesguePointEstimator(h0=h0, tol=tol).estimate(f, x, side)


def _one_sided_value(f: Union[StepFunction, Callable], side: str = 'right') -> float:
    if isinstance(f, StepFunction):
        return f.right_limit(0.0) if side == 'right' else f.left_limit(0.0)
    estimate = lebesgue_point(f, 0.0, side)
    if not estimate.converged:
        raise LebesguePointError(f'0 is not a {side} Lebesgue point of f')
    return estimate.value


def lemma3_check(f: Union[StepFunction, Callable], h0: float = 1.0, tol: float = 1e-3, nodes: int = ABEL_NODES):
    """
    ((Sf)_L(0₊), ½·f_L(0₊)) for the one-sided transform S.

    Both members are estimated at the right Lebesgue point 0; they agree
    whenever f has a right Lebesgue point there.
    """
    target = 0.5 * _one_sided_value(f, 'right')
    transformed = LebesguePointEstimator(h0=h0, tol=tol).estimate(
        lambda lam: half_abel_transform(f, lam, nodes), 0.0, 'right')
    if not transformed.converged:
        raise LebesguePointError('The transformed function has no right Lebesgue point at 0')
    return transformed.value, target


def lemma4_check(f: Union[StepFunction, Callable], z0: float = -1.0, steps: int = 20):
    """(lim_{z→0⁻} 𝐓f(z), f_L(0₊) + f_L(0₋)), the limit read off the dyadic sequence z0·4⁻ᵏ."""
    if not z0 < 0:
        raise DomainError('z0 must be negative')
    values = [t_transform(f, z0 * 4.0 ** -k) for k in range(steps)]
    return values[-1], _one_sided_value(f, 'right') + _one_sided_value(f, 'left')


def pushnitski_epsilon(lam, T: float, epsilon_min: float = 0.05):
    """Poisson width max(ε_min, 10√λ/T): wide enough for the window to resolve the smoothed density."""
    return np.maximum(epsilon_min, 10.0 * np.sqrt(np.asarray(lam, dtype=float)) / T)


def poisson_smoothed_abel(xi_a: StepFunction, lam, epsilon, panels: int = 400, order: int = 8) -> np.ndarray:
    """
    ∫₀^∞ (Sξ)(ν)·P_ε(ν − λ) dν with the Poisson kernel P_ε(x) = ε/(π(x² + ε²)).

    Computed in the variable φ with ν = λ + ε·tan φ, where the kernel becomes dφ/π.
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    epsilon = np.broadcast_to(np.asarray(epsilon, dtype=float), lam.shape)
    smoothed = np.empty_like(lam)
    for k, (center, width) in enumerate(zip(lam, epsilon)):
        phi, weights = _composite_rule(-math.atan(center / width), 0.5 * math.pi, panels, order)
        nu = center + width * np.tan(phi)
        smoothed[k] = float(weights @ abel_transform(xi_a, np.maximum(nu, 0.0))) / math.pi
    return smoothed


def pushnitski_check(path: OperatorPath,
                     D: DiscretizedDA,
                     lambda_grid,
                     epsilon=None,
                     epsilon_min: float = 0.05) -> SpectralSample:
    """
    Residuals |ξ(λ; DD*, D*D) − (Sξ(·; A₊, A₋))(λ)| on a grid of λ > 0.

    Both sides are compared after convolution with the same Poisson kernel
    (boundary values at λ + iε of their Stieltjes transforms). The left side
    is the windowed counting difference of the discretized operators.
    The `meta` of the result holds the two sides, the widths used and the
    `excluded` mask of points within BREAKPOINT_EXCLUSION of some bp², bp a
    breakpoint of ξ(·; A₊, A₋), where the right side has a square-root kink.
    """
    grid = np.asarray(lambda_grid, dtype=float)
    if np.any(grid <= 0):
        raise DomainError('The comparison runs on λ > 0')
    if epsilon is None:
        epsilon = pushnitski_epsilon(grid, D.T, epsilon_min)
    epsilon = np.broadcast_to(np.asarray(epsilon, dtype=float), grid.shape)

    xi_a = ssf_count(path.a_minus, path.a_plus)
    lhs = np.atleast_1d(local_counting_difference(D, grid, epsilon))
    rhs = poisson_smoothed_abel(xi_a, grid, epsilon)
    residuals = np.abs(lhs - rhs)
    kinks = np.unique(xi_a.breakpoints ** 2)
    excluded = np.array([bool(np.any(np.abs(kinks - lam) < BREAKPOINT_EXCLUSION)) for lam in grid], dtype=bool)
    if np.any(~excluded):
        logger.info(f'Pushnitski comparison on {len(grid)} points, max residual {np.max(residuals[~excluded]):.3e}')
    return SpectralSample(grid, residuals, meta={'lhs': lhs, 'rhs': rhs, 'epsilon': np.asarray(epsilon),
                                                 'excluded': excluded})
