"""
Witten index of D_A, through the resolvent and semigroup regularizations, the
closed-form endpoint formula and the spectral shift function at 0.
"""

import logging
import math
import warnings

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Union

import numpy as np
import scipy.special

from specshift.exceptions import (
    BoundaryKernelWarning,
    DomainError,
    InconsistencyError,
    LebesguePointError,
    NonFredholmWarning,
    NotFredholmError,
)
from specshift.model_operator import (
    DiscretizedDA,
    is_fredholm,
    resolvent_trace_diff,
    semigroup_horizon,
    semigroup_trace_diff,
)
from specshift.operators import HermitianOperator, SpectralSample, g_z
from specshift.pushnitski import LebesguePointEstimator
from specshift.ssf import StepFunction

logger = logging.getLogger(__name__)

FLOOR_EXPONENT = 6.0


@dataclass
class WittenEstimate:
    """
    Result of a Witten index computation.

    `status` is 'converged', 'non_converged' or 'warned'; the curves hold the
    samples the estimate was extrapolated from, when a sampling route was used.
    """
    w_r: float = None
    w_s: float = None
    delta_r_curve: SpectralSample = None
    delta_s_curve: SpectralSample = None
    extrapolation_error: float = None
    status: str = 'converged'
    warnings: list = field(default_factory=list)

    def warn(self, message: str, category=UserWarning):
        self.warnings.append(message)
        if self.status == 'converged':
            self.status = 'warned'
        warnings.warn(message, category)
        logger.warning(message)

    def to_dict(self) -> dict:
        curves = {}
        if self.delta_r_curve is not None:
            curves['lambda'] = self.delta_r_curve.grid.tolist()
            curves['delta_r'] = self.delta_r_curve.values.tolist()
        if self.delta_s_curve is not None:
            curves['t'] = self.delta_s_curve.grid.tolist()
            curves['delta_s'] = self.delta_s_curve.values.tolist()
        return {'w_r': self.w_r,
                'w_s': self.w_s,
                'error': self.extrapolation_error,
                'status': self.status,
                'curves': curves,
                'warnings': list(self.warnings)}


def _warn_if_not_fredholm(D: DiscretizedDA):
    if not is_fredholm(D.path):
        message = '0 lies in the spectrum of an asymptote; D_A is not Fredholm'
        warnings.warn(message, NonFredholmWarning)
        logger.info(message)


def delta_r(D: DiscretizedDA, lam: float) -> float:
    """Δ_r(λ) = (−λ)·tr((D*D − λ)⁻¹ − (DD* − λ)⁻¹), for λ < 0."""
    if not lam < 0:
        raise DomainError(f'Δ_r is defined for λ < 0, got {lam}')
    _warn_if_not_fredholm(D)
    return float(np.real(lam * resolvent_trace_diff(D, lam).value))


def delta_s(D: DiscretizedDA, t: float) -> float:
    """Δ_s(t) = tr(e^{−tD*D} − e^{−tDD*}), for t > 0."""
    _warn_if_not_fredholm(D)
    return semigroup_trace_diff(D, t)


def delta_r_closed_form(a_plus: HermitianOperator, a_minus: HermitianOperator, lam: float) -> float:
    """½·tr(g_λ(A₊) − g_λ(A₋)), the value of Δ_r given by the principal trace formula."""
    if not lam < 0:
        raise DomainError(f'Δ_r is defined for λ < 0, got {lam}')
    return float(np.real(0.5 * (np.sum(g_z(a_plus.eigenvalues, lam)) - np.sum(g_z(a_minus.eigenvalues, lam)))))


def delta_s_closed_form(a_plus: HermitianOperator, a_minus: HermitianOperator, t: float) -> float:
    """½·tr(erf(√t·A₊) − erf(√t·A₋)), the semigroup analogue of the principal trace formula."""
    if not t > 0:
        raise DomainError(f'Δ_s is defined for t > 0, got {t}')
    root = math.sqrt(t)
    return float(0.5 * (np.sum(scipy.special.erf(root * a_plus.eigenvalues))
                        - np.sum(scipy.special.erf(root * a_minus.eigenvalues))))


def resolvent_floor(D: DiscretizedDA) -> float:
    """
    Smallest |λ| at which Δ_r still ignores the interval ends.

    Contamination from the ends decays like exp(−2κd) with d = (1 − ω)T and
    κ² = min|σ(A±)|² + |λ|; the floor is where 2κd drops to FLOOR_EXPONENT.
    It is 0 when the endpoint gap alone keeps the contamination small.
    """
    distance = (1.0 - D.window) * D.T
    return max(0.0, (FLOOR_EXPONENT / (2.0 * distance)) ** 2 - D.path.endpoint_gap ** 2)


def _polynomial_limit(mus: np.ndarray, values: np.ndarray) -> tuple:
    """Value at |λ| = 0 of the cubic through the samples, and its distance to the quadratic through the first three."""
    cubic = np.polynomial.polynomial.polyfit(mus, values, 3)[0]
    quadratic = np.polynomial.polynomial.polyfit(mus[:3], values[:3], 2)[0]
    return float(cubic), float(abs(cubic - quadratic))


def _fit_limit(lams: list, values: list, ratio: float) -> float:
    """
    Least-squares value at λ = 0 of a + b|λ|^p (+ c|λ|^{2p} once five samples exist).

    The exponent p is read off the contraction rate of the last differences,
    clipped to [1/2, 2].
    """
    exponent = 1.0
    if len(values) >= 3:
        previous, last = values[-2] - values[-3], values[-1] - values[-2]
        if previous != 0 and last / previous > 0:
            exponent = float(np.clip(math.log(last / previous) / math.log(ratio), 0.5, 2.0))
    x = np.abs(np.asarray(lams[-6:]))
    y = np.asarray(values[-6:])
    columns = [np.ones_like(x), x ** exponent]
    if len(x) >= 5:
        columns.append(x ** (2 * exponent))
    coefficients = np.linalg.lstsq(np.column_stack(columns), y, rcond=None)[0]
    return float(coefficients[0])


def witten_resolvent(D: DiscretizedDA,
                     lambda0: float = -1.0,
                     ratio: float = 0.5,
                     tol: float = 0.02,
                     max_steps: int = 40) -> WittenEstimate:
    """
    W_r = lim Δ_r(λ) as λ → 0⁻, by geometric descent and extrapolation.

    The descent stops at the resolvent floor. When it stops before three
    extrapolated limits exist (endpoints with small or no gap), Δ_r is sampled
    at 1, 2, 3 and 4 times the floor instead and extrapolated by a cubic in
    |λ|; Δ_r is analytic in |λ| there unless an endpoint eigenvalue lies
    between 0 and the floor scale.

    :param D (DiscretizedDA): The discretized operator.
    :param lambda0 (float, optional): First sample, negative. Defaults to -1.
    :param ratio (float, optional): Geometric ratio of the descent. Defaults to 0.5.
    :param tol (float, optional): Agreement required between the last three extrapolated limits. Defaults to 0.02.
    :param max_steps (int, optional): Maximal number of samples. Defaults to 40.

    :returns WittenEstimate: estimate with its Δ_r samples.
    """
    if not lambda0 < 0 or not 0 < ratio < 1:
        raise DomainError('lambda0 must be negative and ratio in (0, 1)')
    estimate = WittenEstimate()
    if D.path.is_constant:
        estimate.w_r, estimate.extrapolation_error = 0.0, 0.0
        return estimate
    if not is_fredholm(D.path):
        estimate.warn('0 lies in the spectrum of an asymptote; the index is not defined, W_r still is',
                      NonFredholmWarning)

    samples = {}

    def sample(lam: float) -> float:
        if lam not in samples:
            samples[lam] = float(np.real(lam * resolvent_trace_diff(D, lam).value))
        return samples[lam]

    floor = resolvent_floor(D)
    lams, values, limits = [], [], []
    lam = lambda0
    for _ in range(max_steps):
        if abs(lam) < floor:
            logger.info(f'Discretization floor {floor:.3e} reached at λ={lam:.3e}')
            break
        lams.append(lam)
        values.append(sample(lam))
        if len(lams) >= 4:
            limits.append(_fit_limit(lams, values, ratio))
            logger.debug(f'λ={lam:.3e} Δ_r={values[-1]:.6f} limit={limits[-1]:.6f}')
            if len(limits) >= 3 and max(limits[-3:]) - min(limits[-3:]) <= tol:
                break
        lam *= ratio

    if len(limits) < 3 and floor > 0:
        mus = floor * np.arange(1.0, 5.0)
        near_floor = np.array([sample(-mu) for mu in mus])
        estimate.w_r, estimate.extrapolation_error = _polynomial_limit(mus, near_floor)
        logger.info(f'Cubic extrapolation from |λ| in [{mus[0]:.3g}, {mus[-1]:.3g}]: W_r={estimate.w_r:.4f}')
    else:
        estimate.w_r = limits[-1] if limits else values[-1]
        recent = limits[-3:] if len(limits) >= 2 else values[-2:]
        estimate.extrapolation_error = float(max(recent) - min(recent))

    grid = np.array(sorted(samples))
    estimate.delta_r_curve = SpectralSample(grid, np.array([samples[x] for x in grid]), meta={'route': 'resolvent'})
    if estimate.extrapolation_error > tol or (floor == 0 and len(limits) < 3):
        estimate.status = 'non_converged'
        estimate.warnings.append(f'Extrapolated limits spread by {estimate.extrapolation_error:.3g} > {tol}')
    return estimate


def witten_semigroup(D: DiscretizedDA,
                     t_window: tuple = (4.0, 16.0),
                     tol: float = 0.05,
                     samples: int = 25) -> WittenEstimate:
    """
    W_s = lim Δ_s(t) as t → ∞, read off a plateau inside `t_window`.

    The plateau is the longest run of consecutive samples whose total
    variation stays below `tol`; convergence needs it to span a factor ≥ 4 in t.
    """
    t_low, t_high = t_window
    if not 0 < t_low < t_high:
        raise DomainError('t_window must satisfy 0 < low < high')
    estimate = WittenEstimate()
    if D.path.is_constant:
        estimate.w_s, estimate.extrapolation_error = 0.0, 0.0
        return estimate
    if not is_fredholm(D.path):
        estimate.warn('0 lies in the spectrum of an asymptote; the index is not defined, W_s still is',
                      NonFredholmWarning)
    horizon = semigroup_horizon(D)
    if t_high > horizon:
        t_low, t_high = t_low * horizon / t_high, horizon
        estimate.warnings.append(f'Window moved below the trust horizon, to [{t_low:.3g}, {t_high:.3g}]')
        logger.info(estimate.warnings[-1])

    times = np.geomspace(t_low, t_high, samples)
    with warnings.catch_warnings():
        warnings.simplefilter('ignore')
        values = np.array([semigroup_trace_diff(D, t) for t in times])
    estimate.delta_s_curve = SpectralSample(times, values, meta={'route': 'semigroup'})

    best = (0, 0)
    for start in range(len(times)):
        stop = start
        variation = 0.0
        while stop + 1 < len(times) and variation + abs(values[stop + 1] - values[stop]) < tol:
            variation += abs(values[stop + 1] - values[stop])
            stop += 1
        if stop - start > best[1] - best[0]:
            best = (start, stop)

    start, stop = best
    plateau = values[start:stop + 1]
    estimate.w_s = float(np.mean(plateau))
    estimate.extrapolation_error = float(np.max(plateau) - np.min(plateau))
    if times[stop] / times[start] < 4.0 * (1.0 - 1e-9):
        estimate.status = 'non_converged'
        estimate.w_s = float(values[-1])
        estimate.warnings.append('No plateau spanning a factor 4 in t')
    return estimate


def witten_closed_form(a_plus: HermitianOperator, a_minus: HermitianOperator, rel_tol: float = 1e-10) -> Fraction:
    """
    ½[#>0(A₊) − #>0(A₋)] − ½[#<0(A₊) − #<0(A₋)], exact with denominator ≤ 2.

    Eigenvalues within rel_tol·max(1, ‖A‖) of 0 count as zero.
    """
    counts = []
    for label, operator in (('A+', a_plus), ('A-', a_minus)):
        threshold = rel_tol * max(1.0, operator.norm)
        eigenvalues = operator.eigenvalues
        near_zero = np.abs(eigenvalues) <= threshold
        if np.any(near_zero & (eigenvalues != 0)):
            message = f'{label} has eigenvalues within {threshold:.1e} of 0; they are counted as zero'
            warnings.warn(message, BoundaryKernelWarning)
            logger.warning(message)
        counts.append((int(np.count_nonzero(eigenvalues > threshold)),
                       int(np.count_nonzero(eigenvalues < -threshold))))
    (pos_plus, neg_plus), (pos_minus, neg_minus) = counts
    return Fraction(pos_plus - pos_minus, 2) - Fraction(neg_plus - neg_minus, 2)


def _one_sided_limits(xi: Union[StepFunction, SpectralSample, Callable], estimator: LebesguePointEstimator):
    if isinstance(xi, StepFunction):
        return xi.right_limit(0.0), xi.left_limit(0.0)
    if isinstance(xi, SpectralSample):
        grid, values = xi.grid, xi.values

        def sampled(x):
            index = np.clip(np.searchsorted(grid, x, side='right') - 1, 0, len(grid) - 1)
            return values[index]
        xi = sampled

    estimator = estimator or LebesguePointEstimator()
    right = estimator.estimate(xi, 0.0, 'right')
    left = estimator.estimate(xi, 0.0, 'left')
    if not (right.converged and left.converged):
        raise LebesguePointError('0 is not a right and left Lebesgue point of the spectral shift function')
    return right.value, left.value


def witten_from_ssf(xi, estimator: LebesguePointEstimator = None) -> float:
    """½[ξ_L(0₊) + ξ_L(0₋)], the Witten index read off the spectral shift function."""
    right, left = _one_sided_limits(xi, estimator)
    return 0.5 * (right + left)


def fredholm_index_via_ssf(xi: StepFunction,
                           a_plus: HermitianOperator,
                           a_minus: HermitianOperator,
                           tol: float = 1e-8) -> int:
    """ξ(0; A₊, A₋) for invertible endpoints, which is the Fredholm index of D_A."""
    gap = min(np.min(np.abs(a_plus.eigenvalues)), np.min(np.abs(a_minus.eigenvalues)))
    if gap <= tol:
        raise NotFredholmError(f'An endpoint has an eigenvalue within {tol} of 0')
    if np.any(xi.breakpoints == 0.0):
        raise InconsistencyError('0 is a breakpoint of ξ although both endpoints are invertible')
    return int(round(float(xi(0.0))))
