"""
Periodic Dirac model on a circle of length L.

A₋ = −i d/dx is diagonal in the Fourier modes e^{2πikx/L}, |k| ≤ N, with
eigenvalues 2πk/L. A₊ = A₋ + M_f where M_f is multiplication by a real
function f, a Hermitian Toeplitz matrix of its Fourier coefficients.
Mid-band, A₊ is unitarily equivalent to A₋ + f̄ (gauge transform), so the
spectral shift averages to (2π)⁻¹∫f.
"""

import logging
import math
import warnings

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np
import scipy.fft
import scipy.linalg

from specshift.exceptions import InputError, TruncationError
from specshift.model_operator import OperatorPath, assemble
from specshift.operators import HermitianOperator, SpectralSample, evaluate_function
from specshift.ssf import ssf_count
from specshift.witten import WittenEstimate, delta_r, delta_s

logger = logging.getLogger(__name__)

OVERSAMPLING = 8


@dataclass(frozen=True)
class PeriodicDiracModel:
    """
    Fourier truncation of −i d/dx + f on [0, L) with modes |k| ≤ `modes`.

    Args:
        length (float): Circumference L.
        modes (int): Truncation N; the matrices have size 2N + 1.
        samples (np.ndarray): f on the uniform grid x_j = jL/M, M > 4N.
    """
    length: float
    modes: int
    samples: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=float).reshape(-1)
        if not self.length > 0 or self.modes < 1:
            raise InputError('The model needs L > 0 and at least one mode')
        if len(samples) <= 4 * self.modes:
            raise InputError(f'{len(samples)} samples alias the {4 * self.modes + 1} Fourier coefficients in use')
        if not np.all(np.isfinite(samples)):
            raise InputError('f must be finite')
        samples.setflags(write=False)
        object.__setattr__(self, 'samples', samples)

    @classmethod
    def from_function(cls, length: float, modes: int, f: Callable) -> 'PeriodicDiracModel':
        grid = np.arange(OVERSAMPLING * modes) * length / (OVERSAMPLING * modes)
        return cls(length, modes, evaluate_function(f, grid))

    @classmethod
    def gaussian(cls, length: float, modes: int, amplitude: float, width: float, center: float = None):
        """Periodized Gaussian bump amplitude·exp(−d²/2w²), d the distance to `center` on the circle."""
        center = 0.5 * length if center is None else center

        def bump(x):
            distance = np.mod(x - center + 0.5 * length, length) - 0.5 * length
            return amplitude * np.exp(-0.5 * (distance / width) ** 2)

        return cls.from_function(length, modes, bump)

    @classmethod
    def constant(cls, length: float, modes: int, value: float):
        return cls.from_function(length, modes, lambda x: np.full_like(x, value))

    @property
    def dimension(self) -> int:
        return 2 * self.modes + 1

    @property
    def spacing(self) -> float:
        return 2 * math.pi / self.length

    @property
    def band_edge(self) -> float:
        return self.spacing * self.modes

    @cached_property
    def fourier_coefficients(self) -> np.ndarray:
        """f̂_m = L⁻¹∫f e^{−2πimx/L}, stored for m = 0 … 2N."""
        coefficients = scipy.fft.fft(self.samples) / len(self.samples)
        return coefficients[:2 * self.modes + 1]

    @cached_property
    def a_minus(self) -> HermitianOperator:
        return HermitianOperator.from_diagonal(momentum_eigs(self))

    @cached_property
    def perturbation(self) -> HermitianOperator:
        column = self.fourier_coefficients
        return HermitianOperator(scipy.linalg.toeplitz(column, column.conj()))

    @cached_property
    def a_plus(self) -> HermitianOperator:
        return self.a_minus + self.perturbation

    @property
    def mean(self) -> float:
        return float(np.mean(self.samples))

    def path(self, profile: str = 'tanh', time_scale: float = 1.0) -> OperatorPath:
        return OperatorPath(self.a_minus, self.perturbation, profile=profile, time_scale=time_scale)


def momentum_eigs(model: PeriodicDiracModel) -> np.ndarray:
    return model.spacing * np.arange(-model.modes, model.modes + 1)


def perturbed_eigs(model: PeriodicDiracModel) -> np.ndarray:
    return np.array(model.a_plus.eigenvalues)


def mean_formula(model: PeriodicDiracModel) -> float:
    """(2π)⁻¹∫₀ᴸ f, by the periodic trapezoidal rule."""
    return model.length * model.mean / (2 * math.pi)


def ssf_dirac(model: PeriodicDiracModel, window: tuple = None) -> float:
    """
    Average of ξ(λ; A₊, A₋) over an energy window inside the central half of the band.

    The window defaults to the central quarter [−E/4, E/4], E = 2πN/L.
    """
    edge = model.band_edge
    lower, upper = window if window is not None else (-0.25 * edge, 0.25 * edge)
    if not lower < upper:
        raise InputError('The energy window must be increasing')
    if max(abs(lower), abs(upper)) > 0.5 * edge:
        raise TruncationError(f'Window [{lower:.4g}, {upper:.4g}] leaves the central half of the band ±{0.5 * edge:.4g}')
    xi = ssf_count(model.a_minus, model.a_plus)
    return xi.integral(lower, upper) / (upper - lower)


def gauge_shift_error(model: PeriodicDiracModel) -> float:
    """Largest deviation from f̄ of the mid-band eigenvalue shifts, in the central half of the band."""
    momenta = momentum_eigs(model)
    central = np.abs(momenta) <= 0.5 * model.band_edge
    shifts = perturbed_eigs(model)[central] - momenta[central]
    return float(np.max(np.abs(shifts - model.mean)))


def witten_dirac(model: PeriodicDiracModel,
                 T: float = 10.0,
                 Nt: int = 256,
                 profile: str = 'tanh',
                 points: int = 6,
                 tol: float = 0.1) -> WittenEstimate:
    """
    Witten index of the path A₋ → A₊ read off plateaus of Δ_r and Δ_s.

    The plateau lies where the resolvent scale √|λ| (or 1/√t) sits between
    three level spacings and a sixth of the band edge: far enough from 0 to
    average over many levels, far enough from the edge to ignore truncation.
    Both Δ_r and Δ_s are traces on the discretized D_A.
    """
    low, high = 3 * model.spacing, model.band_edge / 6
    if not low < high:
        raise TruncationError(f'Band too narrow for a plateau: 3·spacing={low:.3g} ≥ edge/6={high:.3g}')
    estimate = WittenEstimate()
    lams = -np.geomspace(high ** 2, low ** 2, points)
    times = np.geomspace(1.0 / high ** 2, 1.0 / low ** 2, points)

    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter('always')
        D = assemble(model.path(profile), T, Nt)
        resolvent_values = np.array([delta_r(D, lam) for lam in lams])
        semigroup_values = np.array([delta_s(D, t) for t in times])
    for message in sorted({str(w.message) for w in caught}):
        estimate.warnings.append(message)

    estimate.delta_r_curve = SpectralSample(lams, resolvent_values, meta={'route': 'resolvent plateau'})
    estimate.delta_s_curve = SpectralSample(times, semigroup_values, meta={'route': 'semigroup plateau'})
    estimate.w_r = float(np.mean(resolvent_values))
    estimate.w_s = float(np.mean(semigroup_values))
    estimate.extrapolation_error = float(max(np.ptp(resolvent_values), np.ptp(semigroup_values)))
    if estimate.extrapolation_error > tol:
        estimate.status = 'non_converged'
    elif estimate.warnings:
        estimate.status = 'warned'
    logger.info(f'Dirac model: W_r={estimate.w_r:.4f}, W_s={estimate.w_s:.4f} ({estimate.status})')
    return estimate
