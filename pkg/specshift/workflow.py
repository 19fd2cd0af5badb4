"""
One function per command: take loaded inputs, run the computation, and
return the result payload together with an optional table for CSV output.
"""

import logging

from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from specshift.data_management import Scenario
from specshift.dirac import PeriodicDiracModel, gauge_shift_error, mean_formula, ssf_dirac, witten_dirac
from specshift.exceptions import InputError
from specshift.model_operator import assemble, is_fredholm, kernel_dims, ptf_residual, resolvent_trace_diff
from specshift.operators import HermitianOperator
from specshift.pushnitski import pushnitski_check
from specshift.spectral_flow import flow_identity_check, spectral_flow
from specshift.ssf import ssf_count, ssf_det, union_grid
from specshift.witten import (
    WittenEstimate,
    witten_closed_form,
    witten_from_ssf,
    witten_resolvent,
    witten_semigroup
)

logger = logging.getLogger(__name__)

SSF_METHODS = ('count', 'det')
WITTEN_METHODS = ('resolvent', 'semigroup', 'closed', 'ssf')
DEFAULT_PTF_POINTS = (-4.0, -1.0, -0.25)
DEFAULT_PUSH_GRID = tuple(np.linspace(0.25, 4.0, 16))


@dataclass
class CommandResult:
    """
    `converged` False marks an estimate that --strict turns into a failure;
    `failed` marks a broken contract, which always fails.
    """
    payload: dict
    frame: pd.DataFrame = None
    converged: bool = True
    failed: bool = False
    warnings: list = field(default_factory=list)


def run_ssf(H0: HermitianOperator, H: HermitianOperator, method: str = 'count', epsilon: float = None) -> CommandResult:
    """
    Spectral shift function of the pair (H0, H).

    :param method (str, optional): 'count' for the exact step function, 'det' for the determinant route
        sampled between the eigenvalues. Defaults to 'count'.
    :param epsilon (float, optional): Distance to the real axis for 'det'. Defaults to 1e-6 times the smallest gap.
    """
    if method not in SSF_METHODS:
        raise InputError(f'Unknown method "{method}", expected one of {SSF_METHODS}')
    xi = ssf_count(H0, H)
    if method == 'count':
        return CommandResult(payload=xi.to_dict(), frame=xi.to_frame())

    grid = union_grid(H0, H)
    lambdas = np.concatenate([[grid[0] - 1.0], 0.5 * (grid[:-1] + grid[1:]), [grid[-1] + 1.0]])
    values = np.array([ssf_det(H0, H, lam, epsilon) for lam in lambdas])
    deviation = float(np.max(np.abs(values - xi(lambdas))))
    logger.info(f'Determinant route on {len(lambdas)} points, deviation from counting {deviation:.2e}')
    return CommandResult(payload={'lambda': lambdas.tolist(), 'xi': values.tolist(), 'deviation': deviation},
                         frame=pd.DataFrame({'lambda': lambdas, 'xi': values}))


def run_witten(scenario: Scenario, method: str = 'resolvent', tol: float = None) -> CommandResult:
    """
    Witten index of the scenario's D_A.

    :param method (str, optional): 'resolvent', 'semigroup', 'closed' (endpoint spectra only)
        or 'ssf' (one-sided limits of ξ(·; A₊, A₋) at 0). Defaults to 'resolvent'.
    :param tol (float, optional): Convergence tolerance of the sampling routes.
    """
    if method not in WITTEN_METHODS:
        raise InputError(f'Unknown method "{method}", expected one of {WITTEN_METHODS}')
    path = scenario.path
    if method in ('closed', 'ssf'):
        if method == 'closed':
            exact = witten_closed_form(path.a_plus, path.a_minus)
            value = float(exact)
        else:
            exact = None
            value = witten_from_ssf(ssf_count(path.a_minus, path.a_plus))
        estimate = WittenEstimate(w_r=value, w_s=value, extrapolation_error=0.0)
        payload = estimate.to_dict()
        if exact is not None:
            payload['exact'] = str(exact)
        return CommandResult(payload=payload)

    D = assemble(path, scenario.T, scenario.Nt, scenario.window)
    if method == 'resolvent':
        estimate = witten_resolvent(D, tol=0.02 if tol is None else tol)
    else:
        estimate = witten_semigroup(D, tol=0.05 if tol is None else tol)
    frame = None
    if estimate.delta_r_curve is not None:
        frame = estimate.delta_r_curve.to_frame('lambda', 'delta_r')
    elif estimate.delta_s_curve is not None:
        frame = estimate.delta_s_curve.to_frame('t', 'delta_s')
    return CommandResult(payload=estimate.to_dict(),
                         frame=frame,
                         converged=estimate.status != 'non_converged',
                         warnings=list(estimate.warnings))


def run_flow(scenario: Scenario, tol: float = None) -> CommandResult:
    """Spectral flow of the scenario's path, with the index identities when the endpoints are invertible."""
    path = scenario.path
    flow, partition = spectral_flow(path)
    identities = None
    notes = []
    if is_fredholm(path):
        D = assemble(path, scenario.T, scenario.Nt, scenario.window)
        names = ('spectral_flow', 'negative_rank_change', 'ssf_at_zero', 'kernel_index', 'pair_index')
        identities = dict(zip(names, flow_identity_check(path, D, 1e-8 if tol is None else tol)))
    else:
        notes.append('An endpoint is not invertible; index identities were skipped')
        logger.warning(notes[-1])
    payload = {'flow': flow,
               'partition_size': len(partition.levels),
               'max_gap': float(max(partition.gaps)),
               'identities': identities}
    frame = pd.DataFrame({'t': partition.times[:-1],
                          'level': partition.levels,
                          'gap': partition.gaps,
                          'summand': partition.summands})
    return CommandResult(payload=payload, frame=frame, converged=identities is not None, warnings=notes)


def run_ptf(scenario: Scenario, points=None, tol: float = None) -> CommandResult:
    """
    Residuals of the resolvent trace identity at negative spectral parameters.

    A residual above `tol` (default 0.05) breaks the identity and fails the command.
    """
    tol = 0.05 if tol is None else tol
    points = np.asarray(scenario.options.get('z', DEFAULT_PTF_POINTS) if points is None else points, dtype=float)
    D = assemble(scenario.path, scenario.T, scenario.Nt, scenario.window)
    residuals = np.array([ptf_residual(scenario.path, D, z) for z in points])
    traces = np.array([resolvent_trace_diff(D, z).value for z in points], dtype=complex).real
    payload = {'z': points.tolist(),
               'trace_diff': traces.tolist(),
               'residual': residuals.tolist(),
               'index': kernel_dims(D).index}
    return CommandResult(payload=payload,
                         frame=pd.DataFrame({'z': points, 'trace_diff': traces, 'residual': residuals}),
                         failed=bool(np.max(residuals) > tol))


def run_push(scenario: Scenario, grid=None, tol: float = None) -> CommandResult:
    """Smoothed comparison of ξ(λ; DD*, D*D) with the Abel transform of ξ(·; A₊, A₋)."""
    tol = 0.1 if tol is None else tol
    grid = np.asarray(scenario.options.get('lambda', DEFAULT_PUSH_GRID) if grid is None else grid, dtype=float)
    if not is_fredholm(scenario.path):
        logger.warning('An endpoint is not invertible; the comparison is still defined')
    D = assemble(scenario.path, scenario.T, scenario.Nt, scenario.window)
    sample = pushnitski_check(scenario.path, D, grid)
    frame = pd.DataFrame({'lambda': sample.grid,
                          'lhs': sample.meta['lhs'],
                          'rhs': sample.meta['rhs'],
                          'residual': sample.values,
                          'excluded': sample.meta['excluded']})
    payload = {key: frame[key].tolist() for key in frame.columns}
    payload['epsilon'] = np.asarray(sample.meta['epsilon']).tolist()
    kept = sample.values[~sample.meta['excluded']]
    payload['max_residual'] = float(np.max(kept)) if len(kept) else 0.0
    return CommandResult(payload=payload, frame=frame, failed=payload['max_residual'] > tol)


def run_dirac1d(model: PeriodicDiracModel, witten: dict = None, tol: float = None) -> CommandResult:
    """
    Mid-band spectral shift of the periodic Dirac model against (2π)⁻¹∫f.

    :param witten (dict, optional): Keyword arguments of `witten_dirac`; the Witten index is skipped when None.
    :param tol (float, optional): Allowed deviation of the averaged ξ from the mean formula. Defaults to 0.05.
    """
    tol = 0.05 if tol is None else tol
    value, expected = ssf_dirac(model), mean_formula(model)
    payload = {'ssf': value,
               'mean_formula': expected,
               'gauge_shift_error': gauge_shift_error(model),
               'dimension': model.dimension}
    converged = True
    notes = []
    if witten is not None:
        try:
            estimate = witten_dirac(model, **witten)
        except TypeError as error:
            raise InputError(f'Invalid Witten index options: {error}')
        payload['witten'] = estimate.to_dict()
        converged = estimate.status != 'non_converged'
        notes = list(estimate.warnings)
    return CommandResult(payload=payload,
                         frame=pd.DataFrame({'quantity': ['ssf', 'mean_formula'], 'value': [value, expected]}),
                         converged=converged,
                         failed=abs(value - expected) > tol,
                         warnings=notes)
