"""
Command-line front end.

Every command reads one JSON input, writes its result to stdout or to --out,
and with --out also writes a run record next to the output. Exit codes:
0 success, 2 invalid input, 3 non-convergence or a failed check.
"""

import json
import logging
import sys
import time
import warnings

import click

from specshift import __version__
from specshift.data_management import (
    file_hash,
    load_dirac_model,
    load_pair,
    load_scenario,
    write_atomic
)
from specshift.exceptions import (
    DegeneratePathError,
    DomainError,
    InconsistencyError,
    InputError,
    InvariantViolation,
    NonConvergenceError,
    SpecShiftWarning
)
from specshift.run_management import RunLedger, RunRecord, ledger_url
from specshift import workflow

logger = logging.getLogger(__name__)

EXIT_INPUT = 2
EXIT_FAILED = 3


def common_options(command):
    options = [
        click.option('--out', type=click.Path(dir_okay=False), default=None,
                     help='Output file. Results go to stdout when omitted.'),
        click.option('--format', 'output_format', type=click.Choice(['json', 'csv']), default='json',
                     show_default=True),
        click.option('--seed', type=click.IntRange(min=0), default=0, show_default=True,
                     help='Seed of every random matrix in the input.'),
        click.option('--tol', type=float, default=None, help='Tolerance of the command\'s convergence check.'),
        click.option('--strict', is_flag=True, help='Fail with exit code 3 on warnings and unconverged estimates.'),
        click.option('--ledger', default=None, help='SQLAlchemy URL of the run ledger. Defaults to $SPECSHIFT_LEDGER_URL.'),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def _render(record: RunRecord, result: workflow.CommandResult, output_format: str) -> str:
    if output_format == 'csv':
        if result.frame is None:
            raise InputError(f'{record.command} has no tabular output, use --format json')
        header = f'# specshift {record.version}\n# input_hash {record.input_hash}\n'
        return header + result.frame.to_csv(index=False)
    document = {key: value for key, value in record.to_dict().items() if key != 'wall_time'}
    return json.dumps(document, indent=2, sort_keys=True) + '\n'


def execute(ctx: click.Context, command: str, input_path: str, compute, flags: dict):
    """
    Run `compute`, collect its warnings, write the outputs and exit with the contract's code.

    `compute` is called without arguments and returns a CommandResult.
    """
    start = time.perf_counter()
    try:
        input_hash = file_hash(input_path)
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter('always')
            result = compute()
    except (InputError, DomainError) as error:
        click.echo(f'Error: {error}', err=True)
        ctx.exit(EXIT_INPUT)
    except (NonConvergenceError, InvariantViolation, InconsistencyError, DegeneratePathError) as error:
        click.echo(f'Error: {error}', err=True)
        ctx.exit(EXIT_FAILED)

    messages = sorted({str(w.message) for w in caught if issubclass(w.category, SpecShiftWarning)})
    messages += [message for message in result.warnings if message not in messages]
    status = 'failed' if result.failed else ('non_converged' if not result.converged else ('warned' if messages else 'ok'))
    record = RunRecord(command=command,
                       input_hash=input_hash,
                       flags={key: value for key, value in flags.items() if key not in ('out', 'ledger')},
                       payload=result.payload,
                       warnings=messages,
                       status=status,
                       wall_time=time.perf_counter() - start)

    try:
        text = _render(record, result, flags['output_format'])
    except InputError as error:
        click.echo(f'Error: {error}', err=True)
        ctx.exit(EXIT_INPUT)
    if flags['out']:
        write_atomic(flags['out'], text)
        record.save(flags['out'] + '.run.json')
        logger.info(f'{command}: results written to {flags["out"]}')
    else:
        click.echo(text, nl=False)

    url = ledger_url(flags['ledger'])
    if url:
        RunLedger(url).add(record)

    for message in messages:
        logger.warning(message)
    if result.failed or (flags['strict'] and status != 'ok'):
        logger.error(f'{command} finished with status {status}')
        ctx.exit(EXIT_FAILED)


@click.group()
@click.version_option(__version__, prog_name='specshift')
@click.option('-v', '--verbose', is_flag=True, help='Debug logging.')
def cli(verbose):
    """Spectral shift functions, Witten indices and spectral flow of finite-dimensional models."""
    logging.basicConfig(format='%(asctime)s %(module)s %(levelname)s: %(message)s',
                        datefmt='%m/%d/%Y %I:%M:%S %p',
                        level=logging.DEBUG if verbose else logging.INFO,
                        stream=sys.stderr)
    if verbose:
        logging.getLogger().setLevel(logging.DEBUG)


@cli.command()
@click.argument('pair_file', type=click.Path(exists=True, dir_okay=False))
@click.option('--method', type=click.Choice(workflow.SSF_METHODS), default='count', show_default=True)
@click.option('--eps', type=float, default=None, help='Distance to the real axis for the determinant route.')
@common_options
@click.pass_context
def ssf(ctx, pair_file, method, eps, **flags):
    """Spectral shift function of the pair {"H0", "H"} in PAIR_FILE."""
    def compute():
        H0, H = load_pair(pair_file, flags['seed'])
        return workflow.run_ssf(H0, H, method, eps)

    execute(ctx, 'ssf', pair_file, compute, {'method': method, 'eps': eps, **flags})


@cli.command()
@click.argument('scenario_file', type=click.Path(exists=True, dir_okay=False))
@click.option('--method', type=click.Choice(workflow.WITTEN_METHODS), default='resolvent', show_default=True)
@common_options
@click.pass_context
def witten(ctx, scenario_file, method, **flags):
    """Witten index of the operator path in SCENARIO_FILE."""
    def compute():
        return workflow.run_witten(load_scenario(scenario_file, flags['seed']), method, flags['tol'])

    execute(ctx, 'witten', scenario_file, compute, {'method': method, **flags})


@cli.command()
@click.argument('scenario_file', type=click.Path(exists=True, dir_okay=False))
@common_options
@click.pass_context
def flow(ctx, scenario_file, **flags):
    """Spectral flow of the path in SCENARIO_FILE and the index identities."""
    def compute():
        return workflow.run_flow(load_scenario(scenario_file, flags['seed']), flags['tol'])

    execute(ctx, 'flow', scenario_file, compute, flags)


@cli.command()
@click.argument('scenario_file', type=click.Path(exists=True, dir_okay=False))
@common_options
@click.pass_context
def ptf(ctx, scenario_file, **flags):
    """Residuals of the resolvent trace identity for SCENARIO_FILE."""
    def compute():
        return workflow.run_ptf(load_scenario(scenario_file, flags['seed']), tol=flags['tol'])

    execute(ctx, 'ptf', scenario_file, compute, flags)


@cli.command()
@click.argument('scenario_file', type=click.Path(exists=True, dir_okay=False))
@common_options
@click.pass_context
def push(ctx, scenario_file, **flags):
    """Compare ξ(λ; DD*, D*D) with the Abel transform of ξ(·; A₊, A₋) for SCENARIO_FILE."""
    def compute():
        return workflow.run_push(load_scenario(scenario_file, flags['seed']), tol=flags['tol'])

    execute(ctx, 'push', scenario_file, compute, flags)


@cli.command()
@click.argument('model_file', type=click.Path(exists=True, dir_okay=False))
@common_options
@click.pass_context
def dirac1d(ctx, model_file, **flags):
    """Mid-band spectral shift (and optionally the Witten index) of the periodic Dirac model in MODEL_FILE."""
    def compute():
        model, witten_options = load_dirac_model(model_file)
        return workflow.run_dirac1d(model, witten=witten_options, tol=flags['tol'])

    execute(ctx, 'dirac1d', model_file, compute, flags)


if __name__ == '__main__':
    cli()
