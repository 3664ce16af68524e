"""
Main file where jobs are parsed, evaluated and reported.
"""
import itertools
import logging
import sys
import time
from argparse import ArgumentParser, Namespace
from concurrent.futures import ThreadPoolExecutor
from dataclasses import fields, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from colorama import Fore, Style

import config_file_parser
import hypotest
import input_module
import measures
import protocols
import saving_module
from cone_solver import ConeSolverError, DimensionRejectedError
from data.result_data_storage import Bracket, CellResult
from data.settings_data_storage import JobSpec, SolverSettings
from data.state_data_storage import InvalidStateError, MultiState, NonHermitianError
from sep_geometry import nearest_sep_distance
from tensor_core import DimensionMismatchError, tensor_power

logger = logging.getLogger(__name__)

COMMANDS = ('measure', 'fsep', 'stein', 'protocol', 'sweep')
MEASURE_KINDS = ('er', 'rg', 'lrg', 'lrg_smoothed', 'mixing', 'lr', 'lr_smoothed', 'distance', 'regularized')
STEIN_KINDS = ('stein', 'sfne', 'probe')
PROTOCOL_KINDS = ('distill', 'form', 'demo')
FSEP_VARIANTS = ('plain', 'relaxed', 'bounded')
SMOOTHED_KINDS = ('lrg_smoothed', 'lr_smoothed')

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_STATE = 3
EXIT_SOLVER = 4
EXIT_DIMENSION = 5


class ColoredFormatter(logging.Formatter):
    """
    Colours console records by level.
    """
    COLORS = {logging.DEBUG: Style.DIM, logging.INFO: Fore.MAGENTA, logging.WARNING: Fore.YELLOW,
              logging.ERROR: Fore.RED, logging.CRITICAL: Fore.RED}

    def format(self, record: logging.LogRecord) -> str:
        return f'{self.COLORS.get(record.levelno, "")}{super().format(record)}{Style.RESET_ALL}'


def configure_logging(verbose: bool) -> None:
    handler = logging.StreamHandler()
    handler.setFormatter(ColoredFormatter('%(levelname)s %(name)s: %(message)s'))
    root = logging.getLogger()
    root.handlers = [handler]
    root.setLevel(logging.DEBUG if verbose else logging.INFO)


def parse_command_line_args(argv: Sequence[str] = None) -> Namespace:
    """
    Parses command line arguments. Every flag defaults to None so that a job
    file can supply it; flags given on the command line win.

    :return: The parsed namespace.
    """
    parser = ArgumentParser(description='''
                                        Computes entanglement measures, singlet fractions and
                                        hypothesis-testing functionals as certified brackets, and
                                        builds and certifies non-entangling distillation and
                                        formation maps.
                                        ''',
                            epilog='Exit codes: 0 ok, 2 bad input, 3 invalid state or map, '
                                   '4 solver failure, 5 problem too large.')
    parser.add_argument('command', nargs='?', choices=COMMANDS,
                        help='What to compute')
    parser.add_argument('-j', '--job', type=str,
                        help='A .toml job file with the same keys as the flags')
    parser.add_argument('--state', type=str,
                        help='A .json state file')
    parser.add_argument('--named', type=str,
                        help='A named state: phi2, phi3, phi:K, iso:K:F, werner:d:p, mixed:d1:d2')
    parser.add_argument('--kind', type=str,
                        help=f'measure: {MEASURE_KINDS}; stein: {STEIN_KINDS}; protocol: {PROTOCOL_KINDS}')
    parser.add_argument('--measure', type=str,
                        help=f'The measure of a regularized estimate: {measures.MEASURES}')
    parser.add_argument('--variant', type=str, choices=FSEP_VARIANTS,
                        help='Singlet-fraction variant')
    parser.add_argument('--K', type=int,
                        help='Target Schmidt rank')
    parser.add_argument('--n', type=str,
                        help='Number of copies: 2, 1,2 or 1..3')
    parser.add_argument('--y', type=str,
                        help='Rate: 1.0, 0,0.5 or a start:step:stop grid')
    parser.add_argument('--eps', type=str,
                        help='Smoothing or relaxation parameter, same grammar as --y')
    parser.add_argument('--tol', type=float,
                        help='Bracket tolerance (default 1e-6)')
    parser.add_argument('--seed', type=int,
                        help='Seed of every randomized step (default 0)')
    parser.add_argument('--out', type=str,
                        help='Report path; the sweep CSV and certificates go next to it')
    parser.add_argument('--workers', type=int,
                        help='Grid cells evaluated concurrently')
    parser.add_argument('--save-certificates', dest='save_certificates', action='store_const', const=True,
                        help='Also write certificates to an HDF5 file')
    parser.add_argument('--timings', action='store_const', const=True,
                        help='Fill the seconds column of the CSV')
    parser.add_argument('-v', '--verbose', action='store_const', const=True,
                        help='Debug logging')
    return parser.parse_args(argv)


def build_job(arguments: Namespace) -> JobSpec:
    """
    Merges the job file (if any) with the command line flags into a JobSpec.
    """
    values = input_module.parse_job_file(arguments.job) if arguments.job else {}
    known = {f.name for f in fields(JobSpec)}
    for key, value in vars(arguments).items():
        if key in known and value is not None:
            values[key] = value
    if 'command' not in values:
        raise input_module.StateFileError('A command is needed, on the command line or in the job file')
    for key, parse in (('n', input_module.parse_int_grid), ('y', input_module.parse_float_grid),
                       ('eps', input_module.parse_float_grid)):
        if key in values:
            values[key] = parse(values[key])
    return JobSpec(**values)


def _target_command(job: JobSpec) -> str:
    """
    The command a sweep stands for, read off its kind.
    """
    if job.command != 'sweep':
        return job.command
    if job.kind in MEASURE_KINDS:
        return 'measure'
    if job.kind in STEIN_KINDS:
        return 'stein'
    if job.kind in PROTOCOL_KINDS:
        return 'protocol'
    if job.kind == 'fsep':
        return 'fsep'
    raise ValueError(f'Unknown sweep kind {job.kind}')


def validate_job(job: JobSpec) -> None:
    """
    Checks the job parameters against the preconditions of the target operation.
    """
    if job.command not in COMMANDS:
        raise ValueError(f'Unknown command {job.command}')
    target = _target_command(job)
    kinds = {'measure': MEASURE_KINDS, 'stein': STEIN_KINDS, 'protocol': PROTOCOL_KINDS, 'fsep': (None, 'fsep')}
    if job.kind not in kinds[target] and not (target == 'stein' and job.kind is None):
        raise ValueError(f'{job.command} does not know the kind {job.kind}')
    if target == 'measure' and job.kind == 'regularized' and job.measure not in measures.MEASURES:
        raise ValueError(f'regularized needs --measure in {measures.MEASURES}')
    if job.variant not in FSEP_VARIANTS:
        raise ValueError(f'Unknown variant {job.variant}')
    if any(n < 1 for n in job.n) or not job.n:
        raise ValueError(f'n must be positive, got {job.n}')
    if any(eps < 0 for eps in job.eps):
        raise ValueError(f'eps must be non-negative, got {job.eps}')
    if job.tol <= 0:
        raise ValueError(f'tol must be positive, got {job.tol}')
    if job.workers < 1:
        raise ValueError(f'workers must be positive, got {job.workers}')
    if target == 'fsep' and job.K is not None and job.K < (2 if job.variant == 'plain' else 1):
        raise ValueError(f'K = {job.K} is too small for the {job.variant} singlet fraction')
    if target == 'protocol' and job.kind == 'distill' and (job.K is None or job.K < 2):
        raise ValueError('distill needs K ≥ 2')
    if target == 'stein' and job.kind == 'probe' and any(eps <= 0 for eps in job.eps):
        raise ValueError('probe needs eps > 0')


Cell = Tuple[Optional[int], Optional[int], Optional[float], Optional[float]]


def grid_cells(job: JobSpec) -> List[Cell]:
    """
    The (n, K, y, eps) cells of a job in grid order; axes the kind ignores are None.
    """
    target, kind = _target_command(job), job.kind
    uses_y = target == 'stein' or (target == 'fsep' and job.K is None)
    uses_eps = (target == 'measure' and kind in SMOOTHED_KINDS) or (target == 'stein' and kind == 'probe') \
        or (target == 'fsep' and job.variant != 'plain')
    ns = job.n
    if target == 'measure' and kind == 'regularized' or target == 'protocol' and kind == 'demo':
        ns = (max(job.n),)
    ys = job.y if uses_y else (None,)
    epsilons = job.eps if uses_eps else (None,)
    K = job.K if target in ('fsep', 'protocol') else None
    return [(n, K, y, eps) for n, y, eps in itertools.product(ns, ys, epsilons)]


def _measure_cells(job: JobSpec, rho: MultiState, settings: SolverSettings, cell: Cell) -> List[CellResult]:
    n, _, _, eps = cell
    kind, tol, seed = job.kind, job.tol, job.seed
    if kind == 'regularized':
        trace = measures.regularized_estimate(job.measure, rho, n, eps=job.eps[0], tol=tol, settings=settings,
                                              seed=seed)
        return [CellResult(job.command, f'regularized:{job.measure}', index + 1, None, None, job.eps[0], entry)
                for index, entry in enumerate(trace.entries)]
    measures.check_dimension(rho.dim ** n, settings)
    copies = tensor_power(rho, n)
    evaluate: Dict[str, Callable[[], Bracket]] = {
        'er': lambda: measures.rel_ent_entanglement(copies, tol, settings, seed),
        'rg': lambda: measures.global_robustness(copies, tol, settings, seed),
        'lrg': lambda: measures.log_robustness(copies, tol, settings, seed),
        'lrg_smoothed': lambda: measures.smoothed_log_robustness(copies, eps, tol, settings, seed),
        'mixing': lambda: measures.mixing_robustness(copies, tol, settings, seed),
        'lr': lambda: measures.log_mixing_robustness(copies, tol, settings, seed),
        'lr_smoothed': lambda: measures.smoothed_log_mixing_robustness(copies, eps, tol, settings, seed),
        'distance': lambda: nearest_sep_distance(copies, tol, settings, seed),
    }
    return [CellResult(job.command, kind, n, None, None, eps, evaluate[kind]())]


def _fsep_cells(job: JobSpec, rho: MultiState, settings: SolverSettings, cell: Cell) -> List[CellResult]:
    n, K, y, eps = cell
    measures.check_dimension(rho.dim ** n, settings)
    copies = tensor_power(rho, n)
    target = K if K is not None else 2.0 ** (n * y)
    if job.variant == 'plain':
        bracket = hypotest.fsep(copies, target, job.tol, settings, job.seed)
    elif job.variant == 'relaxed':
        bracket = hypotest.fsep_relaxed(copies, target, eps, job.tol, settings, job.seed)
    else:
        bracket = hypotest.fsep_bounded(copies, target, eps, job.tol, settings, job.seed)
    return [CellResult(job.command, f'fsep:{job.variant}', n, K, y, eps, bracket, extra={'K_value': target})]


def _stein_cells(job: JobSpec, rho: MultiState, settings: SolverSettings, cell: Cell) -> List[CellResult]:
    n, _, y, eps = cell
    kind = job.kind or 'stein'
    if kind == 'stein':
        bracket = hypotest.stein_functional(rho, n, y, job.tol, settings, job.seed)
        return [CellResult(job.command, kind, n, None, y, None, bracket)]
    if kind == 'sfne':
        bracket, b = hypotest.sfne_eval(rho, n, y, job.tol, settings, job.seed)
        return [CellResult(job.command, kind, n, None, y, None, bracket, extra={'b': b})]
    probe = hypotest.unbounded_distillation_probe(rho, n, y, eps, job.tol, settings, job.seed)
    return [CellResult(job.command, 'probe:relaxed', n, None, y, eps, probe.relaxed,
                       extra={'penalty_dominates': probe.penalty_dominates}),
            CellResult(job.command, 'probe:floor', n, None, y, eps, probe.floor)]


def _protocol_cells(job: JobSpec, rho: MultiState, settings: SolverSettings, cell: Cell) -> List[CellResult]:
    n, K, _, _ = cell
    tol, seed = job.tol, job.seed
    if job.kind == 'demo':
        report = protocols.reversibility_demo(rho, n, tol, settings, seed)
        cells = []
        for row in report.rows:
            extra = {'K_form': row.K_form, 'form_epsilon': row.form_epsilon, 'distill_error': row.distill_error,
                     'form_error': row.form_error, 'gap': row.gap}
            cells += [CellResult(job.command, 'demo:distill', row.n, None, None, None, row.distill_rate, extra=extra),
                      CellResult(job.command, 'demo:form', row.n, row.K_form, None, None, row.form_rate),
                      CellResult(job.command, 'demo:er', row.n, None, None, None, row.er_rate)]
        return cells

    measures.check_dimension(rho.dim ** n, settings)
    copies = tensor_power(rho, n)
    if job.kind == 'distill':
        fidelity = hypotest.fsep(copies, K, tol, settings, seed)
        povm = fidelity.lower_certificate.primal.get('A') if fidelity.lower_certificate else None
        if povm is None:
            raise ConeSolverError('The singlet-fraction program returned no POVM element')
        values, vectors = np.linalg.eigh((povm + povm.conj().T) / 2)
        povm = (vectors * np.clip(values, 0.0, 1.0)) @ vectors.conj().T
        channel = protocols.build_distill_map(povm, K, copies.profile)
        certificate = protocols.verify_sepp(channel, tol, settings, seed)
        cptp = protocols.verify_cptp(channel)
        return [CellResult(job.command, 'distill', n, K, None, None, fidelity,
                           extra={'epsilon': certificate.epsilon, 'cptp': cptp.is_cptp, 'povm': povm})]

    if K is None:
        K = protocols.formation_dimension(measures.global_robustness(copies, tol, settings, seed).upper)
    if K < 2:
        raise protocols.MapConstructionError('The target is separable; no formation map is needed')
    pi, decomposition = protocols.find_mixing_state(copies, K, tol, settings, seed)
    channel = protocols.build_formation_map(copies, K, pi, decomposition)
    certificate = protocols.verify_sepp(channel, tol, settings, seed)
    bracket = Bracket(certificate.epsilon_lower, certificate.epsilon, upper_certificate=decomposition)
    return [CellResult(job.command, 'form', n, K, None, None, bracket,
                       extra={'rate': float(np.log2(K)) / n, 'cptp': protocols.verify_cptp(channel).is_cptp,
                              'pi': pi.matrix})]


HANDLERS = {'measure': _measure_cells, 'fsep': _fsep_cells, 'stein': _stein_cells, 'protocol': _protocol_cells}


def evaluate_job(job: JobSpec, rho: MultiState, settings: SolverSettings) -> List[CellResult]:
    """
    Evaluates every grid cell, concurrently when workers > 1, keeping grid order.
    """
    handler = HANDLERS[_target_command(job)]

    def evaluate(cell: Cell) -> List[CellResult]:
        started = time.perf_counter()
        results = handler(job, rho, settings, cell)
        seconds = time.perf_counter() - started
        return [replace(result, seconds=seconds) for result in results]

    with ThreadPoolExecutor(max_workers=job.workers) as executor:
        batches = list(executor.map(evaluate, grid_cells(job)))
    return [result for batch in batches for result in batch]


def _output_paths(out: str) -> Tuple[str, str, str]:
    stem = out[:-5] if out.endswith('.json') else out
    return f'{stem}.json', f'{stem}.csv', f'{stem}.h5'


def print_results(job: JobSpec, results: Sequence[CellResult]) -> None:
    # green banners, magenta result lines
    banner = f'------------------------------{job.command}: {job.state_id}------------------------------'
    print(Fore.GREEN + banner)
    for cell in results:
        print(Fore.MAGENTA + f'{cell.kind} n={cell.n} K={cell.K} y={cell.y} eps={cell.eps}: '
                             f'[{cell.bracket.lower:.10g}, {cell.bracket.upper:.10g}] '
                             f'({cell.bracket.status.value}, {cell.bracket.relaxation.value})')
    print(Fore.GREEN + '-' * len(banner) + Fore.RESET)


def run(job: JobSpec, settings: SolverSettings = None) -> int:
    """
    Runs one job and writes its reports.

    :param job: The job.
    :param settings: Solver settings; read from solver.conf when omitted.
    :return: The exit code.
    """
    started = time.perf_counter()
    try:
        validate_job(job)
        settings = settings or config_file_parser.SolverConfigParser().parse_config()
        rho = input_module.resolve_state(job)
        results = evaluate_job(job, rho, settings)
    except (input_module.StateFileError, DimensionMismatchError) as error:
        logger.error(str(error))
        return EXIT_INPUT
    except InvalidStateError as error:
        logger.error(f'Invalid state, failed check "{error.check}": {error}')
        return EXIT_STATE
    except (NonHermitianError, protocols.MapConstructionError) as error:
        logger.error(str(error))
        return EXIT_STATE
    except ConeSolverError as error:
        logger.error(f'Solver failure: {error}')
        return EXIT_SOLVER
    except DimensionRejectedError as error:
        logger.error(str(error))
        return EXIT_DIMENSION
    except ValueError as error:
        logger.error(f'Invalid parameters: {error}')
        return EXIT_INPUT

    print_results(job, results)
    if job.out:
        report_path, csv_path, certificate_path = _output_paths(job.out)
        saving_module.write_report(report_path, job, results, settings.cone.solver, time.perf_counter() - started)
        if job.command == 'sweep':
            saving_module.write_sweep_csv(csv_path, job, results, job.timings)
        if job.save_certificates:
            saving_module.save_certificates(certificate_path, results)
    return EXIT_OK


def main(argv: Sequence[str] = None) -> int:
    """
    Main method.
    """
    args = parse_command_line_args(argv)
    configure_logging(bool(args.verbose))
    try:
        job = build_job(args)
    except (input_module.StateFileError, ValueError, TypeError) as error:
        logger.error(str(error))
        return EXIT_INPUT
    return run(job)


if __name__ == '__main__':
    # go to the main method
    sys.exit(main())
