"""
Small dense cone programs over Hermitian matrix variables.

A ConeProgram records variables, constraints and an objective; `solve` hands it
to cvxpy (Clarabel by default, SCS as fallback) and turns the result into a
ConeSolution whose status is only OPTIMAL when the complementarity gap and the
primal residuals are both within the requested tolerance.
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence

import cvxpy as cp
import numpy as np

from data.result_data_storage import ConeSolution, ConeStatus
from data.settings_data_storage import ConeSolverParameters, SolverSettings, default_settings

logger = logging.getLogger(__name__)

PSD = 'psd'
EQUALITY = 'eq'
INEQUALITY = 'ineq'


class ConeSolverError(Exception):
    """
    Exception raised when the cone solver crashes or reports an unbounded program.
    """

    def __init__(self, message: str = 'The cone solver failed'):
        super().__init__(message)


class DimensionRejectedError(Exception):
    """
    Exception raised when a program or a tensor power exceeds the configured limits.
    """

    def __init__(self, message: str = 'The problem is too large for the configured limits'):
        super().__init__(message)


@dataclass
class _ConstraintRecord:
    name: str
    kind: str
    constraint: Any
    lhs: Any
    rhs: Any = None


class ConeProgram:
    """
    Builder for a cone program. Matrix variables are Hermitian; every PSD
    membership is recorded together with the expression it constrains so that
    residuals and complementarity can be evaluated after the solve.
    """

    def __init__(self, name: str = 'program'):
        self.name = name
        self.variables: Dict[str, cp.Variable] = {}
        self.matrix_dims: Dict[str, int] = {}
        self.records: List[_ConstraintRecord] = []
        self.objective = None
        self.sense: Optional[str] = None

    def _declare(self, name: str, variable: cp.Variable) -> cp.Variable:
        if name in self.variables:
            raise ValueError(f'Variable {name} declared twice in {self.name}')
        self.variables[name] = variable
        return variable

    def hermitian(self, name: str, dim: int) -> cp.Variable:
        self.matrix_dims[name] = int(dim)
        return self._declare(name, cp.Variable((dim, dim), hermitian=True, name=name))

    def nonnegative(self, name: str, size: int) -> cp.Variable:
        return self._declare(name, cp.Variable(size, nonneg=True, name=name))

    def scalar(self, name: str) -> cp.Variable:
        return self._declare(name, cp.Variable(name=name))

    def _record(self, kind: str, constraint, lhs, rhs=None, name: str = None):
        name = name or f'{kind}{len(self.records)}'
        self.records.append(_ConstraintRecord(name, kind, constraint, lhs, rhs))
        return constraint

    def add_psd(self, expression, name: str = None):
        return self._record(PSD, expression >> 0, expression, name=name)

    def add_ppt(self, expression, dims: Sequence[int], cuts: Sequence[Sequence[int]], name: str = None):
        """
        Constrains the expression and its partial transpose across every cut
        to be positive semidefinite.
        """
        name = name or f'ppt{len(self.records)}'
        self.add_psd(expression, name=f'{name}:psd')
        for index, cut in enumerate(cuts):
            self.add_psd(ppt_transform(expression, dims, cut), name=f'{name}:cut{index}')

    def add_equality(self, lhs, rhs, name: str = None):
        return self._record(EQUALITY, lhs == rhs, lhs, rhs, name)

    def add_inequality(self, lhs, rhs, name: str = None):
        """
        lhs ≤ rhs, elementwise.
        """
        return self._record(INEQUALITY, lhs <= rhs, lhs, rhs, name)

    def minimize(self, expression):
        self.objective, self.sense = cp.Minimize(expression), 'min'

    def maximize(self, expression):
        self.objective, self.sense = cp.Maximize(expression), 'max'

    @property
    def total_dimension(self) -> int:
        return sum(self.matrix_dims.values())

    def validate(self, limit: int):
        if self.objective is None:
            raise ValueError(f'{self.name} has no objective')
        if self.total_dimension > limit:
            raise DimensionRejectedError(f'{self.name} needs {self.total_dimension} matrix rows, '
                                         f'the limit is {limit}')


def ppt_transform(expression, dims: Sequence[int], cut: Sequence[int]):
    """
    Partial transpose of a cvxpy expression over every subsystem in `cut`.
    """
    for axis in cut:
        expression = cp.partial_transpose(expression, list(dims), int(axis))
    return expression


def _solver_options(solver: str, tol: float, parameters: ConeSolverParameters) -> Dict[str, Any]:
    precision = min(1e-8, tol * 1e-2)
    if solver == 'CLARABEL':
        return {'max_iter': parameters.max_iterations, 'tol_gap_abs': precision,
                'tol_gap_rel': precision, 'tol_feas': precision}
    if solver == 'SCS':
        return {'max_iters': parameters.max_iterations * 100, 'eps_abs': precision, 'eps_rel': precision}
    return {}


def _run(problem: cp.Problem, tol: float, parameters: ConeSolverParameters) -> str:
    solvers = [parameters.solver]
    if parameters.fallback_solver and parameters.fallback_solver != parameters.solver:
        solvers.append(parameters.fallback_solver)
    last_error = None
    for solver in solvers:
        try:
            problem.solve(solver=solver, **_solver_options(solver, tol, parameters))
            return solver
        except cp.error.SolverError as error:
            logger.warning(f'{solver} failed ({error}), trying the next solver')
            last_error = error
    raise ConeSolverError(f'No solver could handle the program: {last_error}')


def dual_matrix(value, shape) -> Optional[np.ndarray]:
    if value is None:
        return None
    value = np.asarray(value)
    if value.shape == shape:
        return value
    if value.size == shape[0] * shape[1]:
        return value.reshape(shape)
    if value.shape == (2 * shape[0], 2 * shape[1]):
        n = shape[0]
        return value[:n, :n] + 1j * value[n:, :n]
    return None


def _psd_terms(record: _ConstraintRecord):
    slack = np.asarray(record.lhs.value)
    slack = (slack + slack.conj().T) / 2
    residual = max(0.0, -float(np.linalg.eigvalsh(slack)[0]))
    dual = dual_matrix(record.constraint.dual_value, slack.shape)
    if dual is None:
        return residual, 0.0, None, float('inf')
    complementarity = abs(float(np.real(np.vdot(dual, slack))))
    dual_violation = max(0.0, -float(np.linalg.eigvalsh((dual + dual.conj().T) / 2)[0]))
    return residual, complementarity, dual, dual_violation


def _linear_terms(record: _ConstraintRecord):
    difference = np.asarray(record.lhs.value) - np.asarray(record.rhs.value if hasattr(record.rhs, 'value')
                                                           else record.rhs)
    dual = record.constraint.dual_value
    if record.kind == EQUALITY:
        return float(np.max(np.abs(difference), initial=0.0)), 0.0, dual, 0.0
    residual = max(0.0, float(np.max(np.real(difference), initial=0.0)))
    if dual is None:
        return residual, 0.0, None, float('inf')
    complementarity = float(np.sum(np.abs(np.asarray(dual) * np.real(difference))))
    dual_violation = max(0.0, -float(np.min(np.real(dual), initial=0.0)))
    return residual, complementarity, dual, dual_violation


def solve(program: ConeProgram, tol: float = 1e-6, settings: SolverSettings = None) -> ConeSolution:
    """
    Solves a cone program.

    :param program: The program to solve.
    :param tol: Gap and residual tolerance required for an OPTIMAL status.
    :param settings: Solver settings, defaults when omitted.
    :return: The primal values, the dual values of named constraints and the
    certified objective. The dual objective is the primal objective corrected
    by the complementarity sum; it is a bound on the optimum only when every
    dual value lies in its dual cone, so a violation above `tol` (or a missing
    dual value) keeps the status at MAX_ITER.
    """
    settings = settings or default_settings()
    program.validate(settings.cone.max_program_dimension)
    problem = cp.Problem(program.objective, [record.constraint for record in program.records])
    solver = _run(problem, tol, settings.cone)
    stats = problem.solver_stats
    solve_time = float(getattr(stats, 'solve_time', 0.0) or 0.0)
    iterations = int(getattr(stats, 'num_iters', 0) or 0)

    if problem.status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
        logger.debug(f'{program.name}: infeasible ({solver})')
        return ConeSolution({}, {}, float('nan'), float('nan'), float('inf'), float('inf'),
                            ConeStatus.INFEASIBLE, solve_time, iterations)
    if problem.status in (cp.UNBOUNDED, cp.UNBOUNDED_INACCURATE):
        raise ConeSolverError(f'{program.name} is unbounded')
    if problem.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE, cp.USER_LIMIT):
        raise ConeSolverError(f'{program.name} ended with solver status {problem.status}')

    primal = {name: variable.value for name, variable in program.variables.items()}
    if any(value is None for value in primal.values()) or problem.value is None:
        logger.warning(f'{program.name}: {solver} stopped without a usable point')
        return ConeSolution({}, {}, float('nan'), float('nan'), float('inf'), float('inf'),
                            ConeStatus.MAX_ITER, solve_time, iterations)

    residual, gap, dual_residual, dual = 0.0, 0.0, 0.0, {}
    for record in program.records:
        terms = _psd_terms(record) if record.kind == PSD else _linear_terms(record)
        residual = max(residual, terms[0])
        gap += terms[1]
        dual[record.name] = terms[2]
        dual_residual = max(dual_residual, terms[3])

    objective = float(problem.value)
    dual_objective = objective - gap if program.sense == 'min' else objective + gap
    optimal = problem.status == cp.OPTIMAL and gap <= tol and residual <= tol and dual_residual <= tol
    status = ConeStatus.OPTIMAL if optimal else ConeStatus.MAX_ITER
    if not optimal:
        logger.warning(f'{program.name}: {solver} returned {problem.status} with gap {gap:.3e}, '
                       f'residual {residual:.3e} and dual residual {dual_residual:.3e}')
    return ConeSolution(primal, dual, objective, dual_objective, gap, residual, status, solve_time, iterations,
                        dual_residual)
