"""
Singlet fractions under non-entangling maps and the finite-n Stein functional.

Every singlet fraction here has the form
    min over σ in cone(SEP) of tr(ρ − σ)_+ + c·tr(σ)
for a cost c (1/K, 1/K + ε or (1+ε)/K). The lower endpoint is the primal
max tr(Aρ) over 0 ⪯ A ⪯ I with cI − A in the dual of the PPT cone, the upper
endpoint the expression itself at the best pooled separable σ.
"""

import logging
import time
from typing import Tuple

import cvxpy as cp
import numpy as np
from scipy.optimize import minimize_scalar

from cone_solver import ConeProgram, solve
from data.result_data_storage import Bracket, ConeStatus, DistillationProbe
from data.settings_data_storage import SolverSettings, default_settings
from data.state_data_storage import MultiState
from measures import check_dimension, make_bracket
from sep_geometry import add_separable_dual, add_separable_outer, cone_matrix, inner_cone_search, relaxation_of, \
    seed_atoms, worst_status
from tensor_core import positive_part_trace, tensor_power

logger = logging.getLogger(__name__)


def _settings(settings: SolverSettings) -> SolverSettings:
    return settings or default_settings()


def _check_K(K: float, minimum: float):
    if K < minimum:
        raise ValueError(f'K must be at least {minimum}, got {K}')


def _check_eps(eps: float):
    if eps < 0:
        raise ValueError(f'eps must be non-negative, got {eps}')


def _primal_program(rho: MultiState, cost: float, name: str) -> ConeProgram:
    program = ConeProgram(f'{name}:primal')
    povm = program.hermitian('A', rho.dim)
    program.add_psd(povm, name='A')
    program.add_psd(np.eye(rho.dim) - povm, name='I-A')
    add_separable_dual(program, cost * np.eye(rho.dim) - povm, rho.profile, prefix='threshold')
    program.maximize(cp.real(cp.trace(rho.matrix @ povm)))
    return program


def singlet_fraction(rho: MultiState, cost: float, tol: float = 1e-6, settings: SolverSettings = None, seed=0,
                     name: str = 'singlet_fraction') -> Bracket:
    """
    Bracket on min over σ in cone(SEP) of tr(ρ − σ)_+ + cost·tr(σ).

    :param rho: The state.
    :param cost: Price of the trace of σ.
    :return: A bracket inside [min(cost, 1), 1]; the lower certificate holds the
    POVM element A, the upper certificate the SeparableDecomposition of σ.
    """
    settings = _settings(settings)
    check_dimension(rho.dim, settings)
    started = time.perf_counter()
    floor = min(cost, 1.0)
    if cost >= 1.0:
        # tr(ρ − σ)_+ ≥ 1 − tr σ, so σ = 0 is optimal
        return Bracket(1.0, 1.0, runtime=time.perf_counter() - started, relaxation=relaxation_of(rho.profile))

    primal = solve(_primal_program(rho, cost, name), tol, settings)
    lower = floor
    if primal.primal and np.isfinite(primal.objective):
        lower = min(1.0, max(floor, primal.objective))

    def build(program: ConeProgram, elements):
        excess = program.hermitian('Y', rho.dim)
        program.add_psd(excess, name='Y')
        program.add_psd(excess - rho.matrix + elements[0], name='Y-rho+S')
        program.minimize(cp.real(cp.trace(excess) + cost * cp.trace(elements[0])))

    def evaluate(weights, vectors, _):
        cone = cone_matrix(weights[0], vectors)
        return positive_part_trace(rho.matrix - cone) + cost * float(np.real(np.trace(cone)))

    seeds = seed_atoms(rho.matrix, rho.profile, settings, seed)
    inner = inner_cone_search(rho.profile, build, evaluate, seeds=seeds, tol=tol, settings=settings, seed=seed,
                              name=f'{name}:inner')
    if inner.found and inner.value < 1.0:
        upper, certificate = inner.value, inner.decomposition()
    else:
        upper, certificate = 1.0, None
    return make_bracket(name, lower, upper, started, lower_certificate=primal, upper_certificate=certificate,
                        iterations=inner.rounds, status=worst_status(primal.status, inner.status),
                        relaxation=relaxation_of(rho.profile))


def fsep(rho: MultiState, K: float, tol: float = 1e-6, settings: SolverSettings = None, seed=0) -> Bracket:
    """
    F_sep(ρ; K), the best fidelity with Φ(K) reachable from ρ by non-entangling maps.
    """
    _check_K(K, 2)
    return singlet_fraction(rho, 1.0 / K, tol, settings, seed, name='fsep')


def fsep_relaxed(rho: MultiState, K: float, eps: float, tol: float = 1e-6, settings: SolverSettings = None,
                 seed=0) -> Bracket:
    """
    F_sep(ρ; K; ε) with cost 1/K + ε, the singlet fraction under maps that keep
    separable inputs within trace distance ε of the separable set.
    """
    _check_K(K, 1)
    _check_eps(eps)
    return singlet_fraction(rho, 1.0 / K + eps, tol, settings, seed, name='fsep_relaxed')


def fsep_bounded(rho: MultiState, K: float, eps: float, tol: float = 1e-6, settings: SolverSettings = None,
                 seed=0) -> Bracket:
    """
    The ε-singlet fraction of ε-non-entangling maps, cost (1+ε)/K.
    """
    _check_K(K, 1)
    _check_eps(eps)
    return singlet_fraction(rho, (1.0 + eps) / K, tol, settings, seed, name='fsep_bounded')


def _copies(rho: MultiState, n: int, settings: SolverSettings) -> MultiState:
    if n < 1:
        raise ValueError(f'n must be positive, got {n}')
    check_dimension(rho.dim ** n, settings)
    return tensor_power(rho, n)


def stein_functional(rho: MultiState, n: int, y: float, tol: float = 1e-6, settings: SolverSettings = None,
                     seed=0) -> Bracket:
    """
    min over separable states ω of tr(ρ^⊗n − 2^{yn}ω)_+.

    :param rho: The single-copy state.
    :param n: Number of copies.
    :param y: Rate; the value is non-increasing in y.
    :return: A bracket inside [0, 1].
    """
    settings = _settings(settings)
    copies = _copies(rho, n, settings)
    started = time.perf_counter()
    scale = 2.0 ** (y * n)
    dim = copies.dim

    program = ConeProgram('stein_functional:outer')
    excess = program.hermitian('Y', dim)
    candidate = program.hermitian('omega', dim)
    program.add_psd(excess, name='Y')
    program.add_psd(excess - copies.matrix + scale * candidate, name='Y-rho+omega')
    add_separable_outer(program, candidate, copies.profile, name='omega')
    program.add_equality(cp.real(cp.trace(candidate)), 1.0, name='trace')
    program.minimize(cp.real(cp.trace(excess)))
    outer = solve(program, tol, settings)
    lower = max(0.0, outer.dual_objective) if np.isfinite(outer.dual_objective) else 0.0

    def build(inner: ConeProgram, elements):
        slack = inner.hermitian('Y', dim)
        inner.add_psd(slack, name='Y')
        inner.add_psd(slack - copies.matrix + scale * elements[0], name='Y-rho+omega')
        inner.add_inequality(cp.real(cp.trace(elements[0])), 1.0, name='trace')
        inner.minimize(cp.real(cp.trace(slack)))

    def evaluate(weights, vectors, _):
        cone = cone_matrix(weights[0], vectors)
        trace = float(np.real(np.trace(cone)))
        if trace <= 0:
            return 1.0
        return positive_part_trace(copies.matrix - scale * cone / trace)

    seeds = seed_atoms(outer.primal['omega'], copies.profile, settings, seed) if outer.primal else ()
    inner = inner_cone_search(copies.profile, build, evaluate, seeds=seeds, tol=tol, settings=settings, seed=seed,
                              name='stein_functional:inner')
    upper = min(inner.value, 1.0) if inner.found else 1.0
    certificate = inner.decomposition() if inner.found else None
    return make_bracket('stein_functional', min(lower, 1.0), upper, started, lower_certificate=outer,
                        upper_certificate=certificate, iterations=inner.rounds,
                        status=worst_status(outer.status, inner.status), relaxation=relaxation_of(copies.profile))


def sfne_eval(rho: MultiState, n: int, y: float, tol: float = 1e-6, settings: SolverSettings = None,
              seed=0) -> Tuple[Bracket, float]:
    """
    min over b of stein_functional(ρ, n, b) + 2^{−(y−b)n}, which equals
    F_sep(ρ^⊗n; 2^{ny}).

    The outer search evaluates a b-grid on [floor, y] and refines the best cell
    by bounded scalar minimization. Two lower endpoints are combined: the
    monotonicity of the Stein functional in b gives lower(b_{i+1}) + 2^{−(y−b_i)n}
    on every grid cell [b_i, b_{i+1}], and the singlet fraction of ρ^⊗n at cost
    2^{−ny} gives the value itself up to solver accuracy. The upper endpoint is
    the better of the grid search and that singlet fraction, whose σ has trace 2^{nb}.

    :return: The bracket and the b attaining the upper endpoint (b ≤ y).
    """
    settings = _settings(settings)
    copies = _copies(rho, n, settings)
    started = time.perf_counter()
    parameters = settings.hypothesis_testing
    bottom = min(parameters.b_grid_floor, y)
    grid = np.linspace(bottom, y, parameters.b_grid_points)
    penalty = lambda b: 2.0 ** (-(y - b) * n)

    cache = {}

    def functional(b: float) -> Bracket:
        key = float(b)
        if key not in cache:
            cache[key] = stein_functional(rho, n, key, tol, settings, seed)
        return cache[key]

    brackets = [functional(b) for b in grid]
    uppers = np.array([bracket.upper + penalty(b) for b, bracket in zip(grid, brackets)])
    best = int(np.argmin(uppers))
    best_b, best_value = float(grid[best]), float(uppers[best])
    logger.debug(f'sfne_eval: grid minimum {best_value:.8g} at b={best_b:.6g}')

    left, right = grid[max(best - 1, 0)], grid[min(best + 1, len(grid) - 1)]
    if right > left:
        refined = minimize_scalar(lambda b: functional(b).upper + penalty(b), bounds=(left, right),
                                  method='bounded', options={'xatol': parameters.golden_tolerance})
        if refined.fun < best_value:
            best_b, best_value = float(refined.x), float(refined.fun)

    lower = brackets[0].lower
    for i in range(len(grid) - 1):
        lower = min(lower, brackets[i + 1].lower + penalty(grid[i]))
    upper = min(best_value, 1.0)
    if upper >= 1.0:
        best_b = bottom

    direct = singlet_fraction(copies, 2.0 ** (-n * y), tol, settings, seed, name='sfne_eval:direct')
    lower = min(max(lower, direct.lower), 1.0)
    if direct.upper < upper:
        upper = direct.upper
        certificate = direct.upper_certificate
        if certificate is not None and certificate.scale > 0:
            best_b = float(np.log2(certificate.scale)) / n
    status = worst_status(direct.status, *(bracket.status for bracket in brackets))
    bracket = make_bracket('sfne_eval', max(lower, 0.0), upper, started, iterations=len(cache) + direct.iterations,
                           status=status, relaxation=brackets[0].relaxation)
    return bracket, min(best_b, y)


def unbounded_distillation_probe(rho: MultiState, n: int, y: float, eps: float, tol: float = 1e-6,
                                 settings: SolverSettings = None, seed=0) -> DistillationProbe:
    """
    Relaxed singlet fraction F_sep(ρ^⊗n; 2^{ny}; ε) together with the floor
    min over separable states ω of tr(ρ^⊗n − ω/ε)_+ it can never drop below.

    Writing σ = tω, any t > 1/ε already costs more than 1, so the relaxed value
    is at least the Stein functional at rate log2(1/ε)/n.
    """
    if eps <= 0:
        raise ValueError(f'eps must be positive, got {eps}')
    settings = _settings(settings)
    copies = _copies(rho, n, settings)
    relaxed = fsep_relaxed(copies, 2.0 ** (n * y), eps, tol, settings, seed)
    rate = float(np.log2(1.0 / eps)) / n
    floor = stein_functional(rho, n, rate, tol, settings, seed)
    if relaxed.upper + tol < floor.lower:
        logger.warning(f'unbounded_distillation_probe: relaxed value {relaxed.upper:.8g} '
                       f'below its floor {floor.lower:.8g}')
    return DistillationProbe(n, y, eps, relaxed, floor, y > rate)
