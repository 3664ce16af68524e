"""
Entanglement measures as certified brackets.

Lower endpoints come from the PPT relaxation (a cone program, read off its
dual side), upper endpoints from explicit separable points (product-vector
decompositions) that are re-evaluated exactly after the search.
"""

import logging
import time
from typing import Callable, Optional, Union

import cvxpy as cp
import numpy as np
from scipy.optimize import minimize, minimize_scalar

from cone_solver import ConeProgram, DimensionRejectedError, solve
from data.result_data_storage import Bracket, ConeStatus, MixingCertificate, RegularizationTrace
from data.settings_data_storage import SolverSettings, default_settings
from data.state_data_storage import MultiState, SeparableDecomposition
from sep_geometry import add_separable_outer, computational_atoms, cone_matrix, cone_scale, \
    decomposition_from_weights, identity_shift, inner_cone_search, product_search, reconcile_endpoints, \
    relaxation_of, seed_atoms, separable_ball_radius, tensor_power_decomposition, worst_status
from tensor_core import decomposition_matrix, log_derivative, partial_trace, product_vector, relative_entropy, \
    tensor_power, trace_norm, von_neumann_entropy

logger = logging.getLogger(__name__)

LN2 = np.log(2.0)
PURITY_TOLERANCE: float = 1e-8


def _settings(settings: Optional[SolverSettings]) -> SolverSettings:
    return settings or default_settings()


def check_dimension(dim: int, settings: SolverSettings = None):
    limit = _settings(settings).limits.max_total_dimension
    if dim > limit:
        raise DimensionRejectedError(f'Total dimension {dim} exceeds the limit of {limit}')


def _finite_or(value: float, fallback: float) -> float:
    return value if np.isfinite(value) else fallback


def make_bracket(name: str, lower: float, upper: float, started: float, **kwargs) -> Bracket:
    """
    Builds a bracket, reconciling crossed endpoints; a crossing beyond solver
    accuracy marks the bracket max-iter.
    """
    lower, status = reconcile_endpoints(name, lower, upper, kwargs.pop('status', ConeStatus.OPTIMAL))
    bracket = Bracket(lower, upper, runtime=time.perf_counter() - started, status=status, **kwargs)
    logger.info(f'{name}: [{bracket.lower:.8g}, {bracket.upper:.8g}]')
    if bracket.status is ConeStatus.MAX_ITER:
        logger.warning(f'{name}: bracket reported with status max-iter')
    return bracket


def _repair_state(candidate: np.ndarray, rho: np.ndarray, eps: float) -> np.ndarray:
    """
    Projects a near-state onto the states and pulls it back into the trace ball of radius eps around ρ.
    """
    candidate = (candidate + candidate.conj().T) / 2
    values, vectors = np.linalg.eigh(candidate)
    values = np.clip(values, 0.0, None)
    if values.sum() <= 0:
        return rho
    candidate = (vectors * (values / values.sum())) @ vectors.conj().T
    distance = trace_norm(rho - candidate)
    if distance > eps:
        candidate = rho + (eps / distance) * (candidate - rho)
    return candidate


def entropy_of_entanglement(rho: MultiState) -> float:
    """
    Entropy of the first party's marginal of a pure bipartite state.
    """
    if rho.profile.num_parties != 2:
        raise ValueError('The entropy of entanglement needs a bipartite state')
    purity = float(np.real(np.trace(rho.matrix @ rho.matrix)))
    if abs(purity - 1.0) > PURITY_TOLERANCE:
        raise ValueError(f'The entropy of entanglement needs a pure state, purity is {purity}')
    first = rho.profile.party_subsystems(rho.profile.party_labels[0])
    return von_neumann_entropy(partial_trace(rho, first))


def isotropic_global_robustness(K: int, fidelity: float) -> float:
    """
    R_G of the isotropic state with fidelity F, max(0, K·F − 1).
    """
    if K < 2:
        raise ValueError(f'K must be at least 2, got {K}')
    if not 0.0 <= fidelity <= 1.0:
        raise ValueError(f'The fidelity must lie in [0, 1], got {fidelity}')
    return max(0.0, K * fidelity - 1.0)


# ---------------------------------------------------------------- relative entropy

class _RelativeEntropyObjective:
    """
    σ ↦ S(ρ||(1−δ)σ + δI/d) and its gradient in σ.
    """

    def __init__(self, rho: MultiState, regularization: float):
        self.rho = rho.matrix
        self.dim = rho.dim
        self.delta = regularization
        self.entropy = von_neumann_entropy(rho)

    def regularized(self, sigma: np.ndarray) -> np.ndarray:
        return (1 - self.delta) * sigma + self.delta * np.eye(self.dim) / self.dim

    def __call__(self, sigma: np.ndarray):
        shifted = self.regularized(sigma)
        values, vectors = np.linalg.eigh((shifted + shifted.conj().T) / 2)
        values = np.clip(values, 1e-300, None)
        log_sigma = (vectors * np.log2(values)) @ vectors.conj().T
        value = -self.entropy - float(np.real(np.sum(self.rho.T * log_sigma)))
        gradient = -(1 - self.delta) * log_derivative(shifted, self.rho) / LN2
        return value, (gradient + gradient.conj().T) / 2


def _line_search(objective: _RelativeEntropyObjective, sigma: np.ndarray, atom: np.ndarray) -> float:
    result = minimize_scalar(lambda gamma: objective(sigma + gamma * (atom - sigma))[0],
                             bounds=(0.0, 1.0), method='bounded', options={'xatol': 1e-10})
    return float(result.x)


def _corrective(objective: _RelativeEntropyObjective, weights: np.ndarray, projectors: np.ndarray) -> np.ndarray:
    """
    Re-optimizes the weights over the active atoms on the simplex.
    """

    def problem(w):
        value, gradient = objective(np.tensordot(w, projectors, axes=1))
        return value, np.real(np.einsum('jab,ba->j', projectors, gradient))

    start = problem(weights)[0]
    result = minimize(problem, weights, jac=True, method='SLSQP', bounds=[(0.0, 1.0)] * len(weights),
                      constraints=[{'type': 'eq', 'fun': lambda w: np.sum(w) - 1.0,
                                    'jac': lambda w: np.ones_like(w)}],
                      options={'ftol': 1e-14, 'maxiter': 200})
    candidate = np.clip(result.x, 0.0, None)
    if candidate.sum() <= 0:
        return weights
    candidate = candidate / candidate.sum()
    return candidate if problem(candidate)[0] <= start else weights


def _projectors(factors, profile) -> np.ndarray:
    vectors = np.array([product_vector(f, profile) for f in factors])
    return np.einsum('ja,jb->jab', vectors, vectors.conj())


def _relative_entropy_lower(rho: MultiState, sigma: np.ndarray, objective: _RelativeEntropyObjective,
                            tol: float, settings: SolverSettings):
    """
    Linearization of S(ρ||·) at the regularized point, minimized over PPT states.
    """
    shifted = objective.regularized(sigma)
    value = relative_entropy(rho.matrix, shifted)
    gradient = -log_derivative(shifted, rho.matrix) / LN2
    gradient = (gradient + gradient.conj().T) / 2
    program = ConeProgram('rel_ent_entanglement:outer')
    state = program.hermitian('sigma', rho.dim)
    add_separable_outer(program, state, rho.profile, name='sigma')
    program.add_equality(cp.real(cp.trace(state)), 1.0, name='trace')
    program.minimize(cp.real(cp.trace(gradient @ state)))
    solution = solve(program, tol, settings)
    if not np.isfinite(solution.dual_objective):
        return 0.0, solution
    anchor = float(np.real(np.sum(gradient.T * shifted)))
    return max(0.0, value + solution.dual_objective - anchor), solution


def rel_ent_entanglement(rho: MultiState, tol: float = 1e-6, settings: SolverSettings = None, seed=0,
                         initial: SeparableDecomposition = None) -> Bracket:
    """
    E_R(ρ) = min over separable σ of S(ρ||σ).

    The upper endpoint comes from a fully corrective conditional-gradient
    descent over mixtures of product pure states; each step asks the product
    search for the best vertex against the gradient, line-searches towards it
    and re-optimizes the active weights. The lower endpoint linearizes the
    objective at the final point and minimizes the linearization over PPT
    states.

    :param rho: The state.
    :param tol: Target conditional-gradient gap.
    :param settings: Solver settings.
    :param seed: Seed of the product-search restarts.
    :param initial: Starting decomposition; the maximally mixed state otherwise.
    :return: A bracket whose upper certificate is the final SeparableDecomposition.
    """
    settings = _settings(settings)
    check_dimension(rho.dim, settings)
    started = time.perf_counter()
    parameters = settings.conditional_gradient
    restarts = settings.product_search.pricing_restarts
    profile = rho.profile
    objective = _RelativeEntropyObjective(rho, parameters.support_regularization)

    if initial is not None:
        factors = list(initial.factors)
        weights = np.array(initial.weights, dtype=float)
    else:
        factors = computational_atoms(profile)
        weights = np.full(len(factors), 1.0 / len(factors))
    projectors = _projectors(factors, profile)

    sigma = np.tensordot(weights, projectors, axes=1)
    gap = float('inf')
    iteration = 0
    for iteration in range(1, parameters.max_iterations + 1):
        value, gradient = objective(sigma)
        vertex_value, vertex = product_search(-gradient, profile, restarts, (seed, iteration), settings)
        gap = float(np.real(np.sum(gradient.T * sigma))) + vertex_value
        if iteration % 50 == 1:
            logger.debug(f'rel_ent_entanglement: iteration {iteration} value {value:.10g} gap {gap:.3e}')
        if gap <= tol:
            break

        vector = product_vector(vertex, profile)
        atom = np.outer(vector, vector.conj())
        gamma = _line_search(objective, sigma, atom)
        factors.append(vertex)
        projectors = np.concatenate([projectors, atom[None]], axis=0)
        weights = np.append((1 - gamma) * weights, gamma)

        if parameters.corrective_every and iteration % parameters.corrective_every == 0:
            weights = _corrective(objective, weights, projectors)
        keep = weights > 1e-14
        if keep.sum() > parameters.max_atoms:
            keep &= weights >= np.sort(weights)[-parameters.max_atoms]
        factors = [f for f, k in zip(factors, keep) if k]
        projectors, weights = projectors[keep], weights[keep] / weights[keep].sum()
        sigma = np.tensordot(weights, projectors, axes=1)

    exact = relative_entropy(rho.matrix, sigma)
    shifted_value = relative_entropy(rho.matrix, objective.regularized(sigma))
    if exact <= shifted_value:
        upper, certificate = exact, decomposition_from_weights(weights, factors, profile)
    else:
        mixed_factors = factors + computational_atoms(profile)
        mixed_weights = np.concatenate([(1 - objective.delta) * weights,
                                        np.full(profile.total, objective.delta / profile.total)])
        upper, certificate = shifted_value, decomposition_from_weights(mixed_weights, mixed_factors, profile)

    lower, lower_solution = _relative_entropy_lower(rho, sigma, objective, tol, settings)
    status = ConeStatus.OPTIMAL if gap <= tol else ConeStatus.MAX_ITER
    return make_bracket('rel_ent_entanglement', lower, upper, started,
                        lower_certificate=lower_solution, upper_certificate=certificate, iterations=iteration,
                        status=worst_status(status, lower_solution.status), relaxation=relaxation_of(profile))


def relative_entropy_certificate_value(rho: MultiState, certificate: SeparableDecomposition) -> float:
    return relative_entropy(rho.matrix, decomposition_matrix(certificate))


# ---------------------------------------------------------------- robustness

def _robustness_outer(rho: MultiState, tol: float, settings: SolverSettings):
    program = ConeProgram('global_robustness:outer')
    cone = program.hermitian('X', rho.dim)
    add_separable_outer(program, cone, rho.profile, name='X')
    program.add_psd(cone - rho.matrix, name='dominates')
    program.minimize(cp.real(cp.trace(cone)))
    return solve(program, tol, settings)


def global_robustness(rho: MultiState, tol: float = 1e-6, settings: SolverSettings = None, seed=0) -> Bracket:
    """
    R_G(ρ) = min tr(X) − 1 over separable-cone X ⪰ ρ.

    The upper certificate is a SeparableDecomposition of X whose scale is tr(X).
    """
    settings = _settings(settings)
    check_dimension(rho.dim, settings)
    started = time.perf_counter()
    outer = _robustness_outer(rho, tol, settings)
    lower = max(0.0, _finite_or(outer.dual_objective, 1.0) - 1.0)

    def build(program: ConeProgram, elements):
        program.add_psd(elements[0] - rho.matrix, name='dominates')
        program.minimize(cp.real(cp.trace(elements[0])))

    def evaluate(weights, vectors, _):
        cone = cone_matrix(weights[0], vectors)
        return cone_scale(cone, rho.matrix) * float(np.real(np.trace(cone))) - 1.0

    seeds = seed_atoms(outer.primal['X'], rho.profile, settings, seed) if outer.primal else ()
    inner = inner_cone_search(rho.profile, build, evaluate, seeds=seeds, tol=tol, settings=settings, seed=seed,
                              name='global_robustness:inner')
    # λmax(ρ)·I dominates ρ and is separable
    fallback = float(np.linalg.eigvalsh(rho.matrix)[-1]) * rho.dim - 1.0
    if inner.found and inner.value <= fallback:
        cone = inner.cone()
        scale = cone_scale(cone, rho.matrix)
        upper = inner.value
        certificate = decomposition_from_weights(inner.weights[0], inner.factors, rho.profile, scale)
    else:
        upper = fallback
        certificate = decomposition_from_weights(np.ones(rho.dim), computational_atoms(rho.profile), rho.profile,
                                                 float(np.linalg.eigvalsh(rho.matrix)[-1]))
    return make_bracket('global_robustness', lower, max(upper, 0.0), started,
                        lower_certificate=outer, upper_certificate=certificate, iterations=inner.rounds,
                        status=worst_status(outer.status, inner.status), relaxation=relaxation_of(rho.profile))


def robustness_certificate_value(rho: MultiState, certificate: SeparableDecomposition) -> float:
    """
    Re-evaluates an R_G upper certificate: the smallest t with t·X ⪰ ρ gives t·tr(X) − 1.
    """
    cone = decomposition_matrix(certificate)
    return max(0.0, cone_scale(cone, rho.matrix) * float(np.real(np.trace(cone))) - 1.0)


def _log1p2(value: float) -> float:
    return float(np.log2(1.0 + max(value, 0.0)))


def log_robustness(rho: MultiState, tol: float = 1e-6, settings: SolverSettings = None, seed=0) -> Bracket:
    """
    LR_G = log2(1 + R_G).
    """
    return global_robustness(rho, tol, settings, seed).mapped(_log1p2)


def _ball_constraints(program: ConeProgram, rho: MultiState, eps: float):
    """
    ρ̃ a state with ‖ρ − ρ̃‖₁ ≤ ε, encoded as ρ − ρ̃ = P − N with tr P + tr N ≤ ε.
    """
    smoothed = program.hermitian('rho_tilde', rho.dim)
    excess = program.hermitian('P', rho.dim)
    program.add_psd(smoothed, name='rho_tilde')
    program.add_equality(cp.real(cp.trace(smoothed)), 1.0, name='trace')
    program.add_psd(excess, name='P')
    program.add_psd(excess - rho.matrix + smoothed, name='N')
    program.add_inequality(cp.real(2 * cp.trace(excess) - cp.trace(rho.matrix) + cp.trace(smoothed)), eps,
                           name='ball')
    return smoothed


def _check_eps(eps: float):
    if eps < 0:
        raise ValueError(f'eps must be non-negative, got {eps}')


def _trivial_bracket(rho: MultiState) -> Bracket:
    return Bracket(0.0, 0.0, relaxation=relaxation_of(rho.profile))


def smoothed_log_robustness(rho: MultiState, eps: float, tol: float = 1e-6, settings: SolverSettings = None,
                            seed=0) -> Bracket:
    """
    LR_G^ε(ρ) = min over states ρ̃ with ‖ρ − ρ̃‖₁ ≤ ε of LR_G(ρ̃).
    """
    _check_eps(eps)
    if eps >= 2.0:
        return _trivial_bracket(rho)
    if eps == 0.0:
        return log_robustness(rho, tol, settings, seed)
    settings = _settings(settings)
    check_dimension(rho.dim, settings)
    started = time.perf_counter()

    program = ConeProgram('smoothed_log_robustness:outer')
    smoothed = _ball_constraints(program, rho, eps)
    cone = program.hermitian('X', rho.dim)
    add_separable_outer(program, cone, rho.profile, name='X')
    program.add_psd(cone - smoothed, name='dominates')
    program.minimize(cp.real(cp.trace(cone)))
    outer = solve(program, tol, settings)
    lower = _log1p2(_finite_or(outer.dual_objective, 1.0) - 1.0)

    def build(inner: ConeProgram, elements):
        candidate = _ball_constraints(inner, rho, eps)
        inner.add_psd(elements[0] - candidate, name='dominates')
        inner.minimize(cp.real(cp.trace(elements[0])))

    def evaluate(weights, vectors, primal):
        cone_value = cone_matrix(weights[0], vectors)
        candidate = _repair_state(primal['rho_tilde'], rho.matrix, eps)
        return _log1p2(cone_scale(cone_value, candidate) * float(np.real(np.trace(cone_value))) - 1.0)

    seeds = seed_atoms(outer.primal['X'], rho.profile, settings, seed) if outer.primal else ()
    inner = inner_cone_search(rho.profile, build, evaluate, seeds=seeds, tol=tol, settings=settings, seed=seed,
                              name='smoothed_log_robustness:inner')
    fallback = _log1p2(float(np.linalg.eigvalsh(rho.matrix)[-1]) * rho.dim - 1.0)
    upper = min(inner.value, fallback) if inner.found else fallback
    certificate = inner.decomposition() if inner.found and inner.value <= fallback else None
    return make_bracket('smoothed_log_robustness', lower, upper, started, lower_certificate=outer,
                        upper_certificate=certificate, iterations=inner.rounds,
                        status=worst_status(outer.status, inner.status), relaxation=relaxation_of(rho.profile))


# ---------------------------------------------------------------- mixing robustness

def _cone_or_zero(decomposition: Optional[SeparableDecomposition], dim: int) -> np.ndarray:
    return np.zeros((dim, dim), dtype=complex) if decomposition is None else decomposition_matrix(decomposition)


def _mixing_certificate(rho: MultiState, mixer: Optional[SeparableDecomposition],
                        mixture: Optional[SeparableDecomposition], state: Optional[np.ndarray]) -> MixingCertificate:
    target = rho.matrix if state is None else state
    residual = _cone_or_zero(mixture, rho.dim) - _cone_or_zero(mixer, rho.dim) - target
    return MixingCertificate(mixer, mixture, identity_shift(residual, rho.profile), state)


def mixing_certificate_value(rho: MultiState, certificate: MixingCertificate) -> float:
    """
    Re-evaluates an R upper certificate: tr(S0) + μ·d, or +inf when ρ + S0 − S1
    leaves the ball that makes μI + ρ + S0 − S1 separable.
    """
    target = rho.matrix if certificate.state is None else certificate.state
    mixer = _cone_or_zero(certificate.mixer, rho.dim)
    remainder = target + mixer - _cone_or_zero(certificate.mixture, rho.dim)
    radius = certificate.identity_weight * separable_ball_radius(rho.profile)
    if float(np.linalg.norm(remainder)) > radius * (1.0 + 1e-12) + 1e-15:
        return float('inf')
    return float(np.real(np.trace(mixer))) + certificate.identity_weight * rho.dim


def _mixing_search(rho: MultiState, eps: float, tol: float, settings: SolverSettings, seed, name: str):
    smoothing = eps > 0.0
    program = ConeProgram(f'{name}:outer')
    target = _ball_constraints(program, rho, eps) if smoothing else rho.matrix
    mixer = program.hermitian('Y', rho.dim)
    add_separable_outer(program, mixer, rho.profile, name='Y')
    add_separable_outer(program, target + mixer, rho.profile, name='mixture')
    program.minimize(cp.real(cp.trace(mixer)))
    outer = solve(program, tol, settings)
    lower = max(0.0, _finite_or(outer.dual_objective, 0.0))

    def build(inner: ConeProgram, elements):
        candidate = _ball_constraints(inner, rho, eps) if smoothing else rho.matrix
        inner.add_equality(elements[1] - elements[0], candidate, name='mixture')
        inner.minimize(cp.real(cp.trace(elements[0])))

    def evaluate(weights, vectors, primal):
        candidate = _repair_state(primal['rho_tilde'], rho.matrix, eps) if smoothing else rho.matrix
        mixer_value = cone_matrix(weights[0], vectors)
        residual = cone_matrix(weights[1], vectors) - mixer_value - candidate
        return float(np.real(np.trace(mixer_value))) + identity_shift(residual, rho.profile) * rho.dim

    seeds = []
    if outer.primal:
        mixture = outer.primal['Y'] + (outer.primal['rho_tilde'] if smoothing else rho.matrix)
        seeds = seed_atoms(outer.primal['Y'], rho.profile, settings, seed) + \
            seed_atoms(mixture, rho.profile, settings, seed)
    inner = inner_cone_search(rho.profile, build, evaluate, cones=2, seeds=seeds, tol=tol, settings=settings,
                              seed=seed, spanning=True, name=f'{name}:inner')
    certificate = _mixing_certificate(rho, None, None, None)
    upper = mixing_certificate_value(rho, certificate)
    if inner.found:
        state = _repair_state(inner.extra['rho_tilde'], rho.matrix, eps) if smoothing else None
        candidate = _mixing_certificate(rho, inner.decomposition(0), inner.decomposition(1), state)
        value = mixing_certificate_value(rho, candidate)
        if value <= upper:
            upper, certificate = value, candidate
    return lower, upper, outer, inner, certificate


def mixing_robustness(rho: MultiState, tol: float = 1e-6, settings: SolverSettings = None, seed=0) -> Bracket:
    """
    R(ρ): the least s such that (ρ + sσ)/(1 + s) is separable for a separable σ.

    The upper certificate is a MixingCertificate whose re-evaluation gives the upper endpoint.
    """
    settings = _settings(settings)
    check_dimension(rho.dim, settings)
    started = time.perf_counter()
    lower, upper, outer, inner, certificate = _mixing_search(rho, 0.0, tol, settings, seed, 'mixing_robustness')
    return make_bracket('mixing_robustness', lower, upper, started, lower_certificate=outer,
                        upper_certificate=certificate, iterations=inner.rounds,
                        status=worst_status(outer.status, inner.status), relaxation=relaxation_of(rho.profile))


def log_mixing_robustness(rho: MultiState, tol: float = 1e-6, settings: SolverSettings = None, seed=0) -> Bracket:
    """
    LR = log2(1 + R).
    """
    return mixing_robustness(rho, tol, settings, seed).mapped(_log1p2)


def smoothed_log_mixing_robustness(rho: MultiState, eps: float, tol: float = 1e-6,
                                   settings: SolverSettings = None, seed=0) -> Bracket:
    """
    LR^ε(ρ) = min over the trace ball of radius ε of LR(ρ̃).
    """
    _check_eps(eps)
    if eps >= 2.0:
        return _trivial_bracket(rho)
    if eps == 0.0:
        return log_mixing_robustness(rho, tol, settings, seed)
    settings = _settings(settings)
    check_dimension(rho.dim, settings)
    started = time.perf_counter()
    lower, upper, outer, inner, certificate = _mixing_search(rho, eps, tol, settings, seed,
                                                             'smoothed_log_mixing_robustness')
    return make_bracket('smoothed_log_mixing_robustness', _log1p2(lower), _log1p2(upper), started,
                        lower_certificate=outer, upper_certificate=certificate, iterations=inner.rounds,
                        status=worst_status(outer.status, inner.status), relaxation=relaxation_of(rho.profile))


# ---------------------------------------------------------------- regularization

MEASURES = ('er', 'lrg', 'lrg_smoothed', 'lr', 'lr_smoothed')


def regularized_estimate(measure: Union[str, Callable[[MultiState], Bracket]], rho: MultiState, n_max: int,
                         eps: float = 0.0, tol: float = 1e-6, settings: SolverSettings = None,
                         seed=0) -> RegularizationTrace:
    """
    Brackets of measure(ρ^⊗n)/n for n = 1..n_max.

    :param measure: One of 'er', 'lrg', 'lrg_smoothed', 'lr', 'lr_smoothed',
    or any callable from a state to a Bracket.
    :param rho: The single-copy state.
    :param n_max: Largest number of copies.
    :param eps: Smoothing radius of the smoothed measures.
    """
    settings = _settings(settings)
    if n_max < 1:
        raise ValueError(f'n_max must be positive, got {n_max}')
    check_dimension(rho.dim ** n_max, settings)

    entries = []
    single_copy: Optional[SeparableDecomposition] = None
    for n in range(1, n_max + 1):
        copies = tensor_power(rho, n)
        if callable(measure):
            bracket = measure(copies)
        elif measure == 'er':
            initial = tensor_power_decomposition(single_copy, n) if single_copy is not None else None
            bracket = rel_ent_entanglement(copies, tol, settings, seed, initial)
            if n == 1:
                single_copy = bracket.upper_certificate
        elif measure == 'lrg':
            bracket = log_robustness(copies, tol, settings, seed)
        elif measure == 'lrg_smoothed':
            bracket = smoothed_log_robustness(copies, eps, tol, settings, seed)
        elif measure == 'lr':
            bracket = log_mixing_robustness(copies, tol, settings, seed)
        elif measure == 'lr_smoothed':
            bracket = smoothed_log_mixing_robustness(copies, eps, tol, settings, seed)
        else:
            raise ValueError(f'Unknown measure {measure}, expected one of {MEASURES}')
        entries.append(bracket.scaled(1.0 / n))
        logger.debug(f'regularized_estimate: n={n} [{entries[-1].lower:.8g}, {entries[-1].upper:.8g}]')
    name = measure if isinstance(measure, str) else getattr(measure, '__name__', 'custom')
    return RegularizationTrace(name, tuple(entries))
