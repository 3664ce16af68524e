"""
Measure-and-prepare maps for distillation and formation, their CPTP and
ε-non-entangling certification, monotonicity checks and the finite-n
reversibility demonstration.
"""

import logging
import time
from typing import Callable, Optional, Tuple, Union

import cvxpy as cp
import numpy as np

from cone_solver import ConeProgram, solve
from data.result_data_storage import Bracket, ConeStatus, CptpReport, MeasurePrepareMap, MonotonicityReport, \
    ReversibilityReport, ReversibilityRow, SeppCertificate, SeppMethod, Verdict
from data.settings_data_storage import SolverSettings, default_settings
from data.state_data_storage import DimProfile, HermitianOp, IsotropicParams, MultiState, \
    SeparableDecomposition, bipartite
from hypotest import fsep
from measures import check_dimension, global_robustness, isotropic_global_robustness, log_robustness, \
    make_bracket, rel_ent_entanglement
from sep_geometry import add_separable_dual, add_separable_outer, computational_atoms, \
    decomposition_from_weights, is_ppt, is_ppt_exact, max_product_overlap, nearest_sep_distance, relaxation_of, \
    tensor_power_decomposition, worst_status
from states import computational_product, isotropic, isotropic_fidelity, max_entangled, pure_state
from tensor_core import decomposition_matrix, expectation, matrix_of, partial_trace_matrix, tensor_power, trace_norm

logger = logging.getLogger(__name__)

POVM_TOLERANCE: float = 1e-10
CHOI_TOLERANCE: float = 1e-10
CERTIFICATE_TOLERANCE: float = 1e-6
K_SNAP: float = 1e-6

Channel = Union[MeasurePrepareMap, Callable[[MultiState], MultiState]]


class MapConstructionError(ValueError):
    """
    Exception raised when a map cannot be built: POVM element outside [0, I],
    missing or failing separability certificate, K too small or mismatched profiles.
    """

    def __init__(self, message: str = 'The map cannot be constructed'):
        super().__init__(message)


def _settings(settings: Optional[SolverSettings]) -> SolverSettings:
    return settings or default_settings()


def _state(matrix: np.ndarray, profile: DimProfile) -> MultiState:
    matrix = (matrix + matrix.conj().T) / 2
    return MultiState.from_matrix(matrix / np.trace(matrix).real, profile)


def _check_povm(povm: np.ndarray):
    values = np.linalg.eigvalsh(povm)
    if values[0] < -POVM_TOLERANCE or values[-1] > 1 + POVM_TOLERANCE:
        raise MapConstructionError(f'The POVM element has eigenvalues in [{values[0]:.3g}, {values[-1]:.3g}], '
                                   f'outside [0, 1]')


def _same_space(first: DimProfile, second: DimProfile, what: str):
    if first.dims != second.dims:
        raise MapConstructionError(f'{what}: dims {first.dims} and {second.dims} do not match')


def build_distill_map(povm, K: int, in_profile: DimProfile = None) -> MeasurePrepareMap:
    """
    ρ ↦ tr(Aρ)·Φ(K) + tr((I−A)ρ)·(I−Φ(K))/(K²−1).

    :param povm: The POVM element A, 0 ⪯ A ⪯ I.
    :param K: Output local dimension.
    :param in_profile: Input profile; K⊗K when omitted and A fits.
    :return: The distillation map, whose outputs are always isotropic.
    """
    if K < 2:
        raise MapConstructionError(f'K must be at least 2, got {K}')
    povm = HermitianOp(matrix_of(povm))
    if in_profile is None:
        if povm.dim != K * K:
            raise MapConstructionError(f'An input profile is needed for a POVM of dimension {povm.dim}')
        in_profile = bipartite(K, K)
    if povm.dim != in_profile.total:
        raise MapConstructionError(f'POVM dimension {povm.dim} does not match the input total {in_profile.total}')
    _check_povm(povm.matrix)
    return MeasurePrepareMap(povm, max_entangled(K), isotropic(IsotropicParams(K, 0.0)), in_profile,
                             bipartite(K, K), family='distill', K=K)


def _certify_mixture(mixture: np.ndarray, profile: DimProfile, certificate: Optional[SeparableDecomposition]):
    if certificate is not None:
        if certificate.profile.dims != profile.dims:
            raise MapConstructionError('The certificate lives on a different space')
        deviation = float(np.max(np.abs(decomposition_matrix(certificate) - mixture)))
        if deviation > CERTIFICATE_TOLERANCE:
            raise MapConstructionError(f'The certificate misses the mixture by {deviation:.3g}')
        return
    if is_ppt_exact(profile) and is_ppt(_state(mixture, profile))[0]:
        return
    raise MapConstructionError('The mixture (ρ + (K−1)π)/K needs a separability certificate')


def build_formation_map(rho_target: MultiState, K: int, pi: MultiState,
                        certificate: SeparableDecomposition = None) -> MeasurePrepareMap:
    """
    A ↦ tr(AΦ(K))·ρ_target + tr(A(I−Φ(K)))·π on K⊗K inputs.

    The mixture (ρ_target + (K−1)π)/K must be separable: either `certificate`
    reconstructs it, or the space is one where PPT decides separability.
    """
    if K < 2:
        raise MapConstructionError(f'K must be at least 2, got {K}')
    _same_space(rho_target.profile, pi.profile, 'build_formation_map')
    mixture = (rho_target.matrix + (K - 1) * pi.matrix) / K
    _certify_mixture(mixture, rho_target.profile, certificate)
    return MeasurePrepareMap(HermitianOp(max_entangled(K).matrix), rho_target, pi, bipartite(K, K),
                             rho_target.profile, family='form', K=K)


def find_mixing_state(rho_target: MultiState, K: int, tol: float = 1e-6, settings: SolverSettings = None,
                      seed=0) -> Tuple[MultiState, SeparableDecomposition]:
    """
    A state π with (ρ_target + (K−1)π)/K separable, read off the R_G certificate X ⪰ ρ_target.

    With t = tr X ≤ K the mixture is σ = (X + (K−t)·I/d)/K and π = (Kσ − ρ_target)/(K−1).

    :return: π and a SeparableDecomposition of the mixture.
    """
    if K < 2:
        raise MapConstructionError(f'K must be at least 2, got {K}')
    robustness = global_robustness(rho_target, tol, settings, seed)
    if K < 1 + robustness.lower - tol:
        raise MapConstructionError(f'K = {K} is below 1 + R_G = {1 + robustness.lower:.8g}')
    certificate = robustness.upper_certificate
    if certificate is None:
        raise MapConstructionError('No robustness certificate was found')
    profile, dim = rho_target.profile, rho_target.dim
    trace = certificate.scale
    if trace <= K:
        filler = computational_atoms(profile)
        weights = np.concatenate([certificate.weights * trace, np.full(len(filler), (K - trace) / dim)]) / K
        mixture = decomposition_from_weights(weights, list(certificate.factors) + filler, profile)
    else:
        # only reached when 1 + R_G rounds to K within tolerance
        mixture = decomposition_from_weights(certificate.weights, certificate.factors, profile)
    sigma = decomposition_matrix(mixture)
    remainder = (K * sigma - rho_target.matrix) / (K - 1)
    values, vectors = np.linalg.eigh((remainder + remainder.conj().T) / 2)
    if values[0] < -CERTIFICATE_TOLERANCE:
        raise MapConstructionError(f'R_G certificate too loose for K = {K} (trace {trace:.8g})')
    pi = _state((vectors * np.clip(values, 0.0, None)) @ vectors.conj().T, profile)
    _certify_mixture((rho_target.matrix + (K - 1) * pi.matrix) / K, profile, mixture)
    logger.info(f'find_mixing_state: K = {K}, certificate trace {trace:.8g}')
    return pi, mixture


def twirl(rho: MultiState, K: int) -> MultiState:
    """
    Average over U⊗U* conjugations: the isotropic state with the same Φ(K) fidelity.
    """
    if rho.profile.dims != (K, K):
        raise MapConstructionError(f'twirl needs a {K}⊗{K} state, got dims {rho.profile.dims}')
    fidelity = float(np.clip(isotropic_fidelity(rho, K), 0.0, 1.0))
    return isotropic(IsotropicParams(K, fidelity))


def acceptance(channel: MeasurePrepareMap, rho: MultiState) -> float:
    return float(np.clip(expectation(channel.povm_A, rho), 0.0, 1.0))


def _mix(channel: MeasurePrepareMap, probability: float) -> MultiState:
    return _state(probability * channel.out_hit.matrix + (1 - probability) * channel.out_miss.matrix,
                  channel.out_profile)


def apply_map(channel: Channel, rho: MultiState) -> MultiState:
    if not isinstance(channel, MeasurePrepareMap):
        return channel(rho)
    _same_space(channel.in_profile, rho.profile, 'apply_map')
    return _mix(channel, acceptance(channel, rho))


def choi_matrix(channel: Union[MeasurePrepareMap, Callable[[np.ndarray], np.ndarray]],
                in_dim: int = None) -> HermitianOp:
    """
    J = Σ_ij |i⟩⟨j| ⊗ Λ(|i⟩⟨j|), input factor first. The identity map gives d·Φ(d).

    :param channel: A MeasurePrepareMap, or a linear function on matrices together with `in_dim`.
    """
    if isinstance(channel, MeasurePrepareMap):
        povm = channel.povm_A.matrix
        return HermitianOp(np.kron(povm.T, channel.out_hit.matrix)
                           + np.kron((np.eye(povm.shape[0]) - povm).T, channel.out_miss.matrix))
    if in_dim is None:
        raise ValueError('in_dim is needed for a map given as a function')
    blocks = []
    for i in range(in_dim):
        row = []
        for j in range(in_dim):
            unit = np.zeros((in_dim, in_dim), dtype=complex)
            unit[i, j] = 1.0
            row.append(np.asarray(channel(unit), dtype=complex))
        blocks.append(row)
    return HermitianOp(np.block(blocks))


def verify_cptp(channel, in_dim: int = None) -> CptpReport:
    """
    Choi positivity within 1e-10 and tr_out J = I.
    """
    choi = choi_matrix(channel, in_dim).matrix
    in_dim = channel.povm_A.dim if isinstance(channel, MeasurePrepareMap) else in_dim
    out_dim = choi.shape[0] // in_dim
    smallest = float(np.linalg.eigvalsh(choi)[0])
    reduced = partial_trace_matrix(choi, [in_dim, out_dim], [0])
    residual = float(np.max(np.abs(reduced - np.eye(in_dim))))
    return CptpReport(smallest >= -CHOI_TOLERANCE, residual <= CHOI_TOLERANCE, smallest, residual)


def _acceptance_bound(channel: MeasurePrepareMap, sense: str, tol: float, settings: SolverSettings) -> float:
    """
    Certified bound on max (or min) tr(Aσ) over separable states σ via PPT states.
    """
    program = ConeProgram(f'acceptance:{sense}')
    state = program.hermitian('sigma', channel.in_profile.total)
    add_separable_outer(program, state, channel.in_profile, name='sigma')
    program.add_equality(cp.real(cp.trace(state)), 1.0, name='trace')
    value = cp.real(cp.trace(channel.povm_A.matrix @ state))
    if sense == 'max':
        program.maximize(value)
    else:
        program.minimize(value)
    solution = solve(program, tol, settings)
    if not np.isfinite(solution.dual_objective):
        return 1.0 if sense == 'max' else 0.0
    return float(np.clip(solution.dual_objective, 0.0, 1.0))


def _threshold_certified(channel: MeasurePrepareMap, tol: float, settings: SolverSettings) -> bool:
    """
    Feasibility of I/K − A = P + Σ_c Q_c^{T_c}, which proves tr(Aσ) ≤ 1/K on every separable σ.
    """
    program = ConeProgram('threshold')
    dim = channel.in_profile.total
    add_separable_dual(program, cp.Constant(np.eye(dim) / channel.K - channel.povm_A.matrix), channel.in_profile,
                       prefix='threshold')
    program.minimize(cp.Constant(0.0))
    solution = solve(program, tol, settings)
    return solution.status is ConeStatus.OPTIMAL


def _extreme_inputs(channel: MeasurePrepareMap, settings: SolverSettings, seed):
    """
    Product inputs with the largest and smallest acceptance found by the product search.
    """
    profile = channel.in_profile
    povm = channel.povm_A.matrix
    _, high = max_product_overlap(povm, profile, seed=(seed, 1), settings=settings)
    _, low = max_product_overlap(-povm, profile, seed=(seed, 2), settings=settings)
    return pure_state(high, profile), pure_state(low, profile)


def verify_sepp(channel: MeasurePrepareMap, tol: float = 1e-6, settings: SolverSettings = None,
                seed=0) -> SeppCertificate:
    """
    Certified ε with R_G(Λ(σ)) ≤ ε for every separable σ.

    Formation maps: the output on separable inputs mixes the separable
    (ρ + (K−1)π)/K with π, so ε = min(R_G(π), 1/(K−1)). Distillation maps:
    outputs are isotropic, ε = max(0, K·max tr(Aσ) − 1), exactly 0 when the
    threshold I/K − A lies in the dual PPT cone. Other maps: R_G is convex and
    the output is affine in tr(Aσ), so ε is bounded by R_G at the two extreme
    acceptance probabilities.
    """
    if not isinstance(channel, MeasurePrepareMap):
        raise MapConstructionError('Only measure-and-prepare maps can be certified')
    settings = _settings(settings)

    if channel.family == 'form':
        K = channel.K
        witness = computational_product([0, 1], channel.in_profile)
        bracket = global_robustness(channel.out_miss, tol, settings, seed)
        epsilon = min(bracket.upper, 1.0 / (K - 1))
        return SeppCertificate(epsilon, witness, SeppMethod.CLOSED_FORM_ISOTROPIC,
                               min(bracket.lower, epsilon), bracket)

    high, low = _extreme_inputs(channel, settings, seed)
    if channel.family == 'distill':
        K = channel.K
        sampled = isotropic_global_robustness(K, acceptance(channel, high))
        upper = max(0.0, K * _acceptance_bound(channel, 'max', tol, settings) - 1.0)
        if upper <= tol and _threshold_certified(channel, tol, settings):
            return SeppCertificate(0.0, high, SeppMethod.CLOSED_FORM_ISOTROPIC, 0.0, Bracket(0.0, 0.0))
        return SeppCertificate(max(upper, sampled), high, SeppMethod.CLOSED_FORM_ISOTROPIC, sampled,
                               Bracket(sampled, max(upper, sampled)))

    p_high = _acceptance_bound(channel, 'max', tol, settings)
    p_low = _acceptance_bound(channel, 'min', tol, settings)
    upper = max(global_robustness(_mix(channel, p), tol, settings, seed).upper for p in (p_low, p_high))
    samples = [(global_robustness(apply_map(channel, state), tol, settings, seed), state) for state in (high, low)]
    witness_bracket, witness = max(samples, key=lambda item: item[0].lower)
    lower = min(witness_bracket.lower, upper)
    return SeppCertificate(upper, witness, SeppMethod.SAMPLED, lower, witness_bracket)


def compose(first: MeasurePrepareMap, second: MeasurePrepareMap) -> MeasurePrepareMap:
    """
    second ∘ first, again a measure-and-prepare map with the POVM of `first`.
    """
    _same_space(first.out_profile, second.in_profile, 'compose')
    return MeasurePrepareMap(first.povm_A, apply_map(second, first.out_hit), apply_map(second, first.out_miss),
                             first.in_profile, second.out_profile, family='composed', K=second.K)


def sepp_composition_bound(epsilon_first: float, epsilon_second: float) -> float:
    """
    ε + δ + εδ for a SEPP(ε) map composed with a SEPP(δ) map.
    """
    if epsilon_first < 0 or epsilon_second < 0:
        raise ValueError('SEPP parameters must be non-negative')
    return epsilon_first + epsilon_second + epsilon_first * epsilon_second


def trace_norm_sepp_radius(channel: MeasurePrepareMap, tol: float = 1e-6, settings: SolverSettings = None,
                           seed=0) -> Bracket:
    """
    max over separable σ of the trace distance from Λ(σ) to the separable set.

    The distance is convex and the output affine in tr(Aσ), so the upper
    endpoint is taken at the PPT extremes of the acceptance; the lower endpoint
    comes from product inputs that realize acceptance values.
    """
    settings = _settings(settings)
    started = time.perf_counter()
    extremes = (_acceptance_bound(channel, 'min', tol, settings), _acceptance_bound(channel, 'max', tol, settings))
    uppers = [nearest_sep_distance(_mix(channel, p), tol, settings, seed) for p in extremes]
    lowers = [nearest_sep_distance(apply_map(channel, state), tol, settings, seed)
              for state in _extreme_inputs(channel, settings, seed)]
    lower = max(bracket.lower for bracket in lowers)
    upper = max(bracket.upper for bracket in uppers)
    return make_bracket('trace_norm_sepp_radius', lower, upper, started,
                        status=worst_status(*(bracket.status for bracket in uppers + lowers)),
                        relaxation=relaxation_of(channel.out_profile))


def _epsilon_of(channel: Channel, epsilon: Optional[float], certificate: Optional[SeppCertificate], tol: float,
                settings: SolverSettings, seed) -> float:
    if epsilon is not None:
        return epsilon
    if certificate is not None:
        return certificate.epsilon
    if not isinstance(channel, MeasurePrepareMap):
        raise ValueError('epsilon is needed for a map given as a function')
    return verify_sepp(channel, tol, settings, seed).epsilon


def _monotonicity(name: str, measure, channel: Channel, rho: MultiState, epsilon: Optional[float],
                  certificate: Optional[SeppCertificate], tol: float, settings: SolverSettings,
                  seed) -> MonotonicityReport:
    settings = _settings(settings)
    epsilon = _epsilon_of(channel, epsilon, certificate, tol, settings, seed)
    allowance = float(np.log2(1.0 + epsilon))
    left = measure(apply_map(channel, rho), tol, settings, seed)
    right = measure(rho, tol, settings, seed)
    margin = allowance + right.lower - left.upper
    if margin >= -2 * tol:
        verdict = Verdict.HOLDS
    elif left.lower > allowance + right.upper + 2 * tol:
        verdict = Verdict.VIOLATED
    else:
        verdict = Verdict.INCONCLUSIVE
    if verdict is not Verdict.HOLDS:
        logger.warning(f'{name}: {verdict.value} with margin {margin:.3e}')
    return MonotonicityReport(name, verdict, epsilon, left, right, margin)


def check_lr_monotonicity(channel: Channel, rho: MultiState, epsilon: float = None,
                          certificate: SeppCertificate = None, tol: float = 1e-6, settings: SolverSettings = None,
                          seed=0) -> MonotonicityReport:
    """
    LR_G(Λ(ρ)) ≤ log2(1+ε) + LR_G(ρ) at bracket resolution.

    :param channel: A MeasurePrepareMap or a function from states to states.
    :param epsilon: SEPP parameter of the map; taken from `certificate` or
    from verify_sepp when omitted.
    """
    return _monotonicity('lr_monotonicity', log_robustness, channel, rho, epsilon, certificate, tol, settings,
                         seed)


def check_er_monotonicity(channel: Channel, rho: MultiState, epsilon: float = None,
                          certificate: SeppCertificate = None, tol: float = 1e-6, settings: SolverSettings = None,
                          seed=0) -> MonotonicityReport:
    """
    E_R(Λ(ρ)) ≤ log2(1+ε) + E_R(ρ) at bracket resolution.
    """
    return _monotonicity('er_monotonicity', rel_ent_entanglement, channel, rho, epsilon, certificate, tol,
                         settings, seed)


def formation_dimension(robustness_upper: float) -> int:
    """
    K_n = 2^⌈log2(1 + R_G)⌉, exact powers of two keeping the smaller K.
    """
    return int(2 ** int(np.ceil(np.log2(1.0 + max(robustness_upper, 0.0)) - K_SNAP)))


def _distill_table(copies: MultiState, n: int, single_copy: MultiState, tol: float, settings: SolverSettings,
                   seed):
    top = float(np.log2(min(single_copy.profile.party_dims())))
    grid = np.linspace(0.0, top, settings.protocols.y_grid_points)
    exponents = sorted({int(np.floor(n * y + 1e-9)) for y in grid} - {0})
    return tuple((2 ** k, fsep(copies, 2 ** k, tol, settings, seed)) for k in exponents)


def _distill_rate(table, n: int, threshold: float) -> Tuple[Bracket, float]:
    certified = [(int(np.log2(K)), bracket) for K, bracket in table if bracket.lower >= threshold]
    possible = [int(np.log2(K)) for K, bracket in table if bracket.upper >= threshold]
    lower = max((k for k, _ in certified), default=0) / n
    upper = max(possible, default=0) / n
    error = 0.0
    if certified:
        error = 1.0 - max(certified, key=lambda item: item[0])[1].lower
    return Bracket(lower, upper), error


def reversibility_demo(rho: MultiState, n_max: int, tol: float = 1e-6, settings: SolverSettings = None,
                       seed=0) -> ReversibilityReport:
    """
    Finite-n distillation and formation rates of ρ^⊗n next to the E_R rate.

    Distillation: fsep(ρ^⊗n, 2^k) over the y-grid, the rate being the largest
    k/n with fidelity at least the configured threshold. Formation: the map
    built from find_mixing_state at K_n, with rate log2(K_n)/n and the SEPP
    parameter from verify_sepp.
    """
    settings = _settings(settings)
    if n_max < 1:
        raise ValueError(f'n_max must be positive, got {n_max}')
    if rho.profile.num_parties != 2:
        raise ValueError('reversibility_demo needs a bipartite state')
    check_dimension(rho.dim ** n_max, settings)
    threshold = settings.protocols.fidelity_threshold

    rows = []
    single_copy = None
    for n in range(1, n_max + 1):
        copies = tensor_power(rho, n)
        robustness = global_robustness(copies, tol, settings, seed)
        K = formation_dimension(robustness.upper)
        form_lower = float(np.log2(1.0 + robustness.lower)) / n
        if K == 1:
            form_rate, form_epsilon, form_error = Bracket(0.0, 0.0), 0.0, 0.0
        else:
            pi, certificate = find_mixing_state(copies, K, tol, settings, seed)
            channel = build_formation_map(copies, K, pi, certificate)
            form_epsilon = verify_sepp(channel, tol, settings, seed).epsilon
            form_error = trace_norm(apply_map(channel, max_entangled(K)).matrix - copies.matrix)
            form_rate = Bracket(min(form_lower, np.log2(K) / n), np.log2(K) / n)

        table = _distill_table(copies, n, rho, tol, settings, seed)
        distill_rate, distill_error = _distill_rate(table, n, threshold)

        initial = tensor_power_decomposition(single_copy, n) if single_copy is not None else None
        er = rel_ent_entanglement(copies, tol, settings, seed, initial)
        if n == 1:
            single_copy = er.upper_certificate
        rows.append(ReversibilityRow(n, distill_rate, form_rate, er.scaled(1.0 / n), K, form_epsilon, table,
                                     distill_error, form_error))
        logger.info(f'reversibility_demo: n={n} distill {distill_rate.lower:.4g}..{distill_rate.upper:.4g} '
                    f'form {form_rate.upper:.4g} E_R/n {rows[-1].er_rate.lower:.4g}..{rows[-1].er_rate.upper:.4g}')
    return ReversibilityReport(tuple(rows))
