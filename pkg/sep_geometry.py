"""
Inner and outer handles on the separable set and its cone.

The outer handle is the PPT relaxation: a cone program constraint that keeps a
matrix and its partial transposes positive semidefinite. The inner handle is a
pool of product vectors whose nonnegative combinations are separable by
construction; pools grow by column generation, pricing new product vectors
with the alternating product search on the dual matrices of the linking
constraints.
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import cvxpy as cp
import numpy as np

from cone_solver import ConeProgram, dual_matrix, solve
from data.result_data_storage import Bracket, ConeStatus, Relaxation
from data.settings_data_storage import SolverSettings, default_settings
from data.state_data_storage import DimProfile, MultiState, SeparableDecomposition, PSD_TOLERANCE
from tensor_core import Operator, group_by_party, matrix_of, partial_transpose_matrix, product_vector, \
    top_eigenvector, trace_norm

logger = logging.getLogger(__name__)

Factors = Tuple[np.ndarray, ...]

DUPLICATE_OVERLAP: float = 1 - 1e-9
CONSISTENCY_TOLERANCE: float = 1e-6
SPANNING_POOL_LIMIT: int = 1024


def ppt_cuts(profile: DimProfile) -> List[Tuple[int, ...]]:
    """
    Every bipartition of the parties, written as the subsystems on the side
    that does not contain the first party.
    """
    labels = profile.party_labels
    cuts = []
    for size in range(1, len(labels)):
        for group in itertools.combinations(labels[1:], size):
            cuts.append(tuple(sorted(i for label in group for i in profile.party_subsystems(label))))
    return cuts


def is_ppt_exact(profile: DimProfile) -> bool:
    """
    True when PPT and separable coincide: two parties with a joint dimension of at most 6.
    """
    return profile.num_parties == 2 and int(np.prod(profile.party_dims())) <= 6


def relaxation_of(profile: DimProfile) -> Relaxation:
    return Relaxation.PPT_EXACT if is_ppt_exact(profile) else Relaxation.BRACKET


def is_ppt(rho: MultiState, cut: Sequence[int] = None) -> Tuple[bool, float]:
    """
    Positive-partial-transpose test.

    :param rho: The state to test.
    :param cut: Subsystems to transpose; every party bipartition when omitted.
    :return: Whether the state passes, and the smallest partial-transpose eigenvalue.
    """
    cuts = [tuple(cut)] if cut is not None else ppt_cuts(rho.profile)
    smallest = float('inf')
    for current in cuts:
        transposed = partial_transpose_matrix(rho.matrix, rho.profile.dims, current)
        smallest = min(smallest, float(np.linalg.eigvalsh((transposed + transposed.conj().T) / 2)[0]))
    return smallest >= -PSD_TOLERANCE, smallest


def add_separable_outer(program: ConeProgram, expression, profile: DimProfile, name: str = None):
    """
    Constrains a matrix expression to the PPT cone of the profile.
    """
    program.add_ppt(expression, profile.dims, ppt_cuts(profile), name=name)


def add_separable_dual(program: ConeProgram, expression, profile: DimProfile, prefix: str = 'dual'):
    """
    Constrains a matrix expression to the dual of the PPT cone, P + Σ_c Q_c^{T_c}.
    """
    dim = profile.total
    positive = program.hermitian(f'{prefix}:P', dim)
    program.add_psd(positive, name=f'{prefix}:P')
    total = positive
    for index, cut in enumerate(ppt_cuts(profile)):
        transposed = program.hermitian(f'{prefix}:Q{index}', dim)
        program.add_psd(transposed, name=f'{prefix}:Q{index}')
        for axis in cut:
            transposed = cp.partial_transpose(transposed, list(profile.dims), int(axis))
        total = total + transposed
    program.add_equality(expression, total, name=f'{prefix}:decomposition')


def _seed_words(seed) -> List[int]:
    if isinstance(seed, (tuple, list)):
        return [word for item in seed for word in _seed_words(item)]
    return [int(seed)]


def _generator(seed, *extra) -> np.random.Generator:
    return np.random.default_rng(_seed_words(seed) + [int(word) for word in extra])


def _einsum_letters(k: int) -> Tuple[str, str]:
    letters = 'abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ'
    return letters[:k], letters[k:2 * k]


def _local_operator(tensor: np.ndarray, factors: List[np.ndarray], party: int) -> np.ndarray:
    k = len(factors)
    kets, bras = _einsum_letters(k)
    subscripts, operands = [kets + bras], [tensor]
    for i in range(k):
        if i != party:
            subscripts += [kets[i], bras[i]]
            operands += [factors[i].conj(), factors[i]]
    return np.einsum(','.join(subscripts) + '->' + kets[party] + bras[party], *operands, optimize=True)


def _overlap(tensor: np.ndarray, factors: List[np.ndarray]) -> float:
    kets, bras = _einsum_letters(len(factors))
    subscripts, operands = [kets + bras], [tensor]
    for i, factor in enumerate(factors):
        subscripts += [kets[i], bras[i]]
        operands += [factor.conj(), factor]
    return float(np.real(np.einsum(','.join(subscripts) + '->', *operands, optimize=True)))


def _marginal_start(grouped: np.ndarray, party_dims: Tuple[int, ...]) -> List[np.ndarray]:
    _, top = top_eigenvector(grouped)
    amplitudes = top.reshape(party_dims)
    factors = []
    for party, dim in enumerate(party_dims):
        block = np.moveaxis(amplitudes, party, 0).reshape(dim, -1)
        factors.append(top_eigenvector(block @ block.conj().T)[1])
    return factors


def _alternate(tensor: np.ndarray, factors: List[np.ndarray], tolerance: float, max_sweeps: int) \
        -> Tuple[float, List[np.ndarray]]:
    value = _overlap(tensor, factors)
    for _ in range(max_sweeps):
        for party in range(len(factors)):
            factors[party] = top_eigenvector(_local_operator(tensor, factors, party))[1]
        updated = _overlap(tensor, factors)
        improvement, value = updated - value, updated
        if improvement <= tolerance:
            break
    return value, factors


def product_search(h: Operator, profile: DimProfile, restarts: int = None, seed=0,
                   settings: SolverSettings = None) -> Tuple[float, Factors]:
    """
    Alternating maximization of ⟨v|h|v⟩ over product vectors v.

    Restart 0 starts from the local marginals of the top eigenvector, the
    others from seeded Gaussian vectors. The best restart wins, ties going to
    the earlier one.

    :return: The value and the local vectors (one per party, label order).
    """
    parameters = (settings or default_settings()).product_search
    restarts = restarts or parameters.restarts
    matrix = matrix_of(h)
    grouped, party_dims = group_by_party((matrix + matrix.conj().T) / 2, profile)
    tensor = grouped.reshape(party_dims * 2)
    best_value, best_factors = -float('inf'), None
    for restart in range(restarts):
        if restart == 0:
            factors = _marginal_start(grouped, party_dims)
        else:
            factors = list(random_factors(party_dims, _generator(seed, restart)))
        value, factors = _alternate(tensor, factors, parameters.sweep_tolerance, parameters.max_sweeps)
        if value > best_value:
            best_value, best_factors = value, tuple(factors)
    return best_value, best_factors


def max_product_overlap(h: Operator, profile: DimProfile, restarts: int = None, seed=0,
                        settings: SolverSettings = None) -> Tuple[float, np.ndarray]:
    """
    Certified lower bound on max over product unit vectors v of ⟨v|h|v⟩.

    :return: The value and the product vector attaining it, in the profile's ordering.
    """
    value, factors = product_search(h, profile, restarts, seed, settings)
    return value, product_vector(factors, profile)


def random_factors(party_dims: Sequence[int], rng: np.random.Generator) -> Factors:
    factors = []
    for dim in party_dims:
        vector = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
        factors.append(vector / np.linalg.norm(vector))
    return tuple(factors)


def computational_atoms(profile: DimProfile) -> List[Factors]:
    eye = [np.eye(dim, dtype=complex) for dim in profile.party_dims()]
    return [tuple(eye[p][i] for p, i in enumerate(index))
            for index in itertools.product(*(range(dim) for dim in profile.party_dims()))]


def _local_frame(dim: int) -> List[np.ndarray]:
    eye = np.eye(dim, dtype=complex)
    frame = [eye[i] for i in range(dim)]
    for i, j in itertools.combinations(range(dim), 2):
        for phase in (1, -1, 1j, -1j):
            frame.append((eye[i] + phase * eye[j]) / np.sqrt(2))
    return frame


def spanning_atoms(profile: DimProfile) -> List[Factors]:
    """
    Products of local frames that span every Hermitian operator of the
    profile; the local frames are unitary 2-designs for qubits.
    """
    frames = [_local_frame(dim) for dim in profile.party_dims()]
    return [tuple(choice) for choice in itertools.product(*frames)]


def separable_ball_radius(profile: DimProfile) -> float:
    """
    Radius r such that I + Δ is separable whenever ‖Δ‖₂ ≤ r.
    """
    return 1.0 if profile.num_parties <= 2 else 2.0 ** (-profile.num_parties / 2 - 1)


def identity_shift(residual: np.ndarray, profile: DimProfile) -> float:
    """
    Smallest μ for which μI − residual is certified separable by the ball around the identity.
    """
    return float(np.linalg.norm(residual)) / separable_ball_radius(profile)


def cone_matrix(weights: np.ndarray, vectors: np.ndarray) -> np.ndarray:
    """
    Σ_j w_j |v_j⟩⟨v_j| for product vectors stored as rows.
    """
    return (vectors.T * weights) @ vectors.conj()


def cone_scale(cone: np.ndarray, target: np.ndarray, tolerance: float = 1e-10) -> float:
    """
    Smallest t with t·cone ⪰ target for a PSD target; +inf when the target
    leaves the support of the cone.
    """
    values, vectors = np.linalg.eigh((cone + cone.conj().T) / 2)
    inside = values > tolerance * max(1.0, values[-1])
    rotated = vectors.conj().T @ target @ vectors
    if np.any(np.abs(np.diag(rotated)[~inside]) > tolerance):
        return float('inf')
    inverse_root = vectors[:, inside] / np.sqrt(values[inside])
    whitened = inverse_root.conj().T @ target @ inverse_root
    return max(0.0, float(np.linalg.eigvalsh((whitened + whitened.conj().T) / 2)[-1]))


class AtomPool:
    """
    An ordered, duplicate-free list of product vectors. Pools only grow, so a
    weight vector of length m always refers to the first m atoms.
    """

    def __init__(self, profile: DimProfile):
        self.profile = profile
        self.factors: List[Factors] = []
        self._vectors: List[np.ndarray] = []

    def __len__(self) -> int:
        return len(self.factors)

    def add(self, factors: Factors) -> bool:
        vector = product_vector(factors, self.profile)
        vector = vector / np.linalg.norm(vector)
        if self._vectors and np.max(np.abs(np.array(self._vectors).conj() @ vector) ** 2) > DUPLICATE_OVERLAP:
            return False
        self.factors.append(tuple(f / np.linalg.norm(f) for f in factors))
        self._vectors.append(vector)
        return True

    def extend(self, atoms: Sequence[Factors]) -> int:
        return sum(self.add(atom) for atom in atoms)

    def vectors(self, count: int = None) -> np.ndarray:
        return np.array(self._vectors[:count])

    def flat(self) -> np.ndarray:
        """
        Row j is the row-major flattening of |v_j⟩⟨v_j|.
        """
        vectors = self.vectors()
        return np.einsum('ja,jb->jab', vectors, vectors.conj()).reshape(len(vectors), -1)


@dataclass(frozen=True, eq=False)
class InnerSolution:
    """
    Best point found by an inner cone search. `weights[c]` are the
    nonnegative weights of cone element c over `factors`.
    """
    value: float
    weights: Tuple[np.ndarray, ...]
    factors: Tuple[Factors, ...]
    vectors: np.ndarray
    profile: DimProfile
    rounds: int
    status: ConeStatus
    extra: Optional[dict] = None

    @property
    def found(self) -> bool:
        return bool(self.weights) and np.isfinite(self.value)

    def cone(self, index: int = 0) -> np.ndarray:
        return cone_matrix(self.weights[index], self.vectors)

    def decomposition(self, index: int = 0) -> Optional[SeparableDecomposition]:
        return decomposition_from_weights(self.weights[index], self.factors, self.profile)


def decomposition_from_weights(weights: np.ndarray, factors: Sequence[Factors], profile: DimProfile,
                               scale: float = 1.0) -> Optional[SeparableDecomposition]:
    """
    Packs cone weights into a SeparableDecomposition whose scale is the cone trace.
    """
    weights = np.clip(np.asarray(weights, dtype=float), 0.0, None)
    keep = weights > 0
    total = float(np.sum(weights))
    if total <= 0:
        return None
    return SeparableDecomposition(weights[keep] / total, tuple(f for f, k in zip(factors, keep) if k),
                                  profile, total * scale)


def seed_atoms(matrix: np.ndarray, profile: DimProfile, settings: SolverSettings = None, seed=0,
               eigenvectors: int = 4) -> List[Factors]:
    """
    Product approximations of a matrix and of its leading eigenvectors.
    """
    settings = settings or default_settings()
    restarts = settings.product_search.pricing_restarts
    matrix = (matrix + matrix.conj().T) / 2
    atoms = [product_search(matrix, profile, restarts, (seed, 0), settings)[1]]
    values, vectors = np.linalg.eigh(matrix)
    for rank in range(1, min(eigenvectors, len(values)) + 1):
        if values[-rank] <= 1e-9 * max(1.0, abs(values[-1])):
            break
        projector = np.outer(vectors[:, -rank], vectors[:, -rank].conj())
        atoms.append(product_search(projector, profile, restarts, (seed, rank), settings)[1])
    return atoms


def inner_cone_search(profile: DimProfile,
                      build: Callable[[ConeProgram, List], None],
                      evaluate: Callable[[Tuple[np.ndarray, ...], np.ndarray, dict], float],
                      cones: int = 1,
                      seeds: Sequence[Factors] = (),
                      tol: float = 1e-6,
                      settings: SolverSettings = None,
                      seed=0,
                      spanning: bool = False,
                      name: str = 'inner') -> InnerSolution:
    """
    Column generation over product atoms.

    Every round solves the program that `build` writes on top of `cones`
    Hermitian variables S_c = Σ_j w_cj |v_j⟩⟨v_j|, re-evaluates the point
    rigorously with `evaluate` (weights, atom vectors, primal values) and prices
    new atoms on ± the dual matrix of each linking constraint. Stops when the
    evaluated value stalls for `patience` rounds, when no new atom is found,
    or after `max_rounds`.
    """
    settings = settings or default_settings()
    parameters = settings.column_generation
    restarts = settings.product_search.pricing_restarts
    dim = profile.total

    pool = AtomPool(profile)
    pool.extend(computational_atoms(profile))
    if spanning and len(pool) < SPANNING_POOL_LIMIT:
        frame_sizes = [d + 2 * d * (d - 1) for d in profile.party_dims()]
        if int(np.prod(frame_sizes)) <= SPANNING_POOL_LIMIT:
            pool.extend(spanning_atoms(profile))
    pool.extend(seeds)

    best = InnerSolution(float('inf'), (), (), np.zeros((0, dim)), profile, 0, ConeStatus.INFEASIBLE)
    stall = 0
    for round_index in range(parameters.max_rounds):
        program = ConeProgram(f'{name}:round{round_index}')
        flat = pool.flat()
        variables = []
        for index in range(cones):
            weights = program.nonnegative(f'w{index}', len(pool))
            element = program.hermitian(f'S{index}', dim)
            program.add_equality(element, cp.reshape(weights @ flat, (dim, dim), order='C'), name=f'link{index}')
            variables.append(element)
        build(program, variables)
        solution = solve(program, tol, settings)

        if solution.status is ConeStatus.INFEASIBLE or not solution.primal:
            rng = _generator(seed, round_index, 1)
            pool.extend([random_factors(profile.party_dims(), rng) for _ in range(2 * restarts)])
            logger.debug(f'{name}: round {round_index} infeasible, pool grown to {len(pool)}')
            continue

        weights = tuple(np.clip(np.real(solution.primal[f'w{index}']), 0.0, None) for index in range(cones))
        vectors = pool.vectors()
        value = evaluate(weights, vectors, solution.primal)
        logger.debug(f'{name}: round {round_index} value {value:.10g} over {len(pool)} atoms')
        if value < best.value - tol:
            best = InnerSolution(value, weights, tuple(pool.factors), vectors, profile,
                                 round_index + 1, solution.status, dict(solution.primal))
            stall = 0
        else:
            stall += 1
            if stall >= parameters.patience:
                break

        added = 0
        for index in range(cones):
            dual = dual_matrix(solution.dual.get(f'link{index}'), (dim, dim))
            if dual is None:
                rng = _generator(seed, round_index, 2, index)
                added += pool.extend([random_factors(profile.party_dims(), rng) for _ in range(restarts)])
                continue
            dual = (dual + dual.conj().T) / 2
            for sign in (1, -1):
                _, factors = product_search(sign * dual, profile, restarts, (seed, round_index, index, sign + 1),
                                            settings)
                added += pool.add(factors)
        if not added:
            break
    return best


def tensor_decompositions(first: SeparableDecomposition, second: SeparableDecomposition) \
        -> SeparableDecomposition:
    """
    The product decomposition of the tensor product of two separable operators.
    """
    profile = first.profile.concat(second.profile)
    first_labels, second_labels = first.profile.party_labels, second.profile.party_labels
    weights, factors = [], []
    for weight_a, factors_a in zip(first.weights, first.factors):
        for weight_b, factors_b in zip(second.weights, second.factors):
            local = []
            for label in profile.party_labels:
                vector = np.ones(1, dtype=complex)
                if label in first_labels:
                    vector = np.kron(vector, factors_a[first_labels.index(label)])
                if label in second_labels:
                    vector = np.kron(vector, factors_b[second_labels.index(label)])
                local.append(vector)
            weights.append(weight_a * weight_b)
            factors.append(tuple(local))
    return SeparableDecomposition(np.array(weights), tuple(factors), profile, first.scale * second.scale)


def tensor_power_decomposition(decomposition: SeparableDecomposition, n: int) -> SeparableDecomposition:
    result = decomposition
    for _ in range(n - 1):
        result = tensor_decompositions(result, decomposition)
    return result


def nearest_sep_distance(rho: MultiState, tol: float = 1e-6, settings: SolverSettings = None, seed=0) -> Bracket:
    """
    Bracket on min over separable π of ‖ρ − π‖₁.

    The lower endpoint minimizes over PPT states, the upper endpoint is the
    exact trace distance to the best pooled separable state.
    """
    settings = settings or default_settings()
    profile, dim = rho.profile, rho.dim

    program = ConeProgram('nearest_sep_distance:outer')
    candidate = program.hermitian('pi', dim)
    positive = program.hermitian('P', dim)
    add_separable_outer(program, candidate, profile, name='pi')
    program.add_equality(cp.real(cp.trace(candidate)), 1.0, name='trace')
    program.add_psd(positive, name='P')
    program.add_psd(positive - rho.matrix + candidate, name='N')
    program.minimize(cp.real(2 * cp.trace(positive)))
    outer = solve(program, tol, settings)
    lower = max(0.0, outer.dual_objective) if np.isfinite(outer.dual_objective) else 0.0

    def build(inner: ConeProgram, elements):
        excess = inner.hermitian('P', dim)
        inner.add_psd(excess, name='P')
        inner.add_psd(excess - rho.matrix + elements[0], name='N')
        inner.add_equality(cp.real(cp.trace(elements[0])), 1.0, name='trace')
        inner.minimize(cp.real(2 * cp.trace(excess)))

    def evaluate(weights, vectors, _):
        cone = cone_matrix(weights[0], vectors)
        trace = float(np.real(np.trace(cone)))
        return trace_norm(rho.matrix - cone / trace) if trace > 0 else float('inf')

    seeds = seed_atoms(outer.primal['pi'], profile, settings, seed) if outer.primal else ()
    inner = inner_cone_search(profile, build, evaluate, seeds=seeds, tol=tol, settings=settings, seed=seed,
                              name='nearest_sep_distance:inner')
    upper = inner.value if inner.found else 2.0
    lower, status = reconcile_endpoints('nearest_sep_distance', lower, upper,
                                        worst_status(outer.status, inner.status))
    return Bracket(lower, upper, outer, inner.decomposition() if inner.found else None,
                   inner.rounds, outer.solve_time, status, relaxation_of(profile))


def worst_status(*statuses: ConeStatus) -> ConeStatus:
    """
    MAX_ITER if any solve fell short, OPTIMAL otherwise. An infeasible inner
    search only means the pool never covered the target and is not a failure
    of the bracket.
    """
    return ConeStatus.MAX_ITER if ConeStatus.MAX_ITER in statuses else ConeStatus.OPTIMAL



def reconcile_endpoints(name: str, lower: float, upper: float, status: ConeStatus) -> Tuple[float, ConeStatus]:
    """
    Orders the two endpoints of a bracket.

    A lower endpoint above the upper one by at most CONSISTENCY_TOLERANCE is
    solver noise and is clipped. A larger crossing means one endpoint is not
    certified: the lower endpoint is dropped to the upper one and the status
    becomes MAX_ITER.
    """
    if lower <= upper:
        return lower, status
    if lower > upper + CONSISTENCY_TOLERANCE:
        logger.warning(f'{name}: lower endpoint {lower:.10g} above upper endpoint {upper:.10g}, '
                       f'bracket marked max-iter')
        return upper, ConeStatus.MAX_ITER
    return upper, status
