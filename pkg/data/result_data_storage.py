"""
Stores solver results, certified brackets and protocol reports in immutable wrapper classes.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, Optional, Tuple

import numpy as np

from data.state_data_storage import DimProfile, HermitianOp, MultiState, SeparableDecomposition

BRACKET_TOLERANCE: float = 1e-7


class ConeStatus(Enum):
    OPTIMAL = 'optimal'
    INFEASIBLE = 'infeasible'
    MAX_ITER = 'max-iter'


class Relaxation(Enum):
    """
    PPT_EXACT when the PPT outer set coincides with the separable set
    (two parties, 2⊗2 or 2⊗3), BRACKET otherwise.
    """
    PPT_EXACT = 'ppt-exact'
    BRACKET = 'bracket'


class Verdict(Enum):
    HOLDS = 'holds'
    VIOLATED = 'violated'
    INCONCLUSIVE = 'inconclusive'


@dataclass(frozen=True, eq=False)
class ConeSolution:
    """
    Result of a cone program. `objective` is the primal value, `dual_objective`
    the value certified by complementary slackness, `gap` their distance.
    `dual_residual` is the largest violation of a dual cone; the dual objective
    only bounds the optimum when it is within tolerance.
    """
    primal: Dict[str, np.ndarray]
    dual: Dict[str, Any]
    objective: float
    dual_objective: float
    gap: float
    residual: float
    status: ConeStatus
    solve_time: float = 0.0
    iterations: int = 0
    dual_residual: float = 0.0

    @property
    def is_optimal(self) -> bool:
        return self.status is ConeStatus.OPTIMAL


@dataclass(frozen=True, eq=False)
class Bracket:
    """
    Certified interval [lower, upper] for the value of a measure.
    """
    lower: float
    upper: float
    lower_certificate: Any = None
    upper_certificate: Any = None
    iterations: int = 0
    runtime: float = 0.0
    status: ConeStatus = ConeStatus.OPTIMAL
    relaxation: Relaxation = Relaxation.BRACKET

    def __post_init__(self):
        if self.lower > self.upper + BRACKET_TOLERANCE:
            raise ValueError(f'Bracket endpoints out of order: [{self.lower}, {self.upper}]')

    @property
    def gap(self) -> float:
        return self.upper - self.lower

    @property
    def midpoint(self) -> float:
        return (self.lower + self.upper) / 2

    def contains(self, value: float, slack: float = 0.0) -> bool:
        return self.lower - slack <= value <= self.upper + slack

    def scaled(self, factor: float) -> 'Bracket':
        """
        The bracket of factor·value, factor ≥ 0.
        """
        return Bracket(self.lower * factor, self.upper * factor,
                       self.lower_certificate, self.upper_certificate,
                       self.iterations, self.runtime, self.status, self.relaxation)

    def mapped(self, transform) -> 'Bracket':
        """
        The bracket of transform(value) for a non-decreasing transform.
        """
        return Bracket(transform(self.lower), transform(self.upper),
                       self.lower_certificate, self.upper_certificate,
                       self.iterations, self.runtime, self.status, self.relaxation)


@dataclass(frozen=True, eq=False)
class MixingCertificate:
    """
    Upper certificate of the mixing robustness: the mixer is S0 + μI and
    ρ + S0 + μI = S1 + (μI + ρ + S0 − S1), where S0 (`mixer`) and S1 (`mixture`)
    are product decompositions and the last term is separable because
    ρ + S0 − S1 lies within μ times the separable ball radius of zero. `state` is the
    smoothed state that replaces ρ, None when no smoothing was done.
    """
    mixer: Optional[SeparableDecomposition]
    mixture: Optional[SeparableDecomposition]
    identity_weight: float
    state: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.identity_weight < 0:
            raise ValueError('The identity weight must be non-negative')


@dataclass(frozen=True)
class RegularizationTrace:
    """
    Brackets of measure(ρ^⊗n)/n for n = 1..n_max.
    """
    measure: str
    entries: Tuple[Bracket, ...]

    def __post_init__(self):
        if not self.entries:
            raise ValueError('A regularization trace needs at least one entry')

    @property
    def n_max(self) -> int:
        return len(self.entries)


@dataclass(frozen=True, eq=False)
class MeasurePrepareMap:
    """
    ρ ↦ tr(Aρ)·out_hit + tr((I−A)ρ)·out_miss. `family` records which
    construction produced the map ('distill', 'form', 'composed', 'custom').
    """
    povm_A: HermitianOp
    out_hit: MultiState
    out_miss: MultiState
    in_profile: DimProfile
    out_profile: DimProfile
    family: str = 'custom'
    K: Optional[int] = None


class SeppMethod(Enum):
    CLOSED_FORM_ISOTROPIC = 'closed-form-isotropic'
    SAMPLED = 'sampled'


@dataclass(frozen=True, eq=False)
class SeppCertificate:
    """
    `epsilon` is a certified upper bound on max R_G(Λ(σ)) over separable σ;
    `epsilon_lower` the largest value actually exhibited by `witness_input`.
    """
    epsilon: float
    witness_input: MultiState
    method: SeppMethod
    epsilon_lower: float = 0.0
    witness_bracket: Optional[Bracket] = None

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError('epsilon must be non-negative')


@dataclass(frozen=True)
class CptpReport:
    completely_positive: bool
    trace_preserving: bool
    min_choi_eigenvalue: float
    trace_residual: float

    @property
    def is_cptp(self) -> bool:
        return self.completely_positive and self.trace_preserving


@dataclass(frozen=True)
class MonotonicityReport:
    """
    Outcome of checking measure(Λ(ρ)) ≤ log2(1+ε) + measure(ρ) at bracket resolution.
    `margin` is right-hand lower side minus left-hand upper side.
    """
    measure: str
    verdict: Verdict
    epsilon: float
    left: Bracket
    right: Bracket
    margin: float


@dataclass(frozen=True)
class ReversibilityRow:
    n: int
    distill_rate: Bracket
    form_rate: Bracket
    er_rate: Bracket
    K_form: int
    form_epsilon: float
    distill_fidelities: Tuple[Tuple[int, Bracket], ...]
    distill_error: float
    form_error: float

    @property
    def gap(self) -> float:
        """
        Distance between the formation rate and the regularized E_R estimate.
        """
        return self.form_rate.upper - self.er_rate.lower


@dataclass(frozen=True)
class ReversibilityReport:
    rows: Tuple[ReversibilityRow, ...] = field(default_factory=tuple)


@dataclass(frozen=True)
class DistillationProbe:
    """
    The relaxed singlet fraction of ρ^⊗n at K = 2^{ny} next to its floor
    min over states ω of tr(ρ^⊗n − ω/ε)_+. `penalty_dominates` is set once
    K > 1/ε, where the floor is what keeps the relaxed value away from zero.
    """
    n: int
    y: float
    epsilon: float
    relaxed: Bracket
    floor: Bracket
    penalty_dominates: bool


@dataclass(frozen=True)
class CellResult:
    """
    One evaluated grid cell of a job: the bracket plus the parameters that produced it.
    `extra` carries command-specific values (optimal b, SEPP parameters, POVM elements).
    """
    command: str
    kind: str
    n: Optional[int]
    K: Optional[int]
    y: Optional[float]
    eps: Optional[float]
    bracket: Bracket
    seconds: float = 0.0
    extra: Dict[str, Any] = field(default_factory=dict)
