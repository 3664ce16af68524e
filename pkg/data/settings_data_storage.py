"""
Stores solver settings and job descriptions in immutable wrapper classes.
"""

from dataclasses import dataclass, field
from typing import Optional, Tuple


@dataclass(frozen=True)
class ConeSolverParameters:
    """
    Class for keeping track of the cone solver.
    """
    solver: str = 'CLARABEL'
    fallback_solver: str = 'SCS'
    max_iterations: int = 500
    max_program_dimension: int = 200


@dataclass(frozen=True)
class ProductSearchParameters:
    """
    Class for keeping track of the alternating product-vector search.
    """
    restarts: int = 32
    pricing_restarts: int = 8
    sweep_tolerance: float = 1e-9
    max_sweeps: int = 500


@dataclass(frozen=True)
class ConditionalGradientParameters:
    """
    Class for keeping track of the relative-entropy descent.
    """
    max_iterations: int = 2000
    support_regularization: float = 1e-9
    corrective_every: int = 1
    max_atoms: int = 200


@dataclass(frozen=True)
class ColumnGenerationParameters:
    """
    Class for keeping track of the inner cone search.
    """
    max_rounds: int = 60
    patience: int = 3


@dataclass(frozen=True)
class HypothesisTestingParameters:
    """
    Class for keeping track of the b-search of the singlet-fraction rewrite.
    """
    b_grid_points: int = 64
    b_grid_floor: float = -2.0
    golden_tolerance: float = 1e-4


@dataclass(frozen=True)
class LimitParameters:
    max_total_dimension: int = 100


@dataclass(frozen=True)
class ProtocolParameters:
    fidelity_threshold: float = 0.99
    y_grid_points: int = 11


@dataclass(frozen=True)
class SolverSettings:
    """
    Everything the numerical modules can be tuned with.
    """
    cone: ConeSolverParameters = field(default_factory=ConeSolverParameters)
    product_search: ProductSearchParameters = field(default_factory=ProductSearchParameters)
    conditional_gradient: ConditionalGradientParameters = field(default_factory=ConditionalGradientParameters)
    column_generation: ColumnGenerationParameters = field(default_factory=ColumnGenerationParameters)
    hypothesis_testing: HypothesisTestingParameters = field(default_factory=HypothesisTestingParameters)
    limits: LimitParameters = field(default_factory=LimitParameters)
    protocols: ProtocolParameters = field(default_factory=ProtocolParameters)


def default_settings() -> SolverSettings:
    return SolverSettings()


@dataclass(frozen=True)
class JobSpec:
    """
    One batch job, as given on the command line or in a .toml job file.
    """
    command: str
    kind: Optional[str] = None
    state: Optional[str] = None
    named: Optional[str] = None
    K: Optional[int] = None
    variant: str = 'plain'
    measure: Optional[str] = None
    n: Tuple[int, ...] = (1,)
    y: Tuple[float, ...] = (0.0,)
    eps: Tuple[float, ...] = (0.0,)
    tol: float = 1e-6
    seed: int = 0
    out: Optional[str] = None
    workers: int = 1
    save_certificates: bool = False
    timings: bool = False
    verbose: bool = False

    @property
    def state_id(self) -> str:
        if self.named is not None:
            return self.named
        if self.state is not None:
            return self.state.replace('\\', '/').split('/')[-1].rsplit('.', 1)[0]
        return 'unnamed'
