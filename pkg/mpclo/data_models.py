from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np

from . import config
from .cones import ConeSpec

Family = Literal['Primal', 'Dual', 'NsDualOfPrimal', 'NsDualOfDual']
ValueVariant = Literal['PStar', 'DStar', 'DBarStar', 'PBarStar']
SolveStatus = Literal['Optimal', 'Infeasible', 'Unbounded', 'MaxIter', 'NumericalTrouble']
# 'dual' is the conic representable set of u (map Phi), 'primal' the set of v (map Psi)
Side = Literal['dual', 'primal']
MapStatus = Literal['Undefined', 'Point', 'Set']
ThetaStatus = Literal['Interior', 'Boundary', 'Outside']
RegionKind = Literal['Linearity', 'Nonlinearity', 'TransitionFace', 'OutsideTheta', 'Unclassified']


@dataclass(eq=False)
class MpcloInstance:
    """The data (A, B, M, c, d) of a multiparametric conic problem plus derived b, a and G."""
    space: ConeSpec
    A: np.ndarray  # m x q
    B: np.ndarray  # l x q
    M: np.ndarray  # r x q
    c: np.ndarray  # q
    d: np.ndarray  # q
    name: str = "instance"
    labels: Dict[str, str] = field(default_factory=dict)
    b: np.ndarray = field(init=False)
    a: np.ndarray = field(init=False)
    gram: np.ndarray = field(init=False)

    def __post_init__(self):
        """Coerce arrays to float and derive b = A d, a = B c, G = M M^T."""
        q = self.space.total_dim
        self.A = np.asarray(self.A, dtype=float).reshape(-1, q)
        self.B = np.asarray(self.B, dtype=float).reshape(-1, q)
        self.M = np.asarray(self.M, dtype=float).reshape(-1, q)
        self.c = np.asarray(self.c, dtype=float).ravel()
        self.d = np.asarray(self.d, dtype=float).ravel()
        self.b = self.A @ self.d
        self.a = self.B @ self.c
        self.gram = self.M @ self.M.T

    @property
    def dims(self) -> Tuple[int, int, int, int]:
        """(q, m, l, r)"""
        return self.space.total_dim, self.A.shape[0], self.B.shape[0], self.M.shape[0]

    @property
    def r(self) -> int:
        return self.M.shape[0]

    @property
    def assumption2_exact(self) -> bool:
        return bool(np.max(np.abs(self.gram - np.eye(self.r)), initial=0.0) <= config.ORTH_TOL_REL * (1.0 + self.data_scale()))

    def data_scale(self) -> float:
        return float(max(np.max(np.abs(m), initial=0.0) for m in (self.A, self.B, self.M)))

    def __str__(self):
        q, m, l, r = self.dims
        return f"{self.name} [{self.space}; q={q} m={m} l={l} r={r}]"


@dataclass
class StandardProblem:
    """min <objective, x> s.t. eq_matrix x = eq_rhs, x in space."""
    objective: np.ndarray
    eq_matrix: np.ndarray
    eq_rhs: np.ndarray
    space: ConeSpec
    variant: Family
    param: np.ndarray

    def __post_init__(self):
        if self.eq_matrix.shape[0] != self.eq_rhs.shape[0]:
            raise ValueError("eq_matrix rows must match eq_rhs length")


@dataclass
class ValidationReport:
    """Outcome of checking Assumptions 1-2 on raw instance data."""
    passed: bool
    residuals: Dict[str, float] = field(default_factory=dict)
    failed_checks: List[str] = field(default_factory=list)
    rank_sum: int = 0
    q: int = 0
    gram: Optional[np.ndarray] = None
    assumption2_exact: bool = False

    def __str__(self):
        state = "pass" if self.passed else f"fail ({', '.join(self.failed_checks)})"
        return f"validation {state}: rank_sum={self.rank_sum}/{self.q} assumption2_exact={self.assumption2_exact}"


@dataclass
class SolverOptions:
    feas_tol: float = config.FEAS_TOL
    gap_tol: float = config.GAP_TOL
    max_iter: int = config.MAX_ITER
    face_eps: float = config.FACE_EPS
    face_retries: int = config.FACE_RETRIES
    face_eps_growth: float = config.FACE_EPS_GROWTH
    cond_max: float = config.COND_MAX
    margin_cap: float = config.MARGIN_CAP
    trace_cap: float = config.TRACE_CAP
    inner_tol_factor: float = config.INNER_TOL_FACTOR

    def __post_init__(self):
        for name in ('feas_tol', 'gap_tol', 'face_eps', 'cond_max', 'margin_cap', 'trace_cap'):
            if getattr(self, name) <= 0:
                raise ValueError(f"Solver option {name} must be positive")
        if self.max_iter < 1:
            raise ValueError("Solver option max_iter must be positive")
        if self.face_retries < 0 or self.face_eps_growth <= 1.0:
            raise ValueError("Face retries must be >= 0 with an eps growth above 1")
        if not 0.0 < self.inner_tol_factor <= 1.0:
            raise ValueError("Solver option inner_tol_factor must lie in (0, 1]")

    def relaxed(self, factor: float) -> 'SolverOptions':
        """Same options with feasibility, gap and face tolerances loosened by factor."""
        return replace(self, feas_tol=self.feas_tol * factor, gap_tol=self.gap_tol * factor,
                       face_eps=self.face_eps * factor)


@dataclass
class SolveResult:
    status: SolveStatus
    x: Optional[np.ndarray] = None
    mult: Optional[np.ndarray] = None
    s: Optional[np.ndarray] = None
    objective: float = float('nan')
    gap: float = float('nan')
    primal_res: float = float('nan')
    dual_res: float = float('nan')
    iterations: int = 0
    # Dimension of the face of K the solve was restricted to; None when solved over K itself
    face_dim: Optional[int] = None

    @property
    def optimal(self) -> bool:
        return self.status == 'Optimal'

    def __str__(self):
        return f"{self.status} objective={self.objective:.9g} gap={self.gap:.2e} iterations={self.iterations}"


@dataclass
class FeasibilityResult:
    """Max-margin feasibility of {z : E z = f, z in K}."""
    status: Literal['Feasible', 'Infeasible', 'Marginal']
    margin: float
    point: Optional[np.ndarray] = None
    certificate: Optional[np.ndarray] = None


@dataclass
class SupportResult:
    """max <g, x> over the (relaxed) optimal face; value is +inf when unbounded."""
    value: float
    argmax: Optional[np.ndarray] = None

    @property
    def unbounded(self) -> bool:
        return np.isinf(self.value)


@dataclass
class ValueQuery:
    variant: ValueVariant
    param: np.ndarray
    value: float
    witness: SolveResult


@dataclass
class ResidualReport:
    """Named residuals checked against one tolerance."""
    residuals: Dict[str, float]
    tolerance: float
    passed: bool = False

    def __post_init__(self):
        self.passed = all(abs(v) <= self.tolerance for v in self.residuals.values())

    def failing(self) -> List[str]:
        return [name for name, v in self.residuals.items() if not abs(v) <= self.tolerance]


@dataclass
class WeakDualityGaps:
    gap_bar: float
    gap: float


@dataclass
class AnalysisOptions:
    """Tolerances and switches shared by the mapping, duality and partition layers."""
    solver: SolverOptions = field(default_factory=SolverOptions)
    set_tol: float = config.SET_TOL
    mem_tol: float = config.MEM_TOL
    fd_delta: float = config.FD_DELTA
    n_dirs: int = config.N_DIRS_2D
    gram_mode: Literal['correct', 'substitute'] = config.GRAM_MODE
    tol_param: float = config.TOL_PARAM
    quant: float = config.QUANT
    dim_tol_rel: float = config.DIM_TOL_REL
    cont_factor: float = config.CONT_FACTOR
    verify_tol: float = config.VERIFY_TOL
    jobs: int = config.JOBS
    seed: int = config.SEED
    retry_relax: float = config.RETRY_RELAX

    def __post_init__(self):
        if self.gram_mode not in ('correct', 'substitute'):
            raise ValueError(f"Unknown gram_mode {self.gram_mode!r}")


@dataclass
class ThetaMembership:
    side: Side
    point: np.ndarray
    status: ThetaStatus
    margin: float
    certificate: Optional[np.ndarray] = None  # w^1 (primal side) or w^2 (dual side)
    slack: Optional[np.ndarray] = None

    @property
    def is_member(self) -> bool:
        return self.status != 'Outside'


@dataclass
class MapSample:
    """Value of Phi(u) (side 'dual') or Psi(v) (side 'primal')."""
    side: Side
    at: np.ndarray
    status: MapStatus
    point: Optional[np.ndarray] = None
    support: List[Tuple[np.ndarray, float]] = field(default_factory=list)
    width: float = 0.0
    witness: Optional[np.ndarray] = None
    extremes: List[np.ndarray] = field(default_factory=list)
    value: float = float('nan')  # optimal value of the base family

    @property
    def map_name(self) -> str:
        return 'Phi' if self.side == 'dual' else 'Psi'

    def interval(self) -> Optional[Tuple[float, float]]:
        """[lo, hi] of a one-parameter sample, read from its +1/-1 support values."""
        if self.status == 'Undefined' or self.point is None or self.point.size != 1:
            return None
        if self.status == 'Point':
            return float(self.point[0]), float(self.point[0])
        hi = next((h for g, h in self.support if g[0] > 0), np.inf)
        lo = next((-h for g, h in self.support if g[0] < 0), -np.inf)
        return float(lo), float(hi)

    def __str__(self):
        if self.status == 'Point':
            return f"{self.map_name} point {np.array2string(self.point, precision=9)}"
        return f"{self.map_name} {self.status.lower()} width={self.width:.3g}"


@dataclass
class DerivativeResult:
    side: Side
    at: np.ndarray
    direction: np.ndarray
    value: float  # -inf when the optimal face is unbounded in the queried direction
    fd_check: Optional[float] = None

    @property
    def minus_infinity(self) -> bool:
        return self.value == -np.inf


@dataclass(frozen=True)
class Signature:
    """Quantized description of one parameter sample."""
    theta_status: str
    map_status: Optional[str] = None
    value_key: Optional[Tuple[int, ...]] = None
    singleton: bool = False

    @property
    def member(self) -> bool:
        return self.theta_status in ('Interior', 'Boundary')


@dataclass
class Region:
    side: Side
    kind: RegionKind
    samples: List[Tuple[float, ...]] = field(default_factory=list)
    bbox: Optional[Tuple[Tuple[float, float], ...]] = None
    value_key: Optional[Tuple[int, ...]] = None
    representative: Optional[MapSample] = None
    dim: Optional[int] = None  # affine dimension, set for transition faces
    note: str = ""
    region_id: int = 0

    def __str__(self):
        dim = f"({self.dim})" if self.kind == 'TransitionFace' else ""
        return f"#{self.region_id} {self.kind}{dim} samples={len(self.samples)} bbox={self.bbox}"


@dataclass
class Transition:
    """A located transition point with its bracketing accuracy."""
    location: Tuple[float, ...]
    accuracy: float
    signature: Signature
    left_region: Optional[int] = None
    right_region: Optional[int] = None
    region_id: Optional[int] = None


@dataclass
class RegionDecomposition:
    side: Side
    window: Tuple[Tuple[float, float], ...]
    grid: Tuple[int, ...]
    regions: List[Region] = field(default_factory=list)
    transitions: List[Transition] = field(default_factory=list)
    unclassified_samples: int = 0

    @property
    def r(self) -> int:
        return len(self.window)

    def of_kind(self, kind: str) -> List[Region]:
        return [reg for reg in self.regions if reg.kind == kind]


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""
    witnesses: List[Any] = field(default_factory=list)


@dataclass
class VerificationReport:
    checks: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(check.passed for check in self.checks)

    def failed(self) -> List[str]:
        return [check.name for check in self.checks if not check.passed]


@dataclass
class RunResult:
    command: str
    digest: str = ""
    outputs: List[str] = field(default_factory=list)
    summary: Dict[str, Any] = field(default_factory=dict)
    exit_code: int = 0
