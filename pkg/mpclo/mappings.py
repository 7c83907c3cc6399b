"""
Conic representable sets Theta_D / Theta_P and the set-valued maps between them.

Phi (side 'dual') sends u in Theta_D to the image G^-1 M (x*(u) - d) of the primal
optimal face; Psi (side 'primal') sends v in Theta_P to G^-1 M (y*(v) - c).
Images are described by their support values over the optimal face. Values
evaluated on the eps-relaxed face are extrapolated to eps -> 0; exact values pass
through unchanged.
"""
import logging
import math
from typing import Dict, List, Optional, Tuple

import numpy as np

from .data_models import (AnalysisOptions, DerivativeResult, MapSample, MpcloInstance, Side, SolveResult,
                          StandardProblem, SupportResult, ThetaMembership)
from .errors import (NotSolvable, NumericalTrouble, OutsideTheta, UndefinedMap, ValidationError)
from .model import assemble, check_param
from .solver import check_feasibility, optimal_face_support, solve

logger = logging.getLogger(__name__)

SIDE_INFO = {
    'dual': {'base': 'Primal', 'theta': 'NsDualOfPrimal', 'cut': 'NsDualOfDual', 'anchor': 'd',
             'map': 'Phi', 'value': 'PStar'},
    'primal': {'base': 'Dual', 'theta': 'NsDualOfDual', 'cut': 'NsDualOfPrimal', 'anchor': 'c',
               'map': 'Psi', 'value': 'DStar'},
}

_SIDE_ALIASES = {'dual': 'dual', 'phi': 'dual', 'primal': 'primal', 'psi': 'primal'}

# Ratio between the two relaxation levels used for extrapolation
_EPS_RATIO = 10.0


def normalize_side(side: str) -> Side:
    try:
        return _SIDE_ALIASES[str(side).lower()]
    except KeyError:
        raise ValidationError(f"Unknown side {side!r}; expected phi, psi, dual or primal", check="side")


def _opts(opts: Optional[AnalysisOptions]) -> AnalysisOptions:
    return opts or AnalysisOptions()


def _anchor(instance: MpcloInstance, side: Side) -> np.ndarray:
    return instance.d if SIDE_INFO[side]['anchor'] == 'd' else instance.c


def map_coordinates(instance: MpcloInstance, opts: Optional[AnalysisOptions] = None) -> np.ndarray:
    """P with map value = P M (x - anchor): G^-1 in 'correct' mode, I in 'substitute' mode."""
    if _opts(opts).gram_mode == 'correct':
        return np.linalg.inv(instance.gram)
    return np.eye(instance.r)


def to_parameter(instance: MpcloInstance, candidate, opts: Optional[AnalysisOptions] = None) -> np.ndarray:
    """Map-space coordinates back to the parameter that the cut family is assembled with."""
    candidate = check_param(instance, candidate)
    if _opts(opts).gram_mode == 'correct':
        return candidate
    return np.linalg.solve(instance.gram, candidate)


# --- Conic representable sets ---

def theta_membership(instance: MpcloInstance, side: str, point, opts: Optional[AnalysisOptions] = None) -> ThetaMembership:
    """
    Max-margin test of c + M^T u + A^T w in K (side 'dual') or d + M^T v + B^T w in K
    (side 'primal'). The slack is searched as a feasible point of the side's
    nonstandard family, which has exactly those vectors as its feasible set.
    """
    side, opts = normalize_side(side), _opts(opts)
    point = check_param(instance, point)
    problem = assemble(instance, SIDE_INFO[side]['theta'], point)
    feas = check_feasibility(problem.eq_matrix, problem.eq_rhs, instance.space, opts.solver)
    status = {'Feasible': 'Interior', 'Marginal': 'Boundary', 'Infeasible': 'Outside'}[feas.status]
    certificate = None
    if feas.point is not None and status != 'Outside':
        rows, base = (instance.A, instance.c) if side == 'dual' else (instance.B, instance.d)
        shift = feas.point - base - instance.M.T @ point
        if rows.shape[0]:
            certificate, *_ = np.linalg.lstsq(rows.T, shift, rcond=None)
        else:
            certificate = np.zeros(0)
    logger.debug(f"Theta_{'D' if side == 'dual' else 'P'} at {point}: {status} (margin {feas.margin:.3e})")
    return ThetaMembership(side=side, point=point, status=status, margin=feas.margin,
                           certificate=certificate, slack=feas.point if status != 'Outside' else None)


def theta_support(instance: MpcloInstance, side: str, g, opts: Optional[AnalysisOptions] = None) -> SupportResult:
    """max <g, u> over Theta_D (side 'dual') or max <g, v> over Theta_P (side 'primal')."""
    side, opts = normalize_side(side), _opts(opts)
    g = check_param(instance, g)
    G_inv = np.linalg.inv(instance.gram)
    rows, rhs = (instance.B, instance.a) if side == 'dual' else (instance.A, instance.b)
    anchor = instance.c if side == 'dual' else instance.d
    weight = instance.M.T @ (G_inv @ g)
    problem = StandardProblem(objective=-weight, eq_matrix=rows, eq_rhs=rhs, space=instance.space,
                              variant=SIDE_INFO[side]['theta'], param=np.zeros(instance.r))
    result = solve(problem, opts.solver)
    if result.status == 'Unbounded':
        return SupportResult(value=np.inf)
    if result.status == 'Infeasible':
        return SupportResult(value=-np.inf)
    if not result.optimal:
        raise NotSolvable(f"Support of Theta in direction {g} is not solvable: {result.status}",
                          status=result.status, check="theta_support")
    argmax = G_inv @ (instance.M @ (result.x - anchor))
    return SupportResult(value=float(g @ argmax), argmax=argmax)


def recession_direction(instance: MpcloInstance, side: str, h,
                        opts: Optional[AnalysisOptions] = None) -> Tuple[bool, Optional[np.ndarray]]:
    """
    True when M^T h + B^T w in K (side 'primal') or M^T h + A^T w in K (side 'dual')
    is feasible, i.e. h is a recession direction of Theta. Returns (flag, w).
    """
    side, opts = normalize_side(side), _opts(opts)
    h = check_param(instance, h)
    if not np.any(h):
        raise ValidationError("Recession direction must be nonzero", check="direction")
    kernel, rows = (instance.B, instance.A) if side == 'dual' else (instance.A, instance.B)
    E = np.vstack([kernel, instance.M])
    f = np.concatenate([np.zeros(kernel.shape[0]), instance.gram @ h])
    feas = check_feasibility(E, f, instance.space, opts.solver)
    if feas.point is None or feas.margin < -opts.solver.feas_tol:
        return False, None
    shift = feas.point - instance.M.T @ h
    w = np.linalg.lstsq(rows.T, shift, rcond=None)[0] if rows.shape[0] else np.zeros(0)
    return True, w


# --- Set-valued maps ---

def support_directions(r: int, n_dirs: int) -> np.ndarray:
    """Unit support directions, ordered so that row k + n/2 is the negative of row k."""
    if r == 1:
        return np.array([[1.0], [-1.0]])
    if r == 2:
        n = max(4, n_dirs + n_dirs % 2)
        angles = 2.0 * np.pi * np.arange(n) / n
        return np.column_stack([np.cos(angles), np.sin(angles)])
    return np.vstack([np.eye(r), -np.eye(r)])


def _key(g: np.ndarray) -> Tuple[float, ...]:
    return tuple(float(x) + 0.0 for x in np.round(g, 12))


def _extrapolate(h1: float, h2: float, polyhedral: bool) -> float:
    """Support value at eps -> 0 from the values at eps and 10 eps."""
    if math.isinf(h1) or math.isinf(h2):
        return float('inf')
    if polyhedral:
        return h1 - (h2 - h1) / (_EPS_RATIO - 1.0)
    root = math.sqrt(_EPS_RATIO)
    return (root * h1 - h2) / (root - 1.0)


def _width(values: Dict[Tuple[float, ...], float]) -> float:
    widths = []
    for key, h in values.items():
        opposite = tuple(-x + 0.0 for x in key)
        if opposite in values and key < opposite:
            widths.append(h + values[opposite])
    return float(max(widths, default=0.0))


class _FaceSupports:
    """Support values of one optimal face in map coordinates, cached per direction and eps."""

    def __init__(self, instance: MpcloInstance, side: Side, problem: StandardProblem, base: SolveResult,
                 opts: AnalysisOptions):
        self.problem = problem
        self.base = base
        self.opts = opts
        self.P = map_coordinates(instance, opts)
        self.M = instance.M
        self.shift = self.P @ (instance.M @ _anchor(instance, side))
        self.cache: Dict[Tuple[Tuple[float, ...], float], Tuple[float, Optional[np.ndarray]]] = {}

    def raw(self, g: np.ndarray, eps: float) -> Tuple[float, Optional[np.ndarray]]:
        """Support value in direction g at relaxation eps. NumericalTrouble propagates."""
        key = (_key(g), eps)
        if key not in self.cache:
            gx = self.M.T @ (self.P @ g)
            res = optimal_face_support(self.problem, self.base, gx, self.opts.solver, eps)
            if math.isnan(res.value):
                raise NumericalTrouble(f"Face support in direction {g} returned NaN", check="face_support")
            self.cache[key] = (res.value - float(g @ self.shift), res.argmax)
        return self.cache[key]

    def extrapolated(self, g: np.ndarray, eps1: float, polyhedral: bool) -> float:
        return _extrapolate(self.raw(g, eps1)[0], self.raw(g, _EPS_RATIO * eps1)[0], polyhedral)

    def image(self, x: np.ndarray) -> np.ndarray:
        return self.P @ (self.M @ x) - self.shift


def _base_solve(instance: MpcloInstance, side: Side, at: np.ndarray,
                opts: AnalysisOptions) -> Tuple[StandardProblem, SolveResult]:
    problem = assemble(instance, SIDE_INFO[side]['base'], at)
    return problem, solve(problem, opts.solver)


def map_eval(instance: MpcloInstance, side: str, at, opts: Optional[AnalysisOptions] = None,
             theta: Optional[ThetaMembership] = None) -> MapSample:
    """
    Phi(u) for side 'dual', Psi(v) for side 'primal'.

    The ±axis support values decide Point vs Set first; only Set samples get the
    full fan of n_dirs directions. Extremes are the argmax points of the support evaluations,
    mapped into parameter space.
    """
    side, opts = normalize_side(side), _opts(opts)
    at = check_param(instance, at)
    theta = theta or theta_membership(instance, side, at, opts)
    name = SIDE_INFO[side]['map']
    if theta.status == 'Outside':
        raise OutsideTheta(f"{at} is outside Theta_{'D' if side == 'dual' else 'P'} (margin {theta.margin:.3e})",
                           check="theta_membership")
    problem, base = _base_solve(instance, side, at, opts)
    if not base.optimal:
        if theta.status == 'Boundary':
            logger.debug(f"{name}({at}) undefined: base solve {base.status} at a boundary point")
            return MapSample(side=side, at=at, status='Undefined')
        raise NotSolvable(f"{SIDE_INFO[side]['base']}({at}) is not solvable: {base.status}",
                          status=base.status, check=SIDE_INFO[side]['base'])

    supports = _FaceSupports(instance, side, problem, base, opts)
    point = supports.image(base.x)
    eps1 = opts.solver.face_eps
    polyhedral = instance.space.is_polyhedral()

    axes = np.vstack([np.eye(instance.r), -np.eye(instance.r)])
    raw1 = {_key(g): supports.raw(g, eps1)[0] for g in axes}
    status, values = 'Point', raw1
    width = _width(raw1)
    if width > opts.set_tol:
        values = {_key(g): supports.extrapolated(g, eps1, polyhedral) for g in axes}
        width = _width(values)
        if width > opts.set_tol:
            status = 'Set'
            for g in support_directions(instance.r, opts.n_dirs):
                if _key(g) in values:
                    continue
                try:
                    values[_key(g)] = supports.extrapolated(g, eps1, polyhedral)
                except NumericalTrouble as e:
                    # The axis values already bound the image
                    logger.warning(f"{name}({at}): dropped support direction {g}: {e}")
            width = _width(values)

    if any(math.isnan(h) for h in values.values()):
        raise NumericalTrouble(f"{name}({at}) support values are not finite numbers", check="face_support")
    support: List[Tuple[np.ndarray, float]] = [(np.array(key), h) for key, h in values.items()]
    extremes = []
    if status == 'Set':
        for (key, eps), (h, argmax) in supports.cache.items():
            if eps == eps1 and argmax is not None and np.isfinite(h):
                extremes.append(supports.image(argmax))
    sample = MapSample(side=side, at=at, status=status, point=point, support=support, width=max(width, 0.0),
                       witness=base.x, extremes=extremes, value=base.objective)
    logger.debug(f"{name}({at}) = {sample}")
    return sample


def map_membership(instance: MpcloInstance, side: str, at, candidate,
                   opts: Optional[AnalysisOptions] = None) -> Tuple[bool, float]:
    """
    Side 'dual': is candidate in Phi(at)? Solves the cut family at the candidate
    and compares <c + M^T at, x-bar> with p*(at). Returns (flag, slack of the test).
    """
    side, opts = normalize_side(side), _opts(opts)
    at = check_param(instance, at)
    info = SIDE_INFO[side]
    _, base = _base_solve(instance, side, at, opts)
    if base.status == 'Unbounded':
        raise OutsideTheta(f"{info['base']}({at}) is unbounded", check="theta_membership")
    if not base.optimal:
        raise NotSolvable(f"{info['base']}({at}) is not solvable: {base.status}", status=base.status,
                          check=info['base'])
    cut = solve(assemble(instance, info['cut'], to_parameter(instance, candidate, opts)), opts.solver)
    if cut.status == 'Infeasible':
        return False, float('inf')
    if not cut.optimal:
        raise NotSolvable(f"{info['cut']}({candidate}) is not solvable: {cut.status}", status=cut.status,
                          check=info['cut'])
    objective = (instance.c if side == 'dual' else instance.d) + instance.M.T @ at
    residual = float(objective @ cut.x) - base.objective
    return residual <= opts.mem_tol * (1.0 + abs(base.objective)), residual


# --- Value-function derivatives ---

def _face_minimum(instance: MpcloInstance, problem: StandardProblem, base: SolveResult, weight: np.ndarray,
                  opts: AnalysisOptions) -> float:
    """min <weight, x> over the optimal face, extrapolated; -inf when unbounded below."""
    polyhedral = instance.space.is_polyhedral()
    eps1 = opts.solver.face_eps
    h1 = optimal_face_support(problem, base, -weight, opts.solver, eps1).value
    if math.isinf(h1):
        return -np.inf
    h2 = optimal_face_support(problem, base, -weight, opts.solver, _EPS_RATIO * eps1).value
    return -_extrapolate(h1, h2, polyhedral)


def directional_derivative(instance: MpcloInstance, side: str, at, h,
                           opts: Optional[AnalysisOptions] = None) -> DerivativeResult:
    """
    p*'(u, h) = min over Phi(u) of <h, M d + G v> (side 'dual'); d*'(v, h) symmetric.
    Computed as the minimum of <M^T h, x> over the optimal face. fd_check is the
    one-sided difference quotient, filled only when at + fd_delta h stays in Theta.
    """
    side, opts = normalize_side(side), _opts(opts)
    at, h = check_param(instance, at), check_param(instance, h)
    sample = map_eval(instance, side, at, opts)
    if sample.status == 'Undefined':
        raise UndefinedMap(f"{SIDE_INFO[side]['map']}({at}) is undefined", check="map_eval")
    problem, base = _base_solve(instance, side, at, opts)
    weight = instance.M.T @ h
    if sample.status == 'Point':
        value = float(weight @ sample.witness)
    else:
        value = _face_minimum(instance, problem, base, weight, opts)

    fd_check = None
    shifted = at + opts.fd_delta * h
    if theta_membership(instance, side, shifted, opts).is_member:
        _, moved = _base_solve(instance, side, shifted, opts)
        if moved.optimal:
            fd_check = (moved.objective - sample.value) / opts.fd_delta
    logger.debug(f"Derivative of {SIDE_INFO[side]['value']} at {at} along {h}: {value:.9g} (fd {fd_check})")
    return DerivativeResult(side=side, at=at, direction=h, value=value, fd_check=fd_check)


def gradient(instance: MpcloInstance, side: str, at, opts: Optional[AnalysisOptions] = None) -> Optional[np.ndarray]:
    """M d + G Phi(u) (or M c + G Psi(v)) when the map is single-valued at `at`; None otherwise."""
    sample = map_eval(instance, side, at, opts)
    if sample.status != 'Point':
        return None
    return instance.M @ sample.witness
