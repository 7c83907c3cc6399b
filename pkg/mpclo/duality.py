"""
Value functions of the four parametric families and numerical checks of the
duality identities, weak-duality gaps and (mp)KKT systems that tie them together.
"""
import logging
from typing import Dict, Optional

import numpy as np

from . import config
from .cones import cone_margin
from .data_models import (AnalysisOptions, MpcloInstance, ResidualReport, SolverOptions, ValueQuery,
                          ValueVariant, WeakDualityGaps)
from .errors import InfeasibleWitness, NotSolvable
from .model import assemble, check_param
from .solver import solve

logger = logging.getLogger(__name__)

VALUE_FAMILY = {
    'PStar': 'Primal',
    'DStar': 'Dual',
    'DBarStar': 'NsDualOfPrimal',
    'PBarStar': 'NsDualOfDual',
}


def _solver_opts(opts) -> SolverOptions:
    if isinstance(opts, AnalysisOptions):
        return opts.solver
    return opts or SolverOptions()


def value(instance: MpcloInstance, variant: ValueVariant, param, opts=None) -> ValueQuery:
    """
    p*(u), d*(v) as minimization values; d-bar*(u), p-bar*(v) in their max form,
    obtained from the min-form solve plus the constant term.
    """
    if variant not in VALUE_FAMILY:
        raise ValueError(f"Unknown value variant {variant!r}")
    param = check_param(instance, param)
    problem = assemble(instance, VALUE_FAMILY[variant], param)
    result = solve(problem, _solver_opts(opts))
    if not result.optimal:
        raise NotSolvable(f"{variant}({np.array2string(param, precision=6)}) is not solvable: {result.status}",
                          status=result.status, check=variant)
    val = result.objective
    if variant == 'DBarStar':
        val = float(instance.d @ (instance.c + instance.M.T @ param)) - val
    elif variant == 'PBarStar':
        val = float(instance.c @ (instance.d + instance.M.T @ param)) - val
    return ValueQuery(variant=variant, param=param, value=float(val), witness=result)


def coupling_value(instance: MpcloInstance, u, v) -> float:
    """<c + M^T u, d + M^T v>"""
    u, v = check_param(instance, u), check_param(instance, v)
    return float((instance.c + instance.M.T @ u) @ (instance.d + instance.M.T @ v))


def duality_identity_residual(instance: MpcloInstance, u, v, opts=None) -> float:
    """p*(u) + d*(v) - <c + M^T u, d + M^T v>; zero when v is in Phi(u)."""
    p_star = value(instance, 'PStar', u, opts).value
    d_star = value(instance, 'DStar', v, opts).value
    return p_star + d_star - coupling_value(instance, u, v)


def duality_identity_report(instance: MpcloInstance, u, v, opts=None, tol: Optional[float] = None) -> ResidualReport:
    """The identity residual plus the no-gap residuals |p* - d-bar*| and |d* - p-bar*|."""
    p_star = value(instance, 'PStar', u, opts).value
    d_star = value(instance, 'DStar', v, opts).value
    d_bar = value(instance, 'DBarStar', u, opts).value
    p_bar = value(instance, 'PBarStar', v, opts).value
    tol = (config.VERIFY_TOL if tol is None else tol) * (1.0 + abs(p_star))
    return ResidualReport(residuals={
        'identity_residual': p_star + d_star - coupling_value(instance, u, v),
        'primal_no_gap': abs(p_star - d_bar),
        'dual_no_gap': abs(d_star - p_bar),
    }, tolerance=tol)


def _witness_tol(instance: MpcloInstance, tol: Optional[float]) -> float:
    scale = max(float(np.max(np.abs(instance.c))), float(np.max(np.abs(instance.d))), 1.0)
    return (config.VERIFY_TOL if tol is None else tol) * scale


def _cut_residuals(instance: MpcloInstance, x, y, u, v) -> Dict[str, float]:
    """Residuals of x in the cut set of v and of y in the cut set of u."""
    inst = instance
    return {
        'primal_eq': float(np.max(np.abs(inst.A @ x - inst.b), initial=0.0)),
        'primal_param': float(np.max(np.abs(inst.M @ x - (inst.M @ inst.d + inst.gram @ v)), initial=0.0)),
        'primal_cone': max(0.0, -cone_margin(x, inst.space)),
        'dual_eq': float(np.max(np.abs(inst.B @ y - inst.a), initial=0.0)),
        'dual_param': float(np.max(np.abs(inst.M @ y - (inst.M @ inst.c + inst.gram @ u)), initial=0.0)),
        'dual_cone': max(0.0, -cone_margin(y, inst.space)),
    }


def weak_duality_gaps(instance: MpcloInstance, u, v, x, y, tol: Optional[float] = None) -> WeakDualityGaps:
    """
    gap_bar = <c+M^T u, d+M^T v> - <c, d+M^T v - x> - <d, c+M^T u - y>
    gap     = <c+M^T u, x> + <d+M^T v, y> - <c+M^T u, d+M^T v>
    x must lie in the cut set of v and y in the cut set of u.
    """
    u, v = check_param(instance, u), check_param(instance, v)
    x, y = np.asarray(x, dtype=float).ravel(), np.asarray(y, dtype=float).ravel()
    limit = _witness_tol(instance, tol)
    for name, residual in _cut_residuals(instance, x, y, u, v).items():
        if residual > limit:
            witness = 'x' if name.startswith('primal') else 'y'
            raise InfeasibleWitness(f"{witness} violates {name} (residual {residual:.3e})", check=name,
                                    details={'residual': residual})
    cu = instance.c + instance.M.T @ u
    dv = instance.d + instance.M.T @ v
    coupling = float(cu @ dv)
    gap_bar = coupling - float(instance.c @ (dv - x)) - float(instance.d @ (cu - y))
    gap = float(cu @ x) + float(dv @ y) - coupling
    return WeakDualityGaps(gap_bar=gap_bar, gap=gap)


def mpkkt_residuals(instance: MpcloInstance, x, y, u, v, tol: Optional[float] = None) -> ResidualReport:
    """Residuals of the coupled feasibility-plus-complementarity system."""
    u, v = check_param(instance, u), check_param(instance, v)
    x, y = np.asarray(x, dtype=float).ravel(), np.asarray(y, dtype=float).ravel()
    residuals = _cut_residuals(instance, x, y, u, v)
    residuals['complementarity'] = abs(float(x @ y))
    return ResidualReport(residuals=residuals, tolerance=_witness_tol(instance, tol))


def objective_sum_residuals(instance: MpcloInstance, u, v, x=None, y=None,
                            tol: Optional[float] = None) -> ResidualReport:
    """
    For x in the cut set of v: <c+M^T u, x> + <c, d+M^T v - x> = <c+M^T u, d+M^T v>;
    for y in the cut set of u the symmetric sum. Either witness may be omitted.
    """
    u, v = check_param(instance, u), check_param(instance, v)
    cu = instance.c + instance.M.T @ u
    dv = instance.d + instance.M.T @ v
    coupling = float(cu @ dv)
    residuals = {}
    if x is not None:
        x = np.asarray(x, dtype=float).ravel()
        residuals['primal_sum'] = float(cu @ x) + float(instance.c @ (dv - x)) - coupling
    if y is not None:
        y = np.asarray(y, dtype=float).ravel()
        residuals['dual_sum'] = float(dv @ y) + float(instance.d @ (cu - y)) - coupling
    return ResidualReport(residuals=residuals, tolerance=_witness_tol(instance, tol) * (1.0 + abs(coupling)))


def unperturbed_kkt(instance: MpcloInstance, opts=None, tol: Optional[float] = None) -> ResidualReport:
    """KKT system and weak-duality gap of the unperturbed pair (u = v = 0)."""
    zero = np.zeros(instance.r)
    x = value(instance, 'PStar', zero, opts).witness.x
    y = value(instance, 'DBarStar', zero, opts).witness.x
    inst = instance
    gap = float(inst.c @ x) - float(inst.d @ (inst.c - y))
    report = ResidualReport(residuals={
        'primal_eq': float(np.max(np.abs(inst.A @ x - inst.b), initial=0.0)),
        'primal_cone': max(0.0, -cone_margin(x, inst.space)),
        'dual_eq': float(np.max(np.abs(inst.B @ y - inst.a), initial=0.0)),
        'dual_param': float(np.max(np.abs(inst.M @ y - inst.M @ inst.c), initial=0.0)),
        'dual_cone': max(0.0, -cone_margin(y, inst.space)),
        'complementarity': abs(float(x @ y)),
        'weak_duality_gap': gap,
    }, tolerance=_witness_tol(instance, tol))
    logger.info(f"Unperturbed KKT for {instance.name}: pass={report.passed} gap={gap:.3e}")
    return report


def transfer_check(instance: MpcloInstance, side: str, at, opts=None, tol: Optional[float] = None) -> ResidualReport:
    """
    An optimal x*(u) is optimal for the nonstandard dual at v = G^-1 M (x*(u) - d)
    (side 'dual'); symmetrically y*(v) for side 'primal'.
    """
    if side == 'dual':
        witness = value(instance, 'PStar', at, opts).witness.x
        other = np.linalg.solve(instance.gram, instance.M @ (witness - instance.d))
        cut = value(instance, 'PBarStar', other, opts).witness
        objective = instance.c
    else:
        witness = value(instance, 'DStar', at, opts).witness.x
        other = np.linalg.solve(instance.gram, instance.M @ (witness - instance.c))
        cut = value(instance, 'DBarStar', other, opts).witness
        objective = instance.d
    optimality = float(objective @ witness) - cut.objective
    tol = (config.VERIFY_TOL if tol is None else tol) * (1.0 + abs(cut.objective))
    return ResidualReport(residuals={'transfer_optimality': optimality}, tolerance=tol)
