"""
Desk-scale conic solver for standard-form problems.

Problems are handed to cvxopt's primal-dual path-following conelp (Nesterov-Todd
scaling, Mehrotra correction, infeasibility certificates from its embedding).
Every result is then re-certified with our own residuals so that the status we
report means the same thing for LP and SDP blocks.

cvxopt solves  min c^T x  s.t.  G x + s = h, A x = b, s in C
with C = R^l_+ x S^{n_1}_+ x ... (PSD blocks stored column-major, n^2 entries).
Our variables stay in svec coordinates; the PSD blocks are embedded with the
linear map T that turns svec(X) into vec(X).

Polyhedral optimal faces are evaluated with HiGHS (scipy.optimize.linprog), which
needs no interior point. Faces with PSD blocks are read off the base primal-dual
pair and evaluated inside that face, where the relaxed cut is no longer a sliver.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.linalg
from cvxopt import matrix, solvers
from scipy.optimize import linprog

from .cones import SQRT2, ConeSpec, Orthant, cone_margin, svec
from .data_models import FeasibilityResult, SolveResult, SolverOptions, StandardProblem, SupportResult
from .errors import MaxIterReached, NumericalTrouble
from .faces import Face, face_of_pair, reduce_by_rows

logger = logging.getLogger(__name__)

# HiGHS rejects feasibility tolerances below this
_HIGHS_MIN_TOL = 1e-10
# Residual slack granted to results cvxopt itself reports as optimal
_OPTIMAL_SLACK = 100.0


def _psd_embedding(order: int) -> np.ndarray:
    """T with T @ svec(X) = vec(X) (column-major) for symmetric X."""
    rows, cols = np.triu_indices(order)
    T = np.zeros((order * order, rows.size))
    for k, (i, j) in enumerate(zip(rows, cols)):
        if i == j:
            T[i + j * order, k] = 1.0
        else:
            T[i + j * order, k] = 1.0 / SQRT2
            T[j + i * order, k] = 1.0 / SQRT2
    return T


@dataclass
class _Layout:
    """Where each cone block and extra linear row lives inside cvxopt's z vector."""
    spec: ConeSpec
    n_orthant: int
    n_linear: int
    psd_orders: List[int]


def _conic_rows(spec: ConeSpec, cone_map: np.ndarray, cone_offset: np.ndarray,
                lin_G: Optional[np.ndarray], lin_h: Optional[np.ndarray]) -> Tuple[np.ndarray, np.ndarray, Dict, _Layout]:
    """
    Rows of G, h for the constraint cone_map @ x + cone_offset in K plus
    lin_G @ x <= lin_h. Linear rows go into the 'l' cone after the orthant blocks.
    """
    n = cone_map.shape[1]
    orth_G, orth_h, psd_G, psd_h, orders = [], [], [], [], []
    for block, sl in zip(spec.blocks, spec.slices()):
        if isinstance(block, Orthant):
            orth_G.append(-cone_map[sl])
            orth_h.append(cone_offset[sl])
        else:
            T = _psd_embedding(block.order)
            psd_G.append(-T @ cone_map[sl])
            psd_h.append(T @ cone_offset[sl])
            orders.append(block.order)
    lin_G = np.zeros((0, n)) if lin_G is None else np.atleast_2d(lin_G)
    lin_h = np.zeros(0) if lin_h is None else np.atleast_1d(lin_h)
    G = np.vstack(orth_G + [lin_G] + psd_G)
    h = np.concatenate(orth_h + [lin_h] + psd_h)
    n_orthant = sum(g.shape[0] for g in orth_G)
    dims = {'l': n_orthant + lin_G.shape[0], 'q': [], 's': orders}
    return G, h, dims, _Layout(spec, n_orthant, lin_G.shape[0], orders)


def _unpack_z(z: np.ndarray, layout: _Layout) -> Tuple[np.ndarray, np.ndarray]:
    """cvxopt's z back to (dual slack in svec coordinates, multipliers of the linear rows)."""
    orth = z[:layout.n_orthant]
    lin = z[layout.n_orthant:layout.n_orthant + layout.n_linear]
    pos = layout.n_orthant + layout.n_linear
    psd_parts = []
    for order in layout.psd_orders:
        Z = z[pos:pos + order * order].reshape((order, order), order='F')
        # Only the lower triangle of an 's' block is meaningful
        L = np.tril(Z)
        psd_parts.append(svec(L + np.tril(L, -1).T, tol=np.inf))
        pos += order * order
    parts, o, p = [], 0, 0
    for block in layout.spec.blocks:
        if isinstance(block, Orthant):
            parts.append(orth[o:o + block.dim])
            o += block.dim
        else:
            parts.append(psd_parts[p])
            p += 1
    return np.concatenate(parts), lin


def _options(opts: SolverOptions) -> Dict:
    return {
        'show_progress': False,
        'maxiters': int(opts.max_iter),
        'abstol': opts.inner_tol_factor * opts.gap_tol,
        'reltol': opts.inner_tol_factor * opts.gap_tol,
        'feastol': opts.inner_tol_factor * opts.feas_tol,
    }


def _vec(sol_entry) -> Optional[np.ndarray]:
    return None if sol_entry is None else np.array(sol_entry, dtype=float).ravel()


def _run_conelp(cost: np.ndarray, cone_map: np.ndarray, cone_offset: np.ndarray, spec: ConeSpec,
                E: np.ndarray, f: np.ndarray, opts: SolverOptions,
                lin_G: Optional[np.ndarray] = None, lin_h: Optional[np.ndarray] = None) -> Tuple[Optional[Dict], _Layout]:
    """One cvxopt call. Returns (solution dict or None on a solver exception, layout)."""
    G, h, dims, layout = _conic_rows(spec, cone_map, cone_offset, lin_G, lin_h)
    kwargs = {}
    if E.shape[0]:
        kwargs['A'] = matrix(np.asarray(E, dtype=float))
        kwargs['b'] = matrix(np.asarray(f, dtype=float))
    try:
        sol = solvers.conelp(matrix(np.asarray(cost, dtype=float)), matrix(G), matrix(h), dims,
                             options=_options(opts), **kwargs)
    except (ArithmeticError, ValueError) as e:
        logger.debug(f"cvxopt conelp raised {type(e).__name__}: {e}")
        return None, layout
    return sol, layout


def independent_rows(E: np.ndarray, f: np.ndarray, feas_tol: float) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """
    Indices of a maximal independent subset of the rows of E (column-pivoted QR).
    When the dropped rows are inconsistent, also returns a multiplier y with
    E^T y = 0 and <f, y> = 1, which certifies {E x = f} is empty.
    """
    if E.shape[0] == 0:
        return np.arange(0), None
    _, R, P = scipy.linalg.qr(E.T, mode='economic', pivoting=True)
    diag = np.abs(np.diag(R))
    rank = 0 if diag.size == 0 or diag[0] == 0.0 else int(np.sum(diag > 1e-10 * diag[0]))
    keep = np.sort(P[:rank])
    if rank == E.shape[0]:
        return keep, None
    z, *_ = np.linalg.lstsq(E, f, rcond=None)
    resid = f - E @ z
    if np.max(np.abs(resid)) > feas_tol * (1.0 + np.max(np.abs(f))):
        return keep, resid / float(resid @ resid)
    return keep, None


def _residuals(problem: StandardProblem, x: np.ndarray, mult: np.ndarray, s: np.ndarray) -> Tuple[float, float, float, float]:
    objective = float(problem.objective @ x)
    rhs_scale = 1.0 + float(np.max(np.abs(problem.eq_rhs), initial=0.0))
    obj_scale = 1.0 + float(np.max(np.abs(problem.objective), initial=0.0))
    eq_res = float(np.max(np.abs(problem.eq_matrix @ x - problem.eq_rhs), initial=0.0)) / rhs_scale
    primal_res = max(eq_res, max(0.0, -cone_margin(x, problem.space)))
    stat_res = float(np.max(np.abs(problem.eq_matrix.T @ mult + s - problem.objective))) / obj_scale
    dual_res = max(stat_res, max(0.0, -cone_margin(s, problem.space)))
    gap = abs(float(x @ s)) / (1.0 + abs(objective))
    return objective, primal_res, dual_res, gap


def _conditioning(problem: StandardProblem, *vectors: np.ndarray) -> float:
    data = 1.0 + max(float(np.max(np.abs(problem.objective), initial=0.0)),
                     float(np.max(np.abs(problem.eq_rhs), initial=0.0)),
                     float(np.max(np.abs(problem.eq_matrix), initial=0.0)))
    scale = max(float(np.max(np.abs(v), initial=0.0)) for v in vectors)
    return (scale / data) ** 2


def solve(problem: StandardProblem, opts: Optional[SolverOptions] = None) -> SolveResult:
    """
    Solves min <objective, x> s.t. eq_matrix x = eq_rhs, x in K.

    Optimal results satisfy the KKT system within feas_tol/gap_tol. Infeasible
    results carry mult with <eq_rhs, mult> = 1 and -eq_matrix^T mult in K.
    Unbounded results carry an improving feasible ray in x.

    Polyhedral problems cvxopt cannot certify are handed to HiGHS. When the
    solve still cannot be certified and some rows pin the feasible set to a
    proper face of K, the problem is solved again on that face. Such results
    set face_dim and are certified in the face's coordinates.
    """
    opts = opts or SolverOptions()
    result = _solve_in(problem, opts)
    if result.status in ('NumericalTrouble', 'MaxIter') and problem.space.is_polyhedral():
        retried = _solve_highs(problem, opts)
        if retried is not None:
            return retried
    if result.status in ('NumericalTrouble', 'MaxIter'):
        on_face = _solve_on_face(problem, opts)
        if on_face is not None:
            return on_face
    return result


def _highs_options(opts: SolverOptions) -> Dict:
    tol = max(opts.inner_tol_factor * opts.feas_tol, _HIGHS_MIN_TOL)
    return {'primal_feasibility_tolerance': tol, 'dual_feasibility_tolerance': tol}


def _solve_highs(problem: StandardProblem, opts: SolverOptions) -> Optional[SolveResult]:
    """
    The same problem over the nonnegative orthant with HiGHS. Infeasible and
    unbounded outcomes get their certificate from a second, bounded LP.
    """
    E, f, c = problem.eq_matrix, problem.eq_rhs, problem.objective
    q, m = c.size, E.shape[0]
    options = _highs_options(opts)
    res = linprog(c, A_eq=E if m else None, b_eq=f if m else None, bounds=(0, None), method='highs',
                  options=options)
    if res.status == 0:
        x = np.asarray(res.x, dtype=float)
        mult = np.asarray(res.eqlin.marginals, dtype=float) if m else np.zeros(0)
        s = c - E.T @ mult
        objective, primal_res, dual_res, gap = _residuals(problem, x, mult, s)
        certified = max(primal_res, dual_res) <= _OPTIMAL_SLACK * opts.feas_tol and gap <= _OPTIMAL_SLACK * opts.gap_tol
        result = SolveResult(status='Optimal' if certified else 'NumericalTrouble', x=x, mult=mult, s=s,
                             objective=objective, gap=gap, primal_res=primal_res, dual_res=dual_res,
                             iterations=int(getattr(res, 'nit', 0)))
        logger.debug(f"{problem.variant}({problem.param}) with HiGHS: {result}")
        return result if certified else None
    if res.status == 2 and m:
        # y with E^T y <= 0 and <f, y> = 1
        farkas = linprog(np.zeros(m), A_ub=E.T, b_ub=np.zeros(q), A_eq=f.reshape(1, -1), b_eq=[1.0],
                         bounds=(None, None), method='highs', options=options)
        if farkas.status == 0:
            mult = np.asarray(farkas.x, dtype=float)
            return SolveResult(status='Infeasible', mult=mult, s=-E.T @ mult)
    if res.status == 3:
        # Feasible direction with <c, x> <= -1, smallest in l1 norm
        ray = linprog(np.ones(q), A_ub=c.reshape(1, -1), b_ub=[-1.0], A_eq=E if m else None,
                      b_eq=np.zeros(m) if m else None, bounds=(0, None), method='highs', options=options)
        if ray.status == 0:
            return SolveResult(status='Unbounded', x=np.asarray(ray.x, dtype=float), objective=-np.inf)
    logger.debug(f"HiGHS ended with status {res.status} on {problem.variant}({problem.param}): {res.message}")
    return None


def _row_tol(problem: StandardProblem) -> float:
    return 1e-9 * (1.0 + float(np.max(np.abs(problem.eq_matrix), initial=0.0)))


def _solve_on_face(problem: StandardProblem, opts: SolverOptions) -> Optional[SolveResult]:
    face = reduce_by_rows(problem.eq_matrix, problem.eq_rhs, problem.space, _row_tol(problem))
    if face is None or face.space is None:
        return None
    inner = StandardProblem(objective=face.restrict(problem.objective), eq_matrix=problem.eq_matrix @ face.W,
                            eq_rhs=problem.eq_rhs, space=face.space, variant=problem.variant, param=problem.param)
    result = _solve_in(inner, opts)
    if result.status in ('NumericalTrouble', 'MaxIter'):
        result = _solve_in(inner, opts, capped=True)
    logger.debug(f"{problem.variant}({problem.param}) retried on a face of dimension {face.dim}: {result}")
    if result.status == 'Unbounded':
        return SolveResult(status='Unbounded', x=face.lift(result.x), objective=-np.inf,
                           iterations=result.iterations, face_dim=face.dim)
    if result.status != 'Optimal':
        return None
    x = face.lift(result.x)
    objective, primal_res, _, _ = _residuals(problem, x, result.mult, face.lift(result.s))
    return SolveResult(status='Optimal', x=x, mult=result.mult, s=face.lift(result.s), objective=objective,
                       gap=result.gap, primal_res=primal_res, dual_res=result.dual_res,
                       iterations=result.iterations, face_dim=face.dim)


def _solve_in(problem: StandardProblem, opts: SolverOptions, capped: bool = False) -> SolveResult:
    """
    One cvxopt solve, certified against the problem as given. With capped, the
    trace bound <e, x> <= trace_cap (1 + |rhs|) is added; optimal sets with
    free recession directions then stay bounded. The cap is invisible in the result as
    long as it is inactive at the optimum.
    """
    E, f, spec = problem.eq_matrix, problem.eq_rhs, problem.space
    q = spec.total_dim
    keep, certificate = independent_rows(E, f, opts.feas_tol)
    if certificate is not None:
        logger.debug(f"{problem.variant} equality system is inconsistent")
        return SolveResult(status='Infeasible', mult=certificate, s=np.zeros(q))

    lin_G = lin_h = None
    if capped:
        lin_G = spec.central().reshape(1, -1)
        lin_h = np.array([opts.trace_cap * (1.0 + float(np.max(np.abs(f), initial=0.0)))])
    sol, layout = _run_conelp(problem.objective, np.eye(q), np.zeros(q), spec, E[keep], f[keep], opts, lin_G, lin_h)
    if sol is None:
        return SolveResult(status='NumericalTrouble')
    status = sol['status']
    iterations = int(sol.get('iterations', 0))

    if status == 'primal infeasible':
        y = _vec(sol['y'])
        mult = np.zeros(E.shape[0])
        if y is not None and keep.size:
            mult[keep] = -y
        s, _ = _unpack_z(_vec(sol['z']), layout)
        logger.debug(f"{problem.variant}({problem.param}) infeasible after {iterations} iterations")
        return SolveResult(status='Infeasible', mult=mult, s=s, iterations=iterations)

    if status == 'dual infeasible':
        ray = _vec(sol['x'])
        logger.debug(f"{problem.variant}({problem.param}) unbounded after {iterations} iterations")
        return SolveResult(status='Unbounded', x=ray, objective=-np.inf, iterations=iterations)

    x = _vec(sol['x'])
    y = _vec(sol['y'])
    mult = np.zeros(E.shape[0])
    if y is not None and keep.size:
        mult[keep] = -y
    s, _ = _unpack_z(_vec(sol['z']), layout)
    objective, primal_res, dual_res, gap = _residuals(problem, x, mult, s)
    slack = _OPTIMAL_SLACK if status == 'optimal' else 1.0
    certified = (primal_res <= slack * opts.feas_tol and dual_res <= slack * opts.feas_tol
                 and gap <= slack * opts.gap_tol)
    conditioned = _conditioning(problem, x, s, mult) <= opts.cond_max

    if certified and conditioned:
        result_status = 'Optimal'
    elif not conditioned:
        result_status = 'NumericalTrouble'
    else:
        result_status = 'MaxIter' if iterations >= opts.max_iter else 'NumericalTrouble'
    result = SolveResult(status=result_status, x=x, mult=mult, s=s, objective=objective, gap=gap,
                         primal_res=primal_res, dual_res=dual_res, iterations=iterations)
    logger.debug(f"{problem.variant}({problem.param}): {result}")
    return result


def require_optimal(result: SolveResult, what: str) -> SolveResult:
    """Raise the matching error for MaxIter / NumericalTrouble results."""
    if result.status == 'MaxIter':
        raise MaxIterReached(f"{what}: iteration limit reached", check="max_iter")
    if result.status == 'NumericalTrouble':
        raise NumericalTrouble(f"{what}: solver could not certify a solution", check="numerical_trouble")
    return result


def _accept_unknown(sol: Dict, opts: SolverOptions) -> bool:
    pres = sol.get('primal infeasibility')
    dres = sol.get('dual infeasibility')
    pcost, dcost = sol.get('primal objective'), sol.get('dual objective')
    if None in (pres, dres, pcost, dcost):
        return False
    loose = np.sqrt(opts.feas_tol)
    return pres <= loose and dres <= loose and abs(pcost - dcost) <= loose * (1.0 + abs(pcost))


def check_feasibility(eq_matrix: np.ndarray, eq_rhs: np.ndarray, space: ConeSpec,
                      opts: Optional[SolverOptions] = None) -> FeasibilityResult:
    """
    Max-margin point of {z : E z = f, z in K}: max t s.t. E z = f, z - t e in K,
    t <= margin_cap, <e, z> <= trace_cap (1 + |f|). Marginal when |t| <= feas_tol.
    """
    opts = opts or SolverOptions()
    E = np.asarray(eq_matrix, dtype=float).reshape(-1, space.total_dim)
    f = np.asarray(eq_rhs, dtype=float).ravel()
    q = space.total_dim
    keep, certificate = independent_rows(E, f, opts.feas_tol)
    if certificate is not None:
        return FeasibilityResult(status='Infeasible', margin=-np.inf, certificate=certificate)

    e = space.central()
    cost = np.zeros(q + 1)
    cost[-1] = -1.0
    cone_map = np.hstack([np.eye(q), -e.reshape(-1, 1)])
    lin_G = np.zeros((2, q + 1))
    lin_G[0, -1] = 1.0
    lin_G[1, :q] = e
    lin_h = np.array([opts.margin_cap, opts.trace_cap * (1.0 + float(np.max(np.abs(f), initial=0.0)))])
    E_ext = np.hstack([E[keep], np.zeros((keep.size, 1))])
    sol, _ = _run_conelp(cost, cone_map, np.zeros(q), space, E_ext, f[keep], opts, lin_G, lin_h)
    if sol is None or not (sol['status'] == 'optimal' or (sol['status'] == 'unknown' and _accept_unknown(sol, opts))):
        status = None if sol is None else sol['status']
        if space.is_polyhedral():
            retried = _feasibility_highs(E[keep], f[keep], space, opts)
            if retried is not None:
                return retried
        raise NumericalTrouble(f"Feasibility problem ended with status {status}", check="feasibility")

    xt = _vec(sol['x'])
    z, t = xt[:q], float(xt[-1])
    mult = np.zeros(E.shape[0])
    y = _vec(sol['y'])
    if y is not None and keep.size:
        mult[keep] = -y
    if abs(t) <= opts.feas_tol:
        return FeasibilityResult(status='Marginal', margin=t, point=z)
    if t > 0:
        return FeasibilityResult(status='Feasible', margin=t, point=z)
    return FeasibilityResult(status='Infeasible', margin=t, point=z, certificate=mult)


def _feasibility_highs(E: np.ndarray, f: np.ndarray, space: ConeSpec, opts: SolverOptions) -> Optional[FeasibilityResult]:
    """The max-margin LP with z = w + t e, w >= 0, solved by HiGHS. Carries no certificate."""
    q = space.total_dim
    e = space.central()
    cost = np.zeros(q + 1)
    cost[-1] = -1.0
    A_ub = np.zeros((2, q + 1))
    A_ub[0, -1] = 1.0
    A_ub[1, :q] = e
    A_ub[1, -1] = float(e @ e)
    b_ub = [opts.margin_cap, opts.trace_cap * (1.0 + float(np.max(np.abs(f), initial=0.0)))]
    E_ext = np.hstack([E, (E @ e).reshape(-1, 1)])
    bounds = [(0, None)] * q + [(None, None)]
    res = linprog(cost, A_ub=A_ub, b_ub=b_ub, A_eq=E_ext if E.shape[0] else None,
                  b_eq=f if E.shape[0] else None, bounds=bounds, method='highs', options=_highs_options(opts))
    if res.status != 0:
        logger.debug(f"HiGHS feasibility ended with status {res.status}: {res.message}")
        return None
    w, t = np.asarray(res.x[:q], dtype=float), float(res.x[-1])
    z = w + t * e
    if abs(t) <= opts.feas_tol:
        return FeasibilityResult(status='Marginal', margin=t, point=z)
    return FeasibilityResult(status='Feasible' if t > 0 else 'Infeasible', margin=t, point=z)


def face_bound(base: SolveResult, eps: float) -> float:
    return base.objective + eps * (1.0 + abs(base.objective))


def optimal_face_support(problem: StandardProblem, base: SolveResult, g: np.ndarray,
                         opts: Optional[SolverOptions] = None, eps: Optional[float] = None) -> SupportResult:
    """
    max <g, x> over {x feasible : <objective, x> <= p* + eps (1 + |p*|)}.
    Returns value +inf when the relaxed face is unbounded in direction g.

    Polyhedral problems take the relaxed cut to HiGHS. With PSD blocks the optimal
    face is first taken from the base pair and evaluated from inside, and cvxopt
    solves the relaxed cut only when that fails. A failed relaxed cut is retried
    face_retries times with eps growing by face_eps_growth.
    """
    opts = opts or SolverOptions()
    eps = opts.face_eps if eps is None else eps
    if base.status != 'Optimal':
        raise ValueError("optimal_face_support needs an Optimal base result")
    g = np.asarray(g, dtype=float).ravel()
    if not np.any(g):
        return SupportResult(value=0.0, argmax=base.x)
    polyhedral = problem.space.is_polyhedral()
    if not polyhedral:
        result = _support_inside_face(problem, base, g, opts, eps)
        if result is not None:
            return result
    relaxed = _highs_face_support if polyhedral else _relaxed_face_support
    level = eps
    for attempt in range(opts.face_retries + 1):
        result = relaxed(problem, base, g, opts, level)
        if result is not None:
            if attempt:
                logger.debug(f"Face support along {g} needed eps={level:.1e}")
            return result
        level *= opts.face_eps_growth
    raise NumericalTrouble(f"Face support solve failed up to eps={level / opts.face_eps_growth:.1e}",
                           check="face_support")


def _highs_face_support(problem: StandardProblem, base: SolveResult, g: np.ndarray, opts: SolverOptions,
                        eps: float) -> Optional[SupportResult]:
    """The relaxed cut over the nonnegative orthant with HiGHS. None when HiGHS finds no solution."""
    E, f = problem.eq_matrix, problem.eq_rhs
    res = linprog(-g, A_ub=problem.objective.reshape(1, -1), b_ub=[face_bound(base, eps)],
                  A_eq=E if E.shape[0] else None, b_eq=f if E.shape[0] else None, bounds=(0, None),
                  method='highs', options=_highs_options(opts))
    if res.status == 0:
        x = np.asarray(res.x, dtype=float)
        return SupportResult(value=float(g @ x), argmax=x)
    if res.status == 3:
        return SupportResult(value=np.inf)
    logger.debug(f"HiGHS face support ended with status {res.status}: {res.message}")
    return None


def optimal_face(problem: StandardProblem, base: SolveResult, opts: Optional[SolverOptions] = None) -> Optional[Face]:
    """Face of K holding the optimal set, from the base primal-dual pair; None without a dual slack."""
    opts = opts or SolverOptions()
    if base.x is None or base.s is None:
        return None
    tol = 100.0 * opts.feas_tol * (1.0 + float(np.max(np.abs(base.x), initial=0.0)))
    return face_of_pair(base.x, base.s, problem.space, tol)


def _support_inside_face(problem: StandardProblem, base: SolveResult, g: np.ndarray, opts: SolverOptions,
                         eps: float) -> Optional[SupportResult]:
    """
    max <g, x> with x = W (z0 + N y) ranging over the identified face: z0 solves
    the equalities on the face and N spans their null space. None when the face
    does not reproduce the equalities or the inner solve fails.
    """
    face = optimal_face(problem, base, opts)
    if face is None:
        return None
    E, f = problem.eq_matrix, problem.eq_rhs
    rhs_tol = 100.0 * opts.feas_tol * (1.0 + float(np.max(np.abs(f), initial=0.0)))
    if face.space is None:
        if np.max(np.abs(f), initial=0.0) > rhs_tol:
            return None
        return SupportResult(value=0.0, argmax=np.zeros(problem.space.total_dim))

    Ew = E @ face.W
    z0 = np.linalg.lstsq(Ew, f, rcond=None)[0] if E.shape[0] else np.zeros(face.dim)
    if np.max(np.abs(Ew @ z0 - f), initial=0.0) > rhs_tol:
        logger.debug(f"Identified face of dimension {face.dim} misses the equalities")
        return None
    N = scipy.linalg.null_space(Ew, rcond=1e-10) if E.shape[0] else np.eye(face.dim)
    if N.shape[1] == 0:
        if cone_margin(z0, face.space) < -rhs_tol:
            logger.debug("Single-point face lies outside the cone")
            return None
        x = face.lift(z0)
        return SupportResult(value=float(g @ x), argmax=x)

    slope = N.T @ face.restrict(g)
    if np.max(np.abs(slope)) <= 1e-12 * (1.0 + float(np.max(np.abs(g)))):
        # g is constant on the face
        return SupportResult(value=float(g @ face.lift(z0)), argmax=base.x)

    lin_G = lin_h = None
    tilt = N.T @ face.restrict(problem.objective)
    if np.max(np.abs(tilt)) > 1e-9 * (1.0 + float(np.max(np.abs(problem.objective)))):
        # The face is wider than the optimal set; cut it back to the relaxed level
        lin_G = tilt.reshape(1, -1)
        lin_h = np.array([face_bound(base, eps) - float(problem.objective @ face.lift(z0))])
    p = N.shape[1]
    sol, _ = _run_conelp(-slope, N, z0, face.space, np.zeros((0, p)), np.zeros(0), opts, lin_G, lin_h)
    if sol is None:
        return None
    if sol['status'] == 'dual infeasible':
        return SupportResult(value=np.inf)
    if sol['status'] == 'optimal' or (sol['status'] == 'unknown' and _accept_unknown(sol, opts)):
        x = face.lift(z0 + N @ _vec(sol['x']))
        return SupportResult(value=float(g @ x), argmax=x)
    logger.debug(f"Support inside the face ended with status {sol['status']}")
    return None


def _relaxed_face_support(problem: StandardProblem, base: SolveResult, g: np.ndarray, opts: SolverOptions,
                          eps: float) -> Optional[SupportResult]:
    """The cut <objective, x> <= face_bound in the full space. None when cvxopt gives up."""
    E, f, spec = problem.eq_matrix, problem.eq_rhs, problem.space
    q = spec.total_dim
    keep, _ = independent_rows(E, f, opts.feas_tol)
    sol, _ = _run_conelp(-g, np.eye(q), np.zeros(q), spec, E[keep], f[keep], opts,
                         problem.objective.reshape(1, -1), np.array([face_bound(base, eps)]))
    if sol is None:
        return None
    status = sol['status']
    if status == 'dual infeasible':
        return SupportResult(value=np.inf, argmax=_vec(sol['x']))
    x = _vec(sol['x'])
    if status == 'optimal' or (status == 'unknown' and _accept_unknown(sol, opts)):
        return SupportResult(value=float(g @ x), argmax=x)
    if status == 'unknown' and x is not None and _conditioning(problem, x) > opts.cond_max:
        # Iterates running off to infinity along g
        return SupportResult(value=np.inf, argmax=x)
    return None
