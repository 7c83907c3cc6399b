"""
Instance construction, validation of the orthogonality/direct-sum/Gram
assumptions, basis completion and assembly of the four parametric families.
"""
import logging
from typing import Dict, List, Optional, Sequence

import numpy as np
import scipy.linalg

from . import config
from .cones import ConeSpec
from .data_models import Family, MpcloInstance, StandardProblem, ValidationReport
from .errors import (DimensionMismatch, OrthogonalityViolation, ParamDimensionMismatch,
                     SingularGram, ValidationError)

logger = logging.getLogger(__name__)

FAMILIES = ('Primal', 'Dual', 'NsDualOfPrimal', 'NsDualOfDual')
MUTATION_KINDS = ('orthogonality', 'rank', 'gram')


def orth_tol_for(*matrices: np.ndarray) -> float:
    scale = max((float(np.max(np.abs(m), initial=0.0)) for m in matrices), default=0.0)
    return config.ORTH_TOL_REL * (1.0 + scale)


def matrix_rank(X: np.ndarray, rank_tol_rel: Optional[float] = None) -> int:
    """Rank by column-pivoted QR with threshold rank_tol_rel * |R_00|."""
    if X.size == 0:
        return 0
    rank_tol_rel = config.RANK_TOL_REL if rank_tol_rel is None else rank_tol_rel
    R, _ = scipy.linalg.qr(X.T, mode='r', pivoting=True)
    diag = np.abs(np.diag(R))
    if diag.size == 0 or diag[0] == 0.0:
        return 0
    return int(np.sum(diag > rank_tol_rel * diag[0]))


def _as_rows(X, q: int, name: str) -> np.ndarray:
    X = np.asarray(X if X is not None else np.zeros((0, q)), dtype=float)
    if X.ndim == 1:
        X = X.reshape(1, -1) if X.size else X.reshape(0, q)
    if X.ndim != 2 or X.shape[1] != q:
        raise DimensionMismatch(f"{name} has shape {X.shape}, expected (*, {q})", check=f"{name}_shape")
    return X


def complete_basis(A, M=None, orth_tol: Optional[float] = None) -> np.ndarray:
    """
    Returns B with orthonormal rows spanning the orthogonal complement of
    R(A^T) + R(M^T). The sign of each row is fixed so its largest entry is positive.
    """
    A = np.asarray(A, dtype=float)
    q = A.shape[1]
    M = _as_rows(M, q, 'M')
    orth_tol = orth_tol_for(A, M) if orth_tol is None else orth_tol
    if A.size and M.size:
        residual = float(np.max(np.abs(A @ M.T)))
        if residual > orth_tol:
            raise OrthogonalityViolation(f"A M^T is not zero (max residual {residual:.3e})",
                                         check="orthogonality_AM", details={'residual': residual})
    stacked = np.vstack([A, M])
    if stacked.shape[0] == 0:
        return np.eye(q)
    basis = scipy.linalg.null_space(stacked, rcond=config.RANK_TOL_REL).T
    for i, row in enumerate(basis):
        if row[np.argmax(np.abs(row))] < 0:
            basis[i] = -row
    logger.debug(f"Completed basis with {basis.shape[0]} rows for q={q}")
    return basis.reshape(-1, q)


def build_instance(space: ConeSpec, A, M, c, d, B=None, name: str = "instance",
                   labels: Optional[Dict[str, str]] = None) -> MpcloInstance:
    """Checks shapes and builds an instance, completing B when it is not given."""
    q = space.total_dim
    A = _as_rows(A, q, 'A')
    M = _as_rows(M, q, 'M')
    for vec, label in ((c, 'c'), (d, 'd')):
        if np.asarray(vec, dtype=float).size != q:
            raise DimensionMismatch(f"{label} has length {np.asarray(vec).size}, expected {q}", check=f"{label}_shape")
    B = complete_basis(A, M) if B is None else _as_rows(B, q, 'B')
    return MpcloInstance(space=space, A=A, B=B, M=M, c=c, d=d, name=name, labels=dict(labels or {}))


def validate_instance(instance: MpcloInstance, orth_tol: Optional[float] = None,
                      rank_tol_rel: Optional[float] = None) -> ValidationReport:
    """
    Checks pairwise orthogonality of A, B, M, the direct-sum rank condition and
    the Gram matrix. Raises SingularGram when G is not positive definite; every
    other failure is reported in the returned report.
    """
    q, m, l, r = instance.dims
    A, B, M = instance.A, instance.B, instance.M
    orth_tol = orth_tol_for(A, B, M) if orth_tol is None else orth_tol

    residuals = {
        'orthogonality_AM': float(np.max(np.abs(A @ M.T), initial=0.0)),
        'orthogonality_AB': float(np.max(np.abs(A @ B.T), initial=0.0)),
        'orthogonality_BM': float(np.max(np.abs(B @ M.T), initial=0.0)),
    }
    failed = [name for name, value in residuals.items() if value > orth_tol]

    rank_sum = matrix_rank(A, rank_tol_rel) + matrix_rank(B, rank_tol_rel) + matrix_rank(M, rank_tol_rel)
    residuals['rank_deficit'] = float(q - rank_sum)
    if rank_sum != q:
        failed.append('rank')

    gram = instance.gram
    residuals['gram_identity'] = float(np.max(np.abs(gram - np.eye(r)), initial=0.0))
    min_eig = float(np.min(np.linalg.eigvalsh(gram))) if r else 1.0
    residuals['gram_min_eig'] = min_eig
    exact = residuals['gram_identity'] <= orth_tol

    report = ValidationReport(passed=not failed, residuals=residuals, failed_checks=failed,
                              rank_sum=rank_sum, q=q, gram=gram, assumption2_exact=exact)
    if min_eig <= orth_tol:
        report.passed = False
        report.failed_checks.append('gram')
        logger.warning(f"Gram matrix of {instance.name} is singular (min eigenvalue {min_eig:.3e})")
        raise SingularGram(f"Gram matrix M M^T is not positive definite (min eigenvalue {min_eig:.3e})",
                           check="gram", details={'report': report})
    if failed:
        logger.warning(f"Validation of {instance.name} failed: {', '.join(failed)}")
    else:
        logger.info(f"Validated {instance.name}: rank_sum={rank_sum}, assumption2_exact={exact}")
    return report


def ensure_valid(instance: MpcloInstance) -> ValidationReport:
    """validate_instance, raising on any failed check."""
    report = validate_instance(instance)
    if not report.passed:
        first = report.failed_checks[0]
        error_cls = OrthogonalityViolation if first.startswith('orthogonality') else ValidationError
        raise error_cls(f"Instance {instance.name} fails {first} "
                        f"(residual {report.residuals.get(first, report.residuals['rank_deficit']):.3e})",
                        check=first, details={'report': report})
    return report


def check_param(instance: MpcloInstance, param) -> np.ndarray:
    param = np.atleast_1d(np.asarray(param, dtype=float)).ravel()
    if param.size != instance.r:
        raise ParamDimensionMismatch(f"Parameter has length {param.size}, expected r={instance.r}",
                                     check="param_dimension")
    return param


def assemble(instance: MpcloInstance, variant: Family, param) -> StandardProblem:
    """
    Builds one of the four families in standard form min <obj, x>, E x = f, x in K.
    The nonstandard duals use the Gram-corrected right-hand sides M c + G u and M d + G v.
    """
    param = check_param(instance, param)
    inst = instance
    if variant == 'Primal':
        objective = inst.c + inst.M.T @ param
        eq_matrix, eq_rhs = inst.A, inst.b
    elif variant == 'Dual':
        objective = inst.d + inst.M.T @ param
        eq_matrix, eq_rhs = inst.B, inst.a
    elif variant == 'NsDualOfPrimal':
        objective = inst.d
        eq_matrix = np.vstack([inst.B, inst.M])
        eq_rhs = np.concatenate([inst.a, inst.M @ inst.c + inst.gram @ param])
    elif variant == 'NsDualOfDual':
        objective = inst.c
        eq_matrix = np.vstack([inst.A, inst.M])
        eq_rhs = np.concatenate([inst.b, inst.M @ inst.d + inst.gram @ param])
    else:
        raise ValueError(f"Unknown family {variant!r}; expected one of {FAMILIES}")
    return StandardProblem(objective=np.array(objective, dtype=float), eq_matrix=np.array(eq_matrix, dtype=float),
                           eq_rhs=np.array(eq_rhs, dtype=float), space=inst.space, variant=variant,
                           param=param.copy())


def perturb_instance(instance: MpcloInstance, kind: str, seed: int = 0) -> MpcloInstance:
    """Seeded assumption violations used by the mutation suite."""
    rng = np.random.default_rng(seed)
    A, B, M = instance.A.copy(), instance.B.copy(), instance.M.copy()
    if kind == 'orthogonality':
        target = A if A.shape[0] else B
        i, j = rng.integers(target.shape[0]), rng.integers(M.shape[0])
        target[i] += rng.uniform(0.5, 2.0) * M[j]
    elif kind == 'rank':
        if B.shape[0] == 0:
            raise ValueError("rank mutation needs a non-empty B")
        B = np.delete(B, rng.integers(B.shape[0]), axis=0)
    elif kind == 'gram':
        M[rng.integers(M.shape[0])] = 0.0
    else:
        raise ValueError(f"Unknown mutation kind {kind!r}; expected one of {MUTATION_KINDS}")
    return MpcloInstance(space=instance.space, A=A, B=B, M=M, c=instance.c, d=instance.d,
                         name=f"{instance.name}~{kind}{seed}")


def perpendicularity_residual(instance: MpcloInstance, param: Sequence[float]) -> float:
    """max |<M^T u, row>| over rows of A and B."""
    shift = instance.M.T @ check_param(instance, param)
    rows: List[np.ndarray] = [instance.A, instance.B]
    return float(max((np.max(np.abs(R @ shift), initial=0.0) for R in rows), default=0.0))
