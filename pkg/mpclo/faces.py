"""
Faces of the product cone K.

A face is kept as an isometric basis W in svec coordinates together with the
smaller cone it copies: an orthant block keeps a subset of its coordinates, a
PSD block of order n keeps the matrices V U V^T for an orthonormal n x m basis V.
Conic problems restricted to a face are solved in the coordinates z with x = W z.
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np

from .cones import ConeSpec, Orthant, Psd, cone_margin, smat, svec

logger = logging.getLogger(__name__)


@dataclass
class Face:
    """x = W z with z in space. space is None for the zero face."""
    W: np.ndarray
    space: Optional[ConeSpec]

    @property
    def dim(self) -> int:
        return int(self.W.shape[1])

    def lift(self, z) -> np.ndarray:
        return self.W @ np.asarray(z, dtype=float)

    def restrict(self, x) -> np.ndarray:
        return self.W.T @ np.asarray(x, dtype=float)

    def compose(self, inner: 'Face') -> 'Face':
        """The face `inner`, given in this face's coordinates, in ambient coordinates."""
        return Face(W=self.W @ inner.W, space=inner.space)


def whole_cone(spec: ConeSpec) -> Face:
    return Face(W=np.eye(spec.total_dim), space=spec)


def _psd_lift(V: np.ndarray) -> np.ndarray:
    """Columns svec(V E_k V^T) over the svec unit vectors E_k of order V.shape[1]."""
    n, m = V.shape
    size = m * (m + 1) // 2
    if size == 0:
        return np.zeros((n * (n + 1) // 2, 0))
    units = np.eye(size)
    return np.column_stack([svec(V @ smat(units[k], m) @ V.T, tol=np.inf) for k in range(size)])


def face_basis(spec: ConeSpec, kept: Sequence[np.ndarray]) -> Face:
    """
    Face of K from one entry per block: a boolean mask of the kept coordinates
    for an orthant block, an orthonormal n x m basis of the kept range for a
    PSD block. Blocks that keep nothing drop out of the reduced cone.
    """
    q = spec.total_dim
    columns: List[np.ndarray] = []
    blocks = []
    for block, sl, keep in zip(spec.blocks, spec.slices(), kept):
        if isinstance(block, Orthant):
            idx = np.flatnonzero(np.asarray(keep, dtype=bool))
            part = np.zeros((q, idx.size))
            part[sl.start + idx, np.arange(idx.size)] = 1.0
            if idx.size:
                blocks.append(Orthant(int(idx.size)))
        else:
            V = np.asarray(keep, dtype=float)
            V = V.reshape(block.order, V.size // block.order)
            lift = _psd_lift(V)
            part = np.zeros((q, lift.shape[1]))
            part[sl] = lift
            if V.shape[1]:
                blocks.append(Psd(int(V.shape[1])))
        columns.append(part)
    W = np.hstack(columns) if columns else np.zeros((q, 0))
    return Face(W=W, space=ConeSpec(tuple(blocks)) if blocks else None)


def face_of_pair(x, s, spec: ConeSpec, tol: float) -> Face:
    """
    Smallest face of K holding the optimal set, read off a primal-dual pair.

    A coordinate (orthant) or eigen-direction of x (PSD) is kept when x along it
    exceeds both tol and s along it; complementary directions drop out.
    """
    x = np.asarray(x, dtype=float).ravel()
    s = np.asarray(s, dtype=float).ravel()
    kept = []
    for block, sl in zip(spec.blocks, spec.slices()):
        if isinstance(block, Orthant):
            kept.append(x[sl] > np.maximum(s[sl], tol))
        else:
            lam, Q = np.linalg.eigh(smat(x[sl], block.order))
            sigma = np.einsum('ij,ik,kj->j', Q, smat(s[sl], block.order), Q)
            kept.append(Q[:, lam > np.maximum(sigma, tol)])
    return face_basis(spec, kept)


def face_exposed_by(z, spec: ConeSpec, tol: float) -> Face:
    """Face of K orthogonal to z in K: the coordinates or eigen-directions where z vanishes."""
    z = np.asarray(z, dtype=float).ravel()
    kept = []
    for block, sl in zip(spec.blocks, spec.slices()):
        if isinstance(block, Orthant):
            kept.append(z[sl] <= tol)
        else:
            lam, Q = np.linalg.eigh(smat(z[sl], block.order))
            kept.append(Q[:, lam <= tol])
    return face_basis(spec, kept)


def reduce_by_rows(eq_matrix: np.ndarray, eq_rhs: np.ndarray, spec: ConeSpec, tol: float) -> Optional[Face]:
    """
    Face of K holding {x in K : E x = f}, found from single rows: a row with zero
    right-hand side whose coefficients (or their negatives) lie in K forces x to
    be orthogonal to it. Repeats on the reduced rows until no row exposes more.
    Returns None when the first pass exposes nothing.
    """
    E = np.asarray(eq_matrix, dtype=float).reshape(-1, spec.total_dim)
    f = np.asarray(eq_rhs, dtype=float).ravel()
    face = whole_cone(spec)
    reduced = False
    while face.space is not None:
        rows = E @ face.W
        step = None
        for row, rhs in zip(rows, f):
            if abs(rhs) > tol:
                continue
            for z in (row, -row):
                if np.max(np.abs(z), initial=0.0) > tol and cone_margin(z, face.space) >= -tol:
                    candidate = face_exposed_by(z, face.space, tol)
                    if candidate.dim < face.dim:
                        step = candidate
                        break
            if step is not None:
                break
        if step is None:
            break
        face = face.compose(step)
        reduced = True
        logger.debug(f"Row reduction: face of dimension {face.dim} in {face.space}")
    return face if reduced else None
