"""
Ambient vectorized space for products of nonnegative orthants and PSD cones.

PSD blocks are stored with the scaled upper-triangular vectorization (svec):
diagonal entries as-is, off-diagonal entries multiplied by sqrt(2), rows of
the upper triangle taken in order. The flat dot product of two svec vectors
is then the trace inner product of the matrices.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, Literal, Optional, Sequence, Tuple, Union

import numpy as np

from . import config
from .errors import AsymmetricInput, DimensionMismatch

logger = logging.getLogger(__name__)

SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class Orthant:
    """Nonnegative orthant block R^dim_+."""
    dim: int

    def __post_init__(self):
        if int(self.dim) < 1:
            raise DimensionMismatch(f"Orthant dimension must be >= 1, got {self.dim}", check="block_dimension")

    @property
    def vec_dim(self) -> int:
        return int(self.dim)

    def __str__(self):
        return f"Orthant({self.dim})"


@dataclass(frozen=True)
class Psd:
    """Cone of order x order positive semidefinite matrices, stored as svec."""
    order: int

    def __post_init__(self):
        if int(self.order) < 1:
            raise DimensionMismatch(f"PSD order must be >= 1, got {self.order}", check="block_dimension")

    @property
    def vec_dim(self) -> int:
        return int(self.order) * (int(self.order) + 1) // 2

    def __str__(self):
        return f"Psd({self.order})"


Block = Union[Orthant, Psd]


@dataclass(frozen=True)
class ConeSpec:
    """A product cone K. Every block is self-dual, so K* shares this spec."""
    blocks: Tuple[Block, ...]

    def __post_init__(self):
        object.__setattr__(self, 'blocks', tuple(self.blocks))
        if not self.blocks:
            raise DimensionMismatch("A cone needs at least one block", check="block_dimension")

    @property
    def total_dim(self) -> int:
        return sum(block.vec_dim for block in self.blocks)

    def slices(self) -> List[slice]:
        """Coordinate ranges of the blocks inside an ambient vector."""
        out, start = [], 0
        for block in self.blocks:
            out.append(slice(start, start + block.vec_dim))
            start += block.vec_dim
        return out

    def dual(self) -> 'ConeSpec':
        return self

    def central(self) -> np.ndarray:
        """The central element e: all-ones on orthant blocks, svec(I) on PSD blocks."""
        parts = []
        for block in self.blocks:
            if isinstance(block, Orthant):
                parts.append(np.ones(block.dim))
            else:
                parts.append(svec(np.eye(block.order)))
        return np.concatenate(parts)

    def is_polyhedral(self) -> bool:
        return all(isinstance(block, Orthant) for block in self.blocks)

    def __str__(self):
        return " x ".join(str(block) for block in self.blocks)


@dataclass(frozen=True)
class Membership:
    """Result of a cone membership test. margin is the exact min-entry / min-eigenvalue value."""
    status: Literal['Interior', 'Boundary', 'Outside']
    margin: float

    @property
    def violation(self) -> float:
        return max(0.0, -self.margin)

    @property
    def is_member(self) -> bool:
        return self.status != 'Outside'


def sym_tol_for(X: np.ndarray) -> float:
    return config.SYM_TOL_REL * (1.0 + (float(np.max(np.abs(X))) if X.size else 0.0))


def svec(X, tol: Optional[float] = None) -> np.ndarray:
    """Scaled upper-triangular vectorization of a symmetric matrix."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise DimensionMismatch(f"svec expects a square matrix, got shape {X.shape}", check="svec_shape")
    tol = sym_tol_for(X) if tol is None else tol
    asym = float(np.max(np.abs(X - X.T))) if X.size else 0.0
    if asym > tol:
        raise AsymmetricInput(f"Matrix is not symmetric: max|X - X^T| = {asym:.3e} > {tol:.3e}",
                              check="symmetry", details={'asymmetry': asym})
    n = X.shape[0]
    rows, cols = np.triu_indices(n)
    scale = np.where(rows == cols, 1.0, SQRT2)
    # Average the two triangles so rounding noise below tol does not bias the result
    sym = 0.5 * (X + X.T)
    return sym[rows, cols] * scale


def order_from_length(length: int) -> int:
    n = int(round((math.sqrt(8 * length + 1) - 1) / 2))
    if n * (n + 1) // 2 != length:
        raise DimensionMismatch(f"Length {length} is not a triangular number", check="smat_length")
    return n


def smat(v, order: Optional[int] = None) -> np.ndarray:
    """Exact inverse of svec."""
    v = np.asarray(v, dtype=float).ravel()
    n = order_from_length(v.size) if order is None else int(order)
    if n * (n + 1) // 2 != v.size:
        raise DimensionMismatch(f"Vector of length {v.size} does not match order {n}", check="smat_length")
    rows, cols = np.triu_indices(n)
    X = np.zeros((n, n))
    vals = np.where(rows == cols, v, v / SQRT2)
    X[rows, cols] = vals
    X[cols, rows] = vals
    return X


def _check_dim(z: np.ndarray, spec: ConeSpec) -> np.ndarray:
    z = np.asarray(z, dtype=float).ravel()
    if z.size != spec.total_dim:
        raise DimensionMismatch(f"Vector has length {z.size}, cone {spec} needs {spec.total_dim}",
                                check="cone_dimension")
    return z


def block_values(z, spec: ConeSpec) -> List[np.ndarray]:
    """Per-block spectra: entries for orthant blocks, eigenvalues for PSD blocks."""
    z = _check_dim(z, spec)
    values = []
    for block, sl in zip(spec.blocks, spec.slices()):
        if isinstance(block, Orthant):
            values.append(z[sl])
        else:
            values.append(np.linalg.eigvalsh(smat(z[sl], block.order)))
    return values


def cone_margin(z, spec: ConeSpec) -> float:
    """min over blocks of (min entry | min eigenvalue)."""
    return float(min(np.min(vals) for vals in block_values(z, spec)))


def cone_membership(z, spec: ConeSpec, tol: Optional[float] = None) -> Membership:
    tol = config.EIG_TOL if tol is None else tol
    margin = cone_margin(z, spec)
    if margin > tol:
        return Membership('Interior', margin)
    if margin < -tol:
        return Membership('Outside', margin)
    return Membership('Boundary', margin)


def project_cone(z, spec: ConeSpec) -> np.ndarray:
    """Euclidean projection onto K (entrywise clipping / eigenvalue clipping)."""
    z = _check_dim(z, spec)
    out = np.empty_like(z)
    for block, sl in zip(spec.blocks, spec.slices()):
        if isinstance(block, Orthant):
            out[sl] = np.maximum(z[sl], 0.0)
        else:
            w, V = np.linalg.eigh(smat(z[sl], block.order))
            out[sl] = svec((V * np.maximum(w, 0.0)) @ V.T, tol=np.inf)
    return out


def split_blocks(z, spec: ConeSpec) -> List[np.ndarray]:
    """Blocks of an ambient vector as flat vectors (orthant) or full matrices (PSD)."""
    z = _check_dim(z, spec)
    parts = []
    for block, sl in zip(spec.blocks, spec.slices()):
        parts.append(z[sl].copy() if isinstance(block, Orthant) else smat(z[sl], block.order))
    return parts


def join_blocks(parts: Sequence, spec: ConeSpec, tol: Optional[float] = None) -> np.ndarray:
    """Inverse of split_blocks; PSD parts are checked for symmetry."""
    if len(parts) != len(spec.blocks):
        raise DimensionMismatch(f"Expected {len(spec.blocks)} blocks, got {len(parts)}", check="block_count")
    out = []
    for block, part in zip(spec.blocks, parts):
        arr = np.asarray(part, dtype=float)
        if isinstance(block, Orthant):
            arr = arr.ravel()
            if arr.size != block.dim:
                raise DimensionMismatch(f"{block} block has {arr.size} entries", check="block_dimension")
            out.append(arr)
        else:
            if arr.ndim == 1 and arr.size == block.order ** 2:
                arr = arr.reshape(block.order, block.order)
            if arr.shape != (block.order, block.order):
                raise DimensionMismatch(f"{block} block has shape {arr.shape}", check="block_dimension")
            out.append(svec(arr, tol=tol))
    return np.concatenate(out)
