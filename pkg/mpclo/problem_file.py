"""
JSON problem files.

Rows of A, B, M and the vectors c, d are written either as flat q-vectors
(orthant-only spaces) or as lists with one entry per cone block, PSD blocks
given as full symmetric matrices (nested n x n lists or n^2 row-major numbers).
"""
import hashlib
import json
import logging
import os
from typing import Dict, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError as PydanticValidationError, model_validator

from .cones import ConeSpec, Orthant, Psd, join_blocks, split_blocks
from .data_models import MpcloInstance
from .errors import DimensionMismatch, ParseError
from .model import build_instance

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1

Number = float
Entry = Union[Number, List[Number], List[List[Number]]]


class BlockDescriptor(BaseModel):
    model_config = ConfigDict(extra='forbid')

    type: Literal['orthant', 'psd']
    dim: Optional[int] = Field(default=None, ge=1)
    order: Optional[int] = Field(default=None, ge=1)

    @model_validator(mode='after')
    def _size_given(self):
        size = self.dim if self.type == 'orthant' else self.order
        if size is None:
            raise ValueError(f"{self.type} block needs {'dim' if self.type == 'orthant' else 'order'}")
        return self

    def to_block(self):
        return Orthant(self.dim) if self.type == 'orthant' else Psd(self.order)


class ProblemFile(BaseModel):
    model_config = ConfigDict(extra='forbid')

    version: int = FORMAT_VERSION
    space: List[BlockDescriptor] = Field(min_length=1)
    A: List[List[Entry]] = Field(default_factory=list)
    M: List[List[Entry]]
    B: Optional[List[List[Entry]]] = None
    c: List[Entry]
    d: List[Entry]
    labels: Dict[str, str] = Field(default_factory=dict)

    @model_validator(mode='after')
    def _known_version(self):
        if self.version != FORMAT_VERSION:
            raise ValueError(f"Unsupported problem file version {self.version}")
        return self

    def cone(self) -> ConeSpec:
        return ConeSpec(tuple(block.to_block() for block in self.space))


def _encode_vector(entries: List, spec: ConeSpec, what: str) -> np.ndarray:
    """A flat q-vector or per-block entries to the svec ambient vector."""
    if all(isinstance(x, (int, float)) for x in entries):
        flat = np.asarray(entries, dtype=float)
        if spec.is_polyhedral():
            if flat.size != spec.total_dim:
                raise DimensionMismatch(f"{what} has {flat.size} entries, space needs {spec.total_dim}",
                                        check=f"{what}_shape")
            return flat
        if len(spec.blocks) == 1:
            return join_blocks([flat], spec)
        raise DimensionMismatch(f"{what} must list one entry per block for a space with PSD blocks",
                                check=f"{what}_shape")
    return join_blocks(entries, spec)


def _encode_rows(rows: Optional[List], spec: ConeSpec, what: str) -> Optional[np.ndarray]:
    if rows is None:
        return None
    if not rows:
        return np.zeros((0, spec.total_dim))
    return np.vstack([_encode_vector(row, spec, f"{what}[{i}]") for i, row in enumerate(rows)])


def to_instance(problem: ProblemFile, name: str = "instance") -> MpcloInstance:
    spec = problem.cone()
    return build_instance(space=spec,
                          A=_encode_rows(problem.A, spec, 'A'),
                          M=_encode_rows(problem.M, spec, 'M'),
                          c=_encode_vector(problem.c, spec, 'c'),
                          d=_encode_vector(problem.d, spec, 'd'),
                          B=_encode_rows(problem.B, spec, 'B'),
                          name=problem.labels.get('name', name),
                          labels=problem.labels)


def parse(text: str, name: str = "instance") -> MpcloInstance:
    """Problem file text to a validated-shape instance. Raises ParseError on malformed input."""
    try:
        problem = ProblemFile.model_validate_json(text)
    except PydanticValidationError as e:
        raise ParseError(f"Malformed problem file: {e.errors()[0]['msg']} at {e.errors()[0]['loc']}",
                         check="parse", details={'errors': e.errors()})
    return to_instance(problem, name)


def load(path: str) -> MpcloInstance:
    name = os.path.splitext(os.path.basename(path))[0]
    try:
        with open(path, 'r', encoding='utf-8') as f:
            text = f.read()
    except OSError as e:
        raise ParseError(f"Cannot read {path}: {e}", check="parse")
    instance = parse(text, name)
    logger.info(f"Loaded {instance} from {path}")
    return instance


def _canonical(x: float) -> float:
    # 15 significant digits absorb the smat/svec rounding, so dump(parse(text)) is a fixed point
    return float(f"{x:.15g}")


def _decode_vector(z: np.ndarray, spec: ConeSpec) -> List:
    if spec.is_polyhedral():
        return [float(x) for x in z]
    parts = []
    for block, part in zip(spec.blocks, split_blocks(z, spec)):
        if isinstance(block, Orthant):
            parts.append([float(x) for x in part])
        else:
            parts.append([[_canonical(x) for x in row] for row in part])
    return parts


def to_problem_file(instance: MpcloInstance) -> ProblemFile:
    spec = instance.space
    space = [BlockDescriptor(type='orthant', dim=b.dim) if isinstance(b, Orthant)
             else BlockDescriptor(type='psd', order=b.order) for b in spec.blocks]
    return ProblemFile(version=FORMAT_VERSION, space=space,
                       A=[_decode_vector(row, spec) for row in instance.A],
                       M=[_decode_vector(row, spec) for row in instance.M],
                       B=[_decode_vector(row, spec) for row in instance.B],
                       c=_decode_vector(instance.c, spec),
                       d=_decode_vector(instance.d, spec),
                       labels=dict(instance.labels))


def dump(instance: MpcloInstance) -> str:
    """Canonical JSON: sorted keys, B always written, PSD blocks as nested matrices."""
    data = to_problem_file(instance).model_dump(exclude_none=True)
    return json.dumps(data, sort_keys=True, indent=2) + "\n"


def save(instance: MpcloInstance, path: str) -> str:
    with open(path, 'w', encoding='utf-8') as f:
        f.write(dump(instance))
    logger.info(f"Wrote {instance.name} to {path}")
    return path


def digest(instance: MpcloInstance) -> str:
    """Content hash of the canonical form."""
    return hashlib.sha256(dump(instance).encode('utf-8')).hexdigest()[:16]


def instances_equal(first: MpcloInstance, second: MpcloInstance) -> bool:
    if first.space != second.space:
        return False
    return all(np.array_equal(getattr(first, n), getattr(second, n)) for n in ('A', 'B', 'M', 'c', 'd'))

