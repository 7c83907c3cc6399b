"""
Invariancy-region decomposition of a parameter window.

Samples are classified on a grid (optionally in a process pool), grouped into
linearity runs/components (constant map value), nonlinearity runs/components
(varying single-valued map) and transition faces; 1-D transition points are then
bracketed by bisection.
"""
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from .data_models import (AnalysisOptions, CheckResult, MapSample, MpcloInstance, Region, RegionDecomposition,
                          Signature, ThetaMembership, Transition, VerificationReport)
from .duality import duality_identity_report, mpkkt_residuals, transfer_check, value
from .errors import MpcloError, UnsupportedDimension, ValidationError, WindowOutsideTheta
from .mappings import (map_eval, map_membership, normalize_side, recession_direction, support_directions,
                       theta_membership, theta_support, to_parameter)

logger = logging.getLogger(__name__)

Sample = Tuple[Signature, Optional[MapSample]]

# Rotation used to test whether a support argmax of Theta is an exposed vertex
_VERTEX_ROTATION = 1e-2
# Perpendicular RMS spread, in grid spacings, still counted as a lower-dimensional face
_FACE_SPREAD = 0.35
_CONVEXITY_PAIRS = 5
_DUALITY_SAMPLES = 5


# --- Sample classification ---

def quantize(values: Sequence[float], quant: float) -> Tuple[int, ...]:
    out = []
    for x in values:
        if math.isnan(x):
            out.append(-sys.maxsize)
        elif math.isinf(x):
            out.append(sys.maxsize if x > 0 else -sys.maxsize + 1)
        else:
            out.append(int(round(x / quant)))
    return tuple(out)


def _signature_of(instance: MpcloInstance, side: str, point: np.ndarray, opts: AnalysisOptions,
                  theta: Optional[ThetaMembership] = None) -> Sample:
    """Signature plus map sample; raises the first solver error met."""
    theta = theta or theta_membership(instance, side, point, opts)
    if theta.status == 'Outside':
        return Signature(theta_status='Outside'), None
    sample = map_eval(instance, side, point, opts, theta=theta)
    if sample.status == 'Undefined':
        return Signature(theta_status=theta.status, map_status='Undefined'), sample
    if sample.status == 'Point':
        return Signature(theta_status=theta.status, map_status='Point',
                         value_key=quantize(sample.point, opts.quant), singleton=True), sample
    profile = [h for _, h in sorted(sample.support, key=lambda gh: tuple(gh[0]))]
    return Signature(theta_status=theta.status, map_status='Set', value_key=quantize(profile, opts.quant)), sample


def sample_point(instance: MpcloInstance, side: str, point, opts: Optional[AnalysisOptions] = None) -> Sample:
    """
    Signature plus the map sample behind it. A solver error triggers one retry with
    the solver tolerances loosened by opts.retry_relax; a second failure becomes an
    Unclassified marker.
    """
    opts = opts or AnalysisOptions()
    point = np.atleast_1d(np.asarray(point, dtype=float))
    try:
        return _signature_of(instance, side, point, opts)
    except MpcloError as e:
        logger.debug(f"Sample at {point} failed, retrying with looser tolerances: {e}")
    loose = replace(opts, solver=opts.solver.relaxed(opts.retry_relax))
    try:
        theta = theta_membership(instance, side, point, loose)
    except MpcloError as e:
        logger.warning(f"Theta membership failed at {point}: {e}")
        return Signature(theta_status='Unclassified'), None
    try:
        return _signature_of(instance, side, point, loose, theta=theta)
    except MpcloError as e:
        logger.warning(f"Map evaluation failed at {point}: {e}")
        return Signature(theta_status=theta.status, map_status='Unclassified'), None


def is_unclassified(sig: Signature) -> bool:
    return sig.theta_status == 'Unclassified' or sig.map_status == 'Unclassified'


def classify_sample(instance: MpcloInstance, side: str, point, opts: Optional[AnalysisOptions] = None) -> Signature:
    return sample_point(instance, side, point, opts)[0]


def _classify_task(task) -> Sample:
    instance, side, point, opts = task
    return sample_point(instance, side, point, opts)


def classify_points(instance: MpcloInstance, side: str, points: Sequence, opts: AnalysisOptions) -> List[Sample]:
    """Classifies every point, in input order; fans out over opts.jobs worker processes."""
    tasks = [(instance, side, tuple(np.atleast_1d(p)), opts) for p in points]
    if opts.jobs > 1 and len(tasks) > 1:
        chunksize = max(1, len(tasks) // (4 * opts.jobs))
        logger.info(f"Classifying {len(tasks)} samples with {opts.jobs} workers")
        with ProcessPoolExecutor(max_workers=opts.jobs) as executor:
            return list(executor.map(_classify_task, tasks, chunksize=chunksize))
    return [_classify_task(task) for task in tasks]


def _is_point(sig: Signature) -> bool:
    return sig.member and sig.map_status == 'Point'


def affine_dimension(points: np.ndarray, tol: float) -> int:
    """Number of principal RMS spreads above tol."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[0] <= 1:
        return 0
    centered = points - points.mean(axis=0)
    spreads = np.linalg.svd(centered, compute_uv=False) / math.sqrt(points.shape[0])
    return int(np.sum(spreads > tol))


def _bbox(points: Sequence[Tuple[float, ...]]) -> Tuple[Tuple[float, float], ...]:
    arr = np.asarray(points, dtype=float)
    return tuple((float(lo), float(hi)) for lo, hi in zip(arr.min(axis=0), arr.max(axis=0)))


def _window_diameter(window) -> float:
    return float(math.sqrt(sum((b - a) ** 2 for a, b in window)))


def _check_grid(window, grid) -> Tuple[Tuple[Tuple[float, float], ...], Tuple[int, ...]]:
    window = tuple((float(a), float(b)) for a, b in window)
    grid = tuple(int(n) for n in np.atleast_1d(grid))
    if len(window) not in (1, 2):
        raise UnsupportedDimension(f"Decomposition supports r in {{1, 2}}, got {len(window)}", check="dimension")
    if len(grid) == 1 and len(window) == 2:
        grid = grid * 2
    if len(grid) != len(window):
        raise ValidationError(f"Grid {grid} does not match window of dimension {len(window)}", check="grid")
    if any(n < 3 for n in grid):
        raise ValidationError(f"Grid needs at least 3 samples per axis, got {grid}", check="grid")
    if any(not a < b for a, b in window):
        raise ValidationError(f"Window {window} has an empty axis", check="window")
    return window, grid


def decompose(instance: MpcloInstance, side: str, window, grid, opts: Optional[AnalysisOptions] = None) -> RegionDecomposition:
    """Invariancy regions of Theta_D (side 'dual') or Theta_P (side 'primal') inside a window."""
    side, opts = normalize_side(side), opts or AnalysisOptions()
    window, grid = _check_grid(window, grid)
    if len(window) != instance.r:
        raise UnsupportedDimension(f"Window has dimension {len(window)} but r={instance.r}", check="dimension")
    logger.info(f"Decomposing {instance.name} side={side} window={window} grid={grid}")
    if instance.r == 1:
        decomposition = _decompose_1d(instance, side, window, grid, opts)
    else:
        decomposition = _decompose_2d(instance, side, window, grid, opts)
    for i, region in enumerate(decomposition.regions):
        region.region_id = i
    counts = {kind: len(decomposition.of_kind(kind)) for kind in
              ('Linearity', 'Nonlinearity', 'TransitionFace', 'OutsideTheta', 'Unclassified')}
    logger.info(f"Decomposition of {instance.name}: {counts}, {len(decomposition.transitions)} transitions")
    return decomposition


# --- One parameter ---

class _Run:
    def __init__(self, kind: str, start: int, end: int, key=None):
        self.kind, self.start, self.end, self.key = kind, start, end, key
        self.region: Optional[Region] = None


def _runs_1d(samples: List[Sample]) -> List[_Run]:
    """Maximal Outside runs, same-key Point runs of length >= 2, and varying Point runs of length >= 2."""
    runs: List[_Run] = []
    n, i = len(samples), 0
    while i < n:
        sig = samples[i][0]
        if sig.theta_status == 'Outside':
            j = i
            while j + 1 < n and samples[j + 1][0].theta_status == 'Outside':
                j += 1
            runs.append(_Run('OutsideTheta', i, j))
            i = j + 1
        elif _is_point(sig):
            j = i
            while j + 1 < n and _is_point(samples[j + 1][0]):
                j += 1
            runs.extend(_split_point_block(samples, i, j))
            i = j + 1
        else:
            i += 1
    return runs


def _split_point_block(samples: List[Sample], start: int, end: int) -> List[_Run]:
    runs, pending, i = [], [], start
    while i <= end:
        key = samples[i][0].value_key
        j = i
        while j + 1 <= end and samples[j + 1][0].value_key == key:
            j += 1
        if j > i:
            runs.extend(_flush_varying(pending))
            pending = []
            runs.append(_Run('Linearity', i, j, key))
        else:
            pending.append(i)
        i = j + 1
    runs.extend(_flush_varying(pending))
    return runs


def _flush_varying(indices: List[int]) -> List[_Run]:
    return [_Run('Nonlinearity', indices[0], indices[-1])] if len(indices) >= 2 else []


def _run_predicate(run: _Run) -> Callable[[Signature], bool]:
    if run.kind == 'OutsideTheta':
        return lambda sig: sig.theta_status == 'Outside'
    if run.kind == 'Linearity':
        return lambda sig: _is_point(sig) and sig.value_key == run.key
    return _is_point


def _bisect(inside: Callable[[float], bool], good: float, bad: float, tol: float) -> float:
    """Last point on the `good` side of the boundary between good and bad, to within tol."""
    while abs(bad - good) > tol:
        mid = 0.5 * (good + bad)
        if inside(mid):
            good = mid
        else:
            bad = mid
    return good


def _continuity_flags(values: np.ndarray, opts: AnalysisOptions) -> List[int]:
    """Indices i where |values[i+1] - values[i]| jumps against its neighbouring differences."""
    diffs = np.abs(np.diff(values))
    flagged = []
    for i, diff in enumerate(diffs):
        neighbours = [diffs[k] for k in (i - 1, i + 1) if 0 <= k < diffs.size]
        if neighbours and diff > opts.cont_factor * max(float(np.median(neighbours)), opts.quant):
            flagged.append(i)
    return flagged


def _decompose_1d(instance, side, window, grid, opts) -> RegionDecomposition:
    (lo, hi), = window
    xs = np.linspace(lo, hi, grid[0])
    samples = classify_points(instance, side, xs, opts)
    if not any(sig.member for sig, _ in samples):
        raise WindowOutsideTheta(f"No sample of {window} lies in Theta", check="window")

    memo: Dict[float, Sample] = {float(x): s for x, s in zip(xs, samples)}

    def lookup(x: float) -> Sample:
        if x not in memo:
            memo[x] = sample_point(instance, side, [x], opts)
        return memo[x]

    runs = _runs_1d(samples)
    regions: List[Region] = []
    transitions: List[Transition] = []
    located: List[Tuple[Transition, _Run, _Run, Region]] = []
    covered = set()
    for run in runs:
        region = _run_region(run, xs, samples, side, opts)
        run.region = region
        regions.append(region)
        covered.update(range(run.start, run.end + 1))

    # Leftover samples before the first run, between runs and after the last run
    boundaries = [(None, runs[0])] if runs else []
    boundaries += list(zip(runs, runs[1:]))
    boundaries += [(runs[-1], None)] if runs else []
    for left, right in boundaries:
        first = left.end + 1 if left else 0
        last = right.start - 1 if right else len(xs) - 1
        leftovers = list(range(first, last + 1))
        if left is None or right is None:
            if leftovers:
                regions.append(_leftover_region(leftovers, xs, samples, side, "samples at the window edge"))
                covered.update(leftovers)
            continue
        region, transition = _transition_1d(instance, side, left, right, xs, samples, leftovers, lookup, opts)
        regions.append(region)
        transitions.append(transition)
        located.append((transition, left, right, region))
        covered.update(leftovers)

    missing = [i for i in range(len(xs)) if i not in covered]
    if missing:
        regions.append(_leftover_region(missing, xs, samples, side, "samples outside every run"))
    regions.sort(key=lambda reg: reg.bbox[0][0] if reg.bbox else float(reg.samples[0][0]))
    decomposition = RegionDecomposition(side=side, window=window, grid=grid, regions=regions,
                                        transitions=transitions,
                                        unclassified_samples=sum(is_unclassified(sig) for sig, _ in samples))
    for i, region in enumerate(regions):
        region.region_id = i
    for transition, left, right, region in located:
        transition.left_region = left.region.region_id
        transition.right_region = right.region.region_id
        transition.region_id = region.region_id
    return decomposition


def _run_region(run: _Run, xs, samples, side, opts) -> Region:
    points = [(float(xs[i]),) for i in range(run.start, run.end + 1)]
    mid = (run.start + run.end) // 2
    region = Region(side=side, kind=run.kind, samples=points, bbox=_bbox(points), value_key=run.key,
                    representative=samples[mid][1])
    if run.kind == 'Nonlinearity':
        values = np.array([samples[i][1].point[0] for i in range(run.start, run.end + 1)])
        flags = _continuity_flags(values, opts)
        if flags:
            region.kind = 'Unclassified'
            region.note = f"continuity check failed near {points[flags[0]][0]:.6g}"
            logger.warning(f"Nonlinearity run {region.bbox} has a jump near {points[flags[0]][0]:.6g}")
    return region


def _leftover_region(indices: List[int], xs, samples, side, note: str) -> Region:
    points = [(float(xs[i]),) for i in indices]
    statuses = sorted({str(samples[i][0].map_status or samples[i][0].theta_status) for i in indices})
    return Region(side=side, kind='Unclassified', samples=points, bbox=_bbox(points),
                  representative=samples[indices[len(indices) // 2]][1], note=f"{note}: {', '.join(statuses)}")


def _snap(x: np.ndarray, tol: float) -> np.ndarray:
    return np.round(np.asarray(x, dtype=float) / tol) * tol


def _transition_1d(instance, side, left: _Run, right: _Run, xs, samples, leftovers: List[int], lookup,
                   opts: AnalysisOptions) -> Tuple[Region, Transition]:
    in_left, in_right = _run_predicate(left), _run_predicate(right)

    def left_side(x: float) -> bool:
        sig = lookup(x)[0]
        return in_left(sig) and not in_right(sig)

    def right_side(x: float) -> bool:
        sig = lookup(x)[0]
        return in_right(sig) and not in_left(sig)

    left_end = _bisect(left_side, float(xs[left.end]), float(xs[left.end + 1]), opts.tol_param)
    right_start = _bisect(right_side, float(xs[right.start]), float(xs[right.start - 1]), opts.tol_param)
    midpoint = 0.5 * (left_end + right_start)
    accuracy = abs(right_start - left_end)

    # The snapped midpoint first, then any grid sample inside the locus
    candidates = [float(_snap([midpoint], opts.tol_param)[0])] + [float(xs[i]) for i in leftovers]
    location, found = midpoint, None
    for x in candidates:
        sig, sample = lookup(x)
        if sig.member and sig.map_status == 'Set':
            location, found = x, (sig, sample)
            break
    if found is None:
        found = lookup(candidates[0])
    sig, sample = found

    points = [(float(xs[i]),) for i in leftovers] or [(location,)]
    region = Region(side=side, kind='TransitionFace', samples=points, bbox=_bbox(points + [(location,)]),
                    representative=sample, dim=0)
    if sig.map_status == 'Set':
        region.value_key = sig.value_key
    elif left.kind == 'Linearity' and right.kind == 'Linearity' and left.key != right.key:
        region.note = "image inferred from the adjacent linearity regions"
    else:
        region.kind, region.dim = 'Unclassified', None
        status = sig.map_status or sig.theta_status
        region.note = f"map is {status} at the transition point"
    logger.debug(f"Transition at {location:.9g} (accuracy {accuracy:.2e}): {region.kind} {region.note}")
    return region, Transition(location=(location,), accuracy=accuracy, signature=sig)


# --- Two parameters ---

def _components(mask: np.ndarray, connectivity: int) -> List[np.ndarray]:
    structure = ndimage.generate_binary_structure(2, connectivity)
    labels, count = ndimage.label(mask, structure=structure)
    return [np.argwhere(labels == k) for k in range(1, count + 1)]


def _decompose_2d(instance, side, window, grid, opts) -> RegionDecomposition:
    axes = [np.linspace(a, b, n) for (a, b), n in zip(window, grid)]
    spacing = min((b - a) / (n - 1) for (a, b), n in zip(window, grid))
    index = [(i, j) for i in range(grid[0]) for j in range(grid[1])]
    points = [(float(axes[0][i]), float(axes[1][j])) for i, j in index]
    flat = classify_points(instance, side, points, opts)
    if not any(sig.member for sig, _ in flat):
        raise WindowOutsideTheta(f"No sample of {window} lies in Theta", check="window")
    samples = {ij: s for ij, s in zip(index, flat)}
    sigs = {ij: s[0] for ij, s in samples.items()}

    strict_tol = opts.dim_tol_rel * _window_diameter(window)
    face_tol = max(strict_tol, _FACE_SPREAD * spacing)
    assigned = np.full(grid, -1, dtype=int)
    regions: List[Region] = []

    def mask_of(pred) -> np.ndarray:
        mask = np.zeros(grid, dtype=bool)
        for ij, sig in sigs.items():
            mask[ij] = assigned[ij] < 0 and pred(sig)
        return mask

    def add(cells: np.ndarray, kind: str, **fields) -> Region:
        pts = [(float(axes[0][i]), float(axes[1][j])) for i, j in cells]
        centre = cells[len(cells) // 2]
        region = Region(side=side, kind=kind, samples=pts, bbox=_bbox(pts),
                        representative=samples[tuple(centre)][1], **fields)
        for i, j in cells:
            assigned[i, j] = len(regions)
        regions.append(region)
        return region

    def coords(cells: np.ndarray) -> np.ndarray:
        return np.array([(axes[0][i], axes[1][j]) for i, j in cells])

    for cells in _components(mask_of(lambda s: s.theta_status == 'Outside'), 1):
        add(cells, 'OutsideTheta')

    keys = sorted({sig.value_key for sig in sigs.values() if _is_point(sig)})
    for key in keys:
        for cells in _components(mask_of(lambda s: _is_point(s) and s.value_key == key), 1):
            if len(cells) >= 3 and affine_dimension(coords(cells), strict_tol) == 2:
                add(cells, 'Linearity', value_key=key)
    # Thin same-key sets (a line of samples touching only diagonally)
    for key in keys:
        for cells in _components(mask_of(lambda s: _is_point(s) and s.value_key == key), 2):
            if len(cells) >= 3:
                dim = affine_dimension(coords(cells), face_tol)
                if dim < 2:
                    add(cells, 'TransitionFace', value_key=key, dim=dim)

    for cells in _components(mask_of(lambda s: s.member and s.map_status == 'Set'), 2):
        dim = affine_dimension(coords(cells), face_tol)
        if dim < 2:
            add(cells, 'TransitionFace', dim=dim)
        else:
            add(cells, 'Unclassified', note="two-dimensional set of Set-valued samples")

    for cells in _components(mask_of(_is_point), 1):
        if len(cells) < 2:
            add(cells, 'Unclassified', note="isolated single-valued sample")
            continue
        region = add(cells, 'Nonlinearity')
        jump = _continuity_2d(cells, samples, opts)
        if jump is not None:
            region.kind = 'Unclassified'
            region.note = f"continuity check failed near {jump}"
            logger.warning(f"Nonlinearity component {region.bbox} has a jump near {jump}")

    for cells in _components(mask_of(lambda s: True), 2):
        statuses = sorted({str(sigs[tuple(c)].map_status or sigs[tuple(c)].theta_status) for c in cells})
        add(cells, 'Unclassified', note=f"unresolved samples: {', '.join(statuses)}")

    transitions = []
    for k, region in enumerate(regions):
        if region.kind == 'TransitionFace' and region.dim == 0:
            centre = tuple(float(x) for x in np.mean(region.samples, axis=0))
            cells = np.argwhere(assigned == k)
            neighbours = _adjacent_linearity(cells, assigned, regions)
            transitions.append(Transition(location=centre, accuracy=spacing,
                                          signature=sigs[tuple(cells[0])],
                                          left_region=neighbours[0] if neighbours else None,
                                          right_region=neighbours[1] if len(neighbours) > 1 else None,
                                          region_id=k))
    for location, sig, sample in _theta_vertices(instance, side, window, opts):
        if any(np.allclose(location, reg.samples[0], atol=opts.tol_param) for reg in regions
               if reg.kind == 'TransitionFace' and reg.dim == 0):
            continue
        regions.append(Region(side=side, kind='TransitionFace', samples=[location], bbox=_bbox([location]),
                              value_key=sig.value_key, representative=sample, dim=0,
                              note="vertex of Theta"))
        transitions.append(Transition(location=location, accuracy=opts.tol_param, signature=sig,
                                      region_id=len(regions) - 1))
    return RegionDecomposition(side=side, window=window, grid=grid, regions=regions, transitions=transitions,
                               unclassified_samples=sum(is_unclassified(sig) for sig in sigs.values()))


def _continuity_2d(cells: np.ndarray, samples, opts: AnalysisOptions) -> Optional[Tuple[float, ...]]:
    """First 4-adjacent pair whose map difference jumps against the differences around it."""
    members = {tuple(c) for c in cells}
    diffs: Dict[Tuple, float] = {}
    for i, j in members:
        for nb in ((i + 1, j), (i, j + 1)):
            if nb in members:
                diffs[((i, j), nb)] = float(np.linalg.norm(samples[(i, j)][1].point - samples[nb][1].point))
    by_node: Dict[Tuple[int, int], List[float]] = {}
    for (a, b), diff in diffs.items():
        by_node.setdefault(a, []).append(diff)
        by_node.setdefault(b, []).append(diff)
    for (a, b), diff in sorted(diffs.items()):
        around = [d for node in (a, b) for d in by_node[node]]
        around.remove(diff)
        around.remove(diff)
        if around and diff > opts.cont_factor * max(float(np.median(around)), opts.quant):
            return tuple(float(x) for x in samples[a][1].at)
    return None


def _adjacent_linearity(cells: np.ndarray, assigned: np.ndarray, regions: List[Region]) -> List[int]:
    """Ids of linearity regions 8-adjacent to the cells, one per distinct value key."""
    found, keys = [], set()
    for i, j in cells:
        for di in (-1, 0, 1):
            for dj in (-1, 0, 1):
                a, b = i + di, j + dj
                if 0 <= a < assigned.shape[0] and 0 <= b < assigned.shape[1] and assigned[a, b] >= 0:
                    region = regions[assigned[a, b]]
                    if region.kind == 'Linearity' and region.value_key not in keys:
                        keys.add(region.value_key)
                        found.append(int(assigned[a, b]))
    return sorted(found)


def _theta_vertices(instance, side, window, opts: AnalysisOptions) -> List[Tuple[Tuple[float, ...], Signature, MapSample]]:
    """
    Exposed vertices of Theta inside the window whose map is Set-valued. A support
    argmax is a vertex when the argmaxes for slightly rotated directions coincide.
    """
    found: List[Tuple[Tuple[float, ...], Signature, MapSample]] = []
    seen = []
    for g in support_directions(2, opts.n_dirs):
        try:
            top = theta_support(instance, side, g, opts)
            if top.argmax is None or not np.all(np.isfinite(top.argmax)):
                continue
            rotated = []
            for angle in (-_VERTEX_ROTATION, _VERTEX_ROTATION):
                c, s = math.cos(angle), math.sin(angle)
                rotated.append(theta_support(instance, side, np.array([c * g[0] - s * g[1], s * g[0] + c * g[1]]),
                                             opts).argmax)
        except MpcloError as e:
            logger.debug(f"Theta support evaluation along {g} failed: {e}")
            continue
        if any(r is None or np.linalg.norm(r - top.argmax) > 1e3 * opts.tol_param * (1.0 + np.linalg.norm(top.argmax))
               for r in rotated):
            continue
        vertex = _snap(top.argmax, opts.tol_param)
        if not all(a <= x <= b for x, (a, b) in zip(vertex, window)):
            continue
        if any(np.allclose(vertex, other, atol=opts.tol_param) for other in seen):
            continue
        seen.append(vertex)
        sig, sample = sample_point(instance, side, vertex, opts)
        if sig.map_status == 'Set':
            found.append((tuple(float(x) for x in vertex), sig, sample))
        else:
            logger.debug(f"Vertex {vertex} of Theta has map status {sig.map_status}")
    return found


# --- Structural checks ---

def verify_decomposition(instance: MpcloInstance, decomposition: RegionDecomposition,
                         opts: Optional[AnalysisOptions] = None) -> VerificationReport:
    """Disjointness, linearity convexity, nonlinearity duality, transition hulls and recession images."""
    opts = opts or AnalysisOptions()
    rng = np.random.default_rng(opts.seed)
    report = VerificationReport()
    report.checks.append(_check_disjoint(decomposition))
    report.checks.append(_check_convexity(instance, decomposition, rng, opts))
    report.checks.append(_check_nonlinearity_duality(instance, decomposition, rng, opts))
    report.checks.append(_check_transition_hull(instance, decomposition, opts))
    report.checks.append(_check_recession(instance, decomposition, opts))
    for check in report.checks:
        log = logger.info if check.passed else logger.warning
        log(f"Check {check.name}: {'pass' if check.passed else 'FAIL'} {check.detail}")
    return report


def _check_disjoint(decomposition: RegionDecomposition) -> CheckResult:
    owner: Dict[Tuple[float, ...], int] = {}
    clashes = []
    for region in decomposition.regions:
        for point in region.samples:
            if point in owner and owner[point] != region.region_id:
                clashes.append((point, owner[point], region.region_id))
            owner[point] = region.region_id
    return CheckResult(name='disjointness', passed=not clashes,
                       detail=f"{len(owner)} samples, {len(clashes)} shared", witnesses=clashes[:5])


def _check_convexity(instance, decomposition, rng, opts) -> CheckResult:
    failures, tested = [], 0
    for region in decomposition.of_kind('Linearity'):
        if len(region.samples) < 2:
            continue
        pts = np.asarray(region.samples)
        for _ in range(_CONVEXITY_PAIRS):
            a, b = rng.choice(len(pts), size=2, replace=False)
            midpoint = 0.5 * (pts[a] + pts[b])
            sig = classify_sample(instance, decomposition.side, midpoint, opts)
            tested += 1
            if not (_is_point(sig) and sig.value_key == region.value_key):
                failures.append((region.region_id, tuple(midpoint), sig.value_key))
    return CheckResult(name='linearity_convexity', passed=not failures,
                       detail=f"{tested} midpoints, {len(failures)} off-region", witnesses=failures[:5])


def _check_nonlinearity_duality(instance, decomposition, rng, opts) -> CheckResult:
    other = 'primal' if decomposition.side == 'dual' else 'dual'
    failures, tested = [], 0
    for region in decomposition.of_kind('Nonlinearity'):
        pts = np.asarray(region.samples)
        picks = rng.choice(len(pts), size=min(_DUALITY_SAMPLES, len(pts)), replace=False)
        for k in sorted(picks):
            at = pts[k]
            try:
                image = map_eval(instance, decomposition.side, at, opts)
                back = map_eval(instance, other, to_parameter(instance, image.point, opts), opts)
            except MpcloError as e:
                failures.append((tuple(at), str(e)))
                continue
            tested += 1
            tol = 10.0 * opts.quant * (1.0 + float(np.linalg.norm(at)))
            if back.status != 'Point' or np.linalg.norm(to_parameter(instance, back.point, opts) - at) > tol:
                failures.append((tuple(at), back.status))
    return CheckResult(name='nonlinearity_duality', passed=not failures,
                       detail=f"{tested} samples mapped back, {len(failures)} failures", witnesses=failures[:5])


def _check_transition_hull(instance, decomposition, opts) -> CheckResult:
    failures, tested = [], 0
    by_id = {region.region_id: region for region in decomposition.regions}
    for transition in decomposition.transitions:
        left, right = by_id.get(transition.left_region), by_id.get(transition.right_region)
        if not (left and right and left.kind == right.kind == 'Linearity' and left.value_key != right.value_key):
            continue
        if left.representative is None or right.representative is None:
            continue
        midpoint = 0.5 * (left.representative.point + right.representative.point)
        try:
            member, residual = map_membership(instance, decomposition.side, transition.location, midpoint, opts)
        except MpcloError as e:
            member, residual = False, str(e)
        tested += 1
        if not member:
            failures.append((transition.location, tuple(midpoint), residual))
    return CheckResult(name='transition_hull', passed=not failures,
                       detail=f"{tested} transition points, {len(failures)} failures", witnesses=failures[:5])


def _touches_window(region: Region, window) -> bool:
    return any(np.isclose(lo, a) or np.isclose(hi, b) for (lo, hi), (a, b) in zip(region.bbox, window))


def _check_recession(instance, decomposition, opts) -> CheckResult:
    other = 'primal' if decomposition.side == 'dual' else 'dual'
    centre = np.array([0.5 * (a + b) for a, b in decomposition.window])
    failures, tested = [], 0
    for region in decomposition.of_kind('Linearity'):
        if region.representative is None or not _touches_window(region, decomposition.window):
            continue
        h = np.mean(region.samples, axis=0) - centre
        if not np.any(np.abs(h) > opts.tol_param):
            continue
        try:
            recedes, _ = recession_direction(instance, decomposition.side, h / np.linalg.norm(h), opts)
            if not recedes:
                continue
            image = map_eval(instance, other, to_parameter(instance, region.representative.point, opts), opts)
        except MpcloError as e:
            failures.append((region.region_id, str(e)))
            continue
        tested += 1
        if image.status != 'Set':
            failures.append((region.region_id, image.status))
    return CheckResult(name='recession_transition', passed=not failures,
                       detail=f"{tested} unbounded linearity regions, {len(failures)} failures",
                       witnesses=failures[:5])


# --- Sampled identity checks ---

_SAMPLE_CHECKS = ('duality_identity', 'map_membership', 'round_trip', 'mpkkt', 'solution_transfer')


def _as_candidate(instance: MpcloInstance, param: np.ndarray, opts: AnalysisOptions) -> np.ndarray:
    return param if opts.gram_mode == 'correct' else instance.gram @ param


def verify_samples(instance: MpcloInstance, samples: int, opts: Optional[AnalysisOptions] = None,
                   box: float = 2.0) -> VerificationReport:
    """
    Draws `samples` seeded parameters per side from [-box, box]^r and, at each
    interior one, checks the duality identity, membership of the map value, the
    round trip through the opposite map, the mpKKT residuals and optimal-solution
    transfer. Points outside Theta or with an undefined map are skipped.
    """
    opts = opts or AnalysisOptions()
    rng = np.random.default_rng(opts.seed)
    tested = {name: 0 for name in _SAMPLE_CHECKS}
    failures: Dict[str, list] = {name: [] for name in _SAMPLE_CHECKS}
    for side in ('dual', 'primal'):
        other = 'primal' if side == 'dual' else 'dual'
        for at in rng.uniform(-box, box, size=(samples, instance.r)):
            try:
                theta = theta_membership(instance, side, at, opts)
                if theta.status != 'Interior':
                    continue
                sample = map_eval(instance, side, at, opts, theta=theta)
            except MpcloError as e:
                logger.warning(f"Skipping {side} sample {at}: {e}")
                continue
            if sample.status == 'Undefined':
                continue
            image = to_parameter(instance, sample.point, opts)
            u, v = (at, image) if side == 'dual' else (image, at)

            def record(name: str, run: Callable[[], Tuple[bool, object]]):
                tested[name] += 1
                try:
                    ok, detail = run()
                except MpcloError as e:
                    ok, detail = False, str(e)
                if not ok:
                    failures[name].append((side, tuple(at), detail))

            def identity():
                report = duality_identity_report(instance, u, v, opts, tol=opts.verify_tol)
                return report.passed, report.failing()

            def kkt():
                x = value(instance, 'PBarStar', v, opts).witness.x
                y = value(instance, 'DBarStar', u, opts).witness.x
                report = mpkkt_residuals(instance, x, y, u, v, tol=opts.verify_tol)
                return report.passed, report.failing()

            def transfer():
                report = transfer_check(instance, side, at, opts, tol=opts.verify_tol)
                return report.passed, report.residuals

            record('duality_identity', identity)
            record('map_membership', lambda: map_membership(instance, side, at, sample.point, opts))
            record('round_trip', lambda: map_membership(instance, other, image, _as_candidate(instance, at, opts), opts))
            record('mpkkt', kkt)
            record('solution_transfer', transfer)

    report = VerificationReport()
    for name in _SAMPLE_CHECKS:
        report.checks.append(CheckResult(name=name, passed=not failures[name],
                                         detail=f"{tested[name]} samples, {len(failures[name])} failures",
                                         witnesses=failures[name][:5]))
    for check in report.checks:
        log = logger.info if check.passed else logger.warning
        log(f"Check {check.name}: {'pass' if check.passed else 'FAIL'} {check.detail}")
    return report
