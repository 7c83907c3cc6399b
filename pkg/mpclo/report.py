"""
CSV tables, SVG region maps and saved-results files for decompositions.

Everything is rendered from a SavedResults model so that `mpclo report` can
re-emit byte-identical files without re-solving.
"""
import csv
import hashlib
import logging
import math
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field

from .data_models import AnalysisOptions, MpcloInstance, RegionDecomposition
from .duality import value
from .errors import ParseError, UnsupportedDimension
from .mappings import map_eval, to_parameter

logger = logging.getLogger(__name__)

RESULTS_VERSION = 1

KIND_FILLS = {
    'Linearity': '#8ecae6',
    'Nonlinearity': '#ffb703',
    'TransitionFace': '#d62828',
    'OutsideTheta': '#e5e5e5',
    'Unclassified': '#6c757d',
}

CSV_COLUMNS = ['region_id', 'side', 'kind', 'dim', 'samples', 'bbox', 'value_key', 'witnesses',
               'location', 'accuracy', 'note']


def fmt(x: float) -> str:
    """9 significant digits, the precision used for every printed number."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return f"{x:.9g}"


def fmt_fixed(x: float) -> str:
    """Fixed 9 decimals for CLI values, e.g. -1.000000000."""
    if math.isinf(x) or math.isnan(x):
        return fmt(x)
    return f"{x:.9f}"


def fmt_vector(values: Sequence[float]) -> str:
    return "(" + ", ".join(fmt(float(x)) for x in values) + ")"


class SavedRegion(BaseModel):
    region_id: int
    kind: str
    dim: Optional[int] = None
    samples: List[List[float]]
    bbox: List[List[float]]
    value_key: Optional[List[int]] = None
    point: Optional[List[float]] = None
    support: List[Tuple[List[float], Optional[float]]] = Field(default_factory=list)
    map_status: Optional[str] = None
    note: str = ""


class SavedTransition(BaseModel):
    location: List[float]
    accuracy: float
    map_status: Optional[str] = None
    left_region: Optional[int] = None
    right_region: Optional[int] = None
    region_id: Optional[int] = None


class SavedResults(BaseModel):
    version: int = RESULTS_VERSION
    instance: str
    digest: str
    side: str
    window: List[List[float]]
    grid: List[int]
    regions: List[SavedRegion] = Field(default_factory=list)
    transitions: List[SavedTransition] = Field(default_factory=list)
    unclassified_samples: int = 0

    @property
    def r(self) -> int:
        return len(self.window)


def _finite_or_none(x: float) -> Optional[float]:
    return float(x) if np.isfinite(x) else None


def from_decomposition(decomposition: RegionDecomposition, instance_name: str, digest: str) -> SavedResults:
    regions = []
    for region in decomposition.regions:
        rep = region.representative
        regions.append(SavedRegion(
            region_id=region.region_id, kind=region.kind, dim=region.dim,
            samples=[list(p) for p in region.samples],
            bbox=[list(b) for b in region.bbox] if region.bbox else [],
            value_key=list(region.value_key) if region.value_key is not None else None,
            point=[float(x) for x in rep.point] if rep is not None and rep.point is not None else None,
            support=[([float(x) for x in g], _finite_or_none(h)) for g, h in rep.support] if rep is not None else [],
            map_status=rep.status if rep is not None else None,
            note=region.note))
    transitions = [SavedTransition(location=list(t.location), accuracy=float(t.accuracy),
                                   map_status=t.signature.map_status, left_region=t.left_region,
                                   right_region=t.right_region, region_id=t.region_id)
                   for t in decomposition.transitions]
    return SavedResults(instance=instance_name, digest=digest, side=decomposition.side,
                        window=[list(w) for w in decomposition.window], grid=list(decomposition.grid),
                        regions=regions, transitions=transitions,
                        unclassified_samples=decomposition.unclassified_samples)


def outside_results(instance_name: str, digest: str, side: str, window, grid) -> SavedResults:
    """A window with no member sample: one OutsideTheta region covering it."""
    window = [[float(a), float(b)] for a, b in window]
    return SavedResults(instance=instance_name, digest=digest, side=side, window=window,
                        grid=[int(n) for n in np.atleast_1d(grid)],
                        regions=[SavedRegion(region_id=0, kind='OutsideTheta', samples=[], bbox=window,
                                             note="no sample of the window lies in Theta")])


def save_results(results: SavedResults, path: str) -> str:
    Path(path).write_text(results.model_dump_json(indent=2) + "\n", encoding='utf-8')
    logger.info(f"Saved results for {results.instance} to {path}")
    return path


def load_results(path: str) -> SavedResults:
    try:
        return SavedResults.model_validate_json(Path(path).read_text(encoding='utf-8'))
    except OSError as e:
        raise ParseError(f"Cannot read {path}: {e}", check="parse")
    except ValueError as e:
        raise ParseError(f"Malformed results file {path}: {e}", check="parse")


# --- CSV ---

def _interval_text(region: SavedRegion) -> str:
    hi = next((h for g, h in region.support if g[0] > 0 and not any(g[1:])), None)
    lo = next((h for g, h in region.support if g[0] < 0 and not any(g[1:])), None)
    lo_text = fmt(-lo) if lo is not None else "-inf"
    hi_text = fmt(hi) if hi is not None else "inf"
    return f"[{lo_text}, {hi_text}]"


def _witness_text(region: SavedRegion) -> str:
    if region.point is None:
        return ""
    if region.map_status == 'Set' and len(region.point) == 1:
        return _interval_text(region)
    return fmt_vector(region.point)


def _bbox_text(bbox: List[List[float]]) -> str:
    return " x ".join(f"[{fmt(lo)}, {fmt(hi)}]" for lo, hi in bbox)


def regions_frame(results: SavedResults) -> pd.DataFrame:
    """One row per region; transition regions also carry the located point and its accuracy."""
    by_region = {t.region_id: t for t in results.transitions if t.region_id is not None}
    rows = []
    for region in results.regions:
        transition = by_region.get(region.region_id)
        rows.append({
            'region_id': region.region_id,
            'side': results.side,
            'kind': region.kind,
            'dim': "" if region.dim is None else region.dim,
            'samples': len(region.samples),
            'bbox': _bbox_text(region.bbox),
            'value_key': "" if region.value_key is None else ";".join(str(k) for k in region.value_key),
            'witnesses': _witness_text(region),
            'location': fmt_vector(transition.location) if transition else "",
            'accuracy': fmt(transition.accuracy) if transition else "",
            'note': region.note,
        })
    return pd.DataFrame(rows, columns=CSV_COLUMNS)


def write_csv(frame: pd.DataFrame, path: str) -> str:
    frame.to_csv(path, index=False, quoting=csv.QUOTE_MINIMAL, lineterminator='\n')
    logger.info(f"Wrote {len(frame)} rows to {path}")
    return path


def table_params(results: SavedResults) -> List[float]:
    """
    One parameter per 1-D region in window order: the sample nearest the middle
    of each linearity or nonlinearity interval and every located transition point.
    """
    if results.r != 1:
        raise UnsupportedDimension(f"Table mode needs r = 1, got r = {results.r}", check="dimension")
    params = [t.location[0] for t in results.transitions]
    for region in results.regions:
        if region.kind in ('Linearity', 'Nonlinearity') and region.samples:
            xs = np.asarray([p[0] for p in region.samples])
            params.append(float(xs[np.argmin(np.abs(xs - xs.mean()))]))
    return sorted(params)


def table_rows(instance: MpcloInstance, params: Sequence[float], opts: Optional[AnalysisOptions] = None) -> pd.DataFrame:
    """
    Parallel table for a one-parameter instance: for each u the image v = Phi(u)
    (an interval when Set-valued), the optimal y-bar*(u) and the optimal x-bar*(v)
    at the representative image point.
    """
    opts = opts or AnalysisOptions()
    if instance.r != 1:
        raise UnsupportedDimension(f"Table mode needs r = 1, got r = {instance.r}", check="dimension")
    rows = []
    for u in params:
        sample = map_eval(instance, 'dual', [u], opts)
        if sample.status == 'Undefined':
            rows.append({'xbar': "", 'v': "undefined", 'u': fmt(u), 'ybar': ""})
            continue
        if sample.status == 'Set':
            lo, hi = sample.interval()
            v_text = f"[{fmt(lo)}, {fmt(hi)}]"
        else:
            v_text = fmt(float(sample.point[0]))
        ybar = value(instance, 'DBarStar', [u], opts).witness.x
        xbar = value(instance, 'PBarStar', to_parameter(instance, sample.point, opts), opts).witness.x
        rows.append({'xbar': fmt_vector(xbar), 'v': v_text, 'u': fmt(u), 'ybar': fmt_vector(ybar)})
    return pd.DataFrame(rows, columns=['xbar', 'v', 'u', 'ybar'])


# --- SVG ---

def _stroke(region: SavedRegion) -> str:
    """Stable outline colour keyed by a hash of the region identity."""
    key = f"{region.region_id}:{region.kind}:{region.value_key}".encode('utf-8')
    return "#" + hashlib.md5(key).hexdigest()[:6]


def render_svg(results: SavedResults) -> str:
    if results.r != 2:
        raise UnsupportedDimension(f"SVG output needs a two-parameter decomposition, got r = {results.r}",
                                   check="dimension")
    (x0, x1), (y0, y1) = results.window
    nx, ny = results.grid
    w, h = 640, 640
    left, top, plot = 60, 40, 520
    legend_x = left + plot + 12
    cw = plot / max(nx - 1, 1) if nx > 1 else plot
    ch = plot / max(ny - 1, 1) if ny > 1 else plot

    def px(x: float) -> float:
        return left + (x - x0) / (x1 - x0) * plot

    def py(y: float) -> float:
        return top + plot - (y - y0) / (y1 - y0) * plot

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w + 150}" height="{h}" '
        f'viewBox="0 0 {w + 150} {h}">',
        '<rect width="100%" height="100%" fill="#ffffff"/>',
        f'<text x="{left}" y="24" font-size="14" font-family="Arial">{results.instance} '
        f'({results.side} side, grid {nx}x{ny})</text>',
    ]
    for region in results.regions:
        fill, stroke = KIND_FILLS.get(region.kind, '#000000'), _stroke(region)
        parts.append(f'<g id="region-{region.region_id}" fill="{fill}" stroke="{stroke}" stroke-width="0.5">')
        if region.kind == 'TransitionFace' and region.dim == 0:
            for x, y in region.samples:
                parts.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="4"/>')
        else:
            for x, y in region.samples:
                parts.append(f'<rect x="{px(x) - cw / 2:.2f}" y="{py(y) - ch / 2:.2f}" '
                             f'width="{cw:.2f}" height="{ch:.2f}"/>')
        parts.append('</g>')
    parts.append(f'<rect x="{left}" y="{top}" width="{plot}" height="{plot}" fill="none" stroke="#000000"/>')
    for t in range(math.ceil(x0), math.floor(x1) + 1):
        parts.append(f'<line x1="{px(t):.2f}" y1="{top + plot}" x2="{px(t):.2f}" y2="{top + plot + 5}" stroke="#000000"/>')
        parts.append(f'<text x="{px(t):.2f}" y="{top + plot + 18}" font-size="11" font-family="Arial" '
                     f'text-anchor="middle">{t}</text>')
    for t in range(math.ceil(y0), math.floor(y1) + 1):
        parts.append(f'<line x1="{left - 5}" y1="{py(t):.2f}" x2="{left}" y2="{py(t):.2f}" stroke="#000000"/>')
        parts.append(f'<text x="{left - 8}" y="{py(t) + 4:.2f}" font-size="11" font-family="Arial" '
                     f'text-anchor="end">{t}</text>')
    for i, (kind, fill) in enumerate(KIND_FILLS.items()):
        y = top + 20 * i
        parts.append(f'<rect x="{legend_x}" y="{y}" width="12" height="12" fill="{fill}" stroke="#000000"/>')
        parts.append(f'<text x="{legend_x + 18}" y="{y + 10}" font-size="11" font-family="Arial">{kind}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_svg(results: SavedResults, path: str) -> str:
    Path(path).write_text(render_svg(results), encoding='utf-8')
    logger.info(f"Wrote SVG for {results.instance} to {path}")
    return path


def emit_report(results: SavedResults, kind: str, path: str) -> str:
    """Writes the region table ('csv') or the region map ('svg') of saved results to path."""
    if kind == 'csv':
        return write_csv(regions_frame(results), path)
    if kind == 'svg':
        return write_svg(results, path)
    raise ValueError(f"Unknown report format {kind!r}")


def summary(results: SavedResults) -> Dict[str, int]:
    counts: Dict[str, int] = {kind: 0 for kind in KIND_FILLS}
    for region in results.regions:
        counts[region.kind] = counts.get(region.kind, 0) + 1
    counts['transitions'] = len(results.transitions)
    counts['unclassified_samples'] = results.unclassified_samples
    return counts
