"""Level-set extraction, set measurement, and eigenvalue bounds.

Perimeter measurement walks the crack boundary of a pixel set (the outline
of the union of pixel squares) and then straightens staircase runs with a
deviation-bounded polyline simplification.  Corners whose turn direction
repeats are genuine corners of the set and are kept exactly, so axis-aligned
rectangles measure exactly 2h(R+S) while digitized smooth shapes lose their
staircase bias and come out within a fraction of a percent of the true
contour length.  This reporting perimeter is deliberately not the grid TV:
the two differ by O(h) and the difference is covered by the stated
tolerances wherever both appear.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import GridDomain, MultiField

__all__ = [
    "ClusterResult",
    "RatioProfile",
    "EigenBounds",
    "boundary_loops",
    "simplified_loops",
    "measure_set",
    "ratio_profile",
    "extract_cluster",
    "indicator_lift",
    "eval_h2",
    "eigen_bounds",
]

# Half-width (in vertices) of the moving-average window used to straighten
# staircase runs.  Residual staircase bias decays like 1/K^2 (about +0.2% at
# K = 5) while the inward curvature bias K^2/(24 r^2) stays negligible for
# radii above a dozen pixels.
_SMOOTH_K = 5

# Threshold grid size for best-ratio level-set selection.
_N_THRESHOLDS = 64

# Directions: index 0:+x 1:+y 2:-x 3:-y
_DX = (1, 0, -1, 0)
_DY = (0, 1, 0, -1)


def boundary_loops(mask: np.ndarray) -> list[np.ndarray]:
    """Closed crack-boundary loops of a pixel set, interior on the left.

    Vertices are integer lattice points in (x, y) = (column, row) units;
    pixel (r, c) occupies the unit square [c, c+1] x [r, r+1].  Diagonal
    pinches are split into separate loops by always taking the sharpest left
    turn, so every loop is simple.  Hole boundaries come out as their own
    loops.
    """
    mask = np.asarray(mask, dtype=bool)
    padded = np.zeros((mask.shape[0] + 2, mask.shape[1] + 2), dtype=bool)
    padded[1:-1, 1:-1] = mask

    # outgoing directed edges keyed by start corner; dir index as above
    edges: dict[tuple[int, int], list[int]] = {}

    def add(x: int, y: int, d: int) -> None:
        edges.setdefault((x, y), []).append(d)

    rs, cs = np.nonzero(mask)
    for r, c in zip(rs.tolist(), cs.tolist()):
        if not padded[r, c + 1]:       # neighbor below
            add(c, r, 0)               # bottom edge, +x
        if not padded[r + 2, c + 1]:   # neighbor above
            add(c + 1, r + 1, 2)       # top edge, -x
        if not padded[r + 1, c]:       # neighbor left
            add(c, r + 1, 3)           # left edge, -y
        if not padded[r + 1, c + 2]:   # neighbor right
            add(c + 1, r, 1)           # right edge, +y

    loops = []
    while edges:
        start = min(edges)
        d = min(edges[start])
        loop = [start]
        x, y = start
        cur = d
        _consume(edges, (x, y), cur)
        while True:
            x += _DX[cur]
            y += _DY[cur]
            if (x, y) == start:
                break
            loop.append((x, y))
            outs = edges.get((x, y))
            # prefer left turn, then straight, then right: keeps pinch loops simple
            left = (cur + 1) % 4
            right = (cur - 1) % 4
            if left in outs:
                cur = left
            elif cur in outs:
                cur = cur
            else:
                cur = right
            _consume(edges, (x, y), cur)
        loops.append(np.array(loop, dtype=float))
    return loops


def _consume(edges: dict, key: tuple[int, int], d: int) -> None:
    lst = edges[key]
    lst.remove(d)
    if not lst:
        del edges[key]


def _turns(loop: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Corner vertices of a crack loop and their turn signs (+1 left, -1 right)."""
    m = len(loop)
    prev = loop - np.roll(loop, 1, axis=0)
    nxt = np.roll(loop, -1, axis=0) - loop
    cross = prev[:, 0] * nxt[:, 1] - prev[:, 1] * nxt[:, 0]
    idx = np.nonzero(cross)[0]
    return loop[idx], np.sign(cross[idx]).astype(int)


def _smooth_chain(pts: np.ndarray) -> np.ndarray:
    """Moving-average smoothing with pinned endpoints.

    Each interior vertex is replaced by the mean of its neighbors within a
    window that shrinks toward the chain ends, so the anchored endpoints are
    reproduced exactly while staircase oscillation in between is averaged
    out.
    """
    m = len(pts)
    if m <= 2:
        return pts
    csum = np.zeros((m + 1, 2))
    np.cumsum(pts, axis=0, out=csum[1:])
    idx = np.arange(m)
    k = np.minimum(_SMOOTH_K, np.minimum(idx, m - 1 - idx))
    lo = idx - k
    hi = idx + k + 1
    return (csum[hi] - csum[lo]) / (hi - lo)[:, None]


def _smoothed_chains(loop: np.ndarray) -> list[np.ndarray]:
    """Smoothed polyline chains covering one closed crack loop.

    Corners are anchored (kept exactly) when their turn direction repeats on
    either side or when both adjacent edges span at least two pixels; any
    staircase corner has a unit edge next to it and alternating turns, so an
    anchored corner is a genuine corner of the set.  The chains between
    anchors are smoothed.
    """
    verts, signs = _turns(loop)
    m = len(verts)
    if m == 0:
        return []
    same_prev = signs == np.roll(signs, 1)
    same_next = signs == np.roll(signs, -1)
    prev_edge = verts - np.roll(verts, 1, axis=0)
    edge_len = np.abs(prev_edge).sum(axis=1)  # edges are axis-aligned
    long_both = (edge_len >= 2) & (np.roll(edge_len, -1) >= 2)
    anchors = np.nonzero(same_prev | same_next | long_both)[0]
    if len(anchors) < 2:
        # fully alternating staircase loop: split at two extremal vertices
        i0 = int(np.lexsort((verts[:, 1], verts[:, 0]))[0])
        d = np.hypot(verts[:, 0] - verts[i0, 0], verts[:, 1] - verts[i0, 1])
        i1 = int(np.argmax(d))
        anchors = np.sort(np.unique([i0, i1]))
        if len(anchors) < 2:
            return [verts[[0, 0]]]
    chains = []
    for k in range(len(anchors)):
        a = anchors[k]
        b = anchors[(k + 1) % len(anchors)]
        if b > a:
            pts = verts[a:b + 1]
        else:
            pts = np.concatenate([verts[a:], verts[:b + 1]])
        chains.append(_smooth_chain(pts))
    return chains


def _polyline_length(pts: np.ndarray) -> float:
    return float(np.hypot(*np.diff(pts, axis=0).T).sum())


def simplified_loops(mask: np.ndarray) -> list[np.ndarray]:
    """Simplified boundary polygons (closed, pixel units), one per crack loop."""
    out = []
    for loop in boundary_loops(mask):
        chains = _smoothed_chains(loop)
        if not chains:
            continue
        poly = np.concatenate([c[:-1] for c in chains] + [chains[-1][-1:]])
        out.append(poly)
    return out


def measure_set(dom: GridDomain, mask: np.ndarray) -> tuple[float, float]:
    """(perimeter, volume) of a pixel set inside a domain.

    Volume is h^2 times the pixel count.  Perimeter is the simplified
    crack-boundary length described in the module docstring, summed over all
    boundary loops including holes.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != dom.mask.shape:
        raise ValueError("mask shape does not match domain")
    if (mask & ~dom.mask).any():
        raise ValueError("mask has pixels outside the domain")
    count = int(mask.sum())
    if count == 0:
        raise ValueError("empty set")
    per = 0.0
    for loop in boundary_loops(mask):
        for chain in _smoothed_chains(loop):
            per += _polyline_length(chain)
    return per * dom.h, count * dom.pixel_area


@dataclass(frozen=True)
class RatioProfile:
    """Perimeter/volume ratios of the superlevel sets of one field."""

    thresholds: np.ndarray
    ratios: np.ndarray
    mean: float
    cv: float  # coefficient of variation over the central threshold window


def ratio_profile(f, n_thresholds: int) -> RatioProfile:
    """Ratios Per({f > t})/|{f > t}| on a uniform threshold grid in (0, max f).

    Empty level sets are skipped.  The mean and coefficient of variation are
    taken over thresholds in [0.1, 0.9] * max f; near-constant profiles are
    the fingerprint of an optimal field, whose level sets all realize the
    same ratio.
    """
    vals = f.values
    fmax = float(vals.max())
    if fmax <= 0.0:
        raise ValueError("zero field")
    ts = fmax * (np.arange(1, n_thresholds + 1) / (n_thresholds + 1))
    out_t, out_r = [], []
    for t in ts:
        level = vals > t
        if not level.any():
            continue
        per, vol = measure_set(f.domain, level)
        out_t.append(float(t))
        out_r.append(per / vol)
    if not out_t:
        raise ValueError("zero field")
    thresholds = np.array(out_t)
    ratios = np.array(out_r)
    window = (thresholds >= 0.1 * fmax) & (thresholds <= 0.9 * fmax)
    sel = ratios[window] if window.any() else ratios
    mean = float(sel.mean())
    cv = float(sel.std() / mean) if mean != 0 else 0.0
    return RatioProfile(thresholds, ratios, mean, cv)


@dataclass(frozen=True)
class ClusterResult:
    """N disjoint chambers with their measurements.

    ``total_ratio_sum`` is the sum of the per-chamber perimeter/volume
    ratios, the discrete estimate of the N-chamber partition cost.
    """

    domain: GridDomain
    chambers: list[np.ndarray]
    perimeters: list[float]
    volumes: list[float]
    ratios: list[float]
    total_ratio_sum: float
    thresholds_used: list[float]
    diagnostics: list[RatioProfile] = field(default_factory=list)

    def __post_init__(self):
        n = len(self.chambers)
        union = np.zeros(self.chambers[0].shape, dtype=int)
        for m in self.chambers:
            union += m.astype(int)
        if union.max() > 1:
            raise ValueError("chambers overlap")
        for v in self.volumes:
            if v <= 0:
                raise ValueError("chamber with zero volume")
        if abs(self.total_ratio_sum - sum(self.ratios)) > 1e-12 * max(self.total_ratio_sum, 1.0):
            raise ValueError("total_ratio_sum inconsistent with chamber ratios")
        if not (len(self.perimeters) == len(self.volumes) == len(self.ratios) == n):
            raise ValueError("inconsistent chamber records")


def extract_cluster(u: MultiField, strategy="best-ratio") -> ClusterResult:
    """Cut each component at a superlevel threshold to obtain a cluster.

    strategy: "best-ratio" scans a uniform threshold grid and keeps the
    threshold minimizing the chamber's ratio (the conservative estimate,
    since at an exact optimum almost every threshold is equivalent);
    "median-t" uses half the component maximum; a list of N numbers fixes
    the thresholds directly.  Chambers are automatically disjoint for
    skeleton-valued fields.
    """
    dom = u.domain
    chambers, pers, vols, rats, ts, profiles = [], [], [], [], [], []
    for i in range(u.n_components):
        vals = u.data[i]
        vmax = float(vals.max())
        if vmax <= 0.0:
            raise ValueError(f"degenerate component {i}: no positive values")
        if isinstance(strategy, str) and strategy == "best-ratio":
            grid = vmax * (np.arange(1, _N_THRESHOLDS + 1) / (_N_THRESHOLDS + 1))
            best = None
            for t in grid:
                level = vals > t
                if not level.any():
                    continue
                per, vol = measure_set(dom, level)
                r = per / vol
                if best is None or r < best[0]:
                    best = (r, float(t), level, per, vol)
            if best is None:
                raise ValueError(f"degenerate component {i}: empty at all thresholds")
            r, t, level, per, vol = best
        else:
            if isinstance(strategy, str):
                if strategy != "median-t":
                    raise ValueError(f"unknown extraction strategy {strategy!r}")
                t = 0.5 * vmax
            else:
                t = float(strategy[i])
            level = vals > t
            if not level.any():
                raise ValueError(f"degenerate component {i}: empty at threshold {t}")
            per, vol = measure_set(dom, level)
            r = per / vol
        chambers.append(level)
        pers.append(per)
        vols.append(vol)
        rats.append(r)
        ts.append(t)
        profiles.append(ratio_profile(u.component(i), _N_THRESHOLDS))
    return ClusterResult(dom, chambers, pers, vols, rats, float(sum(rats)), ts, profiles)


def indicator_lift(c: ClusterResult) -> MultiField:
    """Normalized chamber indicators (1_E / |E| per chamber) as a MultiField."""
    data = np.stack([m / v for m, v in zip(c.chambers, c.volumes)])
    return MultiField(c.domain, data)


def eval_h2(c: ClusterResult) -> float:
    """Worst chamber ratio of a 2-cluster, an upper bound for the min-max pairing cost."""
    if len(c.chambers) != 2:
        raise ValueError("eval_h2 needs exactly 2 chambers")
    return max(c.ratios)


@dataclass(frozen=True)
class EigenBounds:
    """Bounds on the second variational eigenvalue from a 2-cluster.

    ``lower`` always holds.  When the two chamber ratios agree within the
    tolerance the equal-ratio certificate fires and ``equality_value``
    reports the common value, which then equals the eigenvalue itself; the
    certificate is numerical, not rigorous.  Otherwise only the strict lower
    bound is available and ``h2_upper`` strictly exceeds half the ratio sum.
    """

    lower: float
    certificate: bool
    h2_upper: float
    equality_value: float | None
    ratio_gap: float


def eigen_bounds(m2_value: float, c: ClusterResult, tol: float = 0.05) -> EigenBounds:
    """Eigenvalue bounds and the equal-ratio certificate from a 2-cluster."""
    if len(c.chambers) != 2:
        raise ValueError("eigen_bounds needs a 2-cluster")
    r1, r2 = c.ratios
    gap = abs(r1 - r2)
    cert = gap <= tol * max(r1, r2)
    equality = 0.5 * c.total_ratio_sum if cert else None
    return EigenBounds(
        lower=m2_value / 2.0,
        certificate=cert,
        h2_upper=max(r1, r2),
        equality_value=equality,
        ratio_gap=gap,
    )
