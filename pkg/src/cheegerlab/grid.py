"""Pixel-grid domains and the scalar/vector fields that live on them.

A domain is a rectangular grid of square pixels of side ``h`` with a boolean
inside-mask.  Pixels outside the mask represent the complement of the domain:
every field is identically zero there, so finite differences against the
padded border automatically pick up the boundary jump of a field that does
not vanish at the domain edge.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "GridDomain",
    "ScalarField",
    "MultiField",
    "make_disc",
    "make_square",
    "make_barbell",
    "load_mask",
    "rasterize_polygon",
]

# Generators leave this many all-false pixels on every side of the mask.
PAD = 2


@dataclass(frozen=True)
class GridDomain:
    """Rectangular pixel grid with spacing ``h`` and an inside mask.

    ``mask[r, c]`` is True when the center of pixel (row r, column c) lies
    inside the domain.  The outermost ring of pixels must be False so that
    forward differences never wrap and boundary contours stay closed.
    ``bbox_origin`` is the (x, y) position of the lower-left corner of pixel
    (0, 0); pixel (r, c) has its center at ``bbox_origin + h*(c + 0.5, r + 0.5)``.
    """

    nx: int
    ny: int
    h: float
    mask: np.ndarray
    bbox_origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.nx < 2 or self.ny < 2:
            raise ValueError("grid must be at least 2x2")
        if not self.h > 0:
            raise ValueError("pixel size h must be positive")
        mask = np.asarray(self.mask, dtype=bool)
        if mask.shape != (self.ny, self.nx):
            raise ValueError(f"mask shape {mask.shape} != (ny, nx) = {(self.ny, self.nx)}")
        if not mask.any():
            raise ValueError("empty mask")
        if mask[0, :].any() or mask[-1, :].any() or mask[:, 0].any() or mask[:, -1].any():
            raise ValueError("mask touches the grid border; domains must be padded")
        mask.flags.writeable = False
        object.__setattr__(self, "mask", mask)

    @property
    def pixel_area(self) -> float:
        return self.h * self.h

    @property
    def num_inside(self) -> int:
        return int(self.mask.sum())

    def centers(self) -> tuple[np.ndarray, np.ndarray]:
        """(x, y) coordinates of all pixel centers, each of shape (ny, nx)."""
        ox, oy = self.bbox_origin
        x = ox + self.h * (np.arange(self.nx) + 0.5)
        y = oy + self.h * (np.arange(self.ny) + 0.5)
        return np.meshgrid(x, y)

    def zeros(self) -> np.ndarray:
        return np.zeros((self.ny, self.nx))


def _check_field_values(domain: GridDomain, values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.shape != (domain.ny, domain.nx):
        raise ValueError("field shape does not match domain")
    if not np.isfinite(values).all():
        raise ValueError("field contains non-finite values")
    if values[~domain.mask].any():
        raise ValueError("field is nonzero outside the domain mask")
    return values


@dataclass(frozen=True)
class ScalarField:
    """A real-valued field on a GridDomain, zero outside the mask."""

    domain: GridDomain
    values: np.ndarray

    def __post_init__(self):
        values = _check_field_values(self.domain, self.values)
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def from_values(cls, domain: GridDomain, values: np.ndarray) -> "ScalarField":
        """Build a field from raw values, zeroing everything outside the mask."""
        values = np.asarray(values, dtype=float) * domain.mask
        return cls(domain, values)

    def l1_norm(self) -> float:
        return float(self.domain.pixel_area * np.abs(self.values).sum())


@dataclass(frozen=True)
class MultiField:
    """An ordered stack of N scalar fields sharing one GridDomain.

    The stack is kept as one (N, ny, nx) array.  A MultiField is
    *skeleton-valued* when at every pixel at most one component is positive
    and none is negative; that property is established by
    :func:`cheegerlab.skeleton.project_sigma`, not by construction.
    """

    domain: GridDomain
    data: np.ndarray

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 3 or data.shape[0] < 1:
            raise ValueError("MultiField data must have shape (N, ny, nx) with N >= 1")
        for k in range(data.shape[0]):
            _check_field_values(self.domain, data[k])
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

    @property
    def n_components(self) -> int:
        return int(self.data.shape[0])

    def component(self, i: int) -> ScalarField:
        return ScalarField(self.domain, self.data[i].copy())

    @classmethod
    def from_components(cls, fields: list[ScalarField]) -> "MultiField":
        if not fields:
            raise ValueError("need at least one component")
        dom = fields[0].domain
        for f in fields[1:]:
            if f.domain is not dom and not np.array_equal(f.domain.mask, dom.mask):
                raise ValueError("components live on different domains")
        return cls(dom, np.stack([f.values for f in fields]))


def _padded_domain(inner_mask: np.ndarray, h: float, origin: tuple[float, float]) -> GridDomain:
    ny, nx = inner_mask.shape
    mask = np.zeros((ny + 2 * PAD, nx + 2 * PAD), dtype=bool)
    mask[PAD:PAD + ny, PAD:PAD + nx] = inner_mask
    ox, oy = origin
    return GridDomain(nx + 2 * PAD, ny + 2 * PAD, h, mask,
                      (ox - PAD * h, oy - PAD * h))


def make_disc(radius: float, h: float) -> GridDomain:
    """Disc of the given radius centered at the origin.

    A pixel is inside when its center is within ``radius`` of the origin.
    """
    if radius < 4 * h:
        raise ValueError("resolution too coarse: radius must be at least 4*h")
    n = int(np.ceil(2 * radius / h)) + 1
    # symmetric center placement so that x<->y reflection maps centers to centers
    half = n * h / 2.0
    c = (np.arange(n) + 0.5) * h - half
    xx, yy = np.meshgrid(c, c)
    inner = xx * xx + yy * yy <= radius * radius
    return _padded_domain(inner, h, (-half, -half))


def make_square(side: float, h: float) -> GridDomain:
    """Axis-aligned square of the given side with its corner at the origin."""
    if side < 8 * h:
        raise ValueError("resolution too coarse: side must be at least 8*h")
    m = int(round(side / h))
    inner = np.ones((m, m), dtype=bool)
    return _padded_domain(inner, h, (0.0, 0.0))


def make_barbell(square_side: float, neck_height: float, shrink: float, h: float) -> GridDomain:
    """Two squares joined by a thin neck.

    With side a, neck height eps and shrink delta the domain is
    [0,a]^2  U  [a,2a]x[0,eps]  U  [2a,3a-delta]x[0,a-delta].
    shrink = 0 gives the mirror-symmetric barbell.
    """
    a = square_side
    if not 0 < neck_height < a:
        raise ValueError("neck_height must lie strictly between 0 and square_side")
    if not 0 <= shrink < a / 2:
        raise ValueError("shrink must lie in [0, square_side/2)")
    if neck_height < 2 * h:
        raise ValueError("resolution too coarse: neck must span at least 2 pixels")
    nx = int(np.ceil(3 * a / h))
    ny = int(np.ceil(a / h))
    x = (np.arange(nx) + 0.5) * h
    y = (np.arange(ny) + 0.5) * h
    xx, yy = np.meshgrid(x, y)
    left = (xx <= a) & (yy <= a)
    neck = (xx > a) & (xx <= 2 * a) & (yy <= neck_height)
    right = (xx > 2 * a) & (xx <= 3 * a - shrink) & (yy <= a - shrink)
    return _padded_domain(left | neck | right, h, (0.0, 0.0))


def load_mask(path: str | Path, h: float) -> GridDomain:
    """Load a domain mask from an 8-bit grayscale PNG (gray > 127 = inside)."""
    from PIL import Image, UnidentifiedImageError

    try:
        img = Image.open(path)
        img.load()
    except (OSError, UnidentifiedImageError) as exc:
        raise OSError(f"cannot read mask image {path}: {exc}") from exc
    if img.mode != "L":
        raise ValueError(f"mask image must be 8-bit grayscale, got mode {img.mode!r}")
    arr = np.asarray(img)
    inner = arr > 127
    # PNG rows run top to bottom; flip so row index increases with y
    inner = inner[::-1]
    if not inner.any():
        raise ValueError("empty mask")
    return _padded_domain(inner, h, (0.0, 0.0))


def _point_in_polygons(px: np.ndarray, py: np.ndarray, polygons: list[np.ndarray]) -> np.ndarray:
    """Even-odd membership test for a batch of points against several rings."""
    inside = np.zeros(px.shape, dtype=bool)
    for poly in polygons:
        x1 = poly[:, 0]
        y1 = poly[:, 1]
        x2 = np.roll(x1, -1)
        y2 = np.roll(y1, -1)
        for k in range(len(poly)):
            a, b = y1[k], y2[k]
            crosses = (a <= py) != (b <= py)
            if not crosses.any():
                continue
            t = (py - a) / (b - a)
            xq = x1[k] + t * (x2[k] - x1[k])
            inside ^= crosses & (px < xq)
    return inside


def rasterize_polygon(spec: dict) -> GridDomain:
    """Rasterize a polygon document {"h": h, "polygons": [[[x, y], ...], ...]}.

    Membership is decided at pixel centers with the even-odd fill rule, so a
    ring inside another ring makes a hole.
    """
    try:
        h = float(spec["h"])
        raw = spec["polygons"]
    except (KeyError, TypeError) as exc:
        raise ValueError(f"bad polygon document: {exc}") from exc
    if not h > 0:
        raise ValueError("polygon document must have positive h")
    if not raw:
        raise ValueError("polygon document lists no polygons")
    polygons = []
    for ring in raw:
        pts = np.asarray(ring, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 3:
            raise ValueError("degenerate polygon: need at least 3 vertices")
        polygons.append(pts)
    allpts = np.concatenate(polygons)
    xmin, ymin = allpts.min(axis=0)
    xmax, ymax = allpts.max(axis=0)
    nx = int(np.ceil((xmax - xmin) / h)) + 1
    ny = int(np.ceil((ymax - ymin) / h)) + 1
    x = xmin + (np.arange(nx) + 0.5) * h
    y = ymin + (np.arange(ny) + 0.5) * h
    xx, yy = np.meshgrid(x, y)
    inner = _point_in_polygons(xx, yy, polygons)
    if not inner.any():
        raise ValueError("empty mask")
    # crop all-false rows/columns so equal geometry yields equal grids
    rows = np.nonzero(inner.any(axis=1))[0]
    cols = np.nonzero(inner.any(axis=0))[0]
    inner = inner[rows[0]:rows[-1] + 1, cols[0]:cols[-1] + 1]
    origin = (xmin + cols[0] * h, ymin + rows[0] * h)
    return _padded_domain(inner, h, origin)
