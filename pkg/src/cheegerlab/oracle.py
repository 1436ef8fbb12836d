"""Independent ground truth: analytic constants and exhaustive pixel search.

The brute-force search measures candidate sets with the same
:func:`cheegerlab.extract.measure_set` as the rest of the pipeline, so
oracle values and pipeline values optimize comparable objectives.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .extract import measure_set
from .grid import GridDomain

__all__ = [
    "analytic_disc",
    "analytic_square",
    "brute_force_hn",
    "write_fixture",
    "load_fixture",
    "check_fixture",
]

ORACLE_PIXEL_LIMIT = 16


def analytic_disc(r: float) -> float:
    """Isoperimetric ratio of a disc, which is its own optimal subset: 2/r."""
    if r <= 0:
        raise ValueError("radius must be positive")
    return 2.0 / r


def analytic_square(side: float) -> tuple[float, float]:
    """Optimal constant and corner radius for an axis-aligned square.

    The optimal subset is the square with its corners replaced by circular
    arcs.  Stationarity forces the arc radius rho to satisfy
    (4 - pi) rho^2 - 4 rho side + side^2 = 0 and the constant is 1/rho:
    approximately 3.7724/side with rho ~ 0.2651*side.
    """
    if side <= 0:
        raise ValueError("side must be positive")
    rho = side * (2.0 - np.sqrt(np.pi)) / (4.0 - np.pi)
    return 1.0 / rho, rho


def _subset_measures(dom: GridDomain, pixels: list[tuple[int, int]]) -> np.ndarray:
    """Perimeter/volume ratio for every nonempty subset of the given pixels."""
    n = len(pixels)
    ratios = np.empty(1 << n)
    ratios[0] = np.inf
    scratch = np.zeros(dom.mask.shape, dtype=bool)
    for s in range(1, 1 << n):
        scratch[:] = False
        for b in range(n):
            if s >> b & 1:
                scratch[pixels[b]] = True
        per, vol = measure_set(dom, scratch)
        ratios[s] = per / vol
    return ratios


def brute_force_hn(dom: GridDomain, n: int) -> tuple[float, list[np.ndarray]]:
    """Exact discrete optimum over all families of n disjoint nonempty pixel sets.

    Enumerates every subset of the domain pixels (so the domain may have at
    most 16 of them) and, for n = 2, minimizes over all disjoint pairs via a
    subset-lattice min-table, which covers exactly the same pairs as direct
    enumeration.  Returns the optimal value and the optimal masks.
    """
    pixels = [tuple(q) for q in np.argwhere(dom.mask)]
    m = len(pixels)
    if m > ORACLE_PIXEL_LIMIT:
        raise ValueError(f"oracle limit: {m} pixels exceeds {ORACLE_PIXEL_LIMIT}")
    if n not in (1, 2):
        raise ValueError("brute force supports n in {1, 2}")
    ratios = _subset_measures(dom, pixels)
    full = (1 << m) - 1

    def to_mask(s: int) -> np.ndarray:
        out = np.zeros(dom.mask.shape, dtype=bool)
        for b in range(m):
            if s >> b & 1:
                out[pixels[b]] = True
        return out

    if n == 1:
        s_best = int(np.argmin(ratios))
        return float(ratios[s_best]), [to_mask(s_best)]

    # best[c] = min ratio over nonempty subsets of c, best_arg[c] its argmin;
    # every subset is reachable by single-element removals
    best = ratios.copy()
    best_arg = np.arange(1 << m, dtype=np.int64)
    for c in range(1, 1 << m):
        rem = c
        while rem:
            low = rem & -rem
            sub = c ^ low
            if sub and best[sub] < best[c]:
                best[c] = best[sub]
                best_arg[c] = best_arg[sub]
            rem ^= low
    value = np.inf
    pair = (0, 0)
    for a in range(1, full):
        comp = full ^ a
        if comp == 0:
            continue
        total = ratios[a] + best[comp]
        if total < value:
            value = total
            pair = (a, int(best_arg[comp]))
    if not np.isfinite(value):
        raise ValueError("domain cannot host 2 disjoint nonempty sets")
    return float(value), [to_mask(pair[0]), to_mask(pair[1])]


def write_fixture(dom: GridDomain, n: int, path: str | Path) -> dict:
    """Run the brute-force oracle and store a regression record."""
    value, masks = brute_force_hn(dom, n)
    record = {
        "mask": dom.mask.astype(int).tolist(),
        "h": dom.h,
        "N": n,
        "value": value,
        "masks": [m.astype(int).tolist() for m in masks],
    }
    Path(path).write_text(json.dumps(record, indent=1, sort_keys=True) + "\n")
    return record


def load_fixture(path: str | Path) -> tuple[GridDomain, dict]:
    try:
        record = json.loads(Path(path).read_text())
        mask = np.asarray(record["mask"], dtype=bool)
        dom = GridDomain(mask.shape[1], mask.shape[0], float(record["h"]), mask)
        record["N"] = int(record["N"])
        record["value"] = float(record["value"])
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise OSError(f"bad fixture file {path}: {exc}") from exc
    return dom, record


def check_fixture(path: str | Path) -> bool:
    """Recompute a fixture and compare bit-identically."""
    dom, record = load_fixture(path)
    value, masks = brute_force_hn(dom, record["N"])
    if value != record["value"]:
        return False
    stored = [np.asarray(m, dtype=bool) for m in record["masks"]]
    return all(np.array_equal(a, b) for a, b in zip(masks, stored))
