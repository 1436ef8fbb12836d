"""Constraint machinery for fields valued in the positive coordinate axes.

A multi-component field is admissible when at every pixel at most one
component is positive and none is negative, and each component has unit
discrete L1 norm.  There is no closed-form projection onto both constraints
at once; the solver alternates the pointwise axis projection with a
per-component normalization.
"""

from __future__ import annotations

import numpy as np

from .grid import MultiField, ScalarField

__all__ = [
    "project_sigma",
    "normalize_l1",
    "split_signed",
    "merge_signed",
    "sigma_violation",
]


def project_sigma(u: MultiField) -> MultiField:
    """Pointwise Euclidean projection onto the union of positive axes.

    Negative values clamp to zero; where several components are positive only
    the largest survives, ties going to the lowest component index.  The map
    is idempotent and nonexpansive at each pixel.
    """
    data = np.maximum(u.data, 0.0)
    winner = np.argmax(data, axis=0)  # argmax takes the lowest index on ties
    keep = winner[None] == np.arange(data.shape[0])[:, None, None]
    return MultiField(u.domain, np.where(keep, data, 0.0))


def sigma_violation(u: MultiField) -> float:
    """Pointwise distance-to-skeleton proxy: mass beyond the dominant axis.

    Zero exactly when u is skeleton-valued; used as a solver diagnostic.
    """
    pos = np.maximum(u.data, 0.0)
    extra = pos.sum(axis=0) - pos.max(axis=0)
    neg = np.minimum(u.data, 0.0).min()
    return float(max(extra.max(), -neg))


def normalize_l1(u: MultiField) -> MultiField:
    """Scale each component independently to unit discrete L1 norm.

    Positive scaling maps the admissible value set to itself, so a
    skeleton-valued input stays skeleton-valued.
    """
    area = u.domain.pixel_area
    norms = area * np.abs(u.data).sum(axis=(1, 2))
    if (norms == 0.0).any():
        i = int(np.nonzero(norms == 0.0)[0][0])
        raise ValueError(f"collapsed chamber: component {i} is identically zero")
    return MultiField(u.domain, u.data / norms[:, None, None])


def split_signed(v: ScalarField) -> MultiField:
    """Split a signed field into its positive and negative parts (N = 2).

    The two parts have disjoint supports, so the pair is skeleton-valued by
    construction.
    """
    pos = np.maximum(v.values, 0.0)
    neg = np.maximum(-v.values, 0.0)
    if not pos.any() or not neg.any():
        raise ValueError("no sign change: field must take both signs")
    return MultiField(v.domain, np.stack([pos, neg]))


def merge_signed(u: MultiField) -> ScalarField:
    """Merge a skeleton-valued pair into the signed field u1 - u2."""
    if u.n_components != 2:
        raise ValueError("merge_signed needs exactly 2 components")
    if sigma_violation(u) > 0.0:
        raise ValueError("overlapping supports: input is not skeleton-valued")
    return ScalarField(u.domain, u.data[0] - u.data[1])
