"""Merging of fragmented image line segments and removal of short ones.

Two segments are merged when some pair of their endpoints is closer than
``merge_dist_px`` and their undirected directions differ by less than
``merge_angle_deg``.  Merging is transitive (connected components of the
pairwise relation) and repeated until nothing changes, after which segments
shorter than ``min_length_px`` are dropped.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from itertools import combinations

import numpy as np
from scipy.cluster.hierarchy import DisjointSet

from .geometry import LineSegment2D


@dataclass(frozen=True)
class SegmentSet:
    segments: tuple = field(default_factory=tuple)
    merge_dist_px: float = 5.0
    merge_angle_deg: float = 2.0
    min_length_px: float = 20.0

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        for name in ("merge_dist_px", "merge_angle_deg", "min_length_px"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    def __len__(self):
        return len(self.segments)


def endpoint_gap(a: LineSegment2D, b: LineSegment2D) -> float:
    """Smallest distance between an endpoint of ``a`` and an endpoint of ``b``."""
    return float(min(np.linalg.norm(p - q) for p in (a.start, a.end) for q in (b.start, b.end)))


def angle_between(a: LineSegment2D, b: LineSegment2D) -> float:
    """Acute angle in degrees between the undirected segment directions."""
    da, db = a.direction, b.direction
    cross = da[0] * db[1] - da[1] * db[0]
    return float(np.degrees(np.arctan2(abs(cross), abs(da @ db))))


def should_merge(a: LineSegment2D, b: LineSegment2D, cfg: SegmentSet = SegmentSet()) -> bool:
    return bool(endpoint_gap(a, b) < cfg.merge_dist_px
                and angle_between(a, b) < cfg.merge_angle_deg)


def _canonical(d):
    # fix the sign of an undirected direction so output does not depend on input order
    if d[0] < 0 or (d[0] == 0 and d[1] < 0):
        return -d
    return d


def merge_cluster(segments) -> LineSegment2D:
    """One segment spanning the extreme projections onto the principal axis."""
    pts = np.array([p for s in segments for p in (s.start, s.end)])
    centroid = pts.mean(axis=0)
    _, _, Vt = np.linalg.svd(pts - centroid)
    axis = _canonical(Vt[0])
    t = (pts - centroid) @ axis
    return LineSegment2D(centroid + t.min() * axis, centroid + t.max() * axis)


def _merge_pass(segments, cfg):
    n = len(segments)
    ds = DisjointSet(range(n))
    for i, j in combinations(range(n), 2):
        if should_merge(segments[i], segments[j], cfg):
            ds.merge(i, j)
    clusters = sorted((sorted(c) for c in ds.subsets()), key=lambda c: c[0])
    out = []
    for c in clusters:
        out.append(segments[c[0]] if len(c) == 1 else merge_cluster([segments[i] for i in c]))
    return out


def merge_all(segset: SegmentSet, max_passes: int = 100) -> SegmentSet:
    """Merge until stable, then drop segments shorter than ``min_length_px``."""
    segments = list(segset.segments)
    for _ in range(max_passes):
        merged = _merge_pass(segments, segset)
        if len(merged) == len(segments):
            break
        segments = merged
    kept = [s for s in segments if s.length >= segset.min_length_px]
    return replace(segset, segments=tuple(kept))
