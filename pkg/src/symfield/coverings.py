"""
Random labelled simple ramified coverings of the unit disk.

Ramification points form a Poisson process of intensity N/2 per unit area;
each point carries an independent uniform transposition of the N sheets.
Only monodromy data is kept: the monodromy of a loop is the product, in
sampling order, of the transpositions of the points it encloses.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import GeometryError, ValidationError
from .master_field import LassoWord
from .walk_sim import Estimate, as_rng, cycle_statistics, summarize

EDGE_EPS = 1e-12


# -- geometry ----------------------------------------------------------------------------


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _segments_intersect(p1, p2, q1, q2) -> bool:
    d1, d2 = _cross(q1, q2, p1), _cross(q1, q2, p2)
    d3, d4 = _cross(p1, p2, q1), _cross(p1, p2, q2)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 * d2 != 0 and d3 * d4 != 0:
        return True

    def on_seg(a, b, c):
        return min(a[0], b[0]) <= c[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= c[1] <= max(a[1], b[1])

    return (
        (d1 == 0 and on_seg(q1, q2, p1))
        or (d2 == 0 and on_seg(q1, q2, p2))
        or (d3 == 0 and on_seg(p1, p2, q1))
        or (d4 == 0 and on_seg(p1, p2, q2))
    )


@dataclass(frozen=True)
class Polygon:
    vertices: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise GeometryError("a polygon needs at least three 2D vertices")
        if np.allclose(v[0], v[-1]) and len(v) > 3:
            v = v[:-1]
        if np.any(np.hypot(v[:, 0], v[:, 1]) >= 1):
            raise GeometryError("polygon vertices must lie strictly inside the unit disk")
        n = len(v)
        for i in range(n):
            for j in range(i + 1, n):
                if j == i + 1 or (i == 0 and j == n - 1):
                    continue
                if _segments_intersect(v[i], v[(i + 1) % n], v[j], v[(j + 1) % n]):
                    raise GeometryError("polygon is not simple")
        if abs(self.signed_area_of(v)) < 1e-15:
            raise GeometryError("degenerate polygon")
        object.__setattr__(self, "vertices", v)

    @staticmethod
    def signed_area_of(v) -> float:
        x, y = v[:, 0], v[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))

    @property
    def area(self) -> float:
        return abs(self.signed_area_of(self.vertices))

    @classmethod
    def from_json(cls, data) -> "Polygon":
        if isinstance(data, str):
            data = json.loads(data)
        if not isinstance(data, Mapping) or "vertices" not in data:
            raise ValidationError("polygon JSON needs 'vertices'")
        return cls(np.asarray(data["vertices"], dtype=float))

    def to_json(self) -> dict:
        return {"vertices": self.vertices.tolist()}

    def winding(self, pts: np.ndarray) -> np.ndarray:
        """Winding number of the boundary around each point (vectorized crossing rule)."""
        pts = np.atleast_2d(pts)
        v = self.vertices
        a, b = v, np.roll(v, -1, axis=0)
        px, py = pts[:, 0:1], pts[:, 1:2]
        ax, ay, bx, by = a[:, 0], a[:, 1], b[:, 0], b[:, 1]
        side = (bx - ax) * (py - ay) - (px - ax) * (by - ay)
        up = (ay <= py) & (by > py) & (side > 0)
        down = (ay > py) & (by <= py) & (side < 0)
        return up.sum(axis=1) - down.sum(axis=1)

    def contains(self, pts: np.ndarray) -> np.ndarray:
        return self.winding(pts) != 0

    def edge_distance(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        a = self.vertices
        d = np.roll(a, -1, axis=0) - a
        rel = pts[:, None, :] - a[None, :, :]
        s = np.clip((rel * d).sum(-1) / (d * d).sum(-1), 0, 1)
        closest = a[None] + s[..., None] * d[None]
        return np.hypot(*(pts[:, None, :] - closest).transpose(2, 0, 1)).min(axis=1)


def unit_square() -> Polygon:
    """Axis-aligned square of area 1 centred at the origin."""
    return Polygon(np.array([[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]]))


# -- sampling ------------------------------------------------------------------------------


@dataclass(frozen=True)
class CoveringSample:
    N: int
    transpositions: np.ndarray  # (M, 2) distinct sheet pairs, 0-based
    positions: np.ndarray | None = None  # (M, 2) in disk mode
    per_face_index: dict = field(default_factory=dict)  # face -> point indices in sampling order

    @property
    def size(self) -> int:
        return len(self.transpositions)


def _uniform_disk(rng, n: int) -> np.ndarray:
    r = np.sqrt(rng.random(n))
    th = 2 * math.pi * rng.random(n)
    return np.column_stack([r * np.cos(th), r * np.sin(th)])


def _uniform_transpositions(rng, N: int, n: int) -> np.ndarray:
    a = rng.integers(0, N, size=n)
    b = rng.integers(0, N - 1, size=n)
    b = b + (b >= a)
    return np.column_stack([a, b])


def sample_covering(N: int, geometry=None, rng=None, avoid: Polygon | None = None) -> CoveringSample:
    """
    Draw the ramification data of a uniform simple labelled covering.

    ``geometry`` is None for the whole unit disk (positions are sampled) or
    a mapping face -> area (face mode, no positions).  Points that land on
    the boundary of ``avoid`` are re-drawn.
    """
    if N < 2:
        raise ValidationError("N must be at least 2")
    rng = as_rng(rng)
    if geometry is None:
        M = rng.poisson(N * math.pi / 2)
        pos = _uniform_disk(rng, M)
        if avoid is not None:
            while True:
                bad = np.flatnonzero(avoid.edge_distance(pos) < EDGE_EPS) if M else np.array([], int)
                if bad.size == 0:
                    break
                pos[bad] = _uniform_disk(rng, bad.size)
        return CoveringSample(N, _uniform_transpositions(rng, N, M), pos)
    if isinstance(geometry, LassoWord):
        geometry = geometry.areas
    idx = {}
    total = 0
    counts = {}
    for face in sorted(geometry):
        a = float(geometry[face])
        if a < 0:
            raise ValidationError("face areas must be non-negative")
        counts[face] = rng.poisson(N * a / 2)
        idx[face] = np.arange(total, total + counts[face])
        total += counts[face]
    return CoveringSample(N, _uniform_transpositions(rng, N, total), None, idx)


def _product(N: int, taus: np.ndarray) -> np.ndarray:
    """tau_m ... tau_1 in image form (later transpositions act last)."""
    inv = list(range(N))
    for a, b in taus.tolist():
        inv[a], inv[b] = inv[b], inv[a]
    perm = np.empty(N, dtype=np.intp)
    perm[np.asarray(inv)] = np.arange(N)
    return perm


def monodromy(loop, s: CoveringSample) -> np.ndarray:
    """Monodromy permutation (0-based images) of a polygon or a lasso word."""
    if isinstance(loop, Polygon):
        if s.positions is None:
            raise ValidationError("polygon monodromy needs point positions")
        if s.size == 0:
            return np.arange(s.N)
        if np.any(loop.edge_distance(s.positions) < EDGE_EPS):
            raise GeometryError("a ramification point lies on the loop")
        inside = loop.contains(s.positions)
        return _product(s.N, s.transpositions[inside])
    if isinstance(loop, LassoWord):
        face_perm = {}
        for f in loop.faces():
            if f not in s.per_face_index:
                raise ValidationError(f"covering has no face {f!r}")
            face_perm[f] = _product(s.N, s.transpositions[s.per_face_index[f]])
        cur = np.arange(s.N)
        for name, e in loop.letters:
            h = face_perm[name]
            if e == -1:
                hinv = np.empty_like(h)
                hinv[h] = np.arange(s.N)
                h = hinv
            cur = h[cur]
        return cur
    raise ValidationError("loop must be a Polygon or a LassoWord")


@dataclass(frozen=True)
class WilsonStatistics:
    fixed_fraction: Estimate
    cycle_moments: dict  # n -> Estimate of n * #(n-cycles) / N
    raw_fixed_fraction: np.ndarray

    def to_json(self) -> dict:
        return {
            "fixed_fraction": self.fixed_fraction.to_json(),
            "cycle_moments": {str(n): e.to_json() for n, e in self.cycle_moments.items()},
        }


def monodromy_samples(loop, N: int, samples: int, rng=None) -> np.ndarray:
    """Monodromies of independent coverings, stacked as (samples, N)."""
    rng = as_rng(rng)
    out = np.empty((samples, N), dtype=np.intp)
    if isinstance(loop, Polygon):
        for i in range(samples):
            out[i] = monodromy(loop, sample_covering(N, None, rng, avoid=loop))
    elif isinstance(loop, LassoWord):
        for i in range(samples):
            out[i] = monodromy(loop, sample_covering(N, loop.areas, rng))
    elif loop is None:
        out[:] = np.arange(N)
    else:
        raise ValidationError("loop must be a Polygon, a LassoWord or None")
    return out


def wilson_statistics(loop, N: int, samples: int, rng=None, n_max: int = 5) -> WilsonStatistics:
    """Fixed-point fraction and exclusive cycle moments of the monodromy."""
    if samples < 2:
        raise ValidationError("samples must be at least 2")
    perms = monodromy_samples(loop, N, samples, rng)
    ff = (perms == np.arange(N)).sum(axis=1) / N
    counts, _ = cycle_statistics(perms, n_max)
    moments = {n: summarize(n * counts[:, n - 1] / N) for n in range(1, n_max + 1)}
    return WilsonStatistics(summarize(ff), moments, ff)
