"""Trajectory geometry: rasterization, exact Euclidean distance fields, masks.

Distances are measured in grid cells of the attention-map resolution, not
image pixels. All functions here are pure and thread-safe.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Finite sentinel for "no source"; large enough to dominate any squared
# grid distance while keeping the envelope arithmetic finite.
_FAR = 1e20


@dataclass(frozen=True)
class Trajectory:
    """Per-token polyline bundle in continuous (row, col) grid coordinates.

    Each polyline carries a positive enhancement weight (default 1.0);
    weights > 1 make that polyline attract attention more strongly.
    """

    token_index: int
    polylines: tuple[tuple[tuple[float, float], ...], ...]
    weights: tuple[float, ...] = ()

    def __post_init__(self):
        if self.token_index < 0:
            raise ValueError("token_index must be >= 0")
        polys = tuple(tuple((float(r), float(c)) for r, c in p) for p in self.polylines)
        if not polys:
            raise ValueError("empty trajectory")
        for p in polys:
            if len(p) < 1:
                raise ValueError("empty trajectory")
        w = tuple(float(x) for x in self.weights) if self.weights else (1.0,) * len(polys)
        if len(w) != len(polys):
            raise ValueError("weights length must match polylines")
        if any(x <= 0 for x in w):
            raise ValueError("enhancement weights must be > 0")
        object.__setattr__(self, "polylines", polys)
        object.__setattr__(self, "weights", w)

    def bbox_center(self) -> tuple[float, float]:
        """Center of the bounding box over all vertices."""
        pts = np.array([v for p in self.polylines for v in p], dtype=float)
        lo = pts.min(axis=0)
        hi = pts.max(axis=0)
        return (float(lo[0] + hi[0]) / 2.0, float(lo[1] + hi[1]) / 2.0)

    def scaled(self, factor: float) -> "Trajectory":
        """Map grid coordinates to a grid `factor` times finer.

        Cell centers map to cell centers: x -> (x + 0.5) * factor - 0.5.
        """
        polys = tuple(
            tuple(((r + 0.5) * factor - 0.5, (c + 0.5) * factor - 0.5) for r, c in p)
            for p in self.polylines
        )
        return Trajectory(self.token_index, polys, self.weights)

    def to_json(self) -> dict:
        return {
            "token_index": self.token_index,
            "polylines": [[[r, c] for r, c in p] for p in self.polylines],
            "weights": list(self.weights),
        }

    @staticmethod
    def from_json(obj: dict) -> "Trajectory":
        try:
            token_index = int(obj["token_index"])
            polylines = tuple(
                tuple((float(v[0]), float(v[1])) for v in poly) for poly in obj["polylines"]
            )
            weights = tuple(float(w) for w in obj.get("weights") or ())
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            raise ValueError(f"malformed trajectory: {exc}") from exc
        return Trajectory(token_index, polylines, weights)


@dataclass(frozen=True)
class CellSet:
    """A set of integer (row, col) grid cells on an H x W grid."""

    dims: tuple[int, int]
    cells: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        object.__setattr__(self, "cells", frozenset((int(r), int(c)) for r, c in self.cells))
        h, w = self.dims
        for r, c in self.cells:
            if not (0 <= r < h and 0 <= c < w):
                raise ValueError(f"cell ({r},{c}) outside {h}x{w} grid")

    def to_mask(self) -> np.ndarray:
        m = np.zeros(self.dims, dtype=bool)
        for r, c in self.cells:
            m[r, c] = True
        return m


@dataclass(frozen=True)
class DistanceField:
    """Per-cell Euclidean distance to the nearest source cell, in cell units."""

    dims: tuple[int, int]
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != tuple(self.dims):
            raise ValueError(f"values shape {v.shape} != dims {self.dims}")
        object.__setattr__(self, "values", v)


def _bresenham(r0: int, c0: int, r1: int, c1: int):
    """All-quadrant integer Bresenham; yields an 8-connected cell chain."""
    dc = abs(c1 - c0)
    dr = -abs(r1 - r0)
    sc = 1 if c1 >= c0 else -1
    sr = 1 if r1 >= r0 else -1
    err = dc + dr
    r, c = r0, c0
    while True:
        yield r, c
        if r == r1 and c == c1:
            return
        e2 = 2 * err
        if e2 >= dr:
            err += dr
            c += sc
        if e2 <= dc:
            err += dc
            r += sr


def _clamp_round(vertex, dims):
    h, w = dims
    r = min(max(float(vertex[0]), 0.0), float(h - 1))
    c = min(max(float(vertex[1]), 0.0), float(w - 1))
    return int(np.rint(r)), int(np.rint(c))


def _rasterize_one(polyline, dims) -> set:
    verts = [_clamp_round(v, dims) for v in polyline]
    cells = {verts[0]}
    for a, b in zip(verts[:-1], verts[1:]):
        cells.update(_bresenham(a[0], a[1], b[0], b[1]))
    return cells


def rasterize_polyline(traj: Trajectory, dims: tuple[int, int]) -> CellSet:
    """Union of Bresenham cells over all of the trajectory's polylines."""
    h, w = dims
    if h < 2 or w < 2:
        raise ValueError("grid dims must be >= 2")
    cells: set = set()
    for poly in traj.polylines:
        cells |= _rasterize_one(poly, dims)
    return CellSet(dims, frozenset(cells))


def _edt_1d(f: np.ndarray) -> np.ndarray:
    """Exact 1D squared-distance transform (lower envelope of parabolas)."""
    n = f.shape[0]
    d = np.empty(n)
    v = np.zeros(n, dtype=np.intp)
    z = np.empty(n + 1)
    k = 0
    z[0] = -np.inf
    z[1] = np.inf
    for q in range(1, n):
        s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2 * q - 2 * v[k])
        while s <= z[k]:
            k -= 1
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2 * q - 2 * v[k])
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = np.inf
    k = 0
    for q in range(n):
        while z[k + 1] < q:
            k += 1
        d[q] = (q - v[k]) ** 2 + f[v[k]]
    return d


def _edt_sq(mask: np.ndarray) -> np.ndarray:
    """Exact squared EDT of a boolean source mask, two 1D passes."""
    h, w = mask.shape
    g = np.where(mask, 0.0, _FAR)
    for c in range(w):
        g[:, c] = _edt_1d(g[:, c])
    for r in range(h):
        g[r, :] = _edt_1d(g[r, :])
    return g


def distance_transform(src: CellSet) -> DistanceField:
    """Exact Euclidean distance to the nearest cell of `src`."""
    if not src.cells:
        raise ValueError("empty trajectory")
    return DistanceField(src.dims, np.sqrt(_edt_sq(src.to_mask())))


def expand_trajectory_to_mask(traj: Trajectory, radius: float, dims: tuple[int, int]) -> CellSet:
    """Cells within `radius` of the rasterized trajectory (dilation baseline)."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    d = distance_transform(rasterize_polyline(traj, dims))
    rows, cols = np.nonzero(d.values <= radius)
    return CellSet(dims, frozenset(zip(rows.tolist(), cols.tolist())))


def combined_distance_field(traj: Trajectory, dims: tuple[int, int]) -> DistanceField:
    """Pointwise min over polylines of (distance / enhancement weight).

    With all weights 1 this equals the distance transform of the union cell
    set; a weight w > 1 makes that polyline's neighborhood look w times
    closer, so it attracts attention more strongly.
    """
    if all(w == 1.0 for w in traj.weights):
        return distance_transform(rasterize_polyline(traj, dims))
    best = None
    for poly, w in zip(traj.polylines, traj.weights):
        cells = CellSet(dims, frozenset(_rasterize_one(poly, dims)))
        d = np.sqrt(_edt_sq(cells.to_mask())) / w
        best = d if best is None else np.minimum(best, d)
    return DistanceField(dims, best)


def bilinear_resample(values: np.ndarray, dims: tuple[int, int]) -> np.ndarray:
    """Bilinear resample of a 2D array onto another grid resolution."""
    h0, w0 = values.shape
    h1, w1 = dims
    if (h0, w0) == (h1, w1):
        return values
    rs = np.linspace(0, h0 - 1, h1)
    cs = np.linspace(0, w0 - 1, w1)
    r0 = np.floor(rs).astype(int)
    c0 = np.floor(cs).astype(int)
    r1 = np.minimum(r0 + 1, h0 - 1)
    c1 = np.minimum(c0 + 1, w0 - 1)
    fr = (rs - r0)[:, None]
    fc = (cs - c0)[None, :]
    top = values[np.ix_(r0, c0)] * (1 - fc) + values[np.ix_(r0, c1)] * fc
    bot = values[np.ix_(r1, c0)] * (1 - fc) + values[np.ix_(r1, c1)] * fc
    return top * (1 - fr) + bot * fr


def resample_field(fieldv: DistanceField, dims: tuple[int, int]) -> DistanceField:
    """Bilinear resample of a distance field onto another grid resolution."""
    if tuple(dims) == tuple(fieldv.dims):
        return fieldv
    return DistanceField(dims, bilinear_resample(fieldv.values, dims))
