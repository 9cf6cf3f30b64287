"""Boxes, regions and discretization nets on [0, 1]^d under the L-infinity metric.

A :class:`Region` is always a finite union of closed axis-aligned boxes clipped
to the ambient domain. Intersections and closed differences are computed with
exact box arithmetic so membership stays a pure predicate.

Nets are built by a greedy lexicographic scan over a candidate grid of pitch
``r / 2`` anchored at the domain origin. Each part box also contributes its own
faces as candidates, which keeps the covering radius at most ``r`` even for
boxes thinner than one grid pitch.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

MAX_DIM = 3
TOL = 1e-12


class GeometryError(ValueError):
    pass


class EmptyRegion(GeometryError):
    pass


class InvalidScale(GeometryError):
    pass


def _check_scale(r: float) -> float:
    r = float(r)
    if not (0.0 < r <= 1.0):
        raise InvalidScale(f"scale must lie in (0, 1], got {r!r}")
    return r


@dataclass(frozen=True)
class Box:
    """Closed axis-aligned box ``[lo, hi]``; ``lo == hi`` on an axis is allowed."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise GeometryError("lo and hi must have the same length")
        if not 1 <= len(self.lo) <= MAX_DIM:
            raise GeometryError(f"dimension must be in 1..{MAX_DIM}, got {len(self.lo)}")
        object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in self.hi))

    @classmethod
    def unit(cls, d: int) -> "Box":
        return cls((0.0,) * d, (1.0,) * d)

    @classmethod
    def ball(cls, center: Sequence[float], radius: float) -> "Box":
        """Symmetric L-infinity ball B(center, radius)."""
        c = np.asarray(center, dtype=float).ravel()
        return cls(tuple(c - radius), tuple(c + radius))

    @classmethod
    def forward(cls, center: Sequence[float], radius: float) -> "Box":
        """Forward ball {y : y >= center coordinatewise, |y - center|_inf <= radius}."""
        c = np.asarray(center, dtype=float).ravel()
        return cls(tuple(c), tuple(c + radius))

    @classmethod
    def point(cls, x: Sequence[float]) -> "Box":
        c = tuple(float(v) for v in np.asarray(x, dtype=float).ravel())
        return cls(c, c)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def lo_arr(self) -> np.ndarray:
        return np.array(self.lo)

    @property
    def hi_arr(self) -> np.ndarray:
        return np.array(self.hi)

    @property
    def is_empty(self) -> bool:
        return any(l > h for l, h in zip(self.lo, self.hi))

    @property
    def volume(self) -> float:
        if self.is_empty:
            return 0.0
        return math.prod(h - l for l, h in zip(self.lo, self.hi))

    def contains(self, x: np.ndarray, tol: float = TOL) -> np.ndarray:
        """Vectorised membership for points of shape (d,) or (n, d)."""
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lo_arr - tol) & (x <= self.hi_arr + tol), axis=-1)

    def contains_box(self, other: "Box", tol: float = TOL) -> bool:
        return all(sl - tol <= ol and oh <= sh + tol
                   for sl, sh, ol, oh in zip(self.lo, self.hi, other.lo, other.hi))

    def intersect(self, other: "Box") -> "Box":
        return Box(tuple(max(a, b) for a, b in zip(self.lo, other.lo)),
                   tuple(min(a, b) for a, b in zip(self.hi, other.hi)))

    def subtract_open(self, other: "Box") -> list["Box"]:
        """Closed pieces covering ``self`` minus the open interior of ``other``."""
        if self.is_empty:
            return []
        if any(ol >= oh for ol, oh in zip(other.lo, other.hi)):
            return [self]  # empty interior
        if any(oh <= sl or ol >= sh for sl, sh, ol, oh in
               zip(self.lo, self.hi, other.lo, other.hi)):
            return [self]
        pieces = []
        lo, hi = list(self.lo), list(self.hi)
        for j in range(self.dim):
            if lo[j] < other.lo[j]:
                plo, phi = lo.copy(), hi.copy()
                phi[j] = other.lo[j]
                pieces.append(Box(tuple(plo), tuple(phi)))
                lo[j] = other.lo[j]
            if hi[j] > other.hi[j]:
                plo, phi = lo.copy(), hi.copy()
                plo[j] = other.hi[j]
                pieces.append(Box(tuple(plo), tuple(phi)))
                hi[j] = other.hi[j]
        return pieces


def _prune(boxes: Iterable[Box]) -> tuple[Box, ...]:
    """Drop empty boxes, duplicates, and boxes contained in another one."""
    kept: list[Box] = []
    for b in sorted({b for b in boxes if not b.is_empty},
                    key=lambda b: (-b.volume, b.lo, b.hi)):
        if not any(k.contains_box(b, tol=0.0) for k in kept):
            kept.append(b)
    return tuple(sorted(kept, key=lambda b: (b.lo, b.hi)))


@dataclass(frozen=True)
class Region:
    """``domain`` intersected with the union of ``parts``.

    ``parts=None`` means the whole domain; an empty tuple is the empty region.
    Parts are stored already clipped to the domain.
    """

    domain: Box
    parts: tuple[Box, ...] | None = None

    def __post_init__(self):
        if self.parts is not None:
            clipped = _prune(p.intersect(self.domain) for p in self.parts)
            object.__setattr__(self, "parts", clipped)

    @classmethod
    def whole(cls, d: int) -> "Region":
        return cls(Box.unit(d), None)

    @classmethod
    def union(cls, boxes: Iterable[Box], domain: Box | None = None) -> "Region":
        boxes = tuple(boxes)
        if domain is None:
            if not boxes:
                raise GeometryError("cannot infer dimension of an empty union")
            domain = Box.unit(boxes[0].dim)
        return cls(domain, boxes)

    @classmethod
    def balls(cls, centers: np.ndarray, radius: float, domain: Box,
              forward: bool = False) -> "Region":
        make = Box.forward if forward else Box.ball
        return cls(domain, tuple(make(c, radius) for c in np.atleast_2d(centers)))

    @property
    def dim(self) -> int:
        return self.domain.dim

    @property
    def mode(self) -> str:
        return "whole-domain" if self.parts is None else "union-of-parts"

    @property
    def boxes(self) -> tuple[Box, ...]:
        return (self.domain,) if self.parts is None else self.parts

    @property
    def is_empty(self) -> bool:
        return len(self.boxes) == 0 or all(b.is_empty for b in self.boxes)

    def contains(self, x: np.ndarray, tol: float = TOL) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        inside = self.domain.contains(x, tol)
        if self.parts is None:
            return inside
        hit = np.zeros(inside.shape, dtype=bool)
        for b in self.parts:
            hit |= b.contains(x, tol)
        return inside & hit

    def intersect(self, other: "Region") -> "Region":
        dom = self.domain.intersect(other.domain)
        return Region(dom, tuple(a.intersect(b) for a in self.boxes for b in other.boxes))

    def minus_open(self, other: "Region") -> "Region":
        """Closure of ``self`` minus ``other`` (interiors of other's boxes removed)."""
        pieces = list(self.boxes)
        for hole in other.boxes:
            pieces = [q for p in pieces for q in p.subtract_open(hole)]
        return Region(self.domain, tuple(pieces))

    def volume(self) -> float:
        """Exact Lebesgue volume of the union via coordinate compression."""
        boxes = [b for b in self.boxes if b.volume > 0]
        if not boxes:
            return 0.0
        axes = [sorted({v for b in boxes for v in (b.lo[j], b.hi[j])}) for j in range(self.dim)]
        total = 0.0
        for cell in itertools.product(*(range(len(a) - 1) for a in axes)):
            mid = [0.5 * (axes[j][i] + axes[j][i + 1]) for j, i in enumerate(cell)]
            if any(b.contains(np.array(mid), tol=0.0) for b in boxes):
                total += math.prod(axes[j][i + 1] - axes[j][i] for j, i in enumerate(cell))
        return total

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Uniform samples from the union (overlaps handled by thinning)."""
        boxes = [b for b in self.boxes if not b.is_empty]
        if not boxes:
            raise EmptyRegion("cannot sample from an empty region")
        vols = np.array([b.volume for b in boxes])
        if vols.sum() == 0:
            vols = np.ones(len(boxes))
        probs = vols / vols.sum()
        lo = np.array([b.lo for b in boxes])
        hi = np.array([b.hi for b in boxes])
        out = np.empty((0, self.dim))
        while len(out) < n:
            m = 2 * (n - len(out)) + 16
            idx = rng.choice(len(boxes), size=m, p=probs)
            pts = lo[idx] + rng.random((m, self.dim)) * (hi[idx] - lo[idx])
            mult = np.zeros(m)
            for b in boxes:
                mult += b.contains(pts, tol=0.0)
            mult = np.maximum(mult, 1)
            keep = rng.random(m) < 1.0 / mult
            out = np.vstack([out, pts[keep]])
        return out[:n]

    def describe(self) -> dict:
        return {"mode": self.mode, "n_parts": len(self.boxes),
                "volume": self.volume()}


@dataclass(frozen=True)
class Net:
    points: np.ndarray = field(repr=False)
    scale: float
    separation: float
    grid_pitch: float
    forward: bool = False

    def __len__(self) -> int:
        return len(self.points)

    def __eq__(self, other):
        return (isinstance(other, Net) and self.scale == other.scale
                and self.forward == other.forward
                and np.array_equal(self.points, other.points))

    __hash__ = None


def _axis_coords(lo: float, hi: float, pitch: float) -> np.ndarray:
    """Grid coordinates of pitch ``pitch`` inside [lo, hi], plus both faces."""
    i0 = math.ceil(lo / pitch - 1e-9)
    i1 = math.floor(hi / pitch + 1e-9)
    grid = np.arange(i0, i1 + 1) * pitch
    grid = grid[(grid >= lo - TOL) & (grid <= hi + TOL)]
    coords = np.concatenate([[lo], grid, [hi]])
    return np.unique(np.round(coords, 12))


def candidate_grid(region: Region, pitch: float) -> np.ndarray:
    """Lexicographically sorted candidate points lying in ``region``."""
    chunks = []
    for b in region.boxes:
        if b.is_empty:
            continue
        axes = [_axis_coords(l, h, pitch) for l, h in zip(b.lo, b.hi)]
        mesh = np.meshgrid(*axes, indexing="ij")
        chunks.append(np.stack([m.ravel() for m in mesh], axis=1))
    if not chunks:
        return np.empty((0, region.dim))
    pts = np.unique(np.concatenate(chunks), axis=0)  # unique sorts lexicographically
    return pts[region.contains(pts)]


def _min_pairwise(points: np.ndarray) -> float:
    if len(points) < 2:
        return math.inf
    from scipy.spatial import cKDTree

    dist, _ = cKDTree(points).query(points, k=2, p=np.inf)
    return float(dist[:, 1].min())


def _greedy(cands: np.ndarray, thresh: float, forward: bool) -> np.ndarray:
    """Greedy scan in candidate order, with a spatial hash keyed on the blocking distance."""
    d = cands.shape[1]
    cells: dict[tuple, list[tuple]] = {}
    chosen = []
    offsets = list(itertools.product((-1, 0, 1), repeat=d))
    lim = thresh + TOL
    # cells slightly wider than the blocking distance, so blockers sit in adjacent cells
    cell = lim * (1 + 1e-6)
    for c in map(tuple, cands.tolist()):
        key = tuple(math.floor(v / cell) for v in c)
        blocked = False
        for off in offsets:
            for a in cells.get(tuple(k + o for k, o in zip(key, off)), ()):
                if max(abs(u - v) for u, v in zip(c, a)) <= lim and (
                        not forward or all(u <= v + TOL for u, v in zip(a, c))):
                    blocked = True
                    break
            if blocked:
                break
        if not blocked:
            chosen.append(c)
            cells.setdefault(key, []).append(c)
    return np.array(chosen, dtype=float).reshape(-1, d)


def greedy_net(region: Region, r: float) -> Net:
    """Symmetric discretization oracle.

    Covers ``region`` with L-inf balls of radius ``r`` around the returned
    points; points are pairwise more than ``r / 2`` apart.
    """
    r = _check_scale(r)
    pitch = r / 2
    cands = candidate_grid(region, pitch)
    if len(cands) == 0:
        raise EmptyRegion("candidate grid does not meet the region")
    pts = _greedy(cands, r / 2, forward=False)
    return Net(pts, r, _min_pairwise(pts), pitch)


def forward_net(region: Region, r: float) -> Net:
    """Forward discretization oracle.

    Every point ``y`` of ``region`` has an anchor ``a`` in the net with
    ``a <= y`` coordinatewise and ``|y - a|_inf <= r``. A candidate is kept
    unless an earlier anchor lies below it within ``r / 2``; the nearest
    lower-left candidate of any region point is within ``r / 2`` of it.
    """
    r = _check_scale(r)
    pitch = r / 2
    cands = candidate_grid(region, pitch)
    if len(cands) == 0:
        raise EmptyRegion("candidate grid does not meet the region")
    pts = _greedy(cands, r / 2, forward=True)
    return Net(pts, r, _min_pairwise(pts), pitch, forward=True)


def nearest_distance(net_points: np.ndarray, x: np.ndarray) -> np.ndarray:
    from scipy.spatial import cKDTree

    dist, _ = cKDTree(net_points).query(np.atleast_2d(x), p=np.inf)
    return dist


def packing_number(region: Region, r: float, pitch: float | None = None) -> int:
    """Size of a greedily built subset with pairwise distance strictly above ``r``.

    Candidates are the region's grid of pitch ``pitch`` (default ``r / 2``)
    plus part faces, so the result is a lower bound on the packing number.
    """
    r = _check_scale(r)
    if region.is_empty:
        return 0
    cands = candidate_grid(region, pitch or r / 2)
    if len(cands) == 0:
        return 0
    return len(_greedy(cands, r, forward=False))


@dataclass(frozen=True)
class CoveringEstimate:
    proxy: int
    packing_2r: int
    packing_r: int

    def __int__(self):
        return self.proxy


def covering_number(region: Region, r: float) -> CoveringEstimate:
    """Greedy-net size at ``r`` plus the packing sandwich N(Y, 2r) <= M(Y, r) <= N(Y, r)."""
    r = _check_scale(r)
    if region.is_empty:
        return CoveringEstimate(0, 0, 0)
    proxy = len(greedy_net(region, r))
    lower = packing_number(region, min(2 * r, 1.0)) if 2 * r <= 1.0 else min(1, proxy)
    return CoveringEstimate(proxy, lower, packing_number(region, r))
