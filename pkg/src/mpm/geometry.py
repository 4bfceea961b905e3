"""Finite unions of axis-aligned boxes and the bisection engine.

Set operations work on a compressed grid built from the breakpoints of both
operands, so they are exact.  Boxes with zero width in some axis are dropped by
binary operations (sets are compared up to measure zero); point membership uses
closed boxes.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kernels
from .formula import And, BoxRegion, Not, Or, Predicate, RegionExpr, TrueRegion

log = logging.getLogger(__name__)

# largest compressed grid materialised by set operations and cover indices
MAX_GRID_CELLS = 1 << 24


class CeilingError(RuntimeError):
    """A computation exceeded its box-count ceiling."""


def as_eps(eps, dim: int) -> np.ndarray:
    e = np.broadcast_to(np.asarray(eps, dtype=float), (dim,)).copy()
    if np.any(~(e > 0)):
        raise ValueError(f"eps must be positive, got {eps}")
    return e


@dataclass(frozen=True)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float).reshape(-1)
        hi = np.asarray(self.hi, dtype=float).reshape(-1)
        if lo.shape != hi.shape or np.any(lo > hi):
            raise ValueError(f"invalid box lo={lo} hi={hi}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def widths(self) -> np.ndarray:
        return self.hi - self.lo

    @property
    def volume(self) -> float:
        return float(np.prod(self.widths))

    def contains(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(np.all((self.lo <= x) & (x <= self.hi)))

    def center(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)

    def __eq__(self, other):
        return isinstance(other, Box) and np.array_equal(self.lo, other.lo) and np.array_equal(self.hi, other.hi)

    def __hash__(self):
        return hash((self.lo.tobytes(), self.hi.tobytes()))

    def __repr__(self):
        return f"Box({self.lo.tolist()}, {self.hi.tolist()})"


class BoxUnion:
    """Immutable union of boxes stored as ``lo``/``hi`` arrays of shape (N, n)."""

    __slots__ = ("lo", "hi", "disjoint", "_cover")

    def __init__(self, lo, hi, disjoint: bool = False):
        lo = np.array(lo, dtype=float, ndmin=2)
        hi = np.array(hi, dtype=float, ndmin=2)
        if lo.shape != hi.shape:
            raise ValueError("lo and hi shapes differ")
        if np.any(lo > hi):
            raise ValueError("box with lo > hi")
        lo.setflags(write=False)
        hi.setflags(write=False)
        self.lo, self.hi = lo, hi
        self.disjoint = disjoint or len(lo) <= 1
        self._cover = None

    # construction
    @classmethod
    def empty(cls, dim: int) -> "BoxUnion":
        return cls(np.empty((0, dim)), np.empty((0, dim)), disjoint=True)

    @classmethod
    def from_box(cls, box: Box) -> "BoxUnion":
        return cls(box.lo[None], box.hi[None], disjoint=True)

    @classmethod
    def from_boxes(cls, boxes) -> "BoxUnion":
        boxes = list(boxes)
        if not boxes:
            raise ValueError("from_boxes needs at least one box; use empty(dim)")
        return cls([b.lo for b in boxes], [b.hi for b in boxes])

    # basic properties
    @property
    def dim(self) -> int:
        return self.lo.shape[1]

    def __len__(self) -> int:
        return len(self.lo)

    @property
    def boxes(self) -> list[Box]:
        return [Box(a, b) for a, b in zip(self.lo, self.hi)]

    def is_empty(self) -> bool:
        return not np.any(np.all(self.hi > self.lo, axis=1))

    def volume(self) -> float:
        if self.disjoint:
            return float(np.prod(self.hi - self.lo, axis=1).sum())
        return self.canonical().volume()

    def bounding_box(self) -> Box | None:
        if len(self) == 0:
            return None
        return Box(self.lo.min(axis=0), self.hi.max(axis=0))

    def contains_point(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"point of shape {x.shape} for a {self.dim}-dimensional set")
        if len(self) == 0:
            return False
        return kernels.contains_point(self.lo, self.hi, x)

    def contains_points(self, pts) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        out = np.zeros(len(pts), dtype=bool)
        for a, b in zip(self.lo, self.hi):
            out |= np.all((pts >= a) & (pts <= b), axis=1)
        return out

    def project(self, dims) -> "BoxUnion":
        dims = list(dims)
        return BoxUnion(self.lo[:, dims], self.hi[:, dims]).canonical()

    # set algebra
    def _check(self, other: "BoxUnion"):
        if self.dim != other.dim:
            raise ValueError(f"dimension mismatch {self.dim} vs {other.dim}")

    def intersect(self, other: "BoxUnion") -> "BoxUnion":
        self._check(other)
        return _combine(self, other, np.logical_and)

    def union(self, other: "BoxUnion") -> "BoxUnion":
        self._check(other)
        return _combine(self, other, np.logical_or)

    def difference(self, other: "BoxUnion") -> "BoxUnion":
        self._check(other)
        return _combine(self, other, lambda a, b: a & ~b)

    __and__ = intersect
    __or__ = union
    __sub__ = difference

    def clip(self, box: Box) -> "BoxUnion":
        lo = np.maximum(self.lo, box.lo)
        hi = np.minimum(self.hi, box.hi)
        keep = np.all(hi > lo, axis=1)
        return BoxUnion(lo[keep], hi[keep], disjoint=self.disjoint)

    def is_subset(self, other: "BoxUnion") -> bool:
        """``self ⊆ other`` up to measure zero."""
        self._check(other)
        live = np.all(self.hi > self.lo, axis=1)
        if not live.any():
            return True
        if len(other) == 0:
            return False
        covered, _ = other.cover_index().query(self.lo[live], self.hi[live])
        return bool(covered.all())

    def equals(self, other: "BoxUnion") -> bool:
        return self.is_subset(other) and other.is_subset(self)

    def canonical(self) -> "BoxUnion":
        """Disjoint representation with adjacent boxes merged."""
        if len(self) == 0:
            return self
        if self.disjoint:
            lo, hi = self.lo, self.hi
            keep = np.all(hi > lo, axis=1)
            return BoxUnion(*merge_adjacent(lo[keep], hi[keep]), disjoint=True)
        return _combine(self, BoxUnion.empty(self.dim), np.logical_or)

    def cover_index(self) -> "CoverIndex":
        if self._cover is None:
            self._cover = CoverIndex(self)
        return self._cover

    # serialisation
    def to_dict(self, eps=None) -> dict:
        return {
            "dim": self.dim,
            "eps": None if eps is None else np.atleast_1d(eps).tolist(),
            "boxes": [{"lo": a.tolist(), "hi": b.tolist()} for a, b in zip(self.lo, self.hi)],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BoxUnion":
        n = int(d["dim"])
        boxes = d["boxes"]
        if not boxes:
            return cls.empty(n)
        lo = np.array([b["lo"] for b in boxes], dtype=float).reshape(-1, n)
        hi = np.array([b["hi"] for b in boxes], dtype=float).reshape(-1, n)
        return cls(lo, hi, disjoint=bool(d.get("disjoint", True)))

    def to_json(self, eps=None) -> str:
        return json.dumps(self.to_dict(eps))

    def __repr__(self):
        return f"BoxUnion(dim={self.dim}, boxes={len(self)})"


# ---------------------------------------------------------------------------
# compressed grids


def _breakpoints(*unions: BoxUnion) -> list[np.ndarray]:
    n = unions[0].dim
    return [np.unique(np.concatenate([np.concatenate([u.lo[:, d], u.hi[:, d]]) for u in unions])) for d in range(n)]


def _cell_ranges(u: BoxUnion, coords: list[np.ndarray]):
    start = np.stack([np.searchsorted(c, u.lo[:, d]) for d, c in enumerate(coords)], axis=1)
    stop = np.stack([np.searchsorted(c, u.hi[:, d]) for d, c in enumerate(coords)], axis=1)
    return start, stop


def _rasterize(u: BoxUnion, coords: list[np.ndarray]) -> np.ndarray:
    """Boolean occupancy of the compressed-grid cells."""
    shape = tuple(max(len(c) - 1, 0) for c in coords)
    occ = np.zeros(tuple(s + 1 for s in shape), dtype=np.int32)
    if len(u) == 0 or 0 in shape:
        return np.zeros(shape, dtype=bool)
    start, stop = _cell_ranges(u, coords)
    live = np.all(stop > start, axis=1)
    start, stop = start[live], stop[live]
    n = u.dim
    for corner in range(1 << n):
        bits = [(corner >> d) & 1 for d in range(n)]
        idx = tuple(np.where(bits[d], stop[:, d], start[:, d]) for d in range(n))
        np.add.at(occ, idx, (-1) ** sum(bits))
    for d in range(n):
        np.cumsum(occ, axis=d, out=occ)
    return occ[tuple(slice(0, s) for s in shape)] > 0


def _cells_to_union(mask: np.ndarray, coords: list[np.ndarray]) -> BoxUnion:
    idx = np.nonzero(mask)
    n = len(coords)
    if len(idx[0]) == 0:
        return BoxUnion.empty(n)
    lo = np.stack([coords[d][idx[d]] for d in range(n)], axis=1)
    hi = np.stack([coords[d][idx[d] + 1] for d in range(n)], axis=1)
    return BoxUnion(*merge_adjacent(lo, hi), disjoint=True)


def _grid_size(coords) -> int:
    size = 1
    for c in coords:
        size *= max(len(c) - 1, 1)
    return size


def _combine(a: BoxUnion, b: BoxUnion, op) -> BoxUnion:
    coords = _breakpoints(a, b)
    if _grid_size(coords) <= MAX_GRID_CELLS:
        return _cells_to_union(op(_rasterize(a, coords), _rasterize(b, coords)), coords)
    return _combine_pairwise(a, b, op)


def _subtract(lo, hi, blo, bhi):
    """Pieces of boxes (lo, hi) outside one box (blo, bhi)."""
    overlap = np.all((np.minimum(hi, bhi) > np.maximum(lo, blo)), axis=1)
    keep_lo, keep_hi = [lo[~overlap]], [hi[~overlap]]
    clo, chi = lo[overlap].copy(), hi[overlap].copy()
    for d in range(lo.shape[1]):
        below = clo[:, d] < blo[d]
        plo, phi = clo[below].copy(), chi[below].copy()
        phi[:, d] = blo[d]
        keep_lo.append(plo)
        keep_hi.append(phi)
        above = chi[:, d] > bhi[d]
        plo, phi = clo[above].copy(), chi[above].copy()
        plo[:, d] = bhi[d]
        keep_lo.append(plo)
        keep_hi.append(phi)
        clo[:, d] = np.maximum(clo[:, d], blo[d])
        chi[:, d] = np.minimum(chi[:, d], bhi[d])
    return np.concatenate(keep_lo), np.concatenate(keep_hi)


def _disjoint_parts(u: BoxUnion):
    if u.disjoint:
        return u.lo, u.hi
    lo, hi = u.lo[:1], u.hi[:1]
    for a, b in zip(u.lo[1:], u.hi[1:]):
        plo, phi = a[None], b[None]
        for c, e in zip(lo, hi):
            plo, phi = _subtract(plo, phi, c, e)
        lo, hi = np.concatenate([lo, plo]), np.concatenate([hi, phi])
    return lo, hi


def _combine_pairwise(a: BoxUnion, b: BoxUnion, op) -> BoxUnion:
    log.debug("grid too large, falling back to pairwise box algebra")
    n = a.dim
    alo, ahi = _disjoint_parts(a)
    blo, bhi = _disjoint_parts(b)
    probe = op(np.array([True, True, False]), np.array([True, False, True]))
    both, only_a, only_b = bool(probe[0]), bool(probe[1]), bool(probe[2])
    parts_lo, parts_hi = [], []
    if both and len(alo) and len(blo):
        lo = np.maximum(alo[:, None, :], blo[None, :, :]).reshape(-1, n)
        hi = np.minimum(ahi[:, None, :], bhi[None, :, :]).reshape(-1, n)
        keep = np.all(hi > lo, axis=1)
        parts_lo.append(lo[keep])
        parts_hi.append(hi[keep])
    for want, (xlo, xhi), (ylo, yhi) in ((only_a, (alo, ahi), (blo, bhi)), (only_b, (blo, bhi), (alo, ahi))):
        if want:
            lo, hi = xlo, xhi
            for c, e in zip(ylo, yhi):
                lo, hi = _subtract(lo, hi, c, e)
            parts_lo.append(lo)
            parts_hi.append(hi)
    if not parts_lo:
        return BoxUnion.empty(n)
    lo, hi = np.concatenate(parts_lo), np.concatenate(parts_hi)
    keep = np.all(hi > lo, axis=1)
    return BoxUnion(*merge_adjacent(lo[keep], hi[keep]), disjoint=True)


def merge_adjacent(lo: np.ndarray, hi: np.ndarray, rounds: int = 3):
    """Merge disjoint boxes that share a face and an identical cross-section.

    Output is deterministic: boxes are sorted lexicographically by ``lo``.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    n = lo.shape[1] if lo.ndim == 2 else 0
    for _ in range(rounds):
        before = len(lo)
        for d in range(n):
            if len(lo) < 2:
                break
            others = [j for j in range(n) if j != d]
            keys = [lo[:, d]] + [hi[:, j] for j in others[::-1]] + [lo[:, j] for j in others[::-1]]
            order = np.lexsort(keys)
            lo, hi = lo[order], hi[order]
            same = np.ones(len(lo), dtype=bool)
            same[0] = False
            for j in others:
                same[1:] &= (lo[1:, j] == lo[:-1, j]) & (hi[1:, j] == hi[:-1, j])
            same[1:] &= lo[1:, d] == hi[:-1, d]
            first = np.flatnonzero(~same)
            last = np.append(first[1:] - 1, len(lo) - 1)
            new_lo = lo[first].copy()
            new_hi = hi[first].copy()
            new_hi[:, d] = hi[last, d]
            lo, hi = new_lo, new_hi
        if len(lo) == before:
            break
    if len(lo) > 1:
        order = np.lexsort([hi[:, j] for j in range(n)][::-1] + [lo[:, j] for j in range(n)][::-1])
        lo, hi = lo[order], hi[order]
    return lo, hi


class CoverIndex:
    """Prefix-sum table answering 'is this box covered / hit' against a union."""

    def __init__(self, u: BoxUnion):
        self.dim = u.dim
        live = np.all(u.hi > u.lo, axis=1)
        src = BoxUnion(u.lo[live], u.hi[live], disjoint=u.disjoint)
        if len(src) == 0:
            self.empty = True
            return
        self.empty = False
        coords = _breakpoints(src)
        if _grid_size(coords) > MAX_GRID_CELLS:
            raise CeilingError(
                f"cover index would need {_grid_size(coords)} cells (limit {MAX_GRID_CELLS})"
            )
        occ = _rasterize(src, coords).astype(np.int64)
        pre = np.zeros(tuple(s + 1 for s in occ.shape), dtype=np.int64)
        inner = tuple(slice(1, None) for _ in occ.shape)
        pre[inner] = occ
        for d in range(occ.ndim):
            np.cumsum(pre, axis=d, out=pre)
        self.coords = np.ascontiguousarray(np.concatenate(coords))
        self.offsets = np.cumsum([0] + [len(c) for c in coords]).astype(np.int64)
        self.prefix = np.ascontiguousarray(pre.reshape(-1))
        self.strides = (np.array(pre.strides, dtype=np.int64) // pre.itemsize).astype(np.int64)

    def query(self, qlo, qhi):
        qlo = np.atleast_2d(qlo)
        if self.empty:
            z = np.zeros(len(qlo), dtype=bool)
            return z, z.copy()
        return kernels.cover_query(self.coords, self.offsets, self.prefix, self.strides, qlo, qhi)


# ---------------------------------------------------------------------------
# bisection


def split_axis(widths: np.ndarray, eps: np.ndarray) -> int:
    """Axis to split: largest width/eps among axes wider than eps; ties go to the lowest axis."""
    ratio = widths / eps
    ratio = np.where(widths > eps, ratio, -np.inf)
    return int(np.argmax(ratio))


@dataclass
class BisectStats:
    processed: int = 0
    accepted: int = 0
    rejected: int = 0
    discarded: int = 0
    discarded_volume: float = 0.0

    def add(self, other: "BisectStats"):
        for f in ("processed", "accepted", "rejected", "discarded", "discarded_volume"):
            setattr(self, f, getattr(self, f) + getattr(other, f))


def bisect(
    domain: Box,
    eps,
    status: Callable[[np.ndarray, np.ndarray], np.ndarray],
    *,
    leaf_accept: bool = False,
    max_boxes: int = 1_000_000,
    stats: BisectStats | None = None,
) -> BoxUnion:
    """Subdivide ``domain`` guided by a three-valued ``status`` test.

    ``status(lo, hi)`` returns 1 (keep the box), -1 (drop it) or 0 (undecided).
    Undecided boxes are halved until every width is at most ``eps``; undecided
    leaves are dropped (inner approximation) or kept when ``leaf_accept``.
    Boxes at one depth share their shape, so each level is split along one axis.
    """
    n = domain.dim
    eps = as_eps(eps, n)
    stats = stats if stats is not None else BisectStats()
    lo = domain.lo[None].copy()
    hi = domain.hi[None].copy()
    out_lo, out_hi = [], []
    n_out = 0
    while len(lo):
        stats.processed += len(lo)
        s = np.asarray(status(lo, hi))
        acc = s > 0
        und = s == 0
        stats.accepted += int(acc.sum())
        stats.rejected += int((s < 0).sum())
        if acc.any():
            out_lo.append(lo[acc])
            out_hi.append(hi[acc])
            n_out += int(acc.sum())
        lo, hi = lo[und], hi[und]
        if not len(lo):
            break
        widths = hi[0] - lo[0]
        if np.all(widths <= eps):
            if leaf_accept:
                out_lo.append(lo)
                out_hi.append(hi)
                n_out += len(lo)
            else:
                stats.discarded += len(lo)
                stats.discarded_volume += float(np.prod(widths)) * len(lo)
            break
        d = split_axis(widths, eps)
        mid = 0.5 * (lo[:, d] + hi[:, d])
        lo2, hi2 = lo.copy(), hi.copy()
        hi[:, d] = mid
        lo2[:, d] = mid
        lo = np.concatenate([lo, lo2])
        hi = np.concatenate([hi, hi2])
        if n_out + len(lo) > max_boxes:
            raise CeilingError(f"bisection exceeded {max_boxes} boxes")
    if not out_lo:
        return BoxUnion.empty(n)
    lo, hi = np.concatenate(out_lo), np.concatenate(out_hi)
    return BoxUnion(*merge_adjacent(lo, hi), disjoint=True)


# ---------------------------------------------------------------------------
# regions to boxes


def _axis_halfspace(p: Predicate, domain: Box) -> BoxUnion:
    j = p.axis()
    c = p.coeffs[j]
    bound = -p.offset / c
    lo, hi = domain.lo.copy(), domain.hi.copy()
    if c > 0:
        lo[j] = max(lo[j], bound)
    else:
        hi[j] = min(hi[j], bound)
    if lo[j] > hi[j]:
        return BoxUnion.empty(domain.dim)
    return BoxUnion.from_box(Box(lo, hi))


def region_to_boxes(region: RegionExpr, domain: Box, eps, mode: str = "inner", max_boxes: int = 1_000_000) -> BoxUnion:
    """Box union approximating ``region ∩ domain``.

    Exact for ``true``, boxes and axis-aligned predicates and for any Boolean
    combination of those.  Other predicates are bisected down to ``eps``;
    ``mode`` picks an inner or an outer approximation, and negation flips it.
    """
    if mode not in ("inner", "outer"):
        raise ValueError("mode must be 'inner' or 'outer'")
    return _to_boxes(region, domain, eps, mode == "inner", max_boxes)


def _to_boxes(r: RegionExpr, domain: Box, eps, inner: bool, max_boxes: int) -> BoxUnion:
    n = domain.dim
    whole = BoxUnion.from_box(domain)
    if isinstance(r, TrueRegion):
        return whole
    if isinstance(r, BoxRegion):
        lo = np.maximum(domain.lo, r.lo)
        hi = np.minimum(domain.hi, r.hi)
        if np.any(lo > hi):
            return BoxUnion.empty(n)
        return BoxUnion.from_box(Box(lo, hi))
    if isinstance(r, Predicate):
        if r.axis() is not None:
            return _axis_halfspace(r, domain)
        if not any(r.coeffs):
            return whole if r.offset >= 0 else BoxUnion.empty(n)
        return bisect(domain, eps, r.classify, leaf_accept=not inner, max_boxes=max_boxes)
    if isinstance(r, Not):
        return whole.difference(_to_boxes(r.child, domain, eps, not inner, max_boxes))
    if isinstance(r, And):
        acc = whole
        for c in r.children:
            acc = acc.intersect(_to_boxes(c, domain, eps, inner, max_boxes))
        return acc
    if isinstance(r, Or):
        acc = BoxUnion.empty(n)
        for c in r.children:
            acc = acc.union(_to_boxes(c, domain, eps, inner, max_boxes))
        return acc
    raise TypeError(f"unsupported region {type(r).__name__}")


# ---------------------------------------------------------------------------
# distances


def _intervals(u: BoxUnion) -> np.ndarray:
    """Merged closed intervals of a 1-d union, as an (m, 2) array."""
    if u.dim != 1:
        raise ValueError("expected a 1-dimensional union")
    if len(u) == 0:
        return np.empty((0, 2))
    order = np.argsort(u.lo[:, 0])
    lo, hi = u.lo[order, 0], u.hi[order, 0]
    out = [[lo[0], hi[0]]]
    for a, b in zip(lo[1:], hi[1:]):
        if a <= out[-1][1]:
            out[-1][1] = max(out[-1][1], b)
        else:
            out.append([a, b])
    return np.array(out)


def _directed_1d(a: np.ndarray, b: np.ndarray) -> float:
    # sup over points of a of the distance to b; the maximum sits on an
    # endpoint of a or on a gap midpoint of b inside a
    cand = list(a.ravel())
    mids = 0.5 * (b[1:, 0] + b[:-1, 1])
    for m in mids:
        if np.any((a[:, 0] <= m) & (m <= a[:, 1])):
            cand.append(m)
    cand = np.array(cand)
    d = np.maximum(0.0, np.maximum(b[None, :, 0] - cand[:, None], cand[:, None] - b[None, :, 1]))
    return float(d.min(axis=1).max())


def hausdorff_1d(u: BoxUnion, v: BoxUnion) -> float:
    """Exact Hausdorff distance between two nonempty 1-d unions."""
    a, b = _intervals(u), _intervals(v)
    if len(a) == 0 or len(b) == 0:
        return 0.0 if len(a) == len(b) else float("inf")
    return max(_directed_1d(a, b), _directed_1d(b, a))
