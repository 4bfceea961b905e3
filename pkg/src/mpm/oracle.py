"""Exhaustive grid dynamic programming, used as an independent reference.

States live on a finite grid over the state domain and inputs on a finite
grid over the input box.  Successors are evaluated pointwise and snapped to
the nearest grid point; a successor outside the state domain is dead unless it
is the final (unconstrained) step.  The recursion mirrors the table
recursion but works on Boolean arrays over grid points, so its answers are
exact at grid resolution and carry no authority off the grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .dynamics import SystemModel
from .formula import (
    EMPTY,
    G,
    FormulaSpec,
    IndexSet,
    consistent_region,
    potential_index_sets,
    successor_sets,
)
from .geometry import Box

MAX_ORACLE_WORK = 50_000_000


class OracleTooLarge(RuntimeError):
    """The requested grid exceeds the work limit."""


def axis_points(lo: float, hi: float, spacing: float, align: str) -> np.ndarray:
    count = int(round((hi - lo) / spacing))
    if count < 1 or not np.isclose(count * spacing, hi - lo, rtol=1e-9, atol=1e-12):
        raise ValueError(f"spacing {spacing} does not divide [{lo}, {hi}]")
    if align == "nodes":
        return lo + spacing * np.arange(count + 1)
    if align == "centers":
        return lo + spacing * (np.arange(count) + 0.5)
    raise ValueError("align must be 'nodes' or 'centers'")


@dataclass
class StateGrid:
    axes: list[np.ndarray]
    domain: Box

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(a) for a in self.axes)

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def points(self) -> np.ndarray:
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def snap(self, pts: np.ndarray) -> np.ndarray:
        """Flat index of the nearest grid point; -1 outside the state domain."""
        idx = np.zeros(len(pts), dtype=np.int64)
        ok = np.all((pts >= self.domain.lo) & (pts <= self.domain.hi), axis=1)
        stride = 1
        for d in range(len(self.axes) - 1, -1, -1):
            a = self.axes[d]
            j = np.clip(np.searchsorted(a, pts[:, d]), 1, len(a) - 1) if len(a) > 1 else np.zeros(len(pts), dtype=np.int64)
            if len(a) > 1:
                left = a[j - 1]
                j = np.where(np.abs(pts[:, d] - left) <= np.abs(a[j] - pts[:, d]), j - 1, j)
            idx += j * stride
            stride *= len(a)
        return np.where(ok, idx, -1)


def make_grid(model: SystemModel, spacing, align: str = "centers") -> StateGrid:
    sp = np.broadcast_to(np.asarray(spacing, dtype=float), (model.n,))
    d = model.state_domain
    return StateGrid([axis_points(d.lo[i], d.hi[i], sp[i], align) for i in range(model.n)], d)


def input_grid(ubox: Box, counts) -> np.ndarray:
    counts = np.broadcast_to(np.asarray(counts, dtype=int), (ubox.dim,))
    axes = [np.linspace(ubox.lo[i], ubox.hi[i], counts[i]) if counts[i] > 1 else np.array([0.5 * (ubox.lo[i] + ubox.hi[i])])
            for i in range(ubox.dim)]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=1)


@dataclass
class GridTable:
    mode: str
    grid: StateGrid
    entries: dict[tuple[int, IndexSet], np.ndarray]
    horizon: int

    def get(self, k, I):
        return self.entries.get((k, IndexSet(int(I))))


def grid_tables(model: SystemModel, spec: FormulaSpec, grid: StateGrid, input_counts, mode: str = "feasible",
                max_work: int = MAX_ORACLE_WORK) -> GridTable:
    """Backward DP over the grid; ``mode`` is 'feasible' (some input) or 'satisfiable' (all inputs)."""
    T = spec.horizon_T
    pts = grid.points()
    n_pts = len(pts)
    succ_cache: dict[int, np.ndarray] = {}

    def successors(k: int) -> np.ndarray:
        ub = model.input_domain(k)
        key = hash((ub.lo.tobytes(), ub.hi.tobytes()))
        if key not in succ_cache:
            us = input_grid(ub, input_counts)
            if n_pts * len(us) * (T + 1) > max_work:
                raise OracleTooLarge(f"{n_pts} grid states x {len(us)} inputs exceeds the work limit")
            xs = np.repeat(pts, len(us), axis=0)
            uu = np.tile(us, (n_pts, 1))
            succ_cache[key] = grid.snap(model.f(xs, uu)).reshape(n_pts, len(us))
        return succ_cache[key]

    entries: dict[tuple[int, IndexSet], np.ndarray] = {(T + 1, EMPTY): np.ones(n_pts, dtype=bool)}
    for k in range(T, -1, -1):
        succ = {I: successor_sets(spec, I, k) for I in potential_index_sets(spec, k)}
        pre: dict[IndexSet, np.ndarray] = {}
        nxt = successors(k)
        for J in sorted({J for js in succ.values() for J in js}):
            if k == T:
                pre[J] = np.ones(n_pts, dtype=bool)
                continue
            target = entries[(k + 1, J)]
            hit = np.where(nxt >= 0, target[np.maximum(nxt, 0)], False)
            pre[J] = hit.any(axis=1) if mode == "feasible" else hit.all(axis=1)
        for I, js in succ.items():
            acc = np.zeros(n_pts, dtype=bool)
            for J in js:
                acc |= consistent_region(spec, k, I, J).contains_many(pts) & pre[J]
            entries[(k, I)] = acc
    return GridTable(mode, grid, entries, T)


class GridMonitor:
    """Monitor over grid tables, written separately from the box-table monitor."""

    def __init__(self, spec: FormulaSpec, feasible: GridTable, satisfiable: GridTable | None = None):
        self.spec, self.X, self.Y = spec, feasible, satisfiable
        self.k, self.I = 0, spec.all_indices
        self.done = False

    def step(self, x) -> tuple[str, int, IndexSet]:
        x = np.asarray(x, dtype=float)[None]
        k, I = self.k, self.I
        j = self.X.grid.snap(x)[0]
        entry = self.X.get(k, I)
        if j < 0 or entry is None or not entry[j]:
            self.done = True
            return "VIOLATED", k, I
        if self.Y is not None and self.Y.get(k, I) is not None and self.Y.get(k, I)[j]:
            self.done = True
            return "SATISFIED_GUARANTEED", k, I
        keep = []
        for i in I:
            s = self.spec.sub(i)
            if not s.a <= k <= s.b:
                keep.append(i)
                continue
            if s.op == G:
                gone = k == s.b and s.left.contains(x[0])
            else:
                gone = s.left.contains(x[0]) and s.right.contains(x[0])
            if not gone:
                keep.append(i)
        self.I = IndexSet.of(keep)
        self.k += 1
        if not keep:
            self.done = True
            return "COMPLETED", k, self.I
        return "FEASIBLE", k, self.I


@dataclass
class EntryComparison:
    k: int
    I: IndexSet
    table_points: int
    oracle_points: int
    table_not_oracle: int
    oracle_not_table: int
    dist_table_to_oracle: float
    dist_oracle_to_table: float


def compare(table, oracle: GridTable) -> list[EntryComparison]:
    """Per-entry comparison of a box table with grid tables at the grid points."""
    pts = oracle.grid.points()
    out = []
    for (k, I), mask in sorted(oracle.entries.items()):
        if k > oracle.horizon:
            continue
        entry = table.get(k, I)
        tmask = entry.contains_points(pts) if entry is not None else np.zeros(len(pts), dtype=bool)
        d_to, d_from = _grid_distance(pts[tmask], pts[mask]), _grid_distance(pts[mask], pts[tmask])
        out.append(EntryComparison(k, I, int(tmask.sum()), int(mask.sum()), int((tmask & ~mask).sum()),
                                   int((mask & ~tmask).sum()), d_to, d_from))
    return out


def _grid_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Largest distance from a point of ``a`` to the nearest point of ``b``."""
    if len(a) == 0:
        return 0.0
    if len(b) == 0:
        return float("inf")
    d, _ = cKDTree(b).query(a)
    return float(d.max())


def format_report(rows: list[EntryComparison]) -> str:
    lines = [
        "# grid oracle comparison: the oracle is exact only at its grid points;",
        "# behaviour between grid points is outside its authority",
        "k,I,table_pts,oracle_pts,table_not_oracle,oracle_not_table,dist_table_to_oracle,dist_oracle_to_table",
    ]
    for r in rows:
        lines.append(f"{r.k},\"{r.I}\",{r.table_points},{r.oracle_points},{r.table_not_oracle},{r.oracle_not_table},"
                     f"{r.dist_table_to_oracle:.6g},{r.dist_oracle_to_table:.6g}")
    bad = sum(r.table_not_oracle for r in rows)
    lines.append(f"# total table-not-oracle points: {bad}")
    return "\n".join(lines)
