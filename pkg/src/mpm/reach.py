"""One-step backward reachability by interval branch and bound.

``one_step_feasible`` inner-approximates the states that some admissible input
drives into a target; ``one_step_satisfiable`` those that every admissible
input drives into it.  Existence of an input is certified with point inputs
from a nested lattice over the input box (vertices first, then finer levels),
so soundness never depends on enclosure tightness over input boxes.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from itertools import product

import numpy as np

from . import kernels
from .dynamics import SystemModel
from .geometry import BisectStats, Box, BoxUnion, as_eps, bisect
from .kernels import njit

FEASIBLE = 0
SATISFIABLE = 1

# cap on point inputs tried per state box
MAX_CANDIDATES = 32
# rows per vectorised numpy batch (boxes x candidates)
_NP_BATCH = 1 << 16


def state_depth(domain: Box, eps) -> int:
    """Halvings per axis needed to bring the widest axis of ``domain`` below eps."""
    e = as_eps(eps, domain.dim)
    ratio = np.max(domain.widths / e)
    return max(0, int(math.ceil(math.log2(ratio)))) if ratio > 1 else 0


def default_input_levels(domain: Box, eps, m: int, max_candidates: int = MAX_CANDIDATES) -> int:
    cap = 0
    while (2 ** (cap + 1) + 1) ** m <= max_candidates:
        cap += 1
    return min(state_depth(domain, eps), cap)


def input_candidates(ubox: Box, levels: int) -> np.ndarray:
    """Nested lattice points of ``ubox``: vertices, then each finer level's new points."""
    m = ubox.dim
    pts = []
    for level in range(levels + 1):
        steps = 2**level
        for idx in product(range(steps + 1), repeat=m):
            if level > 0 and all(i % 2 == 0 for i in idx):
                continue
            frac = np.array(idx, dtype=float) / steps
            pts.append(ubox.lo + frac * (ubox.hi - ubox.lo))
    return np.ascontiguousarray(np.array(pts).reshape(-1, m))


# ---------------------------------------------------------------------------
# status kernels


@njit(nogil=True)
def _status_nb(lo, hi, ulo, uhi, cands, p, enc, coords, offsets, prefix, strides, mode, out):
    k_box, n = lo.shape
    olo = np.empty(n)
    ohi = np.empty(n)
    i0 = np.empty(n, dtype=np.int64)
    i1 = np.empty(n, dtype=np.int64)
    for b in range(k_box):
        enc(lo[b], hi[b], ulo, uhi, p, olo, ohi)
        cov, hit = kernels._query_one(coords, offsets, prefix, strides, olo, ohi, i0, i1)
        if cov:
            out[b] = 1
            continue
        if not hit:
            out[b] = -1
            continue
        out[b] = 0
        for c in range(cands.shape[0]):
            u = cands[c]
            enc(lo[b], hi[b], u, u, p, olo, ohi)
            cov, hit = kernels._query_one(coords, offsets, prefix, strides, olo, ohi, i0, i1)
            if mode == 0 and cov:
                out[b] = 1
                break
            if mode == 1 and not hit:
                out[b] = -1
                break


def _status_np(model, lo, hi, ubox, cands, cover, mode):
    k_box = len(lo)
    ulo = np.broadcast_to(ubox.lo, (k_box, model.m))
    uhi = np.broadcast_to(ubox.hi, (k_box, model.m))
    elo, ehi = model.enclose(lo, hi, ulo, uhi)
    cov, hit = cover.query(elo, ehi)
    out = np.where(cov, 1, np.where(hit, 0, -1)).astype(np.int8)
    todo = np.flatnonzero(out == 0)
    c_start = 0
    n_c = len(cands)
    while len(todo) and c_start < n_c:
        chunk = max(1, min(n_c - c_start, _NP_BATCH // max(len(todo), 1)))
        cu = cands[c_start : c_start + chunk]
        c_start += chunk
        rows = np.repeat(todo, len(cu))
        u = np.tile(cu, (len(todo), 1))
        elo, ehi = model.enclose(lo[rows], hi[rows], u, u)
        cov, hit = cover.query(elo, ehi)
        if mode == FEASIBLE:
            done = cov.reshape(len(todo), len(cu)).any(axis=1)
            out[todo[done]] = 1
        else:
            done = (~hit).reshape(len(todo), len(cu)).any(axis=1)
            out[todo[done]] = -1
        todo = todo[~done]
    return out


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("MPM_THREADS", "1")))
    except ValueError:
        return 1


class _StatusFn:
    """Callable ``status(lo, hi)`` for the bisection engine."""

    def __init__(self, model: SystemModel, target: BoxUnion, k: int, eps, mode: int, input_levels=None):
        self.model = model
        self.mode = mode
        self.ubox = model.input_domain(k)
        levels = input_levels if input_levels is not None else default_input_levels(model.state_domain, eps, model.m)
        self.cands = input_candidates(self.ubox, levels)
        self.cover = target.cover_index()
        self.backend = kernels.backend()

    def __call__(self, lo, hi):
        if self.backend == "numpy" or self.cover.empty:
            return _status_np(self.model, lo, hi, self.ubox, self.cands, self.cover, self.mode)
        lo = np.ascontiguousarray(lo)
        hi = np.ascontiguousarray(hi)
        out = np.zeros(len(lo), dtype=np.int8)
        cv = self.cover
        args = (self.ubox.lo, self.ubox.hi, self.cands, self.model.packed(), self.model.nb_enclose,
                cv.coords, cv.offsets, cv.prefix, cv.strides, self.mode)
        n_thr = _threads()
        if n_thr == 1 or len(lo) < 256:
            _status_nb(lo, hi, *args, out)
            return out
        bounds = np.linspace(0, len(lo), n_thr + 1).astype(int)
        with ThreadPoolExecutor(n_thr) as ex:
            futs = [
                ex.submit(_status_nb, lo[a:b], hi[a:b], *args, out[a:b])
                for a, b in zip(bounds[:-1], bounds[1:]) if b > a
            ]
            for f in futs:
                f.result()
        return out


def _one_step(model, target, k, eps, mode, stats, input_levels, max_boxes):
    if target is None:
        # unconstrained successor: every state of the domain qualifies
        return BoxUnion.from_box(model.state_domain)
    if target.dim != model.n:
        raise ValueError(f"target of dimension {target.dim} for a {model.n}-dimensional model")
    status = _StatusFn(model, target, k, eps, mode, input_levels)
    return bisect(model.state_domain, eps, status, max_boxes=max_boxes, stats=stats)


def one_step_feasible(model: SystemModel, target: BoxUnion | None, k: int, eps, *, stats: BisectStats | None = None,
                      input_levels: int | None = None, max_boxes: int = 1_000_000) -> BoxUnion:
    """Inner approximation of ``{x in X : f(x, u) in target for some u in U(k)}``.

    ``target=None`` stands for the whole space.
    """
    return _one_step(model, target, k, eps, FEASIBLE, stats, input_levels, max_boxes)


def one_step_satisfiable(model: SystemModel, target: BoxUnion | None, k: int, eps, *, stats: BisectStats | None = None,
                         input_levels: int | None = None, max_boxes: int = 1_000_000) -> BoxUnion:
    """Inner approximation of ``{x in X : f(x, u) in target for every u in U(k)}``."""
    return _one_step(model, target, k, eps, SATISFIABLE, stats, input_levels, max_boxes)
