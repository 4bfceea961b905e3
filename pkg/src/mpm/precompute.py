"""Backward computation of the per-instant feasible / satisfiable set tables.

For every instant ``k`` (from the horizon down to 0) and every potential
remaining set ``I``::

    X[k, I] = union over I' in succ(I, k) of  H_k(I, I') ∩ Pre(X[k+1, I'])

where ``Pre`` is the one-step feasible operator (satisfiable mode uses the
universal one-step operator on the satisfiable table).  ``X[T+1, {}]`` is the
whole space, stored as a box bounding the state domain and its image.
"""

from __future__ import annotations

import gzip
import json
import logging
import time
import warnings
from dataclasses import dataclass, field

import numpy as np

from .dynamics import SystemModel
from .formula import (
    EMPTY,
    FormulaSpec,
    IndexSet,
    RegionExpr,
    admissible_region,
    consistent_region,
    potential_index_sets,
    successor_sets,
)
from .geometry import BisectStats, BoxUnion, as_eps, bisect
from .reach import one_step_feasible, one_step_satisfiable

log = logging.getLogger(__name__)

FORMAT = "mpm-table/1"
MODES = ("feasible", "satisfiable")
DEFAULT_MAX_BOXES = 1_000_000


class DigestMismatch(ValueError):
    """A table was built for a different formula or model."""


@dataclass
class SetTable:
    mode: str
    entries: dict[tuple[int, IndexSet], BoxUnion]
    formula_digest: str
    model_digest: str
    eps: np.ndarray
    horizon: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        self.eps = np.atleast_1d(np.asarray(self.eps, dtype=float))

    @property
    def dim(self) -> int:
        return next(iter(self.entries.values())).dim

    def get(self, k: int, I) -> BoxUnion | None:
        return self.entries.get((k, IndexSet(int(I))))

    def keys_at(self, k: int) -> list[IndexSet]:
        return sorted(I for (kk, I) in self.entries if kk == k)

    def check_against(self, spec: FormulaSpec, model: SystemModel | None = None):
        if spec.digest() != self.formula_digest:
            raise DigestMismatch(f"{self.mode} table was built for a different formula")
        if model is not None and model.digest() != self.model_digest:
            raise DigestMismatch(f"{self.mode} table was built for a different model")

    def equals(self, other: "SetTable") -> bool:
        """Bit-exact equality of metadata and box coordinates."""
        if (self.mode, self.formula_digest, self.model_digest, self.horizon) != (
            other.mode, other.formula_digest, other.model_digest, other.horizon
        ):
            return False
        if not np.array_equal(self.eps, other.eps) or self.entries.keys() != other.entries.keys():
            return False
        for key, s in self.entries.items():
            o = other.entries[key]
            if not (np.array_equal(s.lo, o.lo) and np.array_equal(s.hi, o.hi)):
                return False
        return True

    # persistence
    def to_dict(self) -> dict:
        entries = []
        for (k, I) in sorted(self.entries):
            s = self.entries[(k, I)]
            entries.append({"k": k, "I": list(I), "set": s.to_dict(self.eps)})
        return {
            "format": FORMAT,
            "mode": self.mode,
            "eps": self.eps.tolist(),
            "horizon": self.horizon,
            "formula_digest": self.formula_digest,
            "model_digest": self.model_digest,
            "meta": self.meta,
            "entries": entries,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SetTable":
        if d.get("format") != FORMAT:
            raise ValueError(f"not a table file (format {d.get('format')!r})")
        entries = {}
        for e in d["entries"]:
            entries[(int(e["k"]), IndexSet.of(e["I"]))] = BoxUnion.from_dict(e["set"])
        return cls(d["mode"], entries, d["formula_digest"], d["model_digest"], d["eps"], int(d["horizon"]), d.get("meta", {}))


def save_table(table: SetTable, path) -> None:
    text = json.dumps(table.to_dict())
    path = str(path)
    if path.endswith(".gz"):
        with gzip.open(path, "wt", encoding="utf-8") as fh:
            fh.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def load_table(path, spec: FormulaSpec | None = None, model: SystemModel | None = None) -> SetTable:
    """Read a table; a digest mismatch against ``spec``/``model`` only warns."""
    path = str(path)
    opener = gzip.open if path.endswith(".gz") else open
    with opener(path, "rt", encoding="utf-8") as fh:
        try:
            d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"cannot parse table file {path}: {exc}") from exc
    table = SetTable.from_dict(d)
    if spec is not None or model is not None:
        try:
            if spec is not None:
                table.check_against(spec, model)
            elif model.digest() != table.model_digest:
                raise DigestMismatch("table was built for a different model")
        except DigestMismatch as exc:
            warnings.warn(str(exc), stacklevel=2)
    return table


# ---------------------------------------------------------------------------
# backward recursion


def _entry_status(admissible: RegionExpr, pairs):
    """Status for the entry bisection.

    A box is kept when one successor's consistent region and preimage both
    contain it, or when it lies in the admissible region and, for every
    successor, either misses the consistent region or lies in the preimage
    (the consistent regions partition the admissible region).  It is dropped
    when every successor's region or preimage misses it.
    """

    def status(lo, hi):
        best = np.full(len(lo), -1, dtype=np.int8)
        spread = admissible.classify(lo, hi) == 1
        for region, pre in pairs:
            h = region.classify(lo, hi)
            if pre is None:
                p = np.ones(len(lo), dtype=np.int8)
            elif pre.is_empty():
                p = np.full(len(lo), -1, dtype=np.int8)
            else:
                cov, hit = pre.cover_index().query(lo, hi)
                p = np.where(cov, 1, np.where(hit, 0, -1)).astype(np.int8)
            best = np.maximum(best, np.minimum(h, p))
            spread &= (h == -1) | (p == 1)
        best[spread] = 1
        return best

    return status


def compute_tables(
    model: SystemModel,
    spec: FormulaSpec,
    eps,
    mode: str = "feasible",
    *,
    max_boxes: int = DEFAULT_MAX_BOXES,
    input_levels: int | None = None,
    first_instant: int = 0,
    progress=None,
) -> SetTable:
    """Build the table of all potential feasible (or satisfiable) sets.

    ``first_instant > 0`` stops the backward sweep early; the table then only
    holds entries for instants ``first_instant..T+1``.
    """
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}")
    if not 0 <= first_instant <= spec.horizon_T:
        raise ValueError(f"first_instant must lie in [0, {spec.horizon_T}]")
    if spec.dim is not None and spec.dim != model.n:
        raise ValueError(f"formula is {spec.dim}-dimensional but the model has {model.n} states")
    eps = as_eps(eps, model.n)
    one_step = one_step_feasible if mode == "feasible" else one_step_satisfiable
    T = spec.horizon_T
    domain = model.state_domain
    ambient = BoxUnion.from_box(model.image_bound())
    entries: dict[tuple[int, IndexSet], BoxUnion] = {(T + 1, EMPTY): ambient}
    stats = BisectStats()
    t0 = time.perf_counter()
    for k in range(T, first_instant - 1, -1):
        succ = {I: successor_sets(spec, I, k) for I in potential_index_sets(spec, k)}
        needed = sorted({J for js in succ.values() for J in js})
        pre: dict[IndexSet, BoxUnion | None] = {}
        for J in needed:
            if k == T:
                pre[J] = None  # successor is the whole space
                continue
            pre[J] = one_step(model, entries[(k + 1, J)], k, eps, stats=stats,
                              input_levels=input_levels, max_boxes=max_boxes)
        for I, js in succ.items():
            pairs: list[tuple[RegionExpr, BoxUnion | None]] = [
                (consistent_region(spec, k, I, J), pre[J]) for J in js
            ]
            status = _entry_status(admissible_region(spec, k, I), pairs)
            entries[(k, I)] = bisect(domain, eps, status, max_boxes=max_boxes, stats=stats)
            if progress is not None:
                progress(k, I, entries[(k, I)])
    meta = {
        "seconds": time.perf_counter() - t0,
        "boxes_processed": stats.processed,
        "discarded_volume": stats.discarded_volume,
        "first_instant": first_instant,
    }
    root = entries.get((0, spec.all_indices))
    if mode == "feasible" and root is not None and root.is_empty():
        log.warning("entry (0, %s) is empty: the formula is infeasible from every initial state", spec.all_indices)
    return SetTable(mode, entries, spec.digest(), model.digest(), eps, T, meta)
