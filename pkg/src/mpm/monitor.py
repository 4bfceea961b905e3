"""Online monitor: one table lookup and a few region tests per instant."""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .dynamics import Trace
from .formula import EMPTY, G, UNTIL, FormulaSpec, IndexSet
from .precompute import SetTable


class VerdictKind(enum.Enum):
    FEASIBLE = "FEASIBLE"
    VIOLATED = "VIOLATED"
    SATISFIED_GUARANTEED = "SATISFIED_GUARANTEED"
    COMPLETED = "COMPLETED"

    @property
    def terminal(self) -> bool:
        return self is not VerdictKind.FEASIBLE


@dataclass(frozen=True)
class Verdict:
    kind: VerdictKind
    k: int
    remaining: IndexSet

    def line(self) -> str:
        return f"{self.k},{self.kind.value},{self.remaining}"

    def to_dict(self) -> dict:
        return {"k": self.k, "verdict": self.kind.value, "remaining": list(self.remaining)}


class MonitorError(RuntimeError):
    pass


class MonitorState:
    """Remaining set and instant of one monitored trace."""

    def __init__(self, spec: FormulaSpec, feasible: SetTable, satisfiable: SetTable | None = None):
        for t, want in ((feasible, "feasible"), (satisfiable, "satisfiable")):
            if t is None:
                continue
            if t.mode != want:
                raise MonitorError(f"expected a {want} table, got a {t.mode} table")
            if t.formula_digest != spec.digest():
                raise MonitorError(f"{want} table was built for a different formula")
        if satisfiable is not None and satisfiable.model_digest != feasible.model_digest:
            raise MonitorError("feasible and satisfiable tables were built for different models")
        self.spec = spec
        self.feasible = feasible
        self.satisfiable = satisfiable
        self.remaining = spec.all_indices
        self.k = 0
        self.terminal: Verdict | None = None
        self.n = feasible.dim
        # (index, op, b, region) of every sub-formula, for the removal tests
        self._subs = [(s.index, s.op, s.a, s.b, s.left if s.op == G else s.done_region) for s in spec.subformulae]

    def _membership(self, table: SetTable, x: np.ndarray) -> bool:
        entry = table.get(self.k, self.remaining)
        if entry is None:
            return False
        return entry.contains_point(x)

    def step(self, x) -> Verdict:
        if self.terminal is not None:
            raise MonitorError(f"monitor already reached {self.terminal.kind.value} at instant {self.terminal.k}")
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape != (self.n,):
            raise MonitorError(f"state of dimension {x.shape[0]}, expected {self.n}")
        k, I = self.k, self.remaining
        if k > self.spec.horizon_T:
            raise MonitorError(f"instant {k} is past the horizon {self.spec.horizon_T}")
        if not np.all(np.isfinite(x)) or not self._membership(self.feasible, x):
            return self._finish(VerdictKind.VIOLATED, k, I)
        if self.satisfiable is not None and self._membership(self.satisfiable, x):
            return self._finish(VerdictKind.SATISFIED_GUARANTEED, k, I)
        drop = 0
        for i, op, a, b, region in self._subs:
            if i not in I or not a <= k <= b:
                continue
            if op == G:
                if k == b and region.contains(x):
                    drop |= 1 << i
            elif region.contains(x):
                drop |= 1 << i
        self.remaining = IndexSet(int(I) & ~drop)
        self.k = k + 1
        if self.remaining == EMPTY:
            return self._finish(VerdictKind.COMPLETED, k, self.remaining)
        return Verdict(VerdictKind.FEASIBLE, k, self.remaining)

    def _finish(self, kind: VerdictKind, k: int, I: IndexSet) -> Verdict:
        self.terminal = Verdict(kind, k, I)
        return self.terminal


def monitor_init(spec: FormulaSpec, feasible_table: SetTable, satisfiable_table: SetTable | None = None) -> MonitorState:
    return MonitorState(spec, feasible_table, satisfiable_table)


def monitor_step(state: MonitorState, x) -> Verdict:
    return state.step(x)


def run_monitor(spec: FormulaSpec, feasible_table: SetTable, trace, satisfiable_table: SetTable | None = None) -> list[Verdict]:
    """Verdicts for ``trace`` (a Trace or array of states from instant 0), up to the first terminal one."""
    if isinstance(trace, Trace):
        if trace.start != 0:
            raise ValueError("trace must start at instant 0")
        states = trace.states
    else:
        states = np.asarray(trace, dtype=float)
        if states.size == 0:
            return []
        states = states.reshape(len(states), -1)
    state = MonitorState(spec, feasible_table, satisfiable_table)
    out = []
    for x in states:
        v = state.step(x)
        out.append(v)
        if v.kind.terminal:
            break
    return out
