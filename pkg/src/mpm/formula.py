"""STL fragment: regions, parsing, normalization and index-set combinatorics.

Formulas are conjunctions of single-operator sub-formulas over Boolean state
regions.  After normalization only ``G`` and ``U'`` remain; ``F[a,b] r`` becomes
``true U'[a,b] r`` and ``r1 U[a,b] r2`` becomes ``(r1 U'[a,b] r2) && G[0,a] r1``.

Index sets are bitmasks where bit ``i`` stands for sub-formula ``i`` (1-based).
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Iterator, Sequence

import numpy as np

MAX_SUBFORMULAE = 64

G = "G"
UNTIL = "U'"


class FormulaError(ValueError):
    """Raised for malformed formula text or inconsistent formula data."""

    def __init__(self, message: str, line: int | None = None, col: int | None = None):
        self.line = line
        self.col = col
        if line is not None:
            message = f"line {line}, column {col}: {message}"
        super().__init__(message)


# ---------------------------------------------------------------------------
# Regions


class RegionExpr:
    """Base class of symbolic state regions."""

    def contains(self, x) -> bool:
        return bool(self.contains_many(np.atleast_2d(np.asarray(x, dtype=float)))[0])

    def contains_many(self, pts: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def classify(self, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
        """Three-valued test of boxes against the region.

        Returns int8 per box: 1 when every point of the box is in the region,
        -1 when no interior point is, 0 otherwise.
        """
        raise NotImplementedError

    @property
    def dim(self) -> int | None:
        return None

    def to_dict(self) -> dict:
        raise NotImplementedError

    def __and__(self, other: "RegionExpr") -> "RegionExpr":
        return conj(self, other)

    def __or__(self, other: "RegionExpr") -> "RegionExpr":
        return Or((self, other))

    def __invert__(self) -> "RegionExpr":
        return Not(self)


@dataclass(frozen=True)
class TrueRegion(RegionExpr):
    def contains_many(self, pts):
        return np.ones(len(pts), dtype=bool)

    def classify(self, lo, hi):
        return np.ones(len(lo), dtype=np.int8)

    def to_dict(self):
        return {"type": "true"}

    def __str__(self):
        return "true"


TRUE = TrueRegion()


@dataclass(frozen=True)
class Predicate(RegionExpr):
    """Half-space ``coeffs . x + offset >= 0``."""

    coeffs: tuple[float, ...]
    offset: float

    @property
    def dim(self):
        return len(self.coeffs)

    def axis(self) -> int | None:
        """Index of the single nonzero coefficient, if the predicate is axis-aligned."""
        nz = [j for j, c in enumerate(self.coeffs) if c != 0.0]
        return nz[0] if len(nz) == 1 else None

    def contains_many(self, pts):
        return pts @ np.asarray(self.coeffs) + self.offset >= 0.0

    def classify(self, lo, hi):
        c = np.asarray(self.coeffs)
        pos = c > 0
        low = self.offset + np.where(pos, lo, hi) @ c
        high = self.offset + np.where(pos, hi, lo) @ c
        out = np.zeros(len(lo), dtype=np.int8)
        out[high <= 0.0] = -1
        out[low >= 0.0] = 1
        return out

    def to_dict(self):
        return {"type": "pred", "coeffs": list(self.coeffs), "offset": self.offset}

    def __str__(self):
        terms = []
        for j, c in enumerate(self.coeffs):
            if c == 0.0:
                continue
            if c == 1.0:
                terms.append(f"x{j}")
            elif c == -1.0:
                terms.append(f"-x{j}")
            else:
                terms.append(f"{c!r}*x{j}")
        lhs = " + ".join(terms).replace("+ -", "- ") or "0"
        return f"{lhs} >= {-self.offset!r}"


@dataclass(frozen=True)
class BoxRegion(RegionExpr):
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def __post_init__(self):
        if len(self.lo) != len(self.hi):
            raise FormulaError("box bounds of different lengths")
        for a, b in zip(self.lo, self.hi):
            if a > b:
                raise FormulaError(f"box with lo {a} > hi {b}")

    @property
    def dim(self):
        return len(self.lo)

    def contains_many(self, pts):
        return np.all((pts >= np.asarray(self.lo)) & (pts <= np.asarray(self.hi)), axis=1)

    def classify(self, lo, hi):
        rlo, rhi = np.asarray(self.lo), np.asarray(self.hi)
        inside = np.all((lo >= rlo) & (hi <= rhi), axis=1)
        apart = np.any((hi <= rlo) | (lo >= rhi), axis=1)
        out = np.zeros(len(lo), dtype=np.int8)
        out[apart] = -1
        out[inside] = 1
        return out

    def to_dict(self):
        return {"type": "box", "lo": list(self.lo), "hi": list(self.hi)}

    def __str__(self):
        args = ",".join(f"{a!r},{b!r}" for a, b in zip(self.lo, self.hi))
        return f"box({args})"


@dataclass(frozen=True)
class Not(RegionExpr):
    child: RegionExpr

    @property
    def dim(self):
        return self.child.dim

    def contains_many(self, pts):
        return ~self.child.contains_many(pts)

    def classify(self, lo, hi):
        return (-self.child.classify(lo, hi)).astype(np.int8)

    def to_dict(self):
        return {"type": "not", "child": self.child.to_dict()}

    def __str__(self):
        return f"!({self.child})"


@dataclass(frozen=True)
class And(RegionExpr):
    children: tuple[RegionExpr, ...]

    @property
    def dim(self):
        return _common_dim(self.children)

    def contains_many(self, pts):
        out = np.ones(len(pts), dtype=bool)
        for c in self.children:
            out &= c.contains_many(pts)
        return out

    def classify(self, lo, hi):
        out = np.ones(len(lo), dtype=np.int8)
        for c in self.children:
            out = np.minimum(out, c.classify(lo, hi))
        return out

    def to_dict(self):
        return {"type": "and", "children": [c.to_dict() for c in self.children]}

    def __str__(self):
        return " & ".join(f"({c})" for c in self.children)


@dataclass(frozen=True)
class Or(RegionExpr):
    children: tuple[RegionExpr, ...]

    @property
    def dim(self):
        return _common_dim(self.children)

    def contains_many(self, pts):
        out = np.zeros(len(pts), dtype=bool)
        for c in self.children:
            out |= c.contains_many(pts)
        return out

    def classify(self, lo, hi):
        out = -np.ones(len(lo), dtype=np.int8)
        for c in self.children:
            out = np.maximum(out, c.classify(lo, hi))
        return out

    def to_dict(self):
        return {"type": "or", "children": [c.to_dict() for c in self.children]}

    def __str__(self):
        return " | ".join(f"({c})" for c in self.children)


def _common_dim(children) -> int | None:
    dims = {c.dim for c in children} - {None}
    if len(dims) > 1:
        raise FormulaError(f"regions of different dimensions {sorted(dims)}")
    return dims.pop() if dims else None


def conj(*regions: RegionExpr) -> RegionExpr:
    """Flattened conjunction; ``true`` operands are dropped."""
    parts: list[RegionExpr] = []
    for r in regions:
        if isinstance(r, And):
            parts.extend(r.children)
        elif not isinstance(r, TrueRegion):
            parts.append(r)
    if not parts:
        return TRUE
    if len(parts) == 1:
        return parts[0]
    return And(tuple(parts))


def conjuncts(region: RegionExpr) -> frozenset:
    """Set of top-level conjuncts (``true`` dropped); handy for comparing regions."""
    r = conj(region)
    if isinstance(r, TrueRegion):
        return frozenset()
    if isinstance(r, And):
        return frozenset(r.children)
    return frozenset([r])


def region_from_dict(d: dict) -> RegionExpr:
    t = d["type"]
    if t == "true":
        return TRUE
    if t == "pred":
        return Predicate(tuple(float(c) for c in d["coeffs"]), float(d["offset"]))
    if t == "box":
        return BoxRegion(tuple(map(float, d["lo"])), tuple(map(float, d["hi"])))
    if t == "not":
        return Not(region_from_dict(d["child"]))
    if t in ("and", "or"):
        kids = tuple(region_from_dict(c) for c in d["children"])
        return And(kids) if t == "and" else Or(kids)
    raise FormulaError(f"unknown region type {t!r}")


# ---------------------------------------------------------------------------
# Index sets


class IndexSet(int):
    """Bitmask over sub-formula indices; bit ``i`` is index ``i``."""

    def __new__(cls, mask: int = 0):
        if mask < 0 or mask & 1 or mask >> (MAX_SUBFORMULAE + 1):
            raise ValueError(f"invalid index mask {mask:#x}")
        return super().__new__(cls, mask)

    @classmethod
    def of(cls, indices: Iterable[int]) -> "IndexSet":
        mask = 0
        for i in indices:
            if not 1 <= i <= MAX_SUBFORMULAE:
                raise ValueError(f"index {i} out of range")
            mask |= 1 << i
        return cls(mask)

    def __iter__(self) -> Iterator[int]:
        m, i = int(self), 0
        while m:
            if m & 1:
                yield i
            m >>= 1
            i += 1

    def __contains__(self, i: int) -> bool:
        return bool(int(self) >> i & 1)

    def __len__(self) -> int:
        return bin(int(self)).count("1")

    def __or__(self, other):
        return IndexSet(int(self) | int(other))

    def __and__(self, other):
        return IndexSet(int(self) & int(other))

    def __sub__(self, other):
        return IndexSet(int(self) & ~int(other))

    def issubset(self, other) -> bool:
        return int(self) & ~int(other) == 0

    def __repr__(self):
        return "{" + ",".join(map(str, self)) + "}"

    __str__ = __repr__


EMPTY = IndexSet(0)


def parse_index_set(text: str) -> IndexSet:
    """Parse ``"{1,2,3}"`` (braces optional) into an IndexSet."""
    body = text.strip().strip("{}").strip()
    if not body:
        return EMPTY
    return IndexSet.of(int(t) for t in body.split(","))


# ---------------------------------------------------------------------------
# Formula data


@dataclass(frozen=True)
class Conjunct:
    """One temporal conjunct before normalization (op in G, F, U, U')."""

    op: str
    a: int
    b: int
    left: RegionExpr
    right: RegionExpr | None = None


@dataclass(frozen=True)
class FormulaAST:
    conjuncts: tuple[Conjunct, ...]
    dim: int | None = None

    @property
    def horizon(self) -> int:
        return max(c.b for c in self.conjuncts)


@dataclass(frozen=True)
class SubFormula:
    index: int
    op: str
    a: int
    b: int
    left: RegionExpr
    right: RegionExpr | None = None

    def __post_init__(self):
        if not 0 <= self.a <= self.b:
            raise FormulaError(f"bad window [{self.a},{self.b}]")
        if (self.op == UNTIL) != (self.right is not None):
            raise FormulaError("right region present iff operator is U'")

    @property
    def window(self) -> tuple[int, int]:
        return (self.a, self.b)

    @property
    def done_region(self) -> RegionExpr:
        """Region whose visit discharges an until sub-formula."""
        return conj(self.left, self.right)

    def to_dict(self) -> dict:
        d = {"index": self.index, "op": self.op, "a": self.a, "b": self.b, "left": self.left.to_dict()}
        if self.right is not None:
            d["right"] = self.right.to_dict()
        return d

    def __str__(self):
        if self.op == G:
            return f"G[{self.a},{self.b}]({self.left})"
        return f"({self.left}) U'[{self.a},{self.b}] ({self.right})"


@dataclass(frozen=True)
class FormulaSpec:
    """Normalized conjunction of G / U' sub-formulas sorted by start instant."""

    subformulae: tuple[SubFormula, ...]
    dim: int | None = None
    _ops: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        subs = self.subformulae
        if not subs:
            raise FormulaError("formula has no sub-formulae")
        if len(subs) > MAX_SUBFORMULAE:
            raise FormulaError(f"more than {MAX_SUBFORMULAE} sub-formulae")
        for pos, s in enumerate(subs, start=1):
            if s.index != pos:
                raise FormulaError("sub-formula indices must be 1..N in order")
        if any(s1.a > s2.a for s1, s2 in zip(subs, subs[1:])):
            raise FormulaError("sub-formulae must be sorted by start instant")
        object.__setattr__(self, "_ops", tuple(s.op for s in subs))

    @property
    def n_sub(self) -> int:
        return len(self.subformulae)

    @property
    def horizon_T(self) -> int:
        return max(s.b for s in self.subformulae)

    @property
    def start_S(self) -> int:
        return min(s.a for s in self.subformulae)

    @property
    def all_indices(self) -> IndexSet:
        return IndexSet.of(range(1, self.n_sub + 1))

    def sub(self, i: int) -> SubFormula:
        return self.subformulae[i - 1]

    def to_dict(self) -> dict:
        return {"dim": self.dim, "subformulae": [s.to_dict() for s in self.subformulae]}

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    @classmethod
    def from_text(cls, text: str, dim: int | None = None, bindings=None) -> "FormulaSpec":
        return normalize(parse_formula(text, dim=dim, bindings=bindings))

    def __str__(self):
        return " && ".join(str(s) for s in self.subformulae)


def normalize(ast: FormulaAST) -> FormulaSpec:
    """Rewrite to G / U' only and number sub-formulae by start instant.

    Ties in the start instant keep source order.  The G part produced by a
    standard until is kept as its own conjunct (not merged with other G's).
    """
    raw: list[tuple[str, int, int, RegionExpr, RegionExpr | None]] = []
    for c in ast.conjuncts:
        if c.op == "G":
            raw.append((G, c.a, c.b, c.left, None))
        elif c.op == "F":
            raw.append((UNTIL, c.a, c.b, TRUE, c.left))
        elif c.op == "U'":
            raw.append((UNTIL, c.a, c.b, c.left, c.right))
        elif c.op == "U":
            raw.append((UNTIL, c.a, c.b, c.left, c.right))
            raw.append((G, 0, c.a, c.left, None))
        else:
            raise FormulaError(f"unknown operator {c.op!r}")
    order = sorted(range(len(raw)), key=lambda j: raw[j][1])
    subs = tuple(
        SubFormula(pos, *raw[j]) for pos, j in enumerate(order, start=1)
    )
    return FormulaSpec(subs, dim=ast.dim)


# ---------------------------------------------------------------------------
# Index-set combinatorics


def _mask(spec: FormulaSpec, pred) -> IndexSet:
    m = 0
    for s in spec.subformulae:
        if pred(s):
            m |= 1 << s.index
    return IndexSet(m)


def effective_indices(spec: FormulaSpec, k: int) -> tuple[IndexSet, IndexSet, IndexSet]:
    """Indices whose window ended before, contains, or starts after instant ``k``."""
    if not 0 <= k <= spec.horizon_T:
        raise ValueError(f"instant {k} outside [0, {spec.horizon_T}]")
    return _partition(spec, k)


def _partition(spec, k):
    before = _mask(spec, lambda s: s.b < k)
    now = _mask(spec, lambda s: s.a <= k <= s.b)
    after = _mask(spec, lambda s: k < s.a)
    return before, now, after


def _free_and_fixed(spec: FormulaSpec, k: int) -> tuple[list[int], IndexSet]:
    _, now, after = _partition(spec, k)
    fixed = after | _mask(spec, lambda s: s.index in now and (s.op == G or s.a == k))
    free = [s.index for s in spec.subformulae if s.index in now and s.op == UNTIL and s.a < k]
    return free, fixed


def potential_index_sets(spec: FormulaSpec, k: int) -> list[IndexSet]:
    """All remaining sets the monitor can hold at instant ``k``, ascending by mask."""
    T = spec.horizon_T
    if k == T + 1:
        return [EMPTY]
    if not 0 <= k <= T:
        raise ValueError(f"instant {k} outside [0, {T + 1}]")
    free, fixed = _free_and_fixed(spec, k)
    out = []
    for r in range(len(free) + 1):
        for combo in combinations(free, r):
            out.append(fixed | IndexSet.of(combo))
    return sorted(out)


def is_potential(spec: FormulaSpec, I: IndexSet, k: int) -> bool:
    if k == spec.horizon_T + 1:
        return int(I) == 0
    before, now, after = effective_indices(spec, k)
    free, fixed = _free_and_fixed(spec, k)
    return (I & before) == 0 and fixed.issubset(I) and I.issubset(fixed | IndexSet.of(free))


def successor_sets(spec: FormulaSpec, I: IndexSet, k: int) -> list[IndexSet]:
    """Remaining sets reachable at ``k+1`` from ``I`` at ``k``."""
    I = IndexSet(int(I))
    if not is_potential(spec, I, k):
        raise ValueError(f"{I} is not a potential index set at instant {k}")
    if k == spec.horizon_T:
        return [EMPTY]
    _, nxt, _ = _partition(spec, k + 1)
    gone = _mask(spec, lambda s: s.index in nxt and s.op == UNTIL and s.index not in I)
    return [J for J in potential_index_sets(spec, k + 1) if (J & gone) == 0]


def satisfaction_set(I: IndexSet, Iprime: IndexSet, spec: FormulaSpec) -> IndexSet:
    """Until indices in ``I`` that are no longer in ``Iprime``."""
    I, Iprime = IndexSet(int(I)), IndexSet(int(Iprime))
    return _mask(spec, lambda s: s.op == UNTIL and s.index in I and s.index not in Iprime)


def consistent_region(spec: FormulaSpec, k: int, I: IndexSet, Iprime: IndexSet) -> RegionExpr:
    """Region the state must occupy at ``k`` for the remaining set to move ``I -> Iprime``."""
    _, now, _ = _partition(spec, k)
    sat = satisfaction_set(I, Iprime, spec)
    parts = []
    for i in IndexSet(int(I)) & now:
        s = spec.sub(i)
        if s.op == G:
            parts.append(s.left)
        elif i in sat:
            parts.append(conj(s.left, s.right))
        else:
            parts.append(conj(s.left, Not(s.right)))
    return conj(*parts)


def admissible_region(spec: FormulaSpec, k: int, I: IndexSet) -> RegionExpr:
    """Union of ``consistent_region(spec, k, I, J)`` over all successors ``J``.

    Active G regions and left regions of active untils must hold; untils whose
    window closes at ``k`` must be discharged now.
    """
    _, now, _ = _partition(spec, k)
    parts = []
    for i in IndexSet(int(I)) & now:
        s = spec.sub(i)
        if s.op == G:
            parts.append(s.left)
        elif s.b == k:
            parts.append(s.done_region)
        else:
            parts.append(s.left)
    return conj(*parts)


# ---------------------------------------------------------------------------
# Brute-force semantics on finite traces


def holds(formula, trace, k: int = 0) -> bool:
    """Boolean satisfaction of a FormulaAST or FormulaSpec by ``trace`` at ``k``.

    ``trace`` is an array of states indexed by instant; it must reach the
    formula horizon.
    """
    X = np.atleast_2d(np.asarray(trace, dtype=float))
    items = formula.conjuncts if isinstance(formula, FormulaAST) else formula.subformulae
    T = max(c.b for c in items)
    if len(X) <= k + T:
        raise ValueError(f"trace of length {len(X)} too short for horizon {k + T}")
    cache: dict[int, np.ndarray] = {}

    def sat(r: RegionExpr) -> np.ndarray:
        key = id(r)
        if key not in cache:
            cache[key] = r.contains_many(X)
        return cache[key]

    for c in items:
        lo, hi = k + c.a, k + c.b
        if c.op == "G":
            if not sat(c.left)[lo : hi + 1].all():
                return False
            continue
        if c.op == "F":
            if not sat(c.left)[lo : hi + 1].any():
                return False
            continue
        start = k if c.op == "U" else lo
        left, right = sat(c.left), sat(c.right)
        ok = False
        for kp in range(lo, hi + 1):
            if right[kp] and left[start : kp + 1].all():
                ok = True
                break
        if not ok:
            return False
    return True


# ---------------------------------------------------------------------------
# Parser

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<op>&&|>=|<=|U'|[\[\](),&|!<>=;+\-*])
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
    """,
    re.VERBOSE,
)

_VAR_RE = re.compile(r"x(\d+)$")
_KEYWORDS = {"G", "F", "U", "true", "false", "box", "inf"}


@dataclass
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise FormulaError(f"unexpected character {text[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        chunk = m.group()
        if kind != "ws":
            toks.append(_Tok(kind, chunk, line, pos - line_start + 1))
        nl = chunk.count("\n")
        if nl:
            line += nl
            line_start = pos + chunk.rfind("\n") + 1
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


class _Parser:
    def __init__(self, text: str, dim: int | None, bindings: dict | None):
        self.toks = _tokenize(text)
        self.i = 0
        self.dim = dim
        self.bindings: dict[str, RegionExpr] = dict(bindings or {})

    # token helpers
    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def peek(self, off: int = 1) -> _Tok:
        return self.toks[min(self.i + off, len(self.toks) - 1)]

    def error(self, msg: str, tok: _Tok | None = None):
        tok = tok or self.tok
        raise FormulaError(msg, tok.line, tok.col)

    def accept(self, text: str) -> bool:
        if self.tok.text == text and self.tok.kind in ("op", "name"):
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> _Tok:
        tok = self.tok
        if not self.accept(text):
            self.error(f"expected {text!r}, found {tok.text or 'end of input'!r}")
        return tok

    # grammar
    def parse(self) -> FormulaAST:
        while self.tok.kind == "name" and self.peek().text == "=" and self.peek(2).text != "=":
            name_tok = self.tok
            if name_tok.text in _KEYWORDS or _VAR_RE.match(name_tok.text):
                self.error(f"cannot bind reserved name {name_tok.text!r}")
            self.i += 2
            self.bindings[name_tok.text] = self.region()
            self.expect(";")
        items = [self.conjunct()]
        while self.accept("&&"):
            items.append(self.conjunct())
        if self.tok.kind != "eof":
            self.error(f"unexpected {self.tok.text!r}")
        box_dims: set[int] = set()
        n_vars = 0
        for c in items:
            for r in (c.left, c.right):
                if r is not None:
                    n_vars = max(n_vars, _scan_dims(r, box_dims))
        if len(box_dims) > 1:
            raise FormulaError(f"boxes of different dimensions {sorted(box_dims)}")
        dim = self.dim
        if dim is None:
            dim = box_dims.pop() if box_dims else (n_vars or None)
        elif box_dims and box_dims != {dim}:
            raise FormulaError(f"box of dimension {box_dims.pop()} in a {dim}-dimensional formula")
        if dim is not None and n_vars > dim:
            raise FormulaError(f"variable x{n_vars - 1} outside a {dim}-dimensional state")
        return FormulaAST(tuple(items), dim=dim)

    def window(self) -> tuple[int, int]:
        if self.tok.text != "[":
            self.error("expected '[' after temporal operator")
        self.i += 1
        a_tok = self.tok
        a = self.integer()
        self.expect(",")
        b = self.integer()
        self.expect("]")
        if a > b:
            self.error(f"reversed window [{a},{b}]", a_tok)
        return a, b

    def integer(self) -> int:
        tok = self.tok
        neg = self.accept("-")
        tok = self.tok
        if tok.kind != "num" or not tok.text.isdigit():
            self.error(f"expected a non-negative integer, found {tok.text!r}")
        if neg:
            self.error("negative window bound", tok)
        self.i += 1
        return int(tok.text)

    def conjunct(self) -> Conjunct:
        tok = self.tok
        if tok.kind == "name" and tok.text in ("G", "F") and self.peek().text == "[":
            self.i += 1
            a, b = self.window()
            return Conjunct(tok.text, a, b, self.region())
        left = self.region()
        op_tok = self.tok
        if op_tok.text == "U'":
            op = "U'"
        elif op_tok.text == "U":
            op = "U"
        else:
            self.error("expected a temporal operator (G, F, U or U')")
        self.i += 1
        a, b = self.window()
        right = self.region()
        return Conjunct(op, a, b, left, right)

    def region(self) -> RegionExpr:
        parts = [self.and_region()]
        while self.tok.text == "|":
            self.i += 1
            parts.append(self.and_region())
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def and_region(self) -> RegionExpr:
        parts = [self.unary()]
        while self.tok.text == "&":
            self.i += 1
            parts.append(self.unary())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def unary(self) -> RegionExpr:
        if self.accept("!"):
            return Not(self.unary())
        return self.atom()

    def atom(self) -> RegionExpr:
        tok = self.tok
        if tok.text == "(":
            self.i += 1
            r = self.region()
            self.expect(")")
            return r
        if tok.kind == "name":
            if tok.text == "true":
                self.i += 1
                return TRUE
            if tok.text == "false":
                self.i += 1
                return Not(TRUE)
            if tok.text == "box":
                return self.box()
            if tok.text in self.bindings:
                self.i += 1
                return self.bindings[tok.text]
            if not _VAR_RE.match(tok.text) and tok.text != "inf":
                self.error(f"unknown region name {tok.text!r}")
        return self.inequality()

    def number(self) -> float:
        sign = 1.0
        while self.tok.text in ("-", "+"):
            if self.tok.text == "-":
                sign = -sign
            self.i += 1
        tok = self.tok
        if tok.kind == "num":
            self.i += 1
            return sign * float(tok.text)
        if tok.text == "inf":
            self.i += 1
            return sign * math.inf
        self.error(f"expected a number, found {tok.text!r}")

    def box(self) -> RegionExpr:
        start = self.tok
        self.i += 1
        self.expect("(")
        vals = [self.number()]
        while self.accept(","):
            vals.append(self.number())
        self.expect(")")
        if len(vals) % 2:
            self.error("box() needs a lo,hi pair per dimension", start)
        lo, hi = tuple(vals[0::2]), tuple(vals[1::2])
        if any(a > b for a, b in zip(lo, hi)):
            self.error("box() with lo > hi", start)
        self._check_dim(len(lo), start)
        return BoxRegion(lo, hi)

    def _check_dim(self, d: int, tok: _Tok):
        if self.dim is not None and d != self.dim:
            self.error(f"dimension mismatch: expected {self.dim}, got {d}", tok)

    def linear(self) -> tuple[dict[int, float], float]:
        coeffs: dict[int, float] = {}
        const = 0.0
        sign = 1.0
        first = True
        while True:
            if self.tok.text in ("+", "-"):
                sign = -sign if self.tok.text == "-" else sign
                self.i += 1
                continue
            if not first and self.tok.kind != "num" and not _VAR_RE.match(self.tok.text):
                break
            tok = self.tok
            if tok.kind == "num" or tok.text == "inf":
                val = self.number()
                self.accept("*")
                vm = _VAR_RE.match(self.tok.text) if self.tok.kind == "name" else None
                if vm:
                    j = int(vm.group(1))
                    coeffs[j] = coeffs.get(j, 0.0) + sign * val
                    self.i += 1
                else:
                    const += sign * val
            elif tok.kind == "name" and _VAR_RE.match(tok.text):
                j = int(_VAR_RE.match(tok.text).group(1))
                self.i += 1
                if self.tok.text == "*":
                    nxt = self.peek()
                    if nxt.kind == "name" and _VAR_RE.match(nxt.text):
                        self.error("nonlinear term (product of variables)")
                    self.i += 1
                    val = self.number()
                else:
                    val = 1.0
                coeffs[j] = coeffs.get(j, 0.0) + sign * val
            else:
                self.error(f"expected a linear expression, found {tok.text or 'end of input'!r}")
            if self.tok.text == "*":
                self.error("nonlinear term (product of variables)")
            sign = 1.0
            first = False
            if self.tok.text not in ("+", "-"):
                break
        return coeffs, const

    def inequality(self) -> RegionExpr:
        start = self.tok
        lc, lk = self.linear()
        cmp = self.tok.text
        if cmp not in (">=", "<=", ">", "<"):
            self.error(f"expected a comparison, found {self.tok.text or 'end of input'!r}")
        self.i += 1
        rc, rk = self.linear()
        # lhs - rhs >= 0 or rhs - lhs >= 0; strict comparisons are taken as non-strict
        keys = set(lc) | set(rc)
        diff = {j: lc.get(j, 0.0) - rc.get(j, 0.0) for j in keys}
        off = lk - rk
        if cmp in ("<=", "<"):
            diff = {j: -v for j, v in diff.items()}
            off = -off
        n = self.dim if self.dim is not None else (max(keys) + 1 if keys else 0)
        if keys and max(keys) >= n:
            self.error(f"variable x{max(keys)} outside a {n}-dimensional state", start)
        return Predicate(tuple(diff.get(j, 0.0) for j in range(n)), off)


def parse_formula(text: str, dim: int | None = None, bindings: dict | None = None) -> FormulaAST:
    """Parse formula source into a FormulaAST.

    ``bindings`` maps names to regions; the source may also declare them with
    ``name = region;`` statements before the formula.
    """
    ast = _Parser(text, dim, bindings).parse()
    if ast.dim is not None:
        # pad predicates written with fewer variables than the state has
        ast = _pad(ast, ast.dim)
    return ast


def _scan_dims(r: RegionExpr, box_dims: set) -> int:
    """Collect box dimensions into ``box_dims``; return the predicate variable count."""
    if isinstance(r, BoxRegion):
        box_dims.add(r.dim)
        return 0
    if isinstance(r, Predicate):
        nz = [j for j, c in enumerate(r.coeffs) if c != 0.0]
        return max(nz) + 1 if nz else 0
    if isinstance(r, Not):
        return _scan_dims(r.child, box_dims)
    if isinstance(r, (And, Or)):
        return max((_scan_dims(c, box_dims) for c in r.children), default=0)
    return 0


def _pad_region(r: RegionExpr, n: int) -> RegionExpr:
    if isinstance(r, Predicate):
        if len(r.coeffs) > n:
            raise FormulaError(f"predicate over {len(r.coeffs)} variables in a {n}-dimensional formula")
        return Predicate(r.coeffs + (0.0,) * (n - len(r.coeffs)), r.offset)
    if isinstance(r, BoxRegion):
        if r.dim != n:
            raise FormulaError(f"box of dimension {r.dim} in a {n}-dimensional formula")
        return r
    if isinstance(r, Not):
        return Not(_pad_region(r.child, n))
    if isinstance(r, And):
        return And(tuple(_pad_region(c, n) for c in r.children))
    if isinstance(r, Or):
        return Or(tuple(_pad_region(c, n) for c in r.children))
    return r


def _pad(ast: FormulaAST, n: int) -> FormulaAST:
    items = tuple(
        Conjunct(c.op, c.a, c.b, _pad_region(c.left, n), None if c.right is None else _pad_region(c.right, n))
        for c in ast.conjuncts
    )
    return FormulaAST(items, dim=n)
