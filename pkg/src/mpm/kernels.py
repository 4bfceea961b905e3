"""Hot loops with a numba implementation and a pure-numpy fallback.

The backend is picked per call from the ``MPM_KERNELS`` environment variable
(``numba`` or ``numpy``).  When unset, numba is used if it imports.
"""

from __future__ import annotations

import os

import numpy as np

try:
    import numba
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    numba = None
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


def backend() -> str:
    """Active kernel backend, ``"numba"`` or ``"numpy"``."""
    want = os.environ.get("MPM_KERNELS", "").strip().lower()
    if want == "numpy":
        return "numpy"
    if want in ("", "numba"):
        return "numba" if HAVE_NUMBA else "numpy"
    raise ValueError(f"MPM_KERNELS must be 'numba' or 'numpy', got {want!r}")


# ---------------------------------------------------------------------------
# Point membership in a union of boxes


@njit(cache=True, nogil=True)
def _contains_point_nb(lo, hi, x):
    n_box, n = lo.shape
    for b in range(n_box):
        inside = True
        for d in range(n):
            if x[d] < lo[b, d] or x[d] > hi[b, d]:
                inside = False
                break
        if inside:
            return True
    return False


def _contains_point_np(lo, hi, x):
    return bool(np.any(np.all((lo <= x) & (x <= hi), axis=1)))


def contains_point(lo: np.ndarray, hi: np.ndarray, x: np.ndarray) -> bool:
    if backend() == "numba":
        return bool(_contains_point_nb(lo, hi, x))
    return _contains_point_np(lo, hi, x)


# ---------------------------------------------------------------------------
# Range counts over an n-d prefix-sum table on a compressed grid
#
# coords: concatenated sorted breakpoints of all axes, offsets[d]:offsets[d+1]
# is axis d.  prefix has shape (len_0, ..., len_{n-1}) flattened with
# ``strides`` (in elements) and holds the count of occupied cells below.


@njit(cache=True, nogil=True)
def _search_right(c, start, stop, v):
    lo, hi = start, stop
    while lo < hi:
        mid = (lo + hi) // 2
        if c[mid] <= v:
            lo = mid + 1
        else:
            hi = mid
    return lo - start


@njit(cache=True, nogil=True)
def _search_left(c, start, stop, v):
    lo, hi = start, stop
    while lo < hi:
        mid = (lo + hi) // 2
        if c[mid] < v:
            lo = mid + 1
        else:
            hi = mid
    return lo - start


@njit(cache=True, nogil=True)
def _query_one(coords, offsets, prefix, strides, qlo, qhi, i0, i1):
    """Return (covered, intersects) for one closed query box."""
    n = qlo.shape[0]
    inside = True
    n_cells = 1
    for d in range(n):
        s, e = offsets[d], offsets[d + 1]
        ncell = e - s - 1
        if qlo[d] < coords[s] or qhi[d] > coords[e - 1]:
            inside = False
        if qhi[d] < coords[s] or qlo[d] > coords[e - 1]:
            return False, False
        if qhi[d] > qlo[d]:
            a = _search_right(coords, s, e, qlo[d]) - 1
            b = _search_left(coords, s, e, qhi[d])
        else:
            a = _search_right(coords, s, e, qlo[d]) - 1
            b = a + 1
        if a < 0:
            a = 0
        if b > ncell:
            b = ncell
        if b <= a:
            return False, False
        i0[d] = a
        i1[d] = b
        n_cells *= b - a
    total = 0
    for corner in range(1 << n):
        idx = 0
        sign = 1
        for d in range(n):
            if corner >> d & 1:
                idx += i1[d] * strides[d]
            else:
                idx += i0[d] * strides[d]
                sign = -sign
        total += sign * prefix[idx]
    return inside and total == n_cells, total > 0


@njit(cache=True, nogil=True)
def _cover_query_nb(coords, offsets, prefix, strides, qlo, qhi):
    k, n = qlo.shape
    covered = np.zeros(k, dtype=np.bool_)
    hits = np.zeros(k, dtype=np.bool_)
    i0 = np.empty(n, dtype=np.int64)
    i1 = np.empty(n, dtype=np.int64)
    for j in range(k):
        c, h = _query_one(coords, offsets, prefix, strides, qlo[j], qhi[j], i0, i1)
        covered[j] = c
        hits[j] = h
    return covered, hits


def _cover_query_np(coords, offsets, prefix, strides, qlo, qhi):
    k, n = qlo.shape
    inside = np.ones(k, dtype=bool)
    alive = np.ones(k, dtype=bool)
    n_cells = np.ones(k, dtype=np.int64)
    i0 = np.empty((k, n), dtype=np.int64)
    i1 = np.empty((k, n), dtype=np.int64)
    for d in range(n):
        c = coords[offsets[d] : offsets[d + 1]]
        ncell = len(c) - 1
        lo, hi = qlo[:, d], qhi[:, d]
        inside &= (lo >= c[0]) & (hi <= c[-1])
        alive &= ~((hi < c[0]) | (lo > c[-1]))
        a = np.searchsorted(c, lo, side="right") - 1
        b = np.where(hi > lo, np.searchsorted(c, hi, side="left"), a + 1)
        a = np.maximum(a, 0)
        b = np.minimum(b, ncell)
        alive &= b > a
        i0[:, d], i1[:, d] = a, np.maximum(b, a)
        n_cells *= np.maximum(b - a, 0)
    total = np.zeros(k, dtype=np.int64)
    for corner in range(1 << n):
        bits = [(corner >> d) & 1 for d in range(n)]
        idx = sum(np.where(bits[d], i1[:, d], i0[:, d]) * strides[d] for d in range(n))
        sign = (-1) ** (n - sum(bits))
        total += sign * prefix[idx]
    total = np.where(alive, total, 0)
    return alive & inside & (total == n_cells), total > 0


def cover_query(coords, offsets, prefix, strides, qlo, qhi):
    """Per query box: (fully covered by the occupied cells, meets them in positive measure)."""
    qlo = np.ascontiguousarray(qlo, dtype=np.float64)
    qhi = np.ascontiguousarray(qhi, dtype=np.float64)
    if backend() == "numba":
        return _cover_query_nb(coords, offsets, prefix, strides, qlo, qhi)
    return _cover_query_np(coords, offsets, prefix, strides, qlo, qhi)
