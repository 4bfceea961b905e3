"""Discrete-time system models with point and interval evaluation.

Every model provides ``f`` (batched point dynamics), ``enclose`` (batched
interval image over state and input boxes, numpy) and ``nb_enclose`` (the
same enclosure as a scalar numba kernel writing into output buffers, used by
the reachability loops).
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .geometry import Box
from .kernels import njit

# ---------------------------------------------------------------------------
# interval helpers (numpy, elementwise)


def imul(alo, ahi, blo, bhi):
    p = np.stack([alo * blo, alo * bhi, ahi * blo, ahi * bhi])
    return p.min(axis=0), p.max(axis=0)


def isqr(lo, hi):
    a, b = lo * lo, hi * hi
    low = np.where((lo <= 0) & (hi >= 0), 0.0, np.minimum(a, b))
    return low, np.maximum(a, b)


def _hits(lo, hi, phase):
    """Whether [lo, hi] contains phase + 2*pi*j for some integer j."""
    two_pi = 2.0 * math.pi
    return np.floor((hi - phase) / two_pi) >= np.ceil((lo - phase) / two_pi)


def icos(lo, hi):
    a, b = np.cos(lo), np.cos(hi)
    low = np.where(_hits(lo, hi, math.pi), -1.0, np.minimum(a, b))
    high = np.where(_hits(lo, hi, 0.0), 1.0, np.maximum(a, b))
    return low, high


def isin(lo, hi):
    return icos(lo - 0.5 * math.pi, hi - 0.5 * math.pi)


# scalar twins for numba


@njit(cache=True, nogil=True)
def _imul_s(alo, ahi, blo, bhi):
    p1, p2, p3, p4 = alo * blo, alo * bhi, ahi * blo, ahi * bhi
    return min(min(p1, p2), min(p3, p4)), max(max(p1, p2), max(p3, p4))


@njit(cache=True, nogil=True)
def _isqr_s(lo, hi):
    a, b = lo * lo, hi * hi
    if lo <= 0.0 <= hi:
        return 0.0, max(a, b)
    return min(a, b), max(a, b)


@njit(cache=True, nogil=True)
def _hits_s(lo, hi, phase):
    two_pi = 2.0 * math.pi
    return math.floor((hi - phase) / two_pi) >= math.ceil((lo - phase) / two_pi)


@njit(cache=True, nogil=True)
def _icos_s(lo, hi):
    a, b = math.cos(lo), math.cos(hi)
    low = -1.0 if _hits_s(lo, hi, math.pi) else min(a, b)
    high = 1.0 if _hits_s(lo, hi, 0.0) else max(a, b)
    return low, high


@njit(cache=True, nogil=True)
def _isin_s(lo, hi):
    return _icos_s(lo - 0.5 * math.pi, hi - 0.5 * math.pi)


class InputError(ValueError):
    """An input lies outside the admissible input box."""


@dataclass
class Trace:
    states: np.ndarray
    start: int = 0

    def __post_init__(self):
        self.states = np.atleast_2d(np.asarray(self.states, dtype=float))

    def __len__(self):
        return len(self.states)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n = self.states.shape[1]
        w.writerow(["k"] + [f"x{j}" for j in range(n)])
        for i, x in enumerate(self.states):
            w.writerow([self.start + i] + [repr(float(v)) for v in x])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "Trace":
        rows = [r for r in csv.reader(io.StringIO(text)) if r and not r[0].startswith("#")]
        if not rows or rows[0][0].strip() != "k":
            raise ValueError("trace CSV must start with a 'k,x0,...' header")
        body = rows[1:]
        if not body:
            raise ValueError("trace CSV has no rows")
        ks = [int(r[0]) for r in body]
        if any(b - a != 1 for a, b in zip(ks, ks[1:])):
            raise ValueError("trace instants must be consecutive")
        width = len(rows[0]) - 1
        if any(len(r) - 1 != width for r in body):
            raise ValueError("ragged trace rows")
        return cls(np.array([[float(v) for v in r[1:]] for r in body]), start=ks[0])


# ---------------------------------------------------------------------------
# models


def _box_from_json(d) -> Box:
    if isinstance(d, dict):
        return Box(d["lo"], d["hi"])
    arr = np.asarray(d, dtype=float)
    return Box(arr[:, 0], arr[:, 1])


class SystemModel:
    """Base class: ``x[k+1] = f(x[k], u[k])`` on state domain ``X`` with inputs in ``U(k)``."""

    name = "model"
    n: int
    m: int

    def __init__(self, state_domain: Box, input_schedule, params: dict):
        self.state_domain = state_domain
        if isinstance(input_schedule, Box):
            input_schedule = [(None, input_schedule)]
        self.input_schedule: list[tuple[int | None, Box]] = list(input_schedule)
        if self.input_schedule[-1][0] is not None:
            raise ValueError("last input-domain entry must not have an 'until_k' bound")
        self.params = dict(params)
        if state_domain.dim != self.n:
            raise ValueError(f"{self.name}: state domain has dimension {state_domain.dim}, expected {self.n}")
        for _, b in self.input_schedule:
            if b.dim != self.m:
                raise ValueError(f"{self.name}: input domain has dimension {b.dim}, expected {self.m}")

    # parameters packed for kernels
    def packed(self) -> np.ndarray:
        raise NotImplementedError

    def input_domain(self, k: int) -> Box:
        for until, box in self.input_schedule:
            if until is None or k <= until:
                return box
        return self.input_schedule[-1][1]

    def input_domain_changes(self) -> list[int]:
        return [u for u, _ in self.input_schedule if u is not None]

    # dynamics
    def f(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def enclose(self, xlo, xhi, ulo, uhi):
        raise NotImplementedError

    @property
    def nb_enclose(self):
        raise NotImplementedError

    def step(self, x, u, k: int = 0) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(self.n)
        u = np.asarray(u, dtype=float).reshape(self.m)
        if not self.input_domain(k).contains(u):
            raise InputError(f"input {u.tolist()} outside U({k}) = {self.input_domain(k)}")
        return self.f(x[None], u[None])[0]

    def image_enclosure(self, bx: Box, bu: Box, k: int = 0) -> Box:
        lo, hi = self.enclose(bx.lo[None], bx.hi[None], bu.lo[None], bu.hi[None])
        return Box(lo[0], hi[0])

    def image_bound(self) -> Box:
        """Box containing ``X`` and the image of ``X`` under every admissible input."""
        lo, hi = self.state_domain.lo.copy(), self.state_domain.hi.copy()
        for _, bu in self.input_schedule:
            e = self.image_enclosure(self.state_domain, bu)
            lo, hi = np.minimum(lo, e.lo), np.maximum(hi, e.hi)
        return Box(lo, hi)

    def simulate(self, x0, controller, steps: int, start: int = 0) -> Trace:
        x = np.asarray(x0, dtype=float).reshape(self.n)
        if not self.state_domain.contains(x):
            raise ValueError(f"initial state {x.tolist()} outside the state domain")
        ctrl = make_controller(controller, self)
        states = [x]
        for k in range(start, start + steps):
            x = self.step(x, ctrl(k, x), k)
            states.append(x)
        return Trace(np.array(states), start=start)

    # config
    def to_dict(self) -> dict:
        sched = [
            {"until_k": until, "box": {"lo": b.lo.tolist(), "hi": b.hi.tolist()}} if until is not None
            else {"box": {"lo": b.lo.tolist(), "hi": b.hi.tolist()}}
            for until, b in self.input_schedule
        ]
        return {
            "model": self.name,
            "params": {k: self.params[k] for k in sorted(self.params)},
            "state_domain": {"lo": self.state_domain.lo.tolist(), "hi": self.state_domain.hi.tolist()},
            "input_domain": sched,
        }

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def __repr__(self):
        return f"{type(self).__name__}(n={self.n}, m={self.m})"


# building temperature ------------------------------------------------------


@njit(cache=True, nogil=True)
def _temperature_enc_nb(xlo, xhi, ulo, uhi, p, olo, ohi):
    tau, ae, ah, te, th = p[0], p[1], p[2], p[3], p[4]
    ka = 1.0 - tau * ae
    kh = tau * ah
    if ka - kh * max(abs(ulo[0]), abs(uhi[0])) >= 0.0 and xhi[0] <= th and kh >= 0.0:
        # increasing in x and nondecreasing in u: exact image
        olo[0] = xlo[0] + tau * (ae * (te - xlo[0]) + ah * (th - xlo[0]) * ulo[0])
        ohi[0] = xhi[0] + tau * (ae * (te - xhi[0]) + ah * (th - xhi[0]) * uhi[0])
        return
    glo, ghi = _imul_s(th - xhi[0], th - xlo[0], ulo[0], uhi[0])
    a, b = _imul_s(ka, ka, xlo[0], xhi[0])
    c, d = _imul_s(kh, kh, glo, ghi)
    olo[0] = a + tau * ae * te + c
    ohi[0] = b + tau * ae * te + d


class BuildingTemperature(SystemModel):
    name = "building_temperature"
    n, m = 1, 1
    defaults = {"tau": 1.0, "alpha_e": 0.06, "alpha_h": 0.08, "t_e": 0.0, "t_h": 55.0}

    def __init__(self, state_domain=None, input_schedule=None, params=None):
        p = dict(self.defaults, **(params or {}))
        super().__init__(state_domain or Box([0.0], [45.0]), input_schedule or Box([0.0], [1.0]), p)

    def packed(self):
        p = self.params
        return np.array([p["tau"], p["alpha_e"], p["alpha_h"], p["t_e"], p["t_h"]], dtype=float)

    def f(self, x, u):
        tau, ae, ah, te, th = self.packed()
        return x + tau * (ae * (te - x) + ah * (th - x) * u)

    def enclose(self, xlo, xhi, ulo, uhi):
        tau, ae, ah, te, th = self.packed()
        ka, kh = 1.0 - tau * ae, tau * ah
        umax = np.maximum(np.abs(ulo), np.abs(uhi))
        mono = (ka - kh * umax >= 0) & (xhi <= th) & (kh >= 0)
        elo = xlo + tau * (ae * (te - xlo) + ah * (th - xlo) * ulo)
        ehi = xhi + tau * (ae * (te - xhi) + ah * (th - xhi) * uhi)
        glo, ghi = imul(th - xhi, th - xlo, ulo, uhi)
        a, b = imul(ka, ka, xlo, xhi)
        c, d = imul(kh, kh, glo, ghi)
        nlo = a + tau * ae * te + c
        nhi = b + tau * ae * te + d
        return np.where(mono, elo, nlo), np.where(mono, ehi, nhi)

    @property
    def nb_enclose(self):
        return _temperature_enc_nb


# affine ----------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _affine_enc_nb(xlo, xhi, ulo, uhi, p, olo, ohi):
    n = int(p[0])
    m = int(p[1])
    a_off = 2
    b_off = a_off + n * n
    c_off = b_off + n * m
    for i in range(n):
        lo = p[c_off + i]
        hi = p[c_off + i]
        for j in range(n):
            a = p[a_off + i * n + j]
            if a >= 0.0:
                lo += a * xlo[j]
                hi += a * xhi[j]
            else:
                lo += a * xhi[j]
                hi += a * xlo[j]
        for j in range(m):
            b = p[b_off + i * m + j]
            if b >= 0.0:
                lo += b * ulo[j]
                hi += b * uhi[j]
            else:
                lo += b * uhi[j]
                hi += b * ulo[j]
        olo[i] = lo
        ohi[i] = hi


class AffineSystem(SystemModel):
    """``x' = A x + B u + c``; the enclosure is the exact interval hull."""

    name = "affine"

    def __init__(self, A, B, c=None, state_domain: Box = None, input_schedule=None, params=None):
        self.A = np.atleast_2d(np.asarray(A, dtype=float))
        self.B = np.atleast_2d(np.asarray(B, dtype=float))
        self.n, self.m = self.B.shape
        if self.A.shape != (self.n, self.n):
            raise ValueError(f"A has shape {self.A.shape}, expected {(self.n, self.n)}")
        self.c = np.zeros(self.n) if c is None else np.asarray(c, dtype=float).reshape(self.n)
        if state_domain is None or input_schedule is None:
            raise ValueError("affine systems need explicit state and input domains")
        super().__init__(state_domain, input_schedule, params or {})
        self._packed = np.concatenate([[self.n, self.m], self.A.ravel(), self.B.ravel(), self.c])

    def packed(self):
        return self._packed

    def f(self, x, u):
        return x @ self.A.T + u @ self.B.T + self.c

    def enclose(self, xlo, xhi, ulo, uhi):
        Ap, An = np.maximum(self.A, 0), np.minimum(self.A, 0)
        Bp, Bn = np.maximum(self.B, 0), np.minimum(self.B, 0)
        lo = xlo @ Ap.T + xhi @ An.T + ulo @ Bp.T + uhi @ Bn.T + self.c
        hi = xhi @ Ap.T + xlo @ An.T + uhi @ Bp.T + ulo @ Bn.T + self.c
        return lo, hi

    @property
    def nb_enclose(self):
        return _affine_enc_nb

    def to_dict(self):
        d = super().to_dict()
        d["affine"] = {"A": self.A.tolist(), "B": self.B.tolist(), "c": self.c.tolist()}
        return d


class DoubleIntegrator(AffineSystem):
    """Two decoupled double integrators, state (x, vx, y, vy), zero-order hold."""

    name = "double_integrator"
    defaults = {"dt": 0.5}

    def __init__(self, state_domain=None, input_schedule=None, params=None):
        p = dict(self.defaults, **(params or {}))
        h = float(p["dt"])
        blk_a = np.array([[1.0, h], [0.0, 1.0]])
        blk_b = np.array([[0.5 * h * h], [h]])
        A = np.zeros((4, 4))
        B = np.zeros((4, 2))
        A[:2, :2] = A[2:, 2:] = blk_a
        B[:2, :1] = B[2:, 1:] = blk_b
        super().__init__(
            A,
            B,
            None,
            state_domain or Box([0, -1.5, 0, -1.5], [10, 1.5, 10, 1.5]),
            input_schedule or Box([-1, -1], [1, 1]),
            p,
        )

    def to_dict(self):
        d = SystemModel.to_dict(self)
        return d


# unicycle --------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _unicycle_enc_nb(xlo, xhi, ulo, uhi, p, olo, ohi):
    h = p[0]
    clo, chi = _icos_s(xlo[2], xhi[2])
    slo, shi = _isin_s(xlo[2], xhi[2])
    a, b = _imul_s(ulo[0], uhi[0], clo, chi)
    olo[0] = xlo[0] + h * a
    ohi[0] = xhi[0] + h * b
    a, b = _imul_s(ulo[0], uhi[0], slo, shi)
    olo[1] = xlo[1] + h * a
    ohi[1] = xhi[1] + h * b
    olo[2] = xlo[2] + h * ulo[1]
    ohi[2] = xhi[2] + h * uhi[1]


class Unicycle(SystemModel):
    """Forward-Euler unicycle, state (x, y, theta), input (v, omega)."""

    name = "unicycle"
    n, m = 3, 2
    defaults = {"dt": 0.5}

    def __init__(self, state_domain=None, input_schedule=None, params=None):
        p = dict(self.defaults, **(params or {}))
        half_pi = 0.5 * math.pi
        sched = input_schedule or [
            (10, Box([-10.0, -0.3], [10.0, 0.3])),
            (None, Box([-3.0, -0.3], [3.0, 0.3])),
        ]
        super().__init__(state_domain or Box([0, 0, -half_pi], [100, 100, half_pi]), sched, p)

    def packed(self):
        return np.array([self.params["dt"]], dtype=float)

    def f(self, x, u):
        h = self.params["dt"]
        out = x.copy()
        out[:, 0] += h * u[:, 0] * np.cos(x[:, 2])
        out[:, 1] += h * u[:, 0] * np.sin(x[:, 2])
        out[:, 2] += h * u[:, 1]
        return out

    def enclose(self, xlo, xhi, ulo, uhi):
        h = self.params["dt"]
        clo, chi = icos(xlo[:, 2], xhi[:, 2])
        slo, shi = isin(xlo[:, 2], xhi[:, 2])
        a, b = imul(ulo[:, 0], uhi[:, 0], clo, chi)
        c, d = imul(ulo[:, 0], uhi[:, 0], slo, shi)
        lo = np.stack([xlo[:, 0] + h * a, xlo[:, 1] + h * c, xlo[:, 2] + h * ulo[:, 1]], axis=1)
        hi = np.stack([xhi[:, 0] + h * b, xhi[:, 1] + h * d, xhi[:, 2] + h * uhi[:, 1]], axis=1)
        return lo, hi

    @property
    def nb_enclose(self):
        return _unicycle_enc_nb


# spacecraft ------------------------------------------------------------------


@njit(cache=True, nogil=True)
def _spacecraft_enc_nb(xlo, xhi, ulo, uhi, p, olo, ohi):
    mu, r, mc, h = p[0], p[1], p[2], p[3]
    nn = math.sqrt(mu / (r * r * r))
    # r_c^3 over the box; r + x > 0 on the operating range
    px_lo, px_hi = r + xlo[0], r + xhi[0]
    a2lo, a2hi = _isqr_s(px_lo, px_hi)
    y2lo, y2hi = _isqr_s(xlo[1], xhi[1])
    rclo = math.sqrt(a2lo + y2lo)
    rchi = math.sqrt(a2hi + y2hi)
    inv3lo = 1.0 / (rchi * rchi * rchi)
    inv3hi = 1.0 / (rclo * rclo * rclo)
    g_lo, g_hi = _imul_s(px_lo, px_hi, inv3lo, inv3hi)
    gy_lo, gy_hi = _imul_s(xlo[1], xhi[1], inv3lo, inv3hi)
    n2 = nn * nn
    grav = mu / (r * r)
    # accelerations
    axlo = n2 * xlo[0] + 2.0 * nn * xlo[3] + grav - mu * g_hi + ulo[0] / mc
    axhi = n2 * xhi[0] + 2.0 * nn * xhi[3] + grav - mu * g_lo + uhi[0] / mc
    aylo = n2 * xlo[1] - 2.0 * nn * xhi[2] - mu * gy_hi + ulo[1] / mc
    ayhi = n2 * xhi[1] - 2.0 * nn * xlo[2] - mu * gy_lo + uhi[1] / mc
    olo[0] = xlo[0] + h * xlo[2]
    ohi[0] = xhi[0] + h * xhi[2]
    olo[1] = xlo[1] + h * xlo[3]
    ohi[1] = xhi[1] + h * xhi[3]
    olo[2] = xlo[2] + h * axlo
    ohi[2] = xhi[2] + h * axhi
    olo[3] = xlo[3] + h * aylo
    ohi[3] = xhi[3] + h * ayhi


class Spacecraft(SystemModel):
    """Forward-Euler nonlinear relative motion in the Hill frame, state (x, y, vx, vy)."""

    name = "spacecraft"
    n, m = 4, 2
    defaults = {"mu": 3.986e14 * 60.0**2, "r": 42164e3, "m_c": 500.0, "dt": 0.5}

    def __init__(self, state_domain=None, input_schedule=None, params=None):
        p = dict(self.defaults, **(params or {}))
        super().__init__(
            state_domain or Box([-100, -100, 0, 0], [0, 0, 3.5, 3.5]),
            input_schedule or Box([0, 0], [10, 10]),
            p,
        )

    def packed(self):
        p = self.params
        return np.array([p["mu"], p["r"], p["m_c"], p["dt"]], dtype=float)

    @property
    def mean_motion(self) -> float:
        return math.sqrt(self.params["mu"] / self.params["r"] ** 3)

    def f(self, x, u):
        mu, r, mc, h = self.packed()
        nn = self.mean_motion
        px, py, vx, vy = x.T
        rc = np.sqrt((r + px) ** 2 + py**2)
        ax = nn**2 * px + 2 * nn * vy + mu / r**2 - mu / rc**3 * (r + px) + u[:, 0] / mc
        ay = nn**2 * py - 2 * nn * vx - mu / rc**3 * py + u[:, 1] / mc
        return np.stack([px + h * vx, py + h * vy, vx + h * ax, vy + h * ay], axis=1)

    def enclose(self, xlo, xhi, ulo, uhi):
        mu, r, mc, h = self.packed()
        nn = self.mean_motion
        px_lo, px_hi = r + xlo[:, 0], r + xhi[:, 0]
        a2lo, a2hi = isqr(px_lo, px_hi)
        y2lo, y2hi = isqr(xlo[:, 1], xhi[:, 1])
        rclo, rchi = np.sqrt(a2lo + y2lo), np.sqrt(a2hi + y2hi)
        inv3lo, inv3hi = 1.0 / (rchi * rchi * rchi), 1.0 / (rclo * rclo * rclo)
        g_lo, g_hi = imul(px_lo, px_hi, inv3lo, inv3hi)
        gy_lo, gy_hi = imul(xlo[:, 1], xhi[:, 1], inv3lo, inv3hi)
        n2 = nn * nn
        grav = mu / (r * r)
        axlo = n2 * xlo[:, 0] + 2 * nn * xlo[:, 3] + grav - mu * g_hi + ulo[:, 0] / mc
        axhi = n2 * xhi[:, 0] + 2 * nn * xhi[:, 3] + grav - mu * g_lo + uhi[:, 0] / mc
        aylo = n2 * xlo[:, 1] - 2 * nn * xhi[:, 2] - mu * gy_hi + ulo[:, 1] / mc
        ayhi = n2 * xhi[:, 1] - 2 * nn * xlo[:, 2] - mu * gy_lo + uhi[:, 1] / mc
        lo = np.stack([xlo[:, 0] + h * xlo[:, 2], xlo[:, 1] + h * xlo[:, 3], xlo[:, 2] + h * axlo, xlo[:, 3] + h * aylo], axis=1)
        hi = np.stack([xhi[:, 0] + h * xhi[:, 2], xhi[:, 1] + h * xhi[:, 3], xhi[:, 2] + h * axhi, xhi[:, 3] + h * ayhi], axis=1)
        return lo, hi

    @property
    def nb_enclose(self):
        return _spacecraft_enc_nb


# ---------------------------------------------------------------------------
# construction from config

MODELS = {
    "building_temperature": BuildingTemperature,
    "double_integrator": DoubleIntegrator,
    "unicycle": Unicycle,
    "spacecraft": Spacecraft,
}


def _schedule_from_json(d):
    if isinstance(d, dict) and "lo" in d:
        return [(None, _box_from_json(d))]
    if isinstance(d, dict) and "box" in d:
        return [(d.get("until_k"), _box_from_json(d["box"]))]
    out = []
    for item in d:
        out.append((item.get("until_k"), _box_from_json(item["box"])))
    return out


def model_from_dict(cfg: dict) -> SystemModel:
    """Build a model from the system JSON layout."""
    if "model" not in cfg:
        raise ValueError("system config needs a 'model' field")
    kind = cfg["model"]
    sd = _box_from_json(cfg["state_domain"]) if "state_domain" in cfg else None
    sched = _schedule_from_json(cfg["input_domain"]) if "input_domain" in cfg else None
    params = cfg.get("params") or {}
    if kind == "affine":
        aff = cfg.get("affine")
        if not aff:
            raise ValueError("affine model needs an 'affine' block with A and B")
        return AffineSystem(aff["A"], aff["B"], aff.get("c"), sd, sched, params)
    if kind not in MODELS:
        raise ValueError(f"unknown model {kind!r}; choose from {sorted(MODELS) + ['affine']}")
    cls = MODELS[kind]
    unknown = set(params) - set(cls.defaults)
    if unknown:
        raise ValueError(f"unknown parameters for {kind}: {sorted(unknown)}")
    return cls(sd, sched, params)


def load_model(path) -> SystemModel:
    with open(path) as fh:
        return model_from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# controllers


def make_controller(spec, model: SystemModel) -> Callable[[int, np.ndarray], np.ndarray]:
    """Input source from a callable, an input vector, or a ``kind:arg`` string.

    Strings: ``constant:u0,u1``, ``random:SEED`` (uniform in U(k)) and
    ``file:PATH`` (CSV with header ``k,u0,...``).
    """
    if callable(spec):
        return spec
    if not isinstance(spec, str):
        u = np.asarray(spec, dtype=float).reshape(model.m)
        return lambda k, x: u
    kind, _, arg = spec.partition(":")
    if kind == "constant":
        u = np.array([float(v) for v in arg.split(",")])
        if u.shape != (model.m,):
            raise ValueError(f"constant controller needs {model.m} values")
        return lambda k, x: u
    if kind == "random":
        rng = np.random.default_rng(int(arg) if arg else None)

        def ctrl(k, x):
            b = model.input_domain(k)
            return rng.uniform(b.lo, b.hi)

        return ctrl
    if kind == "file":
        with open(arg) as fh:
            rows = [r for r in csv.reader(fh) if r]
        table = {int(r[0]): np.array([float(v) for v in r[1:]]) for r in rows[1:]}

        def ctrl(k, x):
            if k not in table:
                raise ValueError(f"controller file has no input for instant {k}")
            return table[k]

        return ctrl
    raise ValueError(f"unknown controller {spec!r}")
