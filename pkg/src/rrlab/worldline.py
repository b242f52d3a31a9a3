"""Analytic test worldlines, their proper-time derivatives, and retarded-time solving.

A worldline is described by a :class:`WorldlineSpec`.  The catalog is

``rest``
    charge at rest at the spatial origin.
``hyperbolic`` (``g``)
    uniform proper acceleration ``g`` along axis 1, at rest at the origin at
    ``tau = 0``: ``z = (sinh(g tau)/g, (cosh(g tau) - 1)/g, 0, ...)``.
``circular`` (``omega``, ``R``)
    circle of radius ``R`` in the (1, 2) plane with lab angular frequency
    ``omega`` (requires ``omega*R < 1``).
``polynomial`` (``cI_N``)
    spatial part of the four-velocity is a polynomial, ``u^I(tau) = sum_N cI_N tau^N``,
    and ``u^0 = sqrt(1 + |u|^2)``.  Derivatives of every order are exact; the
    time coordinate ``z^0`` is obtained by quadrature of ``u^0``.  An optional
    ``tau_max`` bounds the validity range (default 20).

Specs can be parsed from strings such as ``"hyperbolic:g=0.5"`` or
``"circular:omega=1.0,R=0.3"``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, cos, cosh, pi, sin, sinh, sqrt

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.integrate import quad

from . import minkowski as mk
from .errors import ContractError, DegeneratePointError, DomainError, SearchFailure

KINDS = ("rest", "hyperbolic", "circular", "polynomial")
MAX_ORDER = 5
_ALIASES = {"polynomial-test": "polynomial", "poly": "polynomial"}


@dataclass(frozen=True)
class KinematicState:
    """Worldline point with proper-time derivatives.

    ``a1``, ``a2``, ``a3`` are the first three derivatives of the acceleration;
    entries beyond the requested order are ``None``.
    """

    tau: float
    z: np.ndarray
    u: np.ndarray | None = None
    a: np.ndarray | None = None
    a1: np.ndarray | None = None
    a2: np.ndarray | None = None
    a3: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return self.z.shape[0]

    @classmethod
    def from_derivatives(cls, tau, derivs) -> "KinematicState":
        derivs = [np.asarray(d, dtype=float) for d in derivs]
        derivs = derivs + [None] * (MAX_ORDER + 1 - len(derivs))
        return cls(float(tau), *derivs)

    def derivatives(self) -> list:
        out = []
        for d in (self.z, self.u, self.a, self.a1, self.a2, self.a3):
            if d is None:
                break
            out.append(d)
        return out

    @property
    def order(self) -> int:
        return len(self.derivatives()) - 1

    def chain_residuals(self) -> dict:
        """Deviations from the identities obtained by differentiating ``u.u = -1``."""
        dot = mk.dot
        res = {}
        if self.u is not None:
            res["u.u"] = dot(self.u, self.u) + 1.0
        if self.a is not None:
            res["u.a"] = dot(self.u, self.a)
        if self.a1 is not None:
            res["u.a1"] = dot(self.u, self.a1) + dot(self.a, self.a)
        if self.a2 is not None:
            res["u.a2"] = dot(self.u, self.a2) + 3.0 * dot(self.a, self.a1)
        if self.a3 is not None:
            res["u.a3"] = (dot(self.u, self.a3) + 3.0 * dot(self.a1, self.a1)
                           + 4.0 * dot(self.a, self.a2))
        return res


@dataclass(frozen=True)
class RetardedFrame:
    """Retarded-time data for a field point ``y = z(tau_ret) + r k``."""

    tau_ret: float
    r: float
    k: np.ndarray
    a_k: float
    state: KinematicState = field(repr=False)


@dataclass(frozen=True)
class WorldlineSpec:
    kind: str
    params: dict = field(default_factory=dict)
    dim: int = 4

    def __post_init__(self):
        kind = _ALIASES.get(self.kind, self.kind)
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "params", {k: float(v) for k, v in self.params.items()})
        if kind not in KINDS:
            raise ContractError(f"unknown worldline kind {self.kind!r}; expected one of {KINDS}")
        if self.dim not in mk.SUPPORTED_DIMS:
            raise ContractError(f"dimension must be 4 or 6, got {self.dim}")
        p = self.params
        if kind == "hyperbolic":
            _require(p, ("g",), kind)
        elif kind == "circular":
            _require(p, ("omega", "R"), kind)
            if abs(p["omega"] * p["R"]) >= 1.0:
                raise DomainError("circular worldline needs |omega*R| < 1")
        elif kind == "polynomial":
            coeffs = _poly_coefficients(p, self.dim)
            object.__setattr__(self, "_coeffs", coeffs)
        allowed = {"rest": set(), "hyperbolic": {"g"}, "circular": {"omega", "R"}}
        if kind in allowed and set(p) - allowed[kind]:
            raise ContractError(f"unexpected parameters for {kind}: {sorted(set(p) - allowed[kind])}")

    @classmethod
    def parse(cls, text: str, dim: int = 4) -> "WorldlineSpec":
        """Parse ``kind:key=value,key=value``."""
        kind, _, rest = text.strip().partition(":")
        params = {}
        for item in filter(None, (s.strip() for s in rest.split(","))):
            key, eq, value = item.partition("=")
            if not eq:
                raise ContractError(f"malformed worldline parameter {item!r}")
            try:
                params[key.strip()] = float(value)
            except ValueError:
                raise ContractError(f"non-numeric value in {item!r}") from None
        return cls(kind.strip(), params, dim)

    def __str__(self) -> str:
        if not self.params:
            return self.kind
        body = ",".join(f"{k}={v:g}" for k, v in self.params.items())
        return f"{self.kind}:{body}"

    @property
    def tau_range(self) -> tuple:
        if self.kind == "polynomial":
            t = self.params.get("tau_max", 20.0)
            return (-t, t)
        if self.kind == "hyperbolic":
            g = abs(self.params["g"])
            t = 600.0 / g if g > 0 else np.inf
            return (-t, t)
        return (-np.inf, np.inf)

    def derivatives(self, tau: float, order: int = 2) -> np.ndarray:
        """Array of shape ``(order+1, D)``: ``z, u, a, a1, ...`` at ``tau``."""
        if not 0 <= order <= MAX_ORDER:
            raise ContractError(f"order must lie in 0..{MAX_ORDER}, got {order}")
        lo, hi = self.tau_range
        if not lo <= tau <= hi:
            raise DomainError(f"tau={tau} outside validity range [{lo}, {hi}] of {self}")
        if self.kind == "rest" or (self.kind == "hyperbolic" and self.params["g"] == 0.0):
            out = np.zeros((order + 1, self.dim))
            out[0, 0] = tau
            if order >= 1:
                out[1, 0] = 1.0
            return out
        return getattr(self, "_" + self.kind)(float(tau), order)

    def state(self, tau: float, order: int = 4) -> KinematicState:
        return KinematicState.from_derivatives(tau, self.derivatives(tau, order))

    # catalog members -------------------------------------------------------

    def _hyperbolic(self, tau, order):
        g = self.params["g"]
        gt = g * tau
        ch, sh = cosh(gt), sinh(gt)
        out = np.zeros((order + 1, self.dim))
        out[0, 0] = sh / g
        out[0, 1] = (ch - 1.0) / g
        for n in range(1, order + 1):
            gn = g ** (n - 1)
            if n % 2:
                out[n, 0], out[n, 1] = gn * ch, gn * sh
            else:
                out[n, 0], out[n, 1] = gn * sh, gn * ch
        return out

    def _circular(self, tau, order):
        w, R = self.params["omega"], self.params["R"]
        gam = 1.0 / sqrt(1.0 - (w * R) ** 2)
        W = gam * w
        out = np.zeros((order + 1, self.dim))
        out[0, 0] = gam * tau
        if order >= 1:
            out[1, 0] = gam
        for n in range(order + 1):
            phase = W * tau + n * pi / 2.0
            out[n, 1] = R * W ** n * cos(phase)
            out[n, 2] = R * W ** n * sin(phase)
        return out

    def _polynomial(self, tau, order):
        coeffs = self._coeffs
        D = self.dim
        out = np.zeros((order + 1, D))
        # spatial position: integral of the velocity polynomial, z(0) = 0
        for i, c in enumerate(coeffs, start=1):
            out[0, i] = P.polyval(tau, P.polyint(c))
        out[0, 0] = self._z0(tau)
        if order == 0:
            return out
        # w[n, i] = n-th derivative of spatial velocity component i
        nmax = order - 1
        w = np.zeros((nmax + 1, D - 1))
        for i, c in enumerate(coeffs):
            ck = c
            for n in range(nmax + 1):
                w[n, i] = P.polyval(tau, ck)
                ck = P.polyder(ck) if ck.size > 1 else np.zeros(1)
        # u0^2 = 1 + |w|^2, differentiated n times (Leibniz) and solved for u0^(n)
        q = np.zeros(nmax + 1)
        for n in range(nmax + 1):
            q[n] = sum(comb(n, k) * (w[k] @ w[n - k]) for k in range(n + 1))
        u0 = np.zeros(nmax + 1)
        u0[0] = sqrt(1.0 + q[0])
        for n in range(1, nmax + 1):
            s = sum(comb(n, k) * u0[k] * u0[n - k] for k in range(1, n))
            u0[n] = (q[n] - s) / (2.0 * u0[0])
        out[1:, 0] = u0
        out[1:, 1:] = w
        return out

    def _z0(self, tau):
        coeffs = self._coeffs

        def u0(s):
            ws = np.array([P.polyval(s, c) for c in coeffs])
            return sqrt(1.0 + ws @ ws)

        val, _ = quad(u0, 0.0, tau, epsabs=0.0, epsrel=1e-13, limit=200)
        return val


def _require(params, keys, kind):
    missing = [k for k in keys if k not in params]
    if missing:
        raise ContractError(f"{kind} worldline missing parameters {missing}")


def _poly_coefficients(params, dim):
    coeffs = [dict() for _ in range(dim - 1)]
    for key, value in params.items():
        if key == "tau_max":
            continue
        if not key.startswith("c") or "_" not in key:
            raise ContractError(f"polynomial parameters look like c<axis>_<power>, got {key!r}")
        axis, _, power = key[1:].partition("_")
        axis, power = int(axis), int(power)
        if not 1 <= axis <= dim - 1 or power < 0:
            raise ContractError(f"bad polynomial coefficient {key!r} for D={dim}")
        coeffs[axis - 1][power] = value
    out = []
    for c in coeffs:
        arr = np.zeros(max(c) + 1 if c else 1)
        for p, v in c.items():
            arr[p] = v
        out.append(arr)
    return out


def state(w: WorldlineSpec, tau: float, order: int = 4) -> KinematicState:
    return w.state(tau, order)


def _light_gap(w, y, tau):
    z = w.derivatives(tau, 0)[0]
    d = y - z
    return y[0] - z[0] - sqrt(d[1:] @ d[1:])


def retarded_time(w: WorldlineSpec, y, *, max_expansions: int = 80) -> float:
    """Retarded proper time of the field point ``y``.

    The gap ``y0 - z0(tau) - |y - z(tau)|`` is strictly decreasing along a
    timelike worldline; its zero is bracketed by geometric expansion, narrowed
    by bisection and polished with Newton steps.
    """
    y = mk.vector(y, w.dim)
    lo_lim, hi_lim = w.tau_range
    scale = max(1.0, float(np.max(np.abs(y))))

    def gap(t):
        with np.errstate(over="raise", invalid="raise"):
            try:
                val = _light_gap(w, y, t)
            except (FloatingPointError, OverflowError, DomainError):
                return np.nan
        return val if np.isfinite(val) else np.nan

    z_guess = w.derivatives(float(np.clip(y[0], lo_lim, hi_lim)), 0)[0]
    d = y[1:] - z_guess[1:]
    t0 = float(np.clip(y[0] - sqrt(d @ d), lo_lim, hi_lim))
    step = max(1.0, sqrt(d @ d))
    lo = hi = t0
    g_lo = g_hi = gap(t0)
    if np.isnan(g_lo):
        raise SearchFailure("light-cone gap not finite at the initial guess", (t0, t0))
    n = 0
    while g_lo < 0.0:
        hi, g_hi = lo, g_lo
        lo = max(lo - step, lo_lim)
        g_lo = gap(lo)
        step *= 2.0
        n += 1
        if np.isnan(g_lo) or n > max_expansions or (lo == lo_lim and g_lo < 0.0):
            raise SearchFailure(f"no retarded time found for y={y.tolist()}", (lo, t0))
    while g_hi > 0.0:
        lo, g_lo = hi, g_hi
        hi = min(hi + step, hi_lim)
        g_hi = gap(hi)
        step *= 2.0
        n += 1
        if np.isnan(g_hi) or n > max_expansions or (hi == hi_lim and g_hi > 0.0):
            raise SearchFailure(f"no retarded time found for y={y.tolist()}", (t0, hi))
    if g_lo == 0.0:
        return _check_nondegenerate(w, y, lo, scale)
    if g_hi == 0.0:
        return _check_nondegenerate(w, y, hi, scale)
    tol = 1e-7 * (1.0 + abs(lo) + abs(hi))
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        g_mid = gap(mid)
        if g_mid > 0.0:
            lo = mid
        elif g_mid < 0.0:
            hi = mid
        else:
            lo = hi = mid
    t = 0.5 * (lo + hi)
    for _ in range(20):
        zu = w.derivatives(t, 1)
        dz = y - zu[0]
        dist = sqrt(dz[1:] @ dz[1:])
        if dist == 0.0:
            break
        gval = dz[0] - dist
        slope = -zu[1, 0] + (dz[1:] @ zu[1, 1:]) / dist
        t_new = t - gval / slope
        if not lo <= t_new <= hi:
            t_new = 0.5 * (lo + hi)
        if gval > 0.0:
            lo = max(lo, t)
        elif gval < 0.0:
            hi = min(hi, t)
        converged = abs(t_new - t) <= 4e-16 * max(1.0, abs(t))
        t = t_new
        if converged:
            break
    return _check_nondegenerate(w, y, t, scale)


def _check_nondegenerate(w, y, t, scale):
    zu = w.derivatives(t, 1)
    r = -mk.dot(y - zu[0], zu[1])
    if r < 1e-9 * scale:
        raise DegeneratePointError(f"field point {y.tolist()} lies on the worldline (r={r:.3g})")
    return t


def retarded_frame(w: WorldlineSpec, y, order: int = 4) -> RetardedFrame:
    """Retarded distance ``r``, null direction ``k`` and ``a_k = a.k`` for ``y``."""
    y = mk.vector(y, w.dim)
    t = retarded_time(w, y)
    st = w.state(t, max(order, 2))
    d = y - st.z
    r = -mk.dot(d, st.u)
    k = d / r
    return RetardedFrame(t, r, k, mk.dot(st.a, k), st)
