"""Renormalized particle momenta, spin and balance-equation residuals.

In 4D the charged particle carries ``p = m u - (2/3) e^2 a`` and radiates
momentum at the Larmor rate ``(2/3) e^2 (a.a) u``.  In 6D, with
``c = e^2 / 4 pi^2``,

    p  = m u + mu (-a1 + 3/2 (a.a) u) + c [4/5 a2 - 8/5 (a.a)' u - 64/35 (a.a) a]
    pi = mu a - 4/5 c a1,      s = u ^ pi

and the radiated rate is
``c [4/5 (a1.a1) u - 6/35 (a.a) a1 + 3/7 (a.a)' a + 2 (a.a)^2 u]``.

Time derivatives of the momenta are obtained analytically from the state
derivatives, never by differencing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import minkowski as mk
from .errors import ContractError, DomainError
from .worldline import KinematicState, WorldlineSpec

DEFAULT_TOL = 1e-10


def c6(e: float) -> float:
    """The 6D self-interaction coefficient ``e^2 / 4 pi^2``."""
    return e * e / (4.0 * math.pi**2)


@dataclass(frozen=True)
class ParticleParams:
    m: float = 1.0
    mu: float = 0.0
    e: float = 1.0

    def __post_init__(self):
        if not self.m > 0:
            raise DomainError(f"mass must be positive, got {self.m}")
        if not (math.isfinite(self.mu) and math.isfinite(self.e)):
            raise DomainError("mu and e must be finite")


@dataclass(frozen=True)
class ParticleMomenta:
    p: np.ndarray
    pi: np.ndarray
    s: np.ndarray


@dataclass(frozen=True)
class BalanceReport:
    """Residuals of the energy-momentum and angular-momentum balance at one instant.

    ``dp_scale`` and ``dM_scale`` are the largest component magnitudes among
    the terms entering each residual; a residual passes when its norm is at
    most ``tol`` times its scale.
    """

    tau: float
    dp_residual: np.ndarray
    dM_residual: np.ndarray
    dp_norm: float
    dM_norm: float
    dp_scale: float
    dM_scale: float
    tol: float = DEFAULT_TOL
    force_u: float = field(default=0.0)

    @property
    def passed(self) -> bool:
        return (self.dp_norm <= self.tol * max(self.dp_scale, 1.0e-300)
                and self.dM_norm <= self.tol * max(self.dM_scale, 1.0e-300))

    def as_dict(self) -> dict:
        return {
            "tau": self.tau,
            "dp_residual": self.dp_residual.tolist(),
            "dM_residual": mk.upper_triangle(self.dM_residual).tolist(),
            "dp_norm": self.dp_norm, "dM_norm": self.dM_norm,
            "dp_scale": self.dp_scale, "dM_scale": self.dM_scale,
            "tol": self.tol, "force_u": self.force_u, "passed": self.passed,
        }


def _need(st: KinematicState, order: int):
    have = st.order
    if have < order:
        raise ContractError(f"state has derivatives to order {have}, need {order}")


def _as_state(w, tau, order):
    if isinstance(w, KinematicState):
        _need(w, order)
        return w
    return w.state(tau, order)


# ---------------------------------------------------------------------------
# momenta


def momentum_4d(st: KinematicState, prm: ParticleParams) -> ParticleMomenta:
    _need(st, 2)
    D = st.dim
    p = prm.m * st.u - (2.0 / 3.0) * prm.e**2 * st.a
    return ParticleMomenta(p, np.zeros(D), np.zeros((D, D)))


def momentum_6d(st: KinematicState, prm: ParticleParams) -> ParticleMomenta:
    _need(st, 4)
    c = c6(prm.e)
    aa = mk.dot(st.a, st.a)
    daa = 2.0 * mk.dot(st.a, st.a1)
    p = (prm.m * st.u + prm.mu * (-st.a1 + 1.5 * aa * st.u)
         + c * (0.8 * st.a2 - 1.6 * daa * st.u - (64.0 / 35.0) * aa * st.a))
    pi = prm.mu * st.a - 0.8 * c * st.a1
    return ParticleMomenta(p, pi, mk.wedge(st.u, pi))


def momentum(st: KinematicState, prm: ParticleParams) -> ParticleMomenta:
    return momentum_4d(st, prm) if st.dim == 4 else momentum_6d(st, prm)


def rest_mass(st: KinematicState, prm: ParticleParams) -> float:
    """``-p.u``; in 6D equal to ``m + mu/2 (a.a) - 2/5 c (a.a)'``."""
    return -mk.dot(momentum(st, prm).p, st.u)


def rest_mass_closed(st: KinematicState, prm: ParticleParams) -> float:
    if st.dim == 4:
        return prm.m
    aa = mk.dot(st.a, st.a)
    daa = 2.0 * mk.dot(st.a, st.a1)
    return prm.m + 0.5 * prm.mu * aa - 0.4 * c6(prm.e) * daa


@dataclass(frozen=True)
class SpinMagnitude:
    """``s^2 = -1/2 s_ab s^ab`` from the bivector, with two closed forms.

    ``expansion`` is the direct expansion of the bivector contraction; the
    ``printed`` form carries the opposite sign on the ``mu (a.a)'`` cross term.
    """

    value: float
    expansion: float
    printed: float


def spin_magnitude(st: KinematicState, prm: ParticleParams) -> SpinMagnitude:
    _need(st, 4)
    s = momentum_6d(st, prm).s
    value = -0.5 * mk.bivector_contract(s, s)
    aa = mk.dot(st.a, st.a)
    daa = 2.0 * mk.dot(st.a, st.a1)
    e2 = prm.e**2
    base = prm.mu**2 * aa + e2 * e2 / (25.0 * math.pi**4) * (mk.dot(st.a1, st.a1) + aa * aa)
    cross = prm.mu * e2 / (5.0 * math.pi**2) * daa
    return SpinMagnitude(value, base - cross, base + cross)


# ---------------------------------------------------------------------------
# radiated rates


def radiated_rate_closed(st: KinematicState, D: int | None = None, e: float = 1.0) -> np.ndarray:
    """Instantaneous momentum carried off by radiation per unit proper time."""
    D = st.dim if D is None else D
    aa = mk.dot(st.a, st.a)
    if D == 4:
        return (2.0 / 3.0) * e * e * aa * st.u
    daa = 2.0 * mk.dot(st.a, st.a1)
    return c6(e) * (0.8 * mk.dot(st.a1, st.a1) * st.u - (6.0 / 35.0) * aa * st.a1
                    + (3.0 / 7.0) * daa * st.a + 2.0 * aa * aa * st.u)


def radiative_angular_rate_closed(st: KinematicState, D: int | None = None,
                                  e: float = 1.0) -> np.ndarray:
    """Instantaneous angular momentum carried off by radiation."""
    D = st.dim if D is None else D
    P = radiated_rate_closed(st, D, e)
    if D == 4:
        return mk.wedge(st.z, P) + (2.0 / 3.0) * e * e * mk.wedge(st.u, st.a)
    aa = mk.dot(st.a, st.a)
    return mk.wedge(st.z, P) + c6(e) * (0.8 * mk.wedge(st.a, st.a1)
                                        + (64.0 / 35.0) * aa * mk.wedge(st.u, st.a))


# ---------------------------------------------------------------------------
# analytic time derivatives


def momentum_rate_terms(st: KinematicState, prm: ParticleParams) -> list:
    """Mass, curvature and self-field pieces of ``dp/dtau`` (their sum is ``momentum_rate``)."""
    if st.dim == 4:
        _need(st, 3)
        return [prm.m * st.a, -(2.0 / 3.0) * prm.e**2 * st.a1]
    _need(st, 5)
    c = c6(prm.e)
    aa = mk.dot(st.a, st.a)
    daa = 2.0 * mk.dot(st.a, st.a1)
    ddaa = 2.0 * (mk.dot(st.a1, st.a1) + mk.dot(st.a, st.a2))
    return [prm.m * st.a,
            prm.mu * (-st.a2 + 1.5 * daa * st.u + 1.5 * aa * st.a),
            c * (0.8 * st.a3 - 1.6 * daa * st.a - 1.6 * ddaa * st.u
                 - (64.0 / 35.0) * (daa * st.a + aa * st.a1))]


def momentum_rate(st: KinematicState, prm: ParticleParams) -> np.ndarray:
    """``d p / d tau`` by the chain rule through the momentum formula."""
    return sum(momentum_rate_terms(st, prm))


def pi_rate(st: KinematicState, prm: ParticleParams) -> np.ndarray:
    _need(st, 4)
    return prm.mu * st.a1 - 0.8 * c6(prm.e) * st.a2


def closing_force(st: KinematicState, prm: ParticleParams) -> np.ndarray:
    """External force that closes the energy-momentum balance exactly."""
    return momentum_rate(st, prm) + radiated_rate_closed(st, st.dim, prm.e)


def _scale(*terms) -> float:
    return max(float(np.max(np.abs(t))) for t in terms)


def balance_residual(w, tau: float, prm: ParticleParams, F_ext=None, D: int | None = None,
                     tol: float = DEFAULT_TOL) -> BalanceReport:
    """Energy-momentum and angular-momentum balance residuals at ``tau``.

    ``w`` is a :class:`WorldlineSpec` or a ready :class:`KinematicState`;
    ``F_ext`` a function of the state returning a force vector (zero if None).
    The angular residual is the part of the angular balance free of ``dp/dtau``:
    ``u ^ (p + (2/3) e^2 a)`` in 4D and
    ``u ^ (p + pi' + 64/35 c (a.a) a) + a ^ (pi + 4/5 c a1)`` in 6D.
    """
    D = (w.dim if isinstance(w, (WorldlineSpec, KinematicState)) else D) if D is None else D
    st = _as_state(w, tau, 3 if D == 4 else 5)
    if st.dim != D:
        raise ContractError(f"state dimension {st.dim} does not match D={D}")
    e = prm.e
    mom = momentum(st, prm)
    pdot_terms = momentum_rate_terms(st, prm)
    pdot = sum(pdot_terms)
    P = radiated_rate_closed(st, D, e)
    F = np.zeros(D) if F_ext is None else np.asarray(F_ext(st), dtype=float)
    dp = pdot + P - F
    if D == 4:
        t1 = mom.p + (2.0 / 3.0) * e * e * st.a
        dM = mk.wedge(st.u, t1)
        dM_terms = (mk.wedge(st.u, mom.p), (2.0 / 3.0) * e * e * mk.wedge(st.u, st.a))
    else:
        c = c6(e)
        aa = mk.dot(st.a, st.a)
        w1 = mk.wedge(st.u, mom.p)
        w2 = mk.wedge(st.u, pi_rate(st, prm))
        w3 = c * (64.0 / 35.0) * aa * mk.wedge(st.u, st.a)
        w4 = mk.wedge(st.a, mom.pi)
        w5 = 0.8 * c * mk.wedge(st.a, st.a1)
        dM = w1 + w2 + w3 + w4 + w5
        dM_terms = (w1, w2, w3, w4, w5)
    return BalanceReport(
        float(st.tau), dp, dM, float(np.linalg.norm(dp)),
        float(np.linalg.norm(dM)), _scale(*pdot_terms, P, F), _scale(*dM_terms), tol,
        float(mk.dot(F, st.u)))


def structureless_check(w, tau: float = 0.0, e: float = 1.0) -> np.ndarray:
    """Angular balance residual for a particle with ``p = m u`` only (6D).

    Equals ``c [64/35 (a.a) u ^ a + 4/5 a ^ a1]``, independent of ``m``.
    """
    st = _as_state(w, tau, 3)
    if st.dim != 6:
        raise ContractError("structureless check is defined for D = 6")
    c = c6(e)
    aa = mk.dot(st.a, st.a)
    return c * ((64.0 / 35.0) * aa * mk.wedge(st.u, st.a) + 0.8 * mk.wedge(st.a, st.a1))


# ---------------------------------------------------------------------------
# force presets


@dataclass(frozen=True)
class ConstantForce:
    """Fixed lab vector ``f``, projected orthogonal to ``u``: ``F = f + (f.u) u``.

    The invariant magnitude grows with the speed along ``f``; for rectilinear
    Newtonian motion from rest ``|a| = (|f|/m) sec(|f| tau / m)``, which
    diverges at ``|f| tau / m = pi/2``.  Use :class:`LorentzForce` for a force
    of fixed invariant size.
    """

    f: np.ndarray

    def __call__(self, st) -> np.ndarray:
        f = np.asarray(self.f, float)
        return f + mk.dot(f, st.u) * st.u

    def jacobian(self, u) -> np.ndarray:
        """``dF^m / du^n``."""
        f = np.asarray(self.f, float)
        return np.outer(u, mk.lower(f)) + mk.dot(f, u) * np.eye(len(u))


@dataclass(frozen=True)
class LorentzForce:
    """``F^m = q F^{mn} u_n`` for a constant antisymmetric field ``F^{mn}``."""

    field: np.ndarray
    q: float = 1.0

    def __call__(self, st) -> np.ndarray:
        return self.q * self.field @ mk.lower(st.u)

    def jacobian(self, u) -> np.ndarray:
        return self.q * self.field @ mk.metric(self.field.shape[0])


@dataclass(frozen=True)
class ZeroForce:
    dim: int

    def __call__(self, st) -> np.ndarray:
        return np.zeros(self.dim)

    def jacobian(self, u) -> np.ndarray:
        return np.zeros((self.dim, self.dim))


def parse_force(text: str, dim: int):
    """Force preset from ``none``, ``const:f1=0.1,f2=..`` or ``lorentz:E1=..,B12=..``.

    ``fI`` are lab components of the constant force; ``EI`` fill ``F^{0I}``
    and ``BIJ`` fill ``F^{IJ}`` (antisymmetrized); ``q`` sets the charge.
    """
    text = text.strip()
    kind, _, rest = text.partition(":")
    kv = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, sep, val = item.partition("=")
        if not sep:
            raise ContractError(f"malformed force parameter {item!r}")
        kv[key.strip()] = float(val)
    if kind in ("none", "zero", ""):
        return ZeroForce(dim)
    if kind == "const":
        f = np.zeros(dim)
        for key, val in kv.items():
            if not (key[0] == "f" and key[1:].isdigit() and int(key[1:]) < dim):
                raise ContractError(f"unknown const force key {key!r}")
            f[int(key[1:])] = val
        return ConstantForce(f)
    if kind == "lorentz":
        Fm = np.zeros((dim, dim))
        q = kv.pop("q", 1.0)
        for key, val in kv.items():
            idx = key[1:]
            if key[0] == "E" and idx.isdigit() and 0 < int(idx) < dim:
                i, j = 0, int(idx)
            elif key[0] == "B" and len(idx) == 2 and idx.isdigit():
                i, j = int(idx[0]), int(idx[1])
                if not (0 < i < dim and 0 < j < dim and i != j):
                    raise ContractError(f"bad magnetic index {key!r}")
            else:
                raise ContractError(f"unknown lorentz force key {key!r}")
            Fm[i, j] += val
            Fm[j, i] -= val
        return LorentzForce(Fm, q)
    raise ContractError(f"unknown force kind {kind!r}")
