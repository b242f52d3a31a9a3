"""Retarded Lienard-Wiechert potentials, field strengths and stress-energy in D = 4 and 6.

Field tensors are stored with upper indices, ``F^{ab}``.  Throughout, the field
at a point ``y = z(u) + r k`` is a Laurent polynomial in the retarded distance:

* D = 4: ``F = e [u^k / r^2 + (a + a_k u)^k / r]``
* D = 6: ``F = (e/2pi) [u^a / r^3 + V^k]`` with
  ``V = 3u/r^4 + 3(a + 2u a_k)/r^3 + (a1 + u a1_k + 3a a_k + 3u a_k^2)/r^2``

where ``x^y`` is the wedge product and ``a_k = a.k``, ``a1_k = a1.k``.  The
pieces multiplying each power of ``r`` are exposed by :func:`field_pieces`,
which the flux kernels and the radiative/bound split build on.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import minkowski as mk
from .errors import ContractError
from .worldline import RetardedFrame, WorldlineSpec, retarded_frame

# Overall coefficient of the 6D field, F = FIELD_COEFF_6D * e * (...).  Other
# normalizations in the literature differ by constant factors.
FIELD_COEFF_6D = 1.0 / (2.0 * math.pi)

FIELD_POWERS = {4: (-2, -1), 6: (-4, -3, -2)}
RAD_POWER = {4: -2, 6: -4}
BOUND_POWERS = {4: (-4, -3), 6: (-8, -7, -6, -5)}


def _check_dim(D):
    if D not in mk.SUPPORTED_DIMS:
        raise ContractError(f"dimension must be 4 or 6, got {D}")


def _bwedge(x, y):
    return x[..., :, None] * y[..., None, :] - y[..., :, None] * x[..., None, :]


def field_pieces(u, a, a1, k, D: int, e: float = 1.0) -> dict:
    """Coefficients ``F_(s)`` of ``r^s`` in the field, for a batch of null directions.

    ``k`` may have shape ``(D,)`` or ``(N, D)``; kinematics are shared.
    """
    _check_dim(D)
    k = np.asarray(k, dtype=float)
    u, a = np.asarray(u, float), np.asarray(a, float)
    ak = mk.bdot(a, k)[..., None]
    uk = np.broadcast_to(u, k.shape)
    if D == 4:
        return {-2: e * _bwedge(uk, k),
                -1: e * _bwedge(a + ak * u, k)}
    a1 = np.asarray(a1, float)
    a1k = mk.bdot(a1, k)[..., None]
    c = FIELD_COEFF_6D * e
    ak_ = np.broadcast_to(a, k.shape)
    return {
        -4: 3.0 * c * _bwedge(uk, k),
        -3: c * (_bwedge(uk, ak_) + 3.0 * _bwedge(a + 2.0 * u * ak, k)),
        -2: c * _bwedge(a1 + u * a1k + 3.0 * a * ak + 3.0 * u * ak * ak, k),
    }


@dataclass(frozen=True)
class FieldTensor:
    F: np.ndarray
    frame: RetardedFrame | None = None

    @property
    def dim(self) -> int:
        return self.F.shape[0]


@dataclass(frozen=True)
class StressTensor:
    T: np.ndarray

    @property
    def norm(self) -> float:
        return float(np.max(np.abs(self.T)))

    def trace(self) -> float:
        return float(np.einsum("aa,a->", self.T, mk.signs(self.T.shape[0])))


@dataclass(frozen=True)
class StressSplit:
    T_rad: StressTensor
    T_bnd_parts: dict

    def total(self) -> np.ndarray:
        return self.T_rad.T + sum(p.T for p in self.T_bnd_parts.values())


def lw_potential(w: WorldlineSpec, y, D: int | None = None, e: float = 1.0) -> np.ndarray:
    """Retarded potential ``A^mu`` (upper index) at ``y``."""
    D = _dim(w, D)
    fr = retarded_frame(w, y, order=2)
    st, r = fr.state, fr.r
    if D == 4:
        return e * st.u / r
    return FIELD_COEFF_6D * e * (st.a / r**2 + st.u * (1.0 + r * fr.a_k) / r**3)


def field_from_frame(fr: RetardedFrame, D: int, e: float = 1.0) -> np.ndarray:
    st = fr.state
    pieces = field_pieces(st.u, st.a, st.a1, fr.k, D, e)
    return sum(F * fr.r**s for s, F in pieces.items())


def lw_field(w: WorldlineSpec, y, D: int | None = None, e: float = 1.0) -> FieldTensor:
    """Field strength ``F^{ab}`` of the retarded potential at ``y``."""
    D = _dim(w, D)
    fr = retarded_frame(w, y, order=3)
    return FieldTensor(field_from_frame(fr, D, e), fr)


def _dim(w, D):
    D = w.dim if D is None else D
    _check_dim(D)
    if D != w.dim:
        raise ContractError(f"worldline dimension {w.dim} does not match D={D}")
    return D


def stress_bilinear(X, Y) -> np.ndarray:
    """Symmetrized stress built from two field tensors; ``stress_bilinear(F, F)`` is T."""
    D = X.shape[-1]
    eta = mk.metric(D)
    XY = X @ eta @ np.swapaxes(Y, -1, -2)
    s = mk.signs(D)
    contraction = np.einsum("...ab,a,b,...ab->...", X, s, s, Y)
    inv_eta = eta  # eta is its own inverse
    T = 0.5 * (XY + np.swapaxes(XY, -1, -2)) - 0.25 * inv_eta * contraction[..., None, None]
    return T / mk.sphere_area(D)


def stress(F, D: int | None = None) -> StressTensor:
    """Stress-energy ``T^{mn} = (F^{ml} F^n_l - eta^{mn} F.F / 4) / Omega_{D-2}``."""
    F = F.F if isinstance(F, FieldTensor) else np.asarray(F, dtype=float)
    if D is not None and F.shape[0] != D:
        raise ContractError(f"field tensor has dimension {F.shape[0]}, expected {D}")
    return StressTensor(stress_bilinear(F, F))


def radiative_stress(u, a, a1, k, r, D: int, e: float = 1.0) -> np.ndarray:
    """Closed-form radiative stress, proportional to ``k k``."""
    ak = mk.dot(a, k)
    if D == 4:
        vv = mk.dot(a, a) - ak * ak
        return e * e * np.outer(k, k) * vv / (mk.sphere_area(4) * r**2)
    a1k = mk.dot(a1, k)
    V = a1 + u * a1k + 3.0 * a * ak + 3.0 * u * ak * ak
    c = FIELD_COEFF_6D * e
    return c * c * np.outer(k, k) * mk.dot(V, V) / (mk.sphere_area(6) * r**4)


def stress_split(w: WorldlineSpec, y, D: int | None = None, e: float = 1.0) -> StressSplit:
    """Radiative part plus bound parts labelled by their power of ``r``.

    The radiative tensor comes from its closed form; each bound part is the
    sum of products of field pieces whose powers add up to the label.
    """
    D = _dim(w, D)
    fr = retarded_frame(w, y, order=3)
    st, r = fr.state, fr.r
    pieces = {s: F * r**s for s, F in field_pieces(st.u, st.a, st.a1, fr.k, D, e).items()}
    parts = {}
    for s in BOUND_POWERS[D]:
        T = np.zeros((D, D))
        for i, Fi in pieces.items():
            j = s - i
            if j in pieces:
                T = T + stress_bilinear(Fi, pieces[j])
        parts[s] = StressTensor(T)
    T_rad = radiative_stress(st.u, st.a, st.a1, fr.k, r, D, e)
    return StressSplit(StressTensor(T_rad), parts)


@dataclass(frozen=True)
class DivergenceResult:
    """Central-difference divergence of a field quantity at a point."""

    value: np.ndarray
    h: float
    r: float
    warning: bool

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.value))


def _central_divergence(fn, y, h):
    y = np.asarray(y, dtype=float)
    D = y.shape[0]
    out = None
    for mu in range(D):
        e = np.zeros(D)
        e[mu] = h
        d = (fn(y + e) - fn(y - e)) / (2.0 * h)
        out = d[mu] if out is None else out + d[mu]
    return out


def maxwell_residual(w: WorldlineSpec, y, D: int | None = None, h: float | None = None,
                     e: float = 1.0) -> DivergenceResult:
    """``d_mu F^{mu nu}`` by central differences; vanishes off the worldline.

    ``h`` defaults to ``1e-4 r``.  The result is flagged when ``h > r/10``.
    """
    D = _dim(w, D)
    r = retarded_frame(w, y, order=2).r
    h = 1e-4 * r if h is None else h
    val = _central_divergence(lambda x: lw_field(w, x, D, e).F, y, h)
    return DivergenceResult(val, h, r, h > 0.1 * r)


def stress_divergence(w: WorldlineSpec, y, D: int | None = None, h: float | None = None,
                      e: float = 1.0) -> DivergenceResult:
    """``d_mu T^{mu nu}`` by central differences (local energy-momentum conservation)."""
    D = _dim(w, D)
    r = retarded_frame(w, y, order=2).r
    h = 1e-4 * r if h is None else h
    val = _central_divergence(lambda x: stress(lw_field(w, x, D, e)).T, y, h)
    return DivergenceResult(val, h, r, h > 0.1 * r)
