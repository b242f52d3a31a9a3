"""Angular quadrature on retarded spheres and world-tube flux integration.

A Bhabha tube of radius ``r`` is the union of retarded spheres
``S(z(u), r) = {z(u) + r k}``, ``k = u + n`` with ``n`` a unit vector orthogonal
to ``u(u)``.  Its outward surface element is
``dsigma_m = [-u_m + (1 + r a_k) k_m] r^(D-2) dOmega du`` and the fluxes of
energy-momentum and angular momentum through a segment ``u1 < u < u2`` are

    p^n    = int dsigma_m T^{mn}
    M^{mn} = int dsigma_a (y^m T^{an} - y^n T^{am}),   y = z + r k.

At fixed retarded time the integrand is a Laurent polynomial in ``r``.  The
kernels return its coefficients power by power; the ``r^0`` coefficient is the
radiative part and the negative powers form the bound part.  Positive powers
cancel after angular integration and are kept only in ``part="total"``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import ceil

import numpy as np
from scipy.integrate import quad, quad_vec
from scipy.special import roots_jacobi, roots_legendre

from . import _backend
from . import minkowski as mk
from .balance import radiated_rate_closed, radiative_angular_rate_closed
from .errors import ConditioningError, ContractError, PrecisionError
from .fields import FIELD_COEFF_6D, field_pieces, stress_bilinear
from .worldline import KinematicState, WorldlineSpec

POWERS = np.arange(_backend._tube_py.PMIN, _backend._tube_py.PMIN + _backend._tube_py.NPOW)
PARTS = ("rad", "bnd", "total")
DEFAULT_DEGREE = 10
BOUND_FIT_POWERS = {4: (-1,), 6: (-3, -2, -1)}


@dataclass(frozen=True)
class SphereQuadrature:
    """Product rule on the unit sphere ``S^dim_sphere``.

    Angles follow ``n = (cos(phi) s1 s2 s3, sin(phi) s1 s2 s3, c1 s2 s3, c2 s3, c3)``
    on ``S^4`` (``si = sin(theta_i)``, ``ci = cos(theta_i)``) and
    ``(cos(phi) s1, sin(phi) s1, c1)`` on ``S^2``.  Each ``cos(theta_i)``
    gets a Gauss-Jacobi rule matched to the ``sin^(i) theta_i`` factor of the
    solid-angle element and ``phi`` the trapezoid rule, so every polynomial in
    ``n`` of degree ``<= degree`` is integrated exactly.
    """

    dim_sphere: int
    angles: np.ndarray
    n: np.ndarray
    weights: np.ndarray
    degree: int

    @property
    def size(self) -> int:
        return self.weights.shape[0]


@lru_cache(maxsize=32)
def sphere_quadrature(dim_sphere: int, degree: int = DEFAULT_DEGREE) -> SphereQuadrature:
    if dim_sphere not in (2, 4):
        raise ContractError(f"dim_sphere must be 2 or 4, got {dim_sphere}")
    if degree < 0:
        raise ContractError("degree must be non-negative")
    npts = max(1, ceil((degree + 1) / 2))
    nphi = degree + 1
    phi = 2.0 * np.pi * np.arange(nphi) / nphi
    wphi = np.full(nphi, 2.0 * np.pi / nphi)
    rules = [roots_legendre(npts)]
    if dim_sphere == 4:
        rules += [roots_jacobi(npts, 0.5, 0.5), roots_jacobi(npts, 1.0, 1.0)]
    grids = np.meshgrid(*[x for x, _ in rules], phi, indexing="ij")
    wgrids = np.meshgrid(*[w for _, w in rules], wphi, indexing="ij")
    cos_t = [g.ravel() for g in grids[:-1]]
    ph = grids[-1].ravel()
    weights = np.prod([g.ravel() for g in wgrids], axis=0)
    sin_t = [np.sqrt(np.clip(1.0 - c * c, 0.0, None)) for c in cos_t]
    if dim_sphere == 2:
        (c1,), (s1,) = cos_t, sin_t
        n = np.stack([np.cos(ph) * s1, np.sin(ph) * s1, c1], axis=1)
    else:
        c1, c2, c3 = cos_t
        s1, s2, s3 = sin_t
        n = np.stack([np.cos(ph) * s1 * s2 * s3, np.sin(ph) * s1 * s2 * s3,
                      c1 * s2 * s3, c2 * s3, c3], axis=1)
    angles = np.stack([np.arccos(c) for c in cos_t] + [ph], axis=1)
    for arr in (angles, n, weights):
        arr.setflags(write=False)
    return SphereQuadrature(dim_sphere, angles, n, weights, degree)


def pairwise_sum(x) -> np.ndarray:
    """Sum over axis 0 by a fixed binary tree (order independent of chunking)."""
    x = np.asarray(x)
    while x.shape[0] > 1:
        if x.shape[0] % 2:
            x = np.concatenate([x, np.zeros((1,) + x.shape[1:])])
        x = x[0::2] + x[1::2]
    return x[0]


def lab_directions(quad_rule: SphereQuadrature, u):
    """Null directions ``k = u + n`` and unit normals ``n`` in the lab frame."""
    L = mk.boost_from_rest(u).matrix
    rest = np.concatenate([np.zeros((quad_rule.size, 1)), quad_rule.n], axis=1)
    n_lab = rest @ L.T
    return n_lab + np.asarray(u, float), n_lab


def angular_moments(quad_rule: SphereQuadrature, u, order: int) -> np.ndarray:
    """``int dOmega n^a1 ... n^a_order`` for ``n`` orthogonal to ``u``, as a dense tensor."""
    if not 0 <= order <= 4:
        raise ContractError("order must be in 0..4")
    if quad_rule.degree < order:
        raise PrecisionError(f"quadrature degree {quad_rule.degree} < moment order {order}")
    _, n = lab_directions(quad_rule, u)
    w = quad_rule.weights
    if order == 0:
        return np.asarray(pairwise_sum(w))
    letters = "abcd"[:order]
    spec = "n," + ",".join(f"n{c}" for c in letters) + "->n" + letters
    terms = np.einsum(spec, w, *([n] * order))
    return pairwise_sum(terms)


def moment_closed_form(u, order: int, dim_sphere: int) -> np.ndarray:
    """Symmetrized-projector form of the angular moments on ``S^d``.

    Odd moments vanish; even ones are ``Omega_d`` times symmetrized products of
    ``eta + u u`` divided by ``(d+1)`` (order 2) or ``(d+1)(d+3)`` (order 4).
    """
    u = np.asarray(u, float)
    D = u.shape[0]
    area = mk.sphere_area(dim_sphere + 2)
    Pm = mk.metric(D) + np.outer(u, u)
    if order == 0:
        return np.asarray(area)
    if order % 2:
        return np.zeros((D,) * order)
    if order == 2:
        return area / (dim_sphere + 1) * Pm
    terms = np.sort(np.stack([np.einsum("ab,cd->abcd", Pm, Pm),
                              np.einsum("ac,bd->abcd", Pm, Pm),
                              np.einsum("ad,bc->abcd", Pm, Pm)]), axis=0)
    # summing the sorted terms makes the result exactly symmetric under index permutation
    sym = terms[0] + terms[1] + terms[2]
    return area / ((dim_sphere + 1) * (dim_sphere + 3)) * sym


# ---------------------------------------------------------------------------
# tube integrands


def tube_rate_coefficients(st: KinematicState, D: int, e: float = 1.0,
                           degree: int = DEFAULT_DEGREE, backend: str | None = None):
    """Per-unit-retarded-time flux coefficients of ``r^s`` for ``s`` in :data:`POWERS`.

    Returns ``(p, M)`` of shapes ``(len(POWERS), D)`` and ``(len(POWERS), D, D)``.
    """
    if st.a1 is None:
        raise ContractError("tube integrand needs the state to order 3 (a1)")
    rule = sphere_quadrature(D - 2, degree)
    k, _ = lab_directions(rule, st.u)
    kernel = _backend.get(backend)
    p_nodes, M_nodes = kernel(np.ascontiguousarray(k), rule.weights,
                              np.ascontiguousarray(st.z), np.ascontiguousarray(st.u),
                              np.ascontiguousarray(st.a), np.ascontiguousarray(st.a1),
                              int(D), float(e))
    return pairwise_sum(p_nodes), pairwise_sum(M_nodes)


def select_part(coefs, r: float, part: str):
    """Evaluate grouped coefficients at radius ``r`` keeping the requested part."""
    if part not in PARTS:
        raise ContractError(f"part must be one of {PARTS}, got {part!r}")
    if part == "rad":
        mask = POWERS == 0
    elif part == "bnd":
        mask = POWERS < 0
    else:
        mask = np.ones_like(POWERS, dtype=bool)
    weights = np.where(mask, float(r) ** POWERS.astype(float), 0.0)
    return np.tensordot(weights, coefs, axes=(0, 0))


def tube_rate(w: WorldlineSpec, tau: float, r: float, part: str = "total",
              D: int | None = None, e: float = 1.0, degree: int = DEFAULT_DEGREE,
              backend: str | None = None):
    """Instantaneous fluxes ``(dp/du, dM/du)`` through the tube at retarded time ``tau``."""
    D = w.dim if D is None else D
    p, M = tube_rate_coefficients(w.state(tau, 3), D, e, degree, backend)
    return select_part(p, r, part), select_part(M, r, part)


@dataclass(frozen=True)
class FluxWindowResult:
    p: np.ndarray
    M: np.ndarray | None
    u1: float
    u2: float
    r: float
    part: str
    est_error: float
    evaluations: int = field(default=0, compare=False)


def _window(w, u1, u2, r, part, D, e, degree, epsabs, epsrel, backend, with_M):
    D = w.dim if D is None else D
    if not u1 < u2:
        raise ContractError(f"need u1 < u2, got {u1}, {u2}")
    if r <= 0:
        raise ContractError("tube radius must be positive")
    if part not in PARTS:
        raise ContractError(f"part must be one of {PARTS}, got {part!r}")

    def integrand(t):
        p, M = tube_rate_coefficients(w.state(t, 3), D, e, degree, backend)
        pv = select_part(p, r, part)
        if not with_M:
            return pv
        return np.concatenate([pv, mk.upper_triangle(select_part(M, r, part))])

    val, err, info = quad_vec(integrand, u1, u2, epsabs=epsabs, epsrel=epsrel,
                              norm="max", limit=2000, full_output=True)
    if not info.success:
        raise PrecisionError(f"tube flux quadrature did not converge: {info.message}",
                             estimate=val, error=err)
    p = val[:D]
    M = mk.from_upper_triangle(val[D:], D) if with_M else None
    return FluxWindowResult(p, M, u1, u2, r, part, float(err), int(info.neval))


def tube_flux_window(w: WorldlineSpec, u1: float, u2: float, r: float, part: str = "total",
                     D: int | None = None, e: float = 1.0, degree: int = DEFAULT_DEGREE,
                     epsabs: float = 1e-10, epsrel: float = 1e-9,
                     backend: str | None = None) -> FluxWindowResult:
    """Energy-momentum through the tube segment ``u1 < u < u2`` (adaptive Gauss-Kronrod in u)."""
    return _window(w, u1, u2, r, part, D, e, degree, epsabs, epsrel, backend, False)


def tube_angular_flux_window(w: WorldlineSpec, u1: float, u2: float, r: float,
                             part: str = "total", D: int | None = None, e: float = 1.0,
                             degree: int = DEFAULT_DEGREE, epsabs: float = 1e-10,
                             epsrel: float = 1e-9, backend: str | None = None) -> FluxWindowResult:
    """Angular momentum (and energy-momentum) through the tube segment."""
    return _window(w, u1, u2, r, part, D, e, degree, epsabs, epsrel, backend, True)


# ---------------------------------------------------------------------------
# closed forms of the bound parts


def bound_bracket(st: KinematicState, r: float, D: int, e: float = 1.0) -> np.ndarray:
    """Bound momentum whose difference between window ends is the bound tube flux.

    6D: ``(e^2/4pi^2) [3/2 u/r^3 + 12/5 a/r^2 + 2 (a.a) u/r]``; 4D: ``(e^2/2) u/r``.
    """
    if D == 4:
        return 0.5 * e * e * st.u / r
    c = e * e / (4.0 * np.pi**2)
    aa = mk.dot(st.a, st.a)
    return c * (1.5 * st.u / r**3 + 2.4 * st.a / r**2 + 2.0 * aa * st.u / r)


def bound_angular_bracket(st: KinematicState, r: float, D: int, e: float = 1.0) -> np.ndarray:
    """Bound angular momentum ``z ^ P_bnd`` plus, in 6D, ``(e^2/4pi^2)(12/5) u^a / r``."""
    M = mk.wedge(st.z, bound_bracket(st, r, D, e))
    if D == 6:
        M = M + e * e / (4.0 * np.pi**2) * 2.4 * mk.wedge(st.u, st.a) / r
    return M


def bound_window_closed(w: WorldlineSpec, u1, u2, r, D=None, e=1.0):
    D = w.dim if D is None else D
    s1, s2 = w.state(u1, 2), w.state(u2, 2)
    return (bound_bracket(s2, r, D, e) - bound_bracket(s1, r, D, e),
            bound_angular_bracket(s2, r, D, e) - bound_angular_bracket(s1, r, D, e))


def radiative_window_closed(w: WorldlineSpec, u1, u2, D=None, e=1.0, epsrel=1e-12):
    """Independent adaptive integral (QUADPACK, component by component) of the
    closed-form radiative rates over ``[u1, u2]``."""
    D = w.dim if D is None else D

    def comp(fn, idx):
        return quad(lambda t: fn(w.state(t, 3), D, e)[idx], u1, u2,
                    epsabs=0.0, epsrel=epsrel, limit=200)[0]

    p = np.array([comp(radiated_rate_closed, i) for i in range(D)])
    iu = list(zip(*np.triu_indices(D, 1)))
    Mv = [comp(radiative_angular_rate_closed, ij) for ij in iu]
    return p, mk.from_upper_triangle(Mv, D)


# ---------------------------------------------------------------------------
# divergence extraction


@dataclass(frozen=True)
class PowerFit:
    """Bound momentum ``sum_s c_s r^s`` at one instant.

    ``coefficients`` are the vector coefficients of the bound momentum itself;
    ``rate_coefficients`` those of its retarded-time derivative as fitted from
    tube fluxes, and ``scalars`` the scalar multipliers of each kinematic
    structure (``u``, ``a``, ``(a.a) u``).
    """

    coefficients: dict
    rate_coefficients: dict
    scalars: dict
    residual: float
    radii: tuple


def full_field_rate(st: KinematicState, r: float, D: int, e: float = 1.0,
                    degree: int = DEFAULT_DEGREE) -> np.ndarray:
    """Energy-momentum flux rate at radius ``r`` from the full field (no power grouping)."""
    rule = sphere_quadrature(D - 2, degree)
    k, _ = lab_directions(rule, st.u)
    F = sum(Fs * r**s for s, Fs in field_pieces(st.u, st.a, st.a1, k, D, e).items())
    T = stress_bilinear(F, F)
    ak = mk.bdot(st.a, k)
    sigma = r ** (D - 2) * ((k - st.u) + r * ak[:, None] * k)
    flux = np.einsum("nm,nmv->nv", mk.lower(sigma), T)
    return pairwise_sum(rule.weights[:, None] * flux)


def coulomb_content(r: float, D: int, e: float = 1.0) -> float:
    """Static field energy outside radius ``r`` around a charge at rest."""
    w = WorldlineSpec("rest", {}, D)
    from .fields import lw_field, stress

    def density(rho):
        y = np.zeros(D)
        y[1] = rho
        return mk.sphere_area(D) * rho ** (D - 2) * stress(lw_field(w, y, D, e)).T[0, 0]

    val, _ = quad(density, r, np.inf, epsabs=0.0, epsrel=1e-13, limit=200)
    return val


def bound_coefficient_fit(w: WorldlineSpec, tau: float, r_list, D: int | None = None,
                          e: float = 1.0, degree: int = DEFAULT_DEGREE,
                          fit_tol: float = 1e-8) -> PowerFit:
    """Extract the divergent bound-momentum coefficients at ``tau``.

    Tube flux rates from the full field at each radius are fitted to
    ``sum_s rho_s r^s`` (radiative ``r^0`` term included).  Each ``rho_s`` is
    the retarded-time derivative of the bound coefficient ``c_s``; the scalar
    multipliers of ``a`` and ``(a.a) u`` in ``c_s`` are recovered by
    matching derivatives, and that of ``u`` (invisible in a rate) from the
    static field energy outside ``r``.
    """
    D = w.dim if D is None else D
    radii = np.unique(np.asarray(r_list, dtype=float))
    if radii.size < 4 or radii.max() / radii.min() < 10.0 or radii.min() <= 0:
        raise ContractError("need >= 4 distinct positive radii spanning a decade")
    st = w.state(tau, 4)
    powers = BOUND_FIT_POWERS[D] + (0,)
    x = radii / radii.max()
    A = np.stack([x ** s for s in powers], axis=1)
    if np.linalg.cond(A) > 1e12:
        raise ConditioningError(f"fit matrix condition number {np.linalg.cond(A):.3g}")
    data = np.stack([full_field_rate(st, r, D, e, degree) for r in radii])
    sol, *_ = np.linalg.lstsq(A, data, rcond=None)
    # floor: the Coulomb-like bound momentum at the smallest radius
    floor = e * e * radii.min() ** (3 - D)
    scale = max(float(np.max(np.abs(data))), floor)
    residual = float(np.max(np.abs(A @ sol - data))) / scale
    if residual > fit_tol:
        raise PrecisionError(f"bound fit residual {residual:.3g} exceeds {fit_tol:.3g}")
    rmax = radii.max()
    rate = {s: sol[i] * rmax ** (-s) for i, s in enumerate(powers)}

    aa = mk.dot(st.a, st.a)
    daa = 2.0 * mk.dot(st.a, st.a1)
    # structure name -> (power, vector at tau, its tau-derivative)
    if D == 6:
        structures = {
            "u": (-3, st.u, st.a),
            "a": (-2, st.a, st.a1),
            "aa_u": (-1, aa * st.u, daa * st.u + aa * st.a),
        }
    else:
        structures = {"u": (-1, st.u, st.a)}
    scalars = {}
    tiny = 1e-12 * max(1.0, float(np.max(np.abs(st.u))))
    for s in BOUND_FIT_POWERS[D]:
        names = [n for n, v in structures.items() if v[0] == s and n != "u"]
        cols = [structures[n][2] for n in names
                if np.max(np.abs(structures[n][2])) > tiny]
        used = [n for n in names if np.max(np.abs(structures[n][2])) > tiny]
        for n in names:
            scalars[n] = 0.0
        if cols:
            coef, *_ = np.linalg.lstsq(np.stack(cols, axis=1), rate[s], rcond=None)
            scalars.update(dict(zip(used, coef)))
    # static energy outside radius 1; at radius r it scales as r^(3-D)
    scalars["u"] = coulomb_content(1.0, D, e)
    coefficients = {s: np.zeros(D) for s in BOUND_FIT_POWERS[D]}
    for n, (s, vec, _) in structures.items():
        coefficients[s] = coefficients[s] + scalars[n] * vec
    return PowerFit(coefficients, {s: rate[s] for s in BOUND_FIT_POWERS[D]}, scalars,
                    residual, tuple(radii.tolist()))
