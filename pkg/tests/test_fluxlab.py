import itertools
import math

import numpy as np
import pytest
from scipy.special import gammaln

from rrlab import balance as bl
from rrlab import fluxlab as fl
from rrlab import minkowski as mk
from rrlab.errors import ConditioningError, ContractError, PrecisionError
from rrlab.worldline import WorldlineSpec

HYP6 = WorldlineSpec.parse("hyperbolic:g=0.2", 6)
CIRC6 = WorldlineSpec.parse("circular:omega=0.8,R=0.5", 6)
CIRC4 = WorldlineSpec.parse("circular:omega=1.0,R=0.5", 4)


def monomial_integral(powers):
    """Exact integral of prod n_i^p_i over the unit sphere."""
    if any(p % 2 for p in powers):
        return 0.0
    b = [(p + 1) / 2.0 for p in powers]
    return 2.0 * math.exp(sum(gammaln(x) for x in b) - gammaln(sum(b)))


@pytest.mark.parametrize("dim_sphere,degree", [(2, 6), (2, 9), (4, 8), (4, 10)])
def test_quadrature_exact_for_polynomials(dim_sphere, degree):
    rule = fl.sphere_quadrature(dim_sphere, degree)
    assert abs(rule.weights.sum() - mk.sphere_area(dim_sphere + 2)) <= 1e-12
    assert np.max(np.abs(rule.weights @ rule.n)) <= 1e-12
    assert np.allclose(np.linalg.norm(rule.n, axis=1), 1.0, atol=1e-14)
    nvar = dim_sphere + 1
    for total in range(degree + 1):
        for powers in itertools.product(range(total + 1), repeat=nvar):
            if sum(powers) != total:
                continue
            got = rule.weights @ np.prod(rule.n ** np.array(powers), axis=1)
            assert got == pytest.approx(monomial_integral(powers), abs=1e-12)


def test_moments_boosted(rng):
    rule = fl.sphere_quadrature(4, 8)
    v = rng.normal(size=5) * 0.6
    u = np.concatenate([[math.sqrt(1 + v @ v)], v])
    for order in range(5):
        got = fl.angular_moments(rule, u, order)
        ref = fl.moment_closed_form(u, order, 4)
        assert np.max(np.abs(got - ref)) <= 1e-12 * max(1.0, np.max(np.abs(ref)))
    M4 = fl.angular_moments(rule, u, 4)
    for perm in itertools.permutations(range(4)):
        assert np.array_equal(fl.moment_closed_form(u, 4, 4),
                              np.transpose(fl.moment_closed_form(u, 4, 4), perm))
        assert np.allclose(M4, np.transpose(M4, perm), atol=1e-13)


def test_reference_moment_constants():
    u = mk.basis(6, 0)
    rule = fl.sphere_quadrature(4, 8)
    assert fl.angular_moments(rule, u, 0) == pytest.approx(8 * math.pi**2 / 3, rel=1e-14)
    M2 = fl.angular_moments(rule, u, 2)
    assert M2[1, 1] == pytest.approx(8 * math.pi**2 / 15, rel=1e-13)
    M4 = fl.angular_moments(rule, u, 4)
    assert M4[1, 1, 2, 2] == pytest.approx(8 * math.pi**2 / 105, rel=1e-13)


def test_insufficient_degree():
    with pytest.raises(PrecisionError):
        fl.angular_moments(fl.sphere_quadrature(4, 3), mk.basis(6, 0), 4)
    with pytest.raises(ContractError):
        fl.sphere_quadrature(3, 4)


def test_pairwise_sum_deterministic(rng):
    x = rng.normal(size=(1001, 3))
    a = fl.pairwise_sum(x)
    b = fl.pairwise_sum(x.copy(order="F"))
    assert np.array_equal(a, b)
    assert np.allclose(a, [math.fsum(x[:, i]) for i in range(3)], rtol=1e-13, atol=1e-13)


@pytest.mark.parametrize("w", [HYP6, CIRC6, CIRC4], ids=["hyp6", "circ6", "circ4"])
def test_backends_agree(w, backend):
    st = w.state(0.4, 3)
    p, M = fl.tube_rate_coefficients(st, w.dim, 1.0, backend=backend)
    p_ref, M_ref = fl.tube_rate_coefficients(st, w.dim, 1.0, backend="python")
    assert np.allclose(p, p_ref, rtol=1e-12, atol=1e-14)
    assert np.allclose(M, M_ref, rtol=1e-12, atol=1e-14)


@pytest.mark.parametrize("w", [HYP6, CIRC6, CIRC4], ids=["hyp6", "circ6", "circ4"])
def test_positive_powers_cancel(w):
    p, M = fl.tube_rate_coefficients(w.state(0.4, 3), w.dim)
    scale = np.max(np.abs(p))
    assert np.max(np.abs(p[fl.POWERS > 0])) <= 1e-13 * scale
    assert np.max(np.abs(M[fl.POWERS > 0])) <= 1e-13 * np.max(np.abs(M))


@pytest.mark.parametrize("w", [HYP6, CIRC6, CIRC4], ids=["hyp6", "circ6", "circ4"])
def test_rate_coefficients_match_closed_forms(w):
    """The r^0 coefficient is the radiated rate; the bound ones differentiate the bracket."""
    D = w.dim
    tau, h, r = 0.4, 1e-4, 0.3
    st = w.state(tau, 3)
    p, M = fl.tube_rate_coefficients(st, D)
    P = bl.radiated_rate_closed(st, D)
    assert np.allclose(fl.select_part(p, r, "rad"), P, rtol=1e-12, atol=1e-14)
    Mrad = bl.radiative_angular_rate_closed(st, D)
    assert np.allclose(fl.select_part(M, r, "rad"), Mrad, rtol=1e-12, atol=1e-14)
    dbr = (fl.bound_bracket(w.state(tau + h, 2), r, D) - fl.bound_bracket(w.state(tau - h, 2), r, D)) / (2 * h)
    assert np.allclose(fl.select_part(p, r, "bnd"), dbr, rtol=1e-7, atol=1e-9)


def test_rest_charge_fluxes_vanish():
    for D in (4, 6):
        w = WorldlineSpec("rest", {}, D)
        for part in ("rad", "bnd"):
            res = fl.tube_angular_flux_window(w, 0.0, 1.0, 0.5, part)
            assert np.max(np.abs(res.p)) <= 1e-12
            assert np.max(np.abs(res.M)) <= 1e-12
            assert np.isfinite(res.est_error)


def test_window_additivity_and_parts():
    w, r = CIRC4, 0.2
    parts = {}
    for part in fl.PARTS:
        f13 = fl.tube_angular_flux_window(w, 0.0, 1.0, r, part)
        f12 = fl.tube_angular_flux_window(w, 0.0, 0.4, r, part)
        f23 = fl.tube_angular_flux_window(w, 0.4, 1.0, r, part)
        scale = np.max(np.abs(f13.p))
        assert np.max(np.abs(f12.p + f23.p - f13.p)) <= 1e-10 * scale
        assert np.max(np.abs(f12.M + f23.M - f13.M)) <= 1e-10 * np.max(np.abs(f13.M))
        parts[part] = f13
    tot = parts["total"]
    assert np.max(np.abs(parts["rad"].p + parts["bnd"].p - tot.p)) <= 1e-10 * np.max(np.abs(tot.p))


def test_radiative_flux_r_independent_and_total_consistent():
    w = CIRC4
    rad1 = fl.tube_flux_window(w, 0.0, 1.0, 0.1, "rad").p
    rad2 = fl.tube_flux_window(w, 0.0, 1.0, 0.2, "rad").p
    assert np.max(np.abs(rad1 - rad2)) <= 1e-8 * np.max(np.abs(rad1))
    # total minus the closed-form bound difference is independent of r too
    for r in (0.1, 0.2):
        tot = fl.tube_flux_window(w, 0.0, 1.0, r, "total").p
        bnd, _ = fl.bound_window_closed(w, 0.0, 1.0, r)
        assert np.max(np.abs(tot - bnd - rad1)) <= 1e-8 * np.max(np.abs(rad1))


def test_precision_error_reports_estimate():
    with pytest.raises(PrecisionError) as info:
        fl.tube_flux_window(CIRC4, 0.0, 50.0, 0.1, "rad", epsabs=0.0, epsrel=1e-17)
    assert info.value.estimate is not None


def test_window_preconditions():
    with pytest.raises(ContractError):
        fl.tube_flux_window(CIRC4, 1.0, 0.0, 0.1)
    with pytest.raises(ContractError):
        fl.tube_flux_window(CIRC4, 0.0, 1.0, -0.1)
    with pytest.raises(ContractError):
        fl.tube_flux_window(CIRC4, 0.0, 1.0, 0.1, part="spin")


def test_bound_fit_rest_6d():
    fit = fl.bound_coefficient_fit(WorldlineSpec("rest", {}, 6), 0.0,
                                   [0.01, 0.02, 0.05, 0.1, 0.2])
    c = bl.c6(1.0)
    assert np.allclose(fit.coefficients[-3], 1.5 * c * mk.basis(6, 0), rtol=1e-10, atol=1e-14)
    assert np.max(np.abs(fit.coefficients[-2])) == 0.0
    assert np.max(np.abs(fit.coefficients[-1])) == 0.0
    assert fit.residual <= 1e-6


def test_bound_fit_hyperbolic_6d():
    tau = 0.3
    fit = fl.bound_coefficient_fit(HYP6, tau, [0.005, 0.01, 0.02, 0.05])
    a = HYP6.state(tau, 2).a
    c2 = fit.coefficients[-2]
    c = bl.c6(1.0)
    assert abs(np.linalg.norm(c2) - 2.4 * c * np.linalg.norm(a)) <= 1e-4 * 2.4 * c * np.linalg.norm(a)
    assert np.allclose(np.cross(c2[:3], a[:3]), 0.0, atol=1e-12)
    assert fit.scalars["aa_u"] == pytest.approx(2.0 * c, rel=1e-4)


def test_bound_fit_4d_cross_checked_with_window_flux():
    tau = 0.2
    fit = fl.bound_coefficient_fit(CIRC4, tau, [0.01, 0.02, 0.05, 0.1])
    p, _ = fl.tube_rate_coefficients(CIRC4.state(tau, 3), 4)
    assert np.allclose(fit.rate_coefficients[-1], p[list(fl.POWERS).index(-1)], rtol=1e-8)
    h = 1e-3
    win = fl.tube_flux_window(CIRC4, tau - h, tau + h, 0.05, "bnd").p / (2 * h)
    assert np.allclose(fit.rate_coefficients[-1] / 0.05, win, rtol=1e-5)
    assert fit.scalars["u"] == pytest.approx(0.5, rel=1e-10)


def test_bound_fit_preconditions():
    w = WorldlineSpec("rest", {}, 6)
    with pytest.raises(ContractError):
        fl.bound_coefficient_fit(w, 0.0, [0.1, 0.2, 0.3])
    with pytest.raises(ContractError):
        fl.bound_coefficient_fit(w, 0.0, [0.1, 0.2, 0.3, 0.5])
    with pytest.raises(ConditioningError):
        fl.bound_coefficient_fit(w, 0.0, [1e-6, 1e-5, 0.5, 1.0])
