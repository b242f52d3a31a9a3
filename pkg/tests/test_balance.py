import math

import numpy as np
import pytest

from rrlab import balance as bl
from rrlab import minkowski as mk
from rrlab.errors import ContractError, DomainError
from rrlab.worldline import KinematicState, WorldlineSpec
from tests.conftest import random_state

PRM6 = bl.ParticleParams(1.0, 0.1, 1.0)
PRM4 = bl.ParticleParams(1.3, 0.0, 0.8)
WORLD6 = ["hyperbolic:g=0.3", "circular:omega=0.8,R=0.5",
          "polynomial:c1_1=0.3,c3_0=0.2,c4_2=0.04,tau_max=5"]


def _state(rng, D, order=5):
    return KinematicState.from_derivatives(0.0, random_state(rng, D, order))


def test_params_validation():
    with pytest.raises(DomainError):
        bl.ParticleParams(0.0)
    with pytest.raises(DomainError):
        bl.ParticleParams(1.0, float("nan"))
    bl.ParticleParams(1.0, -2.0, 0.0)


def test_momentum_4d_properties(rng):
    st = _state(rng, 4, 3)
    mom = bl.momentum_4d(st, PRM4)
    assert -mk.dot(mom.p, st.u) == pytest.approx(PRM4.m, rel=1e-14)
    assert np.allclose(mk.wedge(st.u, mom.p),
                       -(2 / 3) * PRM4.e**2 * mk.wedge(st.u, st.a), atol=1e-12)
    rest = WorldlineSpec("rest", {}, 4).state(0.0, 3)
    assert np.array_equal(bl.momentum_4d(rest, PRM4).p, PRM4.m * rest.u)


def test_4d_rest_mass_constant_along_worldline():
    w = WorldlineSpec.parse("circular:omega=1.0,R=0.4", 4)
    vals = [mk.dot(bl.momentum_4d(w.state(t, 2), PRM4).p, w.state(t, 2).u)
            for t in np.linspace(0, 10, 100)]
    assert np.ptp(vals) <= 1e-12


def test_momentum_6d_transcription_oracle():
    g, m, mu, e = 0.3, 1.0, 0.1, 1.0
    tau = 0.7
    st = WorldlineSpec.parse(f"hyperbolic:g={g}", 6).state(tau, 4)
    ch, sh = math.cosh(g * tau), math.sinh(g * tau)
    u = np.array([ch, sh, 0, 0, 0, 0])
    a = g * np.array([sh, ch, 0, 0, 0, 0])
    a1 = g * g * u
    a2 = g * g * a
    aa, daa = g * g, 0.0
    c = e * e / (4 * math.pi**2)
    p = m * u
    p = p + mu * (-a1 + 1.5 * aa * u)
    p = p + c * (4 / 5 * a2 - 8 / 5 * daa * u - 64 / 35 * aa * a)
    mom = bl.momentum_6d(st, bl.ParticleParams(m, mu, e))
    assert np.allclose(mom.p, p, rtol=1e-12, atol=1e-14)


def test_momentum_6d_zero_acceleration():
    st = WorldlineSpec("rest", {}, 6).state(1.0, 4)
    mom = bl.momentum_6d(st, PRM6)
    assert np.array_equal(mom.p, PRM6.m * st.u)
    assert not np.any(mom.s)


def test_momentum_6d_requires_order():
    st = WorldlineSpec("rest", {}, 6).state(1.0, 2)
    with pytest.raises(ContractError):
        bl.momentum_6d(st, PRM6)


def test_rest_mass_and_spin_structure_random(rng):
    for _ in range(20):
        st = _state(rng, 6)
        mom = bl.momentum_6d(st, PRM6)
        assert bl.rest_mass(st, PRM6) == pytest.approx(bl.rest_mass_closed(st, PRM6), rel=1e-12)
        assert np.allclose(mom.s, mk.wedge(st.u, mom.pi), rtol=1e-12, atol=1e-15)
        c = bl.c6(PRM6.e)
        ref = mk.wedge(st.u, PRM6.mu * st.a - 0.8 * c * st.a1)
        assert np.allclose(mom.s, ref, rtol=1e-12, atol=1e-15)


def test_momentum_rate_matches_numerical_derivative():
    for text in WORLD6:
        w = WorldlineSpec.parse(text, 6)
        tau, h = 0.4, 1e-3
        st = w.state(tau, 5)
        stencil = [(-2, 1 / 12), (-1, -2 / 3), (1, 2 / 3), (2, -1 / 12)]
        num = sum(c * bl.momentum_6d(w.state(tau + k * h, 4), PRM6).p for k, c in stencil) / h
        ana = bl.momentum_rate(st, PRM6)
        assert np.allclose(num, ana, rtol=1e-8, atol=1e-10)


def test_spin_magnitude_orthogonal_case():
    # hyperbolic motion has a.a1 = 0
    st = WorldlineSpec.parse("hyperbolic:g=0.4", 6).state(0.2, 4)
    sm = bl.spin_magnitude(st, PRM6)
    aa = mk.dot(st.a, st.a)
    ref = PRM6.mu**2 * aa + PRM6.e**4 / (25 * math.pi**4) * (mk.dot(st.a1, st.a1) + aa**2)
    assert sm.value == pytest.approx(ref, rel=1e-12)
    assert sm.printed == pytest.approx(sm.expansion, rel=1e-14)


def test_spin_magnitude_cross_term_sign(rng):
    st = _state(rng, 6)
    assert abs(mk.dot(st.a, st.a1)) > 1e-3
    sm = bl.spin_magnitude(st, PRM6)
    assert abs(sm.value - sm.expansion) <= 1e-12 * max(1.0, abs(sm.value))
    assert abs(sm.value - sm.printed) > 1e-6


def test_radiated_rates():
    st = WorldlineSpec("rest", {}, 6).state(0.0, 3)
    assert not np.any(bl.radiated_rate_closed(st))
    g = 0.7
    st = WorldlineSpec.parse(f"hyperbolic:g={g}", 4).state(0.5, 3)
    assert np.allclose(bl.radiated_rate_closed(st, 4, 1.5), (2 / 3) * 2.25 * g * g * st.u,
                       rtol=1e-12)


def test_uniform_motion_balances():
    for D, prm in ((4, PRM4), (6, PRM6)):
        rep = bl.balance_residual(WorldlineSpec("rest", {}, D), 0.3, prm, None)
        assert rep.dp_norm <= 1e-14 and rep.dM_norm <= 1e-14


@pytest.mark.parametrize("text", WORLD6)
def test_angular_residual_vanishes_6d(text):
    w = WorldlineSpec.parse(text, 6)
    for tau in np.linspace(-1, 1, 7):
        rep = bl.balance_residual(w, tau, PRM6, None)
        assert rep.dM_norm <= 1e-10 * rep.dM_scale


def test_angular_residual_detects_wrong_momentum(rng):
    """Dropping a self-field term from p breaks the angular balance."""
    st = _state(rng, 6)
    c = bl.c6(1.0)
    mom = bl.momentum_6d(st, PRM6)
    bad_p = mom.p + c * (64 / 35) * mk.dot(st.a, st.a) * st.a
    res = (mk.wedge(st.u, bad_p + bl.pi_rate(st, PRM6)
                    + c * (64 / 35) * mk.dot(st.a, st.a) * st.a)
           + mk.wedge(st.a, mom.pi + 0.8 * c * st.a1))
    assert np.linalg.norm(res) > 1e-4


def test_closing_force_balances_hyperbolic():
    w = WorldlineSpec.parse("hyperbolic:g=0.3", 6)
    for tau in np.linspace(0, 2, 5):
        rep = bl.balance_residual(w, tau, PRM6, lambda s: bl.closing_force(s, PRM6))
        assert rep.dp_norm <= 1e-10 * rep.dp_scale
        assert rep.passed


def test_closing_force_is_orthogonal_to_u():
    for text in WORLD6:
        st = WorldlineSpec.parse(text, 6).state(0.3, 5)
        F = bl.closing_force(st, PRM6)
        assert abs(mk.dot(F, st.u)) <= 1e-12 * np.max(np.abs(F))


def test_structureless_check():
    assert not np.any(bl.structureless_check(WorldlineSpec("rest", {}, 6), 0.0))
    assert not np.any(bl.structureless_check(WorldlineSpec.parse("hyperbolic:g=0", 6), 0.0))
    norms = []
    gs = np.linspace(0.02, 0.3, 8)
    for g in gs:
        B = bl.structureless_check(WorldlineSpec.parse(f"hyperbolic:g={g}", 6), 0.0)
        norms.append(np.linalg.norm(B))
    norms = np.array(norms)
    assert np.all(norms > 0) and np.all(np.diff(norms) > 0)
    slope = np.polyfit(np.log(gs), np.log(norms), 1)[0]
    assert slope == pytest.approx(3.0, abs=0.05)


def test_force_presets():
    u = np.array([math.cosh(0.5), math.sinh(0.5), 0, 0])
    st = KinematicState.from_derivatives(0.0, [np.zeros(4), u, np.zeros(4)])
    f = bl.parse_force("const:f1=0.1,f2=-0.2", 4)
    assert abs(mk.dot(f(st), u)) <= 1e-15
    L = bl.parse_force("lorentz:E1=0.3,B12=0.2", 4)
    assert abs(mk.dot(L(st), u)) <= 1e-15
    rest = KinematicState.from_derivatives(0.0, [np.zeros(4), mk.basis(4, 0), np.zeros(4)])
    assert np.allclose(L(rest), [0, 0.3, 0, 0])
    h = 1e-6
    for F in (f, L):
        du = np.array([0.1, -0.2, 0.3, 0.05])
        sp = KinematicState.from_derivatives(0.0, [np.zeros(4), u + h * du, np.zeros(4)])
        sm = KinematicState.from_derivatives(0.0, [np.zeros(4), u - h * du, np.zeros(4)])
        assert np.allclose((F(sp) - F(sm)) / (2 * h), F.jacobian(u) @ du, atol=1e-8)
    with pytest.raises(ContractError):
        bl.parse_force("const:g1=1", 4)
    with pytest.raises(ContractError):
        bl.parse_force("gravity", 4)
