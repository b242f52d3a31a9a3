import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as hs

from rrlab import minkowski as mk
from rrlab.errors import ContractError, DomainError

finite = hs.floats(-10, 10, allow_nan=False)


def test_signature():
    for D in (4, 6):
        assert mk.dot(mk.basis(D, 0), mk.basis(D, 0)) == -1.0
        assert mk.dot(mk.basis(D, 1), mk.basis(D, 1)) == 1.0


def test_dimension_mismatch():
    with pytest.raises(ContractError):
        mk.dot(np.zeros(4), np.zeros(6))
    with pytest.raises(ContractError):
        mk.wedge(np.zeros(4), np.zeros(6))


def test_wedge_definition():
    B = mk.wedge(mk.basis(4, 0), mk.basis(4, 1))
    ref = np.zeros((4, 4))
    ref[0, 1], ref[1, 0] = 1.0, -1.0
    assert np.array_equal(B, ref)
    x = np.arange(6.0)
    assert np.array_equal(mk.wedge(x, x), np.zeros((6, 6)))


@settings(max_examples=50, deadline=None)
@given(hs.lists(finite, min_size=12, max_size=12))
def test_wedge_antisymmetric_bilinear(vals):
    x, y = np.array(vals[:6]), np.array(vals[6:])
    assert np.array_equal(mk.wedge(x, y), -mk.wedge(y, x))
    assert np.allclose(mk.wedge(2.0 * x + y, y), 2.0 * mk.wedge(x, y), atol=1e-12)


def test_bivector_contract_u_wedge_a(rng):
    from tests.conftest import random_state
    _, u, a = random_state(rng, 6, order=2)
    B = mk.wedge(u, a)
    brute = 0.0
    eta = mk.metric(6)
    for i in range(6):
        for j in range(6):
            brute += eta[i, i] * eta[j, j] * B[i, j] * B[i, j]
    assert mk.bivector_contract(B, B) == pytest.approx(brute, rel=1e-13)
    assert brute == pytest.approx(-2.0 * mk.dot(a, a), rel=1e-12)


def test_upper_triangle_roundtrip(rng):
    B = mk.antisymmetrize(rng.normal(size=(6, 6)))
    assert np.array_equal(mk.from_upper_triangle(mk.upper_triangle(B), 6), B)


def test_sphere_area():
    assert mk.sphere_area(6) == pytest.approx(8.0 * math.pi**2 / 3.0, rel=1e-15)
    assert mk.sphere_area(4) == pytest.approx(4.0 * math.pi, rel=1e-15)
    assert mk.sphere_area(2) == pytest.approx(2.0, rel=1e-15)
    with pytest.raises(DomainError):
        mk.sphere_area(1)


def test_boost_identity_at_rest():
    L = mk.boost_to_mclf(mk.basis(6, 0))
    assert np.array_equal(L.matrix, np.eye(6))


@settings(max_examples=50, deadline=None)
@given(hs.lists(hs.floats(-3, 3, allow_nan=False), min_size=5, max_size=5))
def test_boost_properties(v):
    v = np.array(v)
    u = np.concatenate([[math.sqrt(1.0 + v @ v)], v])
    L = mk.boost_to_mclf(u)
    assert np.allclose(L(u), mk.basis(6, 0), atol=1e-12 * np.linalg.norm(u) ** 2)
    assert L.lorentz_defect() <= 1e-12 * max(1.0, u[0] ** 2)
    assert np.allclose(L.matrix[1:, 1:], L.matrix[1:, 1:].T)
    assert np.allclose(L.compose(L.inverse()).matrix, np.eye(6),
                       atol=1e-12 * max(1.0, u[0] ** 2))


def test_boost_rejects_spacelike():
    with pytest.raises(DomainError):
        mk.boost_to_mclf(np.array([0.5, 1.0, 0.0, 0.0]))
