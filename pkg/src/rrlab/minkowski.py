"""Flat-spacetime tensor algebra in the mostly-plus signature (-, +, ..., +).

Vectors are plain ``numpy`` arrays of shape ``(D,)`` with index 0 the time
component; bivectors are antisymmetric ``(D, D)`` arrays.  All components
are stored with upper indices unless a function says otherwise.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import gamma, pi

import numpy as np

from .errors import ContractError, DomainError

SUPPORTED_DIMS = (4, 6)


def metric(D: int) -> np.ndarray:
    """Minkowski metric ``diag(-1, 1, ..., 1)``."""
    eta = np.eye(D)
    eta[0, 0] = -1.0
    return eta


def signs(D: int) -> np.ndarray:
    s = np.ones(D)
    s[0] = -1.0
    return s


def vector(components, dim: int | None = None) -> np.ndarray:
    v = np.asarray(components, dtype=float)
    if v.ndim != 1:
        raise ContractError(f"expected a 1-d component array, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise ContractError(f"expected {dim} components, got {v.shape[0]}")
    return v


def basis(D: int, i: int) -> np.ndarray:
    e = np.zeros(D)
    e[i] = 1.0
    return e


def _same_dim(x, y):
    if x.shape[-1] != y.shape[-1]:
        raise ContractError(
            f"dimension mismatch: {x.shape[-1]} vs {y.shape[-1]}")


def lower(x) -> np.ndarray:
    """Lower the (last) index of a vector or batch of vectors."""
    x = np.asarray(x, dtype=float)
    out = x.copy()
    out[..., 0] = -out[..., 0]
    return out


def dot(x, y) -> float:
    """Scalar product ``-x0*y0 + sum_i xi*yi``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _same_dim(x, y)
    return float(-x[0] * y[0] + x[1:] @ y[1:])


def bdot(x, y) -> np.ndarray:
    """Batched scalar product over the last axis."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _same_dim(x, y)
    return -x[..., 0] * y[..., 0] + np.einsum("...i,...i->...", x[..., 1:], y[..., 1:])


def wedge(x, y) -> np.ndarray:
    """Wedge product ``B^{mu nu} = x^mu y^nu - x^nu y^mu``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _same_dim(x, y)
    return np.outer(x, y) - np.outer(y, x)


def bivector_contract(A, B) -> float:
    """Full contraction ``A_{ab} B^{ab}`` of two rank-2 tensors with upper indices."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    s = signs(A.shape[0])
    return float(np.einsum("ab,a,b,ab->", A, s, s, B))


def upper_triangle(B) -> np.ndarray:
    """Canonical independent components ``B[i, j]`` for ``i < j``."""
    B = np.asarray(B)
    i, j = np.triu_indices(B.shape[0], k=1)
    return B[i, j]


def from_upper_triangle(values, D: int) -> np.ndarray:
    B = np.zeros((D, D))
    i, j = np.triu_indices(D, k=1)
    B[i, j] = values
    B[j, i] = -np.asarray(values)
    return B


def antisymmetrize(M) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    return 0.5 * (M - M.T)


def sphere_area(D: int) -> float:
    """Area of the unit ``(D-2)``-sphere, ``2 pi^((D-1)/2) / Gamma((D-1)/2)``.

    This is also the normalization constant of the D-dimensional field action.

    >>> round(sphere_area(4) / pi, 12)
    4.0
    """
    if D < 2:
        raise DomainError(f"sphere_area needs D >= 2, got {D}")
    return 2.0 * pi ** ((D - 1) / 2.0) / gamma((D - 1) / 2.0)


@dataclass(frozen=True)
class LorentzTransform:
    """A Lorentz matrix ``L`` acting on upper-index vectors, ``x' = L @ x``."""

    matrix: np.ndarray
    inverse_matrix: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        L = np.asarray(self.matrix, dtype=float)
        object.__setattr__(self, "matrix", L)
        if self.inverse_matrix is None:
            # L^-1 = eta L^T eta for any Lorentz matrix
            eta = metric(L.shape[0])
            object.__setattr__(self, "inverse_matrix", eta @ L.T @ eta)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def __call__(self, x) -> np.ndarray:
        return self.matrix @ np.asarray(x, dtype=float)

    def apply_tensor(self, T) -> np.ndarray:
        """Transform a rank-2 upper-index tensor."""
        return self.matrix @ np.asarray(T, dtype=float) @ self.matrix.T

    def inverse(self) -> "LorentzTransform":
        return LorentzTransform(self.inverse_matrix, self.matrix)

    def compose(self, other: "LorentzTransform") -> "LorentzTransform":
        return LorentzTransform(self.matrix @ other.matrix,
                                other.inverse_matrix @ self.inverse_matrix)

    def lorentz_defect(self) -> float:
        """Max-abs deviation of ``L^T eta L`` from ``eta``."""
        eta = metric(self.dim)
        return float(np.max(np.abs(self.matrix.T @ eta @ self.matrix - eta)))


def boost_from_rest(u) -> LorentzTransform:
    """Pure boost taking ``(1, 0, ..., 0)`` to the unit timelike vector ``u``."""
    u = vector(u)
    norm = dot(u, u)
    if not abs(norm + 1.0) <= 1e-9 or u[0] <= 0.0:
        raise DomainError(f"u must be future unit timelike, u.u = {norm}")
    D = u.shape[0]
    g = u[0]
    v = u[1:]
    L = np.eye(D)
    L[0, 0] = g
    L[0, 1:] = v
    L[1:, 0] = v
    L[1:, 1:] += np.outer(v, v) / (1.0 + g)
    # inverse boost flips the sign of the spatial velocity
    Linv = L.copy()
    Linv[0, 1:] = -v
    Linv[1:, 0] = -v
    return LorentzTransform(L, Linv)


def boost_to_mclf(u) -> LorentzTransform:
    """Pure boost into the momentarily comoving frame: maps ``u`` to ``(1, 0, ..., 0)``."""
    return boost_from_rest(u).inverse()
