"""Pure-numpy tube-flux kernel (reference implementation and fallback)."""
import numpy as np

from . import minkowski as mk
from .fields import field_pieces

PMIN = -4
NPOW = 7


def _bwedge(x, y):
    return x[:, :, None] * y[:, None, :] - y[:, :, None] * x[:, None, :]


def tube_node_terms(k, weights, z, u, a, a1, D, e):
    """Per-node flux-integrand coefficients, grouped by power of r.

    Returns ``(p, M)`` with shapes ``(N, NPOW, D)`` and ``(N, NPOW, D, D)``;
    slot ``s - PMIN`` holds the coefficient of ``r^s``.  Node weights and the
    ``1/Omega_{D-2}`` stress normalization are already applied.
    """
    k = np.ascontiguousarray(k, dtype=float)
    N = k.shape[0]
    s = mk.signs(D)
    pieces = field_pieces(u, a, a1, k, D, e)
    ak = mk.bdot(a, k)
    sigmas = {D - 2: k - u, D - 1: ak[:, None] * k}
    p = np.zeros((N, NPOW, D))
    M = np.zeros((N, NPOW, D, D))
    scale = (np.asarray(weights, dtype=float) / mk.sphere_area(D))[:, None]
    zb = np.broadcast_to(z, k.shape)
    for ps, sig in sigmas.items():
        sig_low = sig * s
        G = {i: np.einsum("nm,nml->nl", sig_low, F) for i, F in pieces.items()}
        for i, Fi in pieces.items():
            for j, Fj in pieces.items():
                FF = np.einsum("nab,a,b,nab->n", Fi, s, s, Fj)
                wv = np.einsum("nvl,l,nl->nv", Fj, s, G[i]) - 0.25 * sig * FF[:, None]
                wv *= scale
                idx = ps + i + j - PMIN
                p[:, idx] += wv
                M[:, idx] += _bwedge(zb, wv)
                M[:, idx + 1] += _bwedge(k, wv)
    return p, M
