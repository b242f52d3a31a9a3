# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled tube-flux kernel; same contract as ``rrlab._tube_py.tube_node_terms``."""
import numpy as np

from libc.math cimport M_PI, tgamma, pow

DEF MAXD = 6
DEF PMIN = -4
DEF NPOW = 7


cdef inline double mdot(const double* x, const double* y, int D) nogil:
    cdef double s = -x[0] * y[0]
    cdef int i
    for i in range(1, D):
        s += x[i] * y[i]
    return s


cdef inline void wedge_into(double* out, const double* x, const double* y,
                            double c, int D) nogil:
    # out[m*D+n] += c * (x^m y^n - x^n y^m)
    cdef int m, n
    for m in range(D):
        for n in range(D):
            out[m * D + n] += c * (x[m] * y[n] - x[n] * y[m])


def tube_node_terms(const double[:, ::1] k, const double[::1] weights,
                    const double[::1] z, const double[::1] u, const double[::1] a,
                    const double[::1] a1, int D, double e):
    cdef Py_ssize_t N = k.shape[0]
    p_arr = np.zeros((N, NPOW, D))
    M_arr = np.zeros((N, NPOW, D, D))
    cdef double[:, :, ::1] p = p_arr
    cdef double[:, :, :, ::1] M = M_arr
    cdef double omega = 2.0 * pow(M_PI, (D - 1) / 2.0) / tgamma((D - 1) / 2.0)
    cdef double sg[MAXD]
    cdef double F[3][MAXD * MAXD]
    cdef int fpow[3]
    cdef double X[3][MAXD]
    cdef double sig[2][MAXD]
    cdef int spow[2]
    cdef double G[3][MAXD]
    cdef double wv[MAXD]
    cdef double kk[MAXD]
    cdef double zz[MAXD]
    cdef double FF, ak, a1k, c, sc, tmp
    cdef int nf, i, j, s, mu, nu, lam, idx
    cdef Py_ssize_t n

    for mu in range(D):
        sg[mu] = 1.0
        zz[mu] = z[mu]
    sg[0] = -1.0

    with nogil:
        for n in range(N):
            for mu in range(D):
                kk[mu] = k[n, mu]
            sc = weights[n] / omega
            ak = mdot(&a[0], kk, D)
            for i in range(3):
                for mu in range(D * D):
                    F[i][mu] = 0.0
            if D == 4:
                nf = 2
                fpow[0] = -2
                fpow[1] = -1
                for mu in range(D):
                    X[0][mu] = e * u[mu]
                    X[1][mu] = e * (a[mu] + ak * u[mu])
                wedge_into(F[0], X[0], kk, 1.0, D)
                wedge_into(F[1], X[1], kk, 1.0, D)
            else:
                nf = 3
                fpow[0] = -4
                fpow[1] = -3
                fpow[2] = -2
                c = e / (2.0 * M_PI)
                a1k = mdot(&a1[0], kk, D)
                for mu in range(D):
                    X[0][mu] = 3.0 * c * u[mu]
                    X[1][mu] = 3.0 * c * (a[mu] + 2.0 * u[mu] * ak)
                    X[2][mu] = c * (a1[mu] + u[mu] * a1k + 3.0 * a[mu] * ak
                                    + 3.0 * u[mu] * ak * ak)
                wedge_into(F[0], X[0], kk, 1.0, D)
                wedge_into(F[1], X[1], kk, 1.0, D)
                wedge_into(F[1], &u[0], &a[0], c, D)
                wedge_into(F[2], X[2], kk, 1.0, D)
            for mu in range(D):
                sig[0][mu] = kk[mu] - u[mu]
                sig[1][mu] = ak * kk[mu]
            spow[0] = D - 2
            spow[1] = D - 1
            for s in range(2):
                # G_i^l = sigma_m F_i^{ml}
                for i in range(nf):
                    for lam in range(D):
                        tmp = 0.0
                        for mu in range(D):
                            tmp += sg[mu] * sig[s][mu] * F[i][mu * D + lam]
                        G[i][lam] = tmp
                for i in range(nf):
                    for j in range(nf):
                        FF = 0.0
                        for mu in range(D):
                            for nu in range(D):
                                FF += sg[mu] * sg[nu] * F[i][mu * D + nu] * F[j][mu * D + nu]
                        for nu in range(D):
                            tmp = 0.0
                            for lam in range(D):
                                tmp += F[j][nu * D + lam] * sg[lam] * G[i][lam]
                            wv[nu] = sc * (tmp - 0.25 * sig[s][nu] * FF)
                        idx = spow[s] + fpow[i] + fpow[j] - PMIN
                        for nu in range(D):
                            p[n, idx, nu] += wv[nu]
                        wedge_into(&M[n, idx, 0, 0], zz, wv, 1.0, D)
                        wedge_into(&M[n, idx + 1, 0, 0], kk, wv, 1.0, D)
    return p_arr, M_arr
