"""Self-consistent radiation-reaction equations of motion in 4D and 6D.

4D (Lorentz-Dirac), ``m a = (2/3) e^2 (a1 - (a.a) u) + F``:

* ``direct`` integrates the third-order system for ``(z, u, a)``, solving
  ``a1 = (a.a) u + 3/(2 e^2) (m a - F)``.  Generic initial data run away on
  the timescale ``tau0 = 2 e^2 / (3 m)``.
* ``reduced`` replaces the self-force by its value along ``a = F/m``,
  ``m a = F + (2/3) e^2 (F'/m - (F.F/m^2) u)``, a second-order system.

6D: the balance ``dp/dtau + P_rad = F`` with the renormalized momentum is
linear in the highest derivative.  For ``e != 0`` it is fifth order in ``z``
(``a3`` solved); for ``e = 0, mu != 0`` fourth order (``a2`` solved); for
``e = mu = 0`` it is Newton's law.

Forces are projected orthogonal to ``u`` before use since the left-hand sides
are orthogonal to ``u`` on the constraint manifold; the dropped part
``F.u`` is recorded in the trajectory statistics.  Integration uses an explicit
Dormand-Prince 5(4) pair with projection onto the constraint manifold after
each accepted step.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import balance as bl
from . import minkowski as mk
from .errors import ContractError, DegenerateSystemError, PrecisionError, ProjectionError
from .worldline import KinematicState

# states inside the 1e-3 neighbourhood are always accepted; beyond 1e-2 is an error
PROJECTION_LIMIT = 1e-2

# Dormand-Prince 5(4) tableau
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
ORDER = 5


@dataclass(frozen=True)
class MotionState4D:
    z: np.ndarray
    u: np.ndarray
    a: np.ndarray

    def derivs(self):
        return [self.z, self.u, self.a]


@dataclass(frozen=True)
class MotionState6D:
    z: np.ndarray
    u: np.ndarray
    a: np.ndarray
    a1: np.ndarray
    a2: np.ndarray

    def derivs(self):
        return [self.z, self.u, self.a, self.a1, self.a2]


def state_at_rest(D: int, tau0: float = 0.0):
    z = np.zeros(D)
    z[0] = tau0
    u = mk.basis(D, 0)
    zero = np.zeros(D)
    if D == 4:
        return MotionState4D(z, u, zero)
    return MotionState6D(z, u, zero, zero, zero)


@dataclass
class Trajectory:
    """Accepted integration steps.

    ``samples`` has shape ``(N, k, D)`` holding ``z, u, a, ...`` per step, with
    ``k`` the number of stored derivatives (highest solved one included).
    """

    tau: np.ndarray
    samples: np.ndarray
    method: str
    flags: list
    stats: dict = field(default_factory=dict)

    @property
    def runaway(self) -> bool:
        return "runaway" in self.flags

    def __len__(self):
        return len(self.tau)

    def states(self) -> list:
        return [KinematicState.from_derivatives(t, s) for t, s in zip(self.tau, self.samples)]


# ---------------------------------------------------------------------------
# constraints


def _chain_targets(d):
    """Values of ``u.d_k`` implied by differentiating ``u.u = -1``."""
    dot = mk.dot
    t = [None, None, 0.0]
    if len(d) > 3:
        t.append(-dot(d[2], d[2]))
    if len(d) > 4:
        t.append(-3.0 * dot(d[2], d[3]))
    if len(d) > 5:
        t.append(-3.0 * dot(d[3], d[3]) - 4.0 * dot(d[2], d[4]))
    return t


def project_derivs(derivs, limit: float = PROJECTION_LIMIT):
    """Sequential projection onto ``u.u = -1`` and its differentiated identities."""
    d = [np.array(x, dtype=float) for x in derivs]
    if len(d) < 2:
        return d
    u = d[1]
    uu = mk.dot(u, u)
    if not uu < 0 or u[0] <= 0:
        raise ProjectionError("velocity is not future timelike")
    viol = abs(uu + 1.0)
    u = u / np.sqrt(-uu)
    d[1] = u
    for k in range(2, len(d)):
        target = _chain_targets(d[: k + 1])[k]
        ud = mk.dot(u, d[k])
        viol = max(viol, abs(ud - target) / max(1.0, abs(target), float(np.max(np.abs(d[k])))))
        d[k] = d[k] + (ud - target) * u
    if viol > limit:
        raise ProjectionError(f"constraint violation {viol:.3g} exceeds {limit:.3g}")
    return d


def constraint_project(state, limit: float = PROJECTION_LIMIT):
    """Project a motion or kinematic state onto the constraint manifold."""
    if isinstance(state, KinematicState):
        d = project_derivs(state.derivatives(), limit)
        return KinematicState.from_derivatives(state.tau, d)
    d = project_derivs(state.derivs(), limit)
    return type(state)(*d)


def chain_violation(derivs) -> float:
    d = list(derivs)
    if len(d) < 2:
        return 0.0
    out = abs(mk.dot(d[1], d[1]) + 1.0)
    targets = _chain_targets(d)
    for k in range(2, len(d)):
        out = max(out, abs(mk.dot(d[1], d[k]) - targets[k]))
    return out


# ---------------------------------------------------------------------------
# integrator


def _perp(F, u):
    return F + mk.dot(F, u) * u


def dopri_integrate(rhs, t0, y0, t1, h, *, adaptive=True, rtol=1e-10, atol=1e-12,
                    post_step=None, stop=None, max_steps=200000, h_min=1e-14):
    """Dormand-Prince 5(4) from ``t0`` to ``t1``.

    ``post_step(y)`` maps the accepted solution (constraint projection);
    ``stop(t, y)`` returns a flag name to end integration early.
    Returns ``(ts, ys, flags, stats)``.
    """
    t, y = float(t0), np.array(y0, dtype=float)
    ts, ys = [t], [y.copy()]
    flags = []
    n_acc = n_rej = 0
    h = min(float(h), t1 - t0)
    k1 = rhs(t, y)
    while t < t1 - 1e-15 * max(1.0, abs(t1)):
        if n_acc + n_rej >= max_steps:
            flags.append("max_steps")
            break
        h = min(h, t1 - t)
        ks = [k1]
        for i in range(1, 7):
            yi = y + h * sum(a * k for a, k in zip(_A[i], ks))
            ks.append(rhs(t + _C[i] * h, yi))
        y5 = y + h * sum(b * k for b, k in zip(_B5, ks))
        if adaptive:
            y4 = y + h * sum(b * k for b, k in zip(_B4, ks))
            sc = atol + rtol * np.maximum(np.abs(y), np.abs(y5))
            err = float(np.sqrt(np.mean(((y5 - y4) / sc) ** 2)))
            if not np.isfinite(err):
                err = np.inf
            if err > 1.0:
                n_rej += 1
                h *= max(0.2, 0.9 * err ** (-1.0 / ORDER)) if np.isfinite(err) else 0.2
                if h < h_min:
                    raise PrecisionError(f"step size underflow at tau={t:.6g}")
                continue
            fac = 5.0 if err == 0 else min(5.0, max(0.2, 0.9 * err ** (-1.0 / ORDER)))
        t += h
        y = post_step(y5) if post_step is not None else y5
        n_acc += 1
        ts.append(t)
        ys.append(y.copy())
        k1 = rhs(t, y) if post_step is not None else ks[6]
        if adaptive:
            h *= fac
        if stop is not None:
            flag = stop(t, y)
            if flag:
                flags.append(flag)
                break
    return np.array(ts), np.array(ys), flags, {"accepted": n_acc, "rejected": n_rej}


def _runaway_stop(D, a_max, u0_max):
    def stop(t, y):
        u, a = y[D:2 * D], y[2 * D:3 * D]
        if u[0] > u0_max or np.sqrt(max(mk.dot(a, a), 0.0)) > a_max:
            return "runaway"
        if not np.all(np.isfinite(y)):
            return "runaway"
        return None
    return stop


def _run(rhs, derivs0, span, step, adaptive, rtol, atol, project, stop, nstate, extra):
    D = derivs0[0].shape[0]
    y0 = np.concatenate(derivs0[:nstate])
    drift = [0.0]

    def post(y):
        d = list(y.reshape(nstate, D))
        if project:
            d = project_derivs(d)
        else:
            drift[0] = max(drift[0], chain_violation(d))
        return np.concatenate(d)

    ts, ys, flags, stats = dopri_integrate(rhs, span[0], y0, span[1], step, adaptive=adaptive,
                                           rtol=rtol, atol=atol, post_step=post, stop=stop)
    ys = ys.reshape(len(ts), nstate, D)
    full = np.array([np.concatenate([y, extra(t, y)[None, :]]) if extra else y
                     for t, y in zip(ts, ys)])
    stats["max_drift"] = drift[0]
    stats["projected"] = bool(project)
    return ts, full, flags, stats


# ---------------------------------------------------------------------------
# 4D


def evolve_4d(init: MotionState4D, F_ext, span, step: float = 1e-2, method: str = "direct",
              m: float = 1.0, e: float = 1.0, *, adaptive: bool = True, rtol: float = 1e-10,
              atol: float = 1e-12, project: bool = True, a_max: float = 10.0,
              u0_max: float = 1e6) -> Trajectory:
    """Integrate the 4D Lorentz-Dirac equation over ``span = (tau0, tau1)``.

    ``F_ext`` is a force preset from :mod:`rrlab.balance` or any callable of
    the state; ``reduced`` additionally needs ``F_ext.jacobian(u)``.  Samples
    store ``z, u, a`` and the solved derivative (``a1`` for direct).
    """
    D = init.z.shape[0]
    if D != 4:
        raise ContractError("evolve_4d needs a 4D state")
    if not span[1] > span[0]:
        raise ContractError("span must be increasing")
    F_ext = bl.ZeroForce(D) if F_ext is None else F_ext
    d0 = project_derivs(init.derivs())
    fu_max = [0.0]

    def force(t, d):
        st = KinematicState.from_derivatives(t, d)
        F = np.asarray(F_ext(st), float)
        fu_max[0] = max(fu_max[0], abs(mk.dot(F, d[1])))
        return _perp(F, d[1])

    if method == "direct":
        if e == 0.0:
            raise DegenerateSystemError("direct Lorentz-Dirac needs e != 0; use method='reduced'")
        k3 = 3.0 / (2.0 * e * e)

        def a1_of(t, y):
            z, u, a = y.reshape(3, D)
            F = force(t, [z, u, a])
            return mk.dot(a, a) * u + k3 * (m * a - F)

        def rhs(t, y):
            z, u, a = y.reshape(3, D)
            return np.concatenate([u, a, a1_of(t, y)])

        ts, full, flags, stats = _run(rhs, d0, span, step, adaptive, rtol, atol, project,
                                      _runaway_stop(D, a_max, u0_max), 3,
                                      lambda t, y: a1_of(t, y.ravel()))
    elif method == "reduced":
        jac = getattr(F_ext, "jacobian", None)
        if jac is None:
            raise ContractError("reduced method needs a force with a jacobian(u) method")
        tau_e = (2.0 / 3.0) * e * e

        def accel(t, z, u):
            F = force(t, [z, u, np.zeros(D)])
            Fdot = _perp(jac(u) @ (F / m), u)
            a = (F + tau_e * (Fdot / m - mk.dot(F, F) / m**2 * u)) / m
            return a + mk.dot(a, u) * u

        def rhs(t, y):
            z, u = y.reshape(2, D)
            return np.concatenate([u, accel(t, z, u)])

        def stop(t, y):
            z, u = y.reshape(2, D)
            a = accel(t, z, u)
            return _runaway_stop(D, a_max, u0_max)(t, np.concatenate([z, u, a]))

        ts, full, flags, stats = _run(rhs, d0[:2], span, step, adaptive, rtol, atol, project,
                                      stop, 2, lambda t, y: accel(t, *y))
    else:
        raise ContractError(f"unknown method {method!r}")
    stats["max_force_u"] = fu_max[0]
    return Trajectory(ts, full, method, flags, stats)


def fit_efolding(traj: Trajectory, lo: float | None = None, hi: float | None = None) -> float:
    """Least-squares e-folding time of the invariant ``|a|`` along a trajectory."""
    t = traj.tau
    a = traj.samples[:, 2, :]
    mag = np.sqrt(np.maximum(np.einsum("ni,i,ni->n", a, mk.signs(a.shape[1]), a), 0.0))
    sel = (mag > 0) & (t >= (t[0] if lo is None else lo)) & (t <= (t[-1] if hi is None else hi))
    if sel.sum() < 3:
        raise ContractError("too few samples with nonzero acceleration")
    slope = np.polyfit(t[sel], np.log(mag[sel]), 1)[0]
    return 1.0 / slope


# ---------------------------------------------------------------------------
# 6D


def evolve_6d(init: MotionState6D, F_ext, prm: bl.ParticleParams, span, step: float = 1e-2,
              *, adaptive: bool = True, rtol: float = 1e-10, atol: float = 1e-12,
              project: bool = True, a_max: float = 10.0, u0_max: float = 1e6,
              consistency_tol: float = 1e-8) -> Trajectory:
    """Integrate the 6D balance ``dp/dtau + P_rad = F`` for ``p`` of the charged particle.

    Samples store ``z, u, a, a1, a2, a3`` (derived entries filled in by the
    solved equation in the lower-order branches).
    """
    D = init.z.shape[0]
    if D != 6:
        raise ContractError("evolve_6d needs a 6D state")
    if not span[1] > span[0]:
        raise ContractError("span must be increasing")
    F_ext = bl.ZeroForce(D) if F_ext is None else F_ext
    d0 = project_derivs(init.derivs())
    m, mu, e = prm.m, prm.mu, prm.e
    c = bl.c6(e)
    fu_max = [0.0]

    def force(t, d):
        F = np.asarray(F_ext(KinematicState.from_derivatives(t, d)), float)
        fu_max[0] = max(fu_max[0], abs(mk.dot(F, d[1])))
        return _perp(F, d[1])

    if e != 0.0:
        branch, nstate = "fifth-order", 5

        def top(t, d):
            z, u, a, a1, a2 = d
            st = KinematicState.from_derivatives(t, [z, u, a, a1, a2, np.zeros(D)])
            rest = bl.momentum_rate(st, prm) + bl.radiated_rate_closed(st, D, e)
            return (force(t, d) - rest) / (0.8 * c)

        def fill(t, d):
            return [top(t, d)]
    elif mu != 0.0:
        branch, nstate = "fourth-order", 4

        def top(t, d):
            z, u, a, a1 = d
            aa, daa = mk.dot(a, a), 2.0 * mk.dot(a, a1)
            return 1.5 * daa * u + 1.5 * aa * a + (m * a - force(t, d)) / mu

        def fill(t, d):
            a2 = top(t, d)
            return [a2, _a3_fourth_order(t, d, a2, F_ext, force, prm)]
    else:
        branch, nstate = "newtonian", 2

        def top(t, d):
            return force(t, list(d) + [np.zeros(D)]) / m

        def fill(t, d):
            return [top(t, d)]

    _check_consistency(branch, d0, top, span[0], consistency_tol)

    def rhs(t, y):
        d = list(y.reshape(nstate, D))
        return np.concatenate(d[1:] + [top(t, d)])

    def stop(t, y):
        d = list(y.reshape(nstate, D))
        if nstate == 2:
            d = d + [top(t, d)]
        return _runaway_stop(D, a_max, u0_max)(t, np.concatenate(d[:3]))

    ts, full, flags, stats = _run(rhs, d0[:nstate], span, step, adaptive, rtol, atol, project,
                                  stop, nstate,
                                  lambda t, y: np.stack(fill(t, list(y)))[0])
    if branch == "fourth-order":
        extra = np.array([fill(t, list(y))[1] for t, y in zip(ts, full[:, :4])])
        full = np.concatenate([full, extra[:, None, :]], axis=1)
    stats["max_force_u"] = fu_max[0]
    stats["branch"] = branch
    return Trajectory(ts, full, branch, flags, stats)


def _a3_fourth_order(t, d, a2, F_ext, force, prm):
    """Derivative of the solved ``a2`` law of the ``e = 0`` branch.

    Uses ``F_ext.jacobian`` when present, otherwise a central difference of
    the force along the local Taylor flow.
    """
    z, u, a, a1 = d
    F = np.asarray(F_ext(KinematicState.from_derivatives(t, [z, u, a, a1])), float)
    jac = getattr(F_ext, "jacobian", None)
    if jac is not None:
        Fdot = jac(u) @ a
    else:
        h = 1e-5
        def raw(s):
            dd = [z + s * u, u + s * a + 0.5 * s * s * a1, a + s * a1, a1 + s * a2]
            return np.asarray(F_ext(KinematicState.from_derivatives(t + s, dd)), float)
        Fdot = (raw(h) - raw(-h)) / (2.0 * h)
    Fu = mk.dot(F, u)
    Fperp_dot = Fdot + (mk.dot(Fdot, u) + mk.dot(F, a)) * u + Fu * a
    aa, daa = mk.dot(a, a), 2.0 * mk.dot(a, a1)
    ddaa = 2.0 * (mk.dot(a1, a1) + mk.dot(a, a2))
    return (1.5 * ddaa * u + 3.0 * daa * a + 1.5 * aa * a1
            + (prm.m * a1 - Fperp_dot) / prm.mu)


def _check_consistency(branch, d0, top, t0, tol):
    """Lower-order branches fix derivatives the initial data may also supply.

    All-zero entries are taken as unspecified.
    """
    if branch == "fourth-order" and len(d0) > 4:
        want = top(t0, d0[:4])
        got = d0[4]
        if np.max(np.abs(got - want)) > tol * max(1.0, float(np.max(np.abs(want)))) \
                and np.any(got != 0):
            raise DegenerateSystemError("initial a2 contradicts the fourth-order law (e = 0)")
    if branch == "newtonian":
        want = top(t0, d0[:2])
        got = d0[2]
        if np.max(np.abs(got - want)) > tol * max(1.0, float(np.max(np.abs(want)))) \
                and np.any(got != 0):
            raise DegenerateSystemError("initial acceleration contradicts m a = F (e = mu = 0)")


def balance_recheck(traj: Trajectory, prm: bl.ParticleParams, F_ext) -> np.ndarray:
    """Relative energy-momentum residual at each sample of a 6D trajectory.

    The force enters orthogonally projected, as in the integration.
    """
    def Fperp(st):
        return _perp(np.asarray(F_ext(st), float), st.u)

    out = []
    for st in traj.states():
        rep = bl.balance_residual(st, st.tau, prm, Fperp, st.dim)
        out.append(rep.dp_norm / max(rep.dp_scale, 1e-300))
    return np.array(out)
