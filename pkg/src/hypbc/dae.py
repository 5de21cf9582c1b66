"""Semi-explicit DAE stepping with drift-free constraint handling.

Systems have the quasi-linear form

.. math:: \\tilde B(v, t) \\dot v = \\tilde b(v, t), \\qquad \\tilde g(v, t) = 0,

with ``n - n_alg`` differential rows and ``n_alg`` algebraic constraints.
Several strategies are provided for keeping the numerical solution on the
constraint manifold:

* ``rk0``   differentiate the constraints and integrate the resulting ODE
  (drifts off the manifold at the truncation-error rate);
* ``p1``/``p2``  post-step projection back onto the manifold;
* ``i1``/``i2``  projection before every stage derivative evaluation,
  plus a post-step projection;
* Newton-Raphson stage solves (:func:`rknr_step`) that enforce the
  constraints at each stage target value, removing drift entirely.
"""

import numpy as np

from .core import ConfigurationError
from .ssprk import StageInfo, rk_step

PROJECTION_POLICIES = ("rk0", "p1", "p2", "i1", "i2")


class RankDeficiencyError(np.linalg.LinAlgError):
    """A stage system was numerically singular."""

    def __init__(self, rows):
        self.rows = rows
        super().__init__(f"rank-deficient system; degenerate pivot in rows {rows}")


class NonConvergenceError(RuntimeError):
    """An iterative solve failed to reach tolerance."""


def solve_dense(a, rhs, row_labels=None):
    """Dense LU solve with partial pivoting and a singularity check.

    A pivot smaller than 1e-13 times the infinity norm of its row
    raises :class:`RankDeficiencyError` naming the offending rows.
    """
    a = np.array(a, dtype=float)
    rhs = np.array(rhs, dtype=float)
    n = a.shape[0]
    if a.shape != (n, n) or rhs.shape[0] != n:
        raise ConfigurationError(f"bad system shapes: {a.shape}, {rhs.shape}")
    labels = list(row_labels) if row_labels is not None else list(range(n))
    scale = np.max(np.abs(a), axis=1)
    for k in range(n):
        p = k + int(np.argmax(np.abs(a[k:, k])))
        if np.abs(a[p, k]) < 1e-13 * max(scale[p], 1e-300):
            raise RankDeficiencyError([labels[i] for i in range(k, n)])
        if p != k:
            a[[k, p]] = a[[p, k]]
            rhs[[k, p]] = rhs[[p, k]]
            labels[k], labels[p] = labels[p], labels[k]
            scale[k], scale[p] = scale[p], scale[k]
        factors = a[k + 1:, k] / a[k, k]
        a[k + 1:, k + 1:] -= np.outer(factors, a[k, k + 1:])
        rhs[k + 1:] -= np.outer(factors, rhs[k:k + 1]) if rhs.ndim > 1 else factors * rhs[k]
    x = np.zeros_like(rhs)
    for k in range(n - 1, -1, -1):
        x[k] = (rhs[k] - a[k, k + 1:] @ x[k + 1:]) / a[k, k]
    return x


class DaeSystem:
    """Base class: differential rows B(v,t) vdot = b(v,t) and constraints g(v,t) = 0.

    ``g_v`` and ``g_t`` default to central finite differences; override
    with analytic derivatives where available.
    """

    n = None
    n_alg = 0

    def b_mat(self, v, t):
        raise NotImplementedError

    def b_vec(self, v, t):
        raise NotImplementedError

    def g(self, v, t):
        return np.zeros(0)

    def g_v(self, v, t, eps=1e-7):
        g0 = np.asarray(self.g(v, t))
        jac = np.zeros((g0.shape[0], self.n))
        for j in range(self.n):
            h = eps * max(1.0, abs(v[j]))
            vp = np.array(v, dtype=float)
            vm = np.array(v, dtype=float)
            vp[j] += h
            vm[j] -= h
            jac[:, j] = (np.asarray(self.g(vp, t)) - np.asarray(self.g(vm, t))) / (2.0 * h)
        return jac

    def g_t(self, v, t, eps=1e-7):
        h = eps * max(1.0, abs(t))
        return (np.asarray(self.g(v, t + h)) - np.asarray(self.g(v, t - h))) / (2.0 * h)

    def stacked(self, v, t):
        """Full square matrix [B; G] and right-hand side [b; -g_t]."""
        b_mat = np.atleast_2d(self.b_mat(v, t))
        mat = np.vstack([b_mat, self.g_v(v, t)]) if self.n_alg else b_mat
        rhs = np.concatenate([np.atleast_1d(self.b_vec(v, t)),
                              -np.atleast_1d(self.g_t(v, t))] if self.n_alg
                             else [np.atleast_1d(self.b_vec(v, t))])
        return mat, rhs


def rk0_derivative(sys, v, t):
    """Time derivative from the index-reduced ODE [B; G] vdot = [b; -g_t]."""
    mat, rhs = sys.stacked(v, t)
    return solve_dense(mat, rhs)


def project_p1(sys, v, t, tol=1e-13, max_iter=50):
    """Minimal-norm Newton projection onto g = 0: v <- v - G^T (G G^T)^-1 g."""
    v = np.array(v, dtype=float)
    if sys.n_alg == 0:
        return v
    for _ in range(max_iter):
        g = np.atleast_1d(sys.g(v, t))
        if np.max(np.abs(g)) <= tol:
            return v
        gv = np.atleast_2d(sys.g_v(v, t))
        v = v - gv.T @ solve_dense(gv @ gv.T, g)
    raise NonConvergenceError(f"projection stalled at |g| = {np.max(np.abs(g)):.3e}")


def project_p2(sys, v, t, tol=1e-13, max_iter=50):
    """Projection onto g = 0 along directions unseen by the differential rows.

    Solves [B; G] dv = [0; -g] with B, G re-evaluated at each iterate,
    so the correction leaves the differential combinations B v untouched
    to first order.
    """
    v = np.array(v, dtype=float)
    if sys.n_alg == 0:
        return v
    for _ in range(max_iter):
        g = np.atleast_1d(sys.g(v, t))
        if np.max(np.abs(g)) <= tol:
            return v
        mat = np.vstack([np.atleast_2d(sys.b_mat(v, t)), np.atleast_2d(sys.g_v(v, t))])
        rhs = np.concatenate([np.zeros(sys.n - sys.n_alg), -g])
        v = v + solve_dense(mat, rhs)
    raise NonConvergenceError(f"projection stalled at |g| = {np.max(np.abs(g)):.3e}")


_PROJECTORS = {"p1": project_p1, "p2": project_p2}


def step_with_projection(sys, v, t, dt, scheme, policy="rk0", tol=1e-13, max_iter=50):
    """One SSP-RK step of the index-reduced ODE with a drift-control policy.

    ``rk0`` integrates without correction.  ``p1``/``p2`` project after
    the full step.  ``i1``/``i2`` evaluate each stage derivative at the
    projection of the stage value (the Euler step itself starts from the
    unprojected value, preserving the convex-combination structure) and
    project after the full step.
    """
    if policy not in PROJECTION_POLICIES:
        raise ConfigurationError(f"unknown policy {policy!r}; choose from {PROJECTION_POLICIES}")
    inner = _PROJECTORS.get("p" + policy[1:]) if policy.startswith("i") else None

    def euler(y, ts, dts, stage):
        point = inner(sys, y, ts, tol=tol, max_iter=max_iter) if inner else y
        return y + dts * rk0_derivative(sys, point, ts), np.inf

    v_next, _ = rk_step(v, t, dt, scheme, euler)
    if policy in ("p1", "p2"):
        v_next = _PROJECTORS[policy](sys, v_next, t + dt, tol=tol, max_iter=max_iter)
    elif policy.startswith("i"):
        v_next = inner(sys, v_next, t + dt, tol=tol, max_iter=max_iter)
    return v_next


def rknr_substep(sys, v_s, t_s, dt, eta, v0, t0, dv_init=None, tol=1e-12,
                 max_iter=50, explicit=False, history=None):
    """Stage update enforcing the constraints at the stage target value.

    The stage combination v+ = eta v0 + (1 - eta)(v_s + dv) at target
    time t+ = eta t0 + (1 - eta)(t_s + dt) must satisfy g(v+, t+) = 0.
    Each Newton iterate solves

        [ B(v_s, t_s)        ]        [ b(v_s, t_s) dt            ]
        [ (1 - eta) G(v+, t+)] dv'  = [ (1 - eta) G dv - g(v+, t+)]

    with G evaluated at the current candidate.  The implicit variant
    iterates to ``|dv' - dv|_inf < tol``; the explicit variant performs
    exactly one iteration from the seed (typically the previous step's
    increment).

    Returns ``(v_euler, dv)`` where ``v_euler = v_s + dv`` is the value
    to feed into the SSP convex combination.  If ``history`` is a list,
    appends ``(|g(candidate)|_inf, |dv' - dv|_inf)`` per iteration.
    """
    n_diff = sys.n - sys.n_alg
    dv = np.zeros(sys.n) if dv_init is None else np.array(dv_init, dtype=float)
    t_target = eta * t0 + (1.0 - eta) * (t_s + dt)
    b_mat = np.atleast_2d(sys.b_mat(v_s, t_s))
    b_rhs = np.atleast_1d(sys.b_vec(v_s, t_s)) * dt
    for it in range(max_iter):
        v_cand = eta * v0 + (1.0 - eta) * (v_s + dv)
        g = np.atleast_1d(sys.g(v_cand, t_target))
        gv = (1.0 - eta) * np.atleast_2d(sys.g_v(v_cand, t_target))
        mat = np.vstack([b_mat, gv])
        rhs = np.concatenate([b_rhs, gv @ dv - g])
        dv_new = solve_dense(mat, rhs)
        delta = np.max(np.abs(dv_new - dv))
        if history is not None:
            history.append((np.max(np.abs(g)), delta))
        dv = dv_new
        if explicit or delta < tol:
            return v_s + dv, dv
    raise NonConvergenceError(f"stage Newton iteration stalled, |ddv| = {delta:.3e}")


def rknr_step(sys, v, t, dt, scheme, dv_seeds=None, explicit=False, tol=1e-12, max_iter=50):
    """Full SSP-RK step with constraint-enforcing stage solves.

    ``dv_seeds`` holds one increment per stage from the previous step
    (used to seed the stage iterations; mandatory warm start for the
    explicit variant).  Returns ``(v_next, dv_seeds)``.
    """
    seeds = list(dv_seeds) if dv_seeds is not None else [None] * scheme.n_stages
    new_seeds = [None] * scheme.n_stages

    def euler(y, ts, dts, stage):
        v_e, dv = rknr_substep(sys, y, ts, dts, stage.eta, stage.y_start, stage.t_start,
                               dv_init=seeds[stage.stage], tol=tol, max_iter=max_iter,
                               explicit=explicit)
        new_seeds[stage.stage] = dv
        return v_e, np.inf

    v_next, _ = rk_step(v, t, dt, scheme, euler)
    return v_next, new_seeds


def split_error(sys, v, t, err):
    """Split an error vector into differential and algebraic parts.

    Uses the orthogonal projectors onto the row spaces of B and G:
    P_B = B^T (B B^T)^-1 B and P_G = G^T (G G^T)^-1 G.  Returns
    ``(P_B err, P_G err)``.
    """
    err = np.asarray(err, dtype=float)
    b_mat = np.atleast_2d(sys.b_mat(v, t))
    e_diff = b_mat.T @ solve_dense(b_mat @ b_mat.T, b_mat @ err)
    if sys.n_alg == 0:
        return e_diff, np.zeros_like(err)
    gv = np.atleast_2d(sys.g_v(v, t))
    e_alg = gv.T @ solve_dense(gv @ gv.T, gv @ err)
    return e_diff, e_alg
