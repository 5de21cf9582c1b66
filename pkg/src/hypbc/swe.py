"""Shallow water equations with a passive tracer on a moving domain.

Physical variables Q = (h, phi h, u h) with unit gravity obey

    dh/dt + d(uh)/dx = 0,
    d(phi h)/dt + d(u phi h)/dx = 0,
    d(uh)/dt + d(u^2 h + h^2/2)/dx = 0.

The moving domain [x_L(t), x_R(t)] is mapped to y in [0, 1] and the
state rescaled by T = diag-like matrix with factors (l, l, l^2) and a
momentum shift, giving transformed variables

    hhat = l h,   phihhat = l phi h,   uhhat = l^2 (u - r) h,

where r(y, t) is the frame velocity.  The transformed system has no
explicit y dependence; its flux, eigensystem, and the energy-based
overtopping boundary functionals live here, together with the
closed-form solutions used for validation.
"""

import numpy as np

from .core import (BalanceLaw, ConfigurationError, EigenDecomposition,
                   StateTransform)

# Depth floor used whenever a state enters an eigensystem or a division.
H_FLOOR = 1e-8


class ShallowWaterLaw(BalanceLaw):
    """Physical shallow water system with tracer, unit gravity."""

    n_vars = 3

    def flux(self, q):
        h, ph, uh = q
        h_safe = max(h, H_FLOOR)
        u = uh / h_safe
        return np.array([uh, u * ph, u * uh + 0.5 * h * h])

    def eigensystem(self, q):
        h, ph, uh = q
        h_safe = max(h, H_FLOOR)
        ph_safe = max(ph, H_FLOOR)
        u = uh / h_safe
        c = np.sqrt(max(h, 0.0))
        lam = np.array([u - c, u, u + c])
        left = np.array([
            [lam[2], 0.0, -1.0],
            [ph_safe, -h_safe, 0.0],
            [lam[0], 0.0, -1.0],
        ])
        return EigenDecomposition(lam, left)


class ShallowWaterTransform(StateTransform):
    """T(r, l) with row factors (l, l, l^2) and the momentum frame shift."""

    def matrix(self, r, l):
        return np.array([
            [l, 0.0, 0.0],
            [0.0, l, 0.0],
            [-r * l * l, 0.0, l * l],
        ])

    def dmatrix_dr(self, r, l):
        out = np.zeros((3, 3))
        out[2, 0] = -l * l
        return out

    def dmatrix_dl(self, r, l):
        return np.array([
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [-2.0 * r * l, 0.0, 2.0 * l],
        ])

    def advection_speed(self, q):
        return q[2] / max(q[0], H_FLOOR)


def sw_transformed_flux(qhat, l):
    """Closed-form transformed flux, any leading shape (..., 3).

    The tracer row uses the kernels' exact concentration ratio so that
    boundary fluxes preserve a uniform tracer bit for bit.
    """
    from .kernels import tracer_ratio

    qhat = np.asarray(qhat, dtype=float)
    h = qhat[..., 0]
    h_safe = np.maximum(h, H_FLOOR)
    w = qhat[..., 2] / (l * l * h_safe)
    f = np.empty_like(qhat)
    f[..., 0] = qhat[..., 2] / (l * l)
    f[..., 1] = tracer_ratio(h, qhat[..., 1]) * f[..., 0]
    f[..., 2] = w * qhat[..., 2] + h * h / (2.0 * l)
    return f


def sw_transformed_source(qhat, y, l, xddot_l, xddot_r):
    """Closed-form transformed source: only the momentum row is forced,
    by -l hhat d(frame velocity)/dt."""
    qhat = np.asarray(qhat, dtype=float)
    drdt = (1.0 - np.asarray(y)) * xddot_l + np.asarray(y) * xddot_r
    src = np.zeros_like(qhat)
    src[..., 2] = -l * qhat[..., 0] * drdt
    return src


def sw_eigensystem(qhat, l, h_floor=H_FLOOR):
    """Eigensystem of the transformed flux Jacobian at one state.

    The state is regularized (depth and tracer column floored) before
    evaluation; speeds are already relative to the moving frame.
    """
    h = max(float(qhat[0]), h_floor)
    ph = max(float(qhat[1]), h_floor)
    uh = float(qhat[2])
    w = uh / (l * l * h)
    c = np.sqrt(h) / (l * np.sqrt(l))
    lam = np.array([w - c, w, w + c])
    left = np.array([
        [l * l * lam[2], 0.0, -1.0],
        [ph, -h, 0.0],
        [l * l * lam[0], 0.0, -1.0],
    ])
    return EigenDecomposition(lam, left)


def sw_recover_physical(qhat, y, l, xdot_l, xdot_r, h_floor=H_FLOOR):
    """Physical (h, u, phi) from transformed states at reference points y."""
    qhat = np.asarray(qhat, dtype=float)
    h = qhat[..., 0] / l
    h_safe = np.maximum(qhat[..., 0], h_floor)
    r = (1.0 - np.asarray(y)) * xdot_l + np.asarray(y) * xdot_r
    u = qhat[..., 2] / (l * h_safe) + r
    phi = qhat[..., 1] / h_safe
    return h, u, phi


# ---------------------------------------------------------------------------
# energy functionals for the overtopping boundary condition


def energy_deficit(h, u, h_b):
    """Specific-energy margin for flow over a barrier of height h_b:
    u^2/2 + (h - h_b) - (3/2) (u h)^(2/3).  Zero at critical overflow."""
    return 0.5 * u * u + (h - h_b) - 1.5 * (u * h) ** (2.0 / 3.0)


def energy_deficit_hat(hhat, uhhat, l, h_b):
    """Transformed energy margin, equal to 2 l^4 h^2 * energy_deficit.

    = uhhat^2 + 2 l hhat^2 (hhat - l h_b) - 3 l^(2/3) hhat^2 uhhat^(2/3).
    """
    cr = np.cbrt(uhhat)
    return (uhhat * uhhat + 2.0 * l * hhat**2 * (hhat - l * h_b)
            - 3.0 * l ** (2.0 / 3.0) * hhat**2 * cr * cr)


def energy_deficit_hat_duh(hhat, uhhat, l, h_b):
    """Partial derivative of energy_deficit_hat with respect to uhhat."""
    return 2.0 * uhhat - 2.0 * l ** (2.0 / 3.0) * hhat**2 / np.cbrt(uhhat)


def energy_gate(hhat, uhhat, l, h_b, delta=1e-8):
    """Piecewise boundary functional for energy-limited overtopping.

    No flow below the barrier level; elsewhere the transformed energy
    margin, extended by tangents below discharge ``delta`` and above the
    critical discharge so the functional stays defined and monotone for
    the Newton iteration.
    """
    if hhat < l * h_b:
        return uhhat
    uh_crit = np.sqrt(l) * hhat ** 1.5 - delta
    if uhhat < delta:
        u0 = delta
    elif uhhat > uh_crit:
        u0 = uh_crit
    else:
        return energy_deficit_hat(hhat, uhhat, l, h_b)
    return (energy_deficit_hat(hhat, u0, l, h_b)
            + energy_deficit_hat_duh(hhat, u0, l, h_b) * (uhhat - u0))


# ---------------------------------------------------------------------------
# closed-form solutions


def dambreak_exact(x, t, x0=0.5):
    """Dam break of still water (h = 1 left of x0, dry right of x0).

    Returns (h, u, wet) where ``wet`` marks locations with fluid; the
    velocity is undefined (returned 0) where dry.  Valid while the
    rarefaction has not reached external boundaries.
    """
    x = np.asarray(x, dtype=float)
    xi = np.where(t > 0.0, (x - x0) / max(t, 1e-300), np.where(x < x0, -np.inf, np.inf))
    h = np.where(xi <= -1.0, 1.0, np.where(xi < 2.0, (2.0 - xi) ** 2 / 9.0, 0.0))
    u = np.where(xi <= -1.0, 0.0, np.where(xi < 2.0, 2.0 * (1.0 + xi) / 3.0, 0.0))
    wet = xi < 2.0
    return h, u, wet


def alphawave_depth(t):
    """Inflow depth history of the simple-wave problem."""
    return 1.0 + 0.1 * np.sin(0.5 * np.pi * np.asarray(t))


def alphawave_depth_dt(t):
    return 0.05 * np.pi * np.cos(0.5 * np.pi * np.asarray(t))


def alphawave_exact(x, t, tol=1e-13):
    """Simple wave emitted at x = 0 with depth history alphawave_depth.

    Along the characteristic launched at time tau the depth is frozen:
    x = (t - tau)(3 sqrt(h0(tau)) - 2), h = h0(tau), u = 2 sqrt(h) - 2.
    The launch time is found by safeguarded bisection; tau < 0 extends
    the initial condition consistently.
    """
    scalar = np.ndim(x) == 0
    x = np.atleast_1d(np.asarray(x, dtype=float))
    h = np.empty_like(x)
    for i, xi in enumerate(x):
        def f(tau):
            return (t - tau) * (3.0 * np.sqrt(alphawave_depth(tau)) - 2.0) - xi
        lo = t - xi / 0.8 - 0.1
        hi = t
        flo, fhi = f(lo), f(hi)
        if fhi > 0.0:  # x = 0 boundary point
            h[i] = alphawave_depth(t)
            continue
        for _ in range(200):
            if hi - lo <= tol:
                break
            mid = 0.5 * (lo + hi)
            if f(mid) > 0.0:
                lo = mid
            else:
                hi = mid
        h[i] = alphawave_depth(0.5 * (lo + hi))
    u = 2.0 * np.sqrt(h) - 2.0
    if scalar:
        return float(h[0]), float(u[0])
    return h, u


def lockrel_front_state(fr):
    """Constant state behind a Froude-condition front fed by still water
    of unit depth: u_f = Fr sqrt(h_f) matched to the alpha invariant
    u + 2 sqrt(h) = 2."""
    sqrt_h = 2.0 / (2.0 + fr)
    return sqrt_h ** 2, fr * sqrt_h


def lockrel_semi_exact(x, t, fr=1.2, x0=1.0):
    """Lock release with a Froude front: undisturbed / fan / front state.

    Returns (h, u).  The rarefaction is centred at x0; the front state
    (h_f, u_f) satisfies the Froude condition, and the front sits at
    x0 + u_f t.
    """
    if t <= 0.0:
        x = np.asarray(x, dtype=float)
        return np.ones_like(x), np.zeros_like(x)
    h_f, u_f = lockrel_front_state(fr)
    xi = (np.asarray(x, dtype=float) - x0) / t
    xi_f = 1.5 * u_f - 1.0
    h = np.where(xi <= -1.0, 1.0, np.where(xi <= xi_f, (2.0 - xi) ** 2 / 9.0, h_f))
    u = np.where(xi <= -1.0, 0.0, np.where(xi <= xi_f, 2.0 * (1.0 + xi) / 3.0, u_f))
    return h, u
