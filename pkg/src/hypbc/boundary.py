"""Characteristic-based boundary treatment: extrapolation, forcing, events.

At a boundary the state and the boundary velocity form a small vector of
unknowns v = (Q_R, xdot_R).  Outgoing characteristic equations are kept,
augmented with a relaxation (forcing) term that pulls the boundary value
towards an extrapolation of the interior solution,

    l (dQ_R/dt) = -(lam) l (dQ/dy)_R + l S' + D l (Qhat_R - Q_R),

while incoming characteristics are replaced by imposed boundary
conditions.  This module holds the generic ingredients: interior
extrapolation, stencil moment validation, the forcing coefficient and
its stability bound, ghost-point identities, and bisection event
location.  The system-specific row assembly lives with the balance law.
"""

import numpy as np

from .core import ConfigurationError

# Characteristics with transformed speed above -DELTA_STATIC are treated
# as outgoing or static and keep their characteristic equation.
DELTA_STATIC = 1e-8


def extrapolate_boundary(q_j, q_jm1, dy_interior, dy_boundary, order):
    """Extrapolated boundary target Qhat_R from the last interior cells.

    order 0: copy of the adjacent value.  order 1: linear extrapolation,
    Qhat_R = Q_J + dy_boundary (Q_J - Q_Jm1) / dy_interior.
    """
    q_j = np.asarray(q_j, dtype=float)
    if order == 0:
        return q_j.copy()
    if order == 1:
        return q_j + dy_boundary * (q_j - np.asarray(q_jm1)) / dy_interior
    raise ConfigurationError(f"extrapolation order must be 0 or 1, got {order}")


def boundary_gradient(q_r, q_j, dy_boundary, order):
    """Boundary gradient estimate used by the outgoing rows.

    order 0 pairs with a zero gradient; order 1 uses the live boundary
    value: (Q_R - Q_J) / dy_boundary.
    """
    q_r = np.asarray(q_r, dtype=float)
    if order == 0:
        return np.zeros_like(q_r)
    if order == 1:
        return (q_r - np.asarray(q_j)) / dy_boundary
    raise ConfigurationError(f"extrapolation order must be 0 or 1, got {order}")


def validate_stencil(kappa, gamma, y_cells, y_r, dy_boundary, order, tol=1e-12):
    """Check the moment conditions of an extrapolation/gradient stencil.

    Value weights kappa must reproduce constants and (for order 1)
    linears at the boundary point; gradient weights gamma must kill
    constants and reproduce linear variation scaled by dy_boundary.
    Order 0 is exempt from the gradient linear-moment condition (its
    gradient is identically zero).
    """
    kappa = np.asarray(kappa, dtype=float)
    gamma = np.asarray(gamma, dtype=float)
    offsets = np.asarray(y_cells, dtype=float) - y_r
    checks = {"kappa_const": abs(np.sum(kappa) - 1.0)}
    if order >= 1:
        checks["kappa_linear"] = abs(np.sum(kappa * offsets))
    checks["gamma_const"] = abs(np.sum(gamma))
    if order >= 1:
        checks["gamma_linear"] = abs(np.sum(gamma * offsets) - dy_boundary)
    bad = {k: v for k, v in checks.items() if not v <= tol}
    if bad:
        raise ConfigurationError(f"stencil moment conditions violated: {bad}")
    return checks


def forcing_coefficients(lam_r, lam_j, d_coeff, dy_boundary, scope="outgoing-static",
                         delta=DELTA_STATIC):
    """Per-characteristic forcing coefficients D^(m).

    D^(m) = 4 d_coeff lam_max / dy_boundary where lam_max is the largest
    characteristic speed magnitude over the two evaluation points.  With
    scope ``outgoing-static`` only characteristics whose speed exceeds
    -delta at either evaluation point are forced; ``all`` forces every
    row (which degrades non-reflecting boundaries to first order).
    """
    lam_r = np.asarray(lam_r, dtype=float)
    lam_j = np.asarray(lam_j, dtype=float)
    lam_max = max(np.max(np.abs(lam_r)), np.max(np.abs(lam_j)))
    base = 4.0 * d_coeff * lam_max / dy_boundary
    if scope == "all":
        return np.full(lam_r.shape, base)
    if scope == "outgoing-static":
        return np.where(np.maximum(lam_r, lam_j) > -delta, base, 0.0)
    raise ConfigurationError(f"unknown forcing scope {scope!r}")


def forcing_bound_ok(d_coeff, c_max=0.125, gamma_r=1.0):
    """Stability bound on the forcing strength: 0 <= 4 d < 1/c_max - gamma_r."""
    return 0.0 <= 4.0 * d_coeff < 1.0 / c_max - gamma_r


def ghost_curvature(q_hat, q_r, dy_boundary):
    """Implied second difference at the ghost point: 2 (Qhat_R - Q_R) / dy_b.

    The forcing term D l (Qhat - Q) is equivalent to a diffusive flux
    from a ghost cell carrying this curvature, which is how the
    stability bound is obtained.
    """
    return 2.0 * (np.asarray(q_hat) - np.asarray(q_r)) / dy_boundary


def select_characteristic_rows(lam_select, n_char):
    """Indices of the characteristic equations to keep, fastest first.

    The n_char largest speeds (outgoing and static characteristics)
    keep their characteristic rows; the remaining (incoming) rows are
    replaced by imposed conditions.
    """
    m = len(lam_select)
    if not 0 <= n_char <= m:
        raise ConfigurationError(f"cannot keep {n_char} of {m} characteristic rows")
    order = np.argsort(lam_select)[::-1]
    return list(order[:n_char])


def count_incoming(lam_select, delta=DELTA_STATIC):
    """Number of strictly incoming characteristics (speed < -delta)."""
    return int(np.sum(np.asarray(lam_select) < -delta))


def bisect_event(f, s_lo, s_hi, tol, max_iter=200):
    """Locate a downward sign change of ``f`` on [s_lo, s_hi] by bisection.

    ``f(s_lo)`` must be >= 0 and ``f(s_hi)`` < 0.  Returns the left edge
    of the final bracket (a step size at which the event has not yet
    triggered, within ``tol`` of the crossing).
    """
    f_lo = f(s_lo)
    f_hi = f(s_hi)
    if f_lo < 0.0:
        raise ConfigurationError("event already triggered at the bracket start")
    if f_hi >= 0.0:
        raise ConfigurationError("no event inside the bracket")
    for _ in range(max_iter):
        if s_hi - s_lo <= tol:
            break
        mid = 0.5 * (s_lo + s_hi)
        if f(mid) >= 0.0:
            s_lo = mid
        else:
            s_hi = mid
    return s_lo
