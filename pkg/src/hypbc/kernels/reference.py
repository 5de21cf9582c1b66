"""Numpy reference implementation of the finite-volume hot kernels.

State layout: ``q`` has shape (J, 3) holding the transformed shallow
water variables (hhat, phihhat, uhhat) per cell.  The tracer flux is
computed as (phihhat / hhat) * mass_flux so that a spatially uniform
tracer concentration is preserved exactly (a power-of-two concentration
survives in exact floating point).  The true depth is used in the ratio
whenever it is positive, however small: flooring it would spoil the
exactness in barely-wet cells.  A large cap guards against blow-up when
the clipped reconstruction leaves tracer column without water column.
"""

import numpy as np

PHI_CAP = 1e6


def tracer_ratio(h, ph):
    """Tracer concentration phihhat / hhat: exact for positive depth,
    zero on dry states, magnitude capped at PHI_CAP."""
    h = np.asarray(h, dtype=float)
    ph = np.asarray(ph, dtype=float)
    ratio = ph / np.where(h > 0.0, h, 1.0)
    return np.where(h > 0.0, np.clip(ratio, -PHI_CAP, PHI_CAP), 0.0)


def sw_flux(q, l, h_floor):
    """Transformed shallow water flux at an array of states, shape (..., 3)."""
    q = np.asarray(q, dtype=float)
    h = q[..., 0]
    h_safe = np.maximum(h, h_floor)
    w = q[..., 2] / (l * l * h_safe)
    f = np.empty_like(q)
    f[..., 0] = q[..., 2] / (l * l)
    f[..., 1] = tracer_ratio(h, q[..., 1]) * f[..., 0]
    f[..., 2] = w * q[..., 2] + h * h / (2.0 * l)
    return f


def sw_max_speeds(q, l, h_floor):
    """Per-cell largest characteristic speed magnitude, shape (J,)."""
    q = np.asarray(q, dtype=float)
    h_safe = np.maximum(q[..., 0], h_floor)
    w = q[..., 2] / (l * l * h_safe)
    c = np.sqrt(np.maximum(q[..., 0], 0.0)) / (l * np.sqrt(l))
    return np.maximum(np.abs(w - c), np.abs(w + c))


def minmod3(a, b, c):
    """Componentwise generalized minmod of three slope candidates."""
    lo = np.minimum(np.minimum(a, b), c)
    hi = np.maximum(np.maximum(a, b), c)
    out = np.where(lo > 0.0, lo, 0.0)
    return np.where(hi < 0.0, hi, out)


def sw_reconstruct(q, ghost_l, ghost_r, dy, theta):
    """Limited linear reconstruction at the J - 1 interior interfaces.

    ``ghost_l``/``ghost_r`` are the exterior values used by the slope
    stencil of the first and last cell.  Interface water columns are
    clipped at zero.  Returns (q_minus, q_plus), each (J - 1, 3).
    """
    q = np.asarray(q, dtype=float)
    ext = np.vstack([ghost_l, q, ghost_r])
    d = np.diff(ext, axis=0) / dy
    slope = minmod3(theta * d[:-1], 0.5 * (d[:-1] + d[1:]), theta * d[1:])
    qm = q[:-1] + 0.5 * dy * slope[:-1]
    qp = q[1:] - 0.5 * dy * slope[1:]
    qm[:, :2] = np.maximum(qm[:, :2], 0.0)
    qp[:, :2] = np.maximum(qp[:, :2], 0.0)
    return qm, qp


def sw_interface_flux(qm, qp, l, h_floor):
    """Central-upwind numerical flux from interface states, shape (J - 1, 3)."""
    qm = np.asarray(qm, dtype=float)
    qp = np.asarray(qp, dtype=float)
    hm = np.maximum(qm[:, 0], h_floor)
    hp = np.maximum(qp[:, 0], h_floor)
    wm = qm[:, 2] / (l * l * hm)
    wp = qp[:, 2] / (l * l * hp)
    cm = np.sqrt(np.maximum(qm[:, 0], 0.0)) / (l * np.sqrt(l))
    cp = np.sqrt(np.maximum(qp[:, 0], 0.0)) / (l * np.sqrt(l))
    a_plus = np.maximum(np.maximum(wm + cm, wp + cp), 0.0)
    a_minus = np.minimum(np.minimum(wm - cm, wp - cp), 0.0)
    fm = sw_flux(qm, l, h_floor)
    fp = sw_flux(qp, l, h_floor)
    width = a_plus - a_minus
    # Degenerate interfaces (both speeds zero) take the left flux.
    safe = np.where(width > 0.0, width, 1.0)
    flux = (a_plus[:, None] * fm - a_minus[:, None] * fp
            + (a_plus * a_minus)[:, None] * (qp - qm)) / safe[:, None]
    return np.where(width[:, None] > 0.0, flux, fm)
