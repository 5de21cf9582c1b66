# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled finite-volume kernels.

Mirrors ``hypbc.kernels.reference`` operation for operation so both
backends produce bitwise identical results (compiled with FP
contraction disabled).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()


cdef inline double dmax(double a, double b) nogil:
    return a if a > b else b


cdef inline double dmin(double a, double b) nogil:
    return a if a < b else b


DEF PHI_CAP = 1e6


cdef inline double tracer_ratio_c(double h, double ph) nogil:
    # true ratio for any positive depth keeps a uniform tracer exact;
    # the cap guards clipped states with tracer but no water column
    cdef double ratio
    if h > 0.0:
        ratio = ph / h
        if ratio > PHI_CAP:
            return PHI_CAP
        if ratio < -PHI_CAP:
            return -PHI_CAP
        return ratio
    return 0.0


def tracer_ratio(h, ph):
    """Tracer concentration phihhat / hhat: exact for positive depth,
    zero on dry states, magnitude capped at PHI_CAP."""
    cdef cnp.ndarray[double, ndim=1] ha = np.atleast_1d(np.ascontiguousarray(h, dtype=np.float64))
    cdef cnp.ndarray[double, ndim=1] pa = np.atleast_1d(np.ascontiguousarray(ph, dtype=np.float64))
    cdef cnp.ndarray[double, ndim=1] out = np.empty_like(ha)
    cdef Py_ssize_t j
    for j in range(ha.shape[0]):
        out[j] = tracer_ratio_c(ha[j], pa[j])
    return out.reshape(np.shape(h))


cdef inline void state_flux(double h, double ph, double uh, double l,
                            double h_floor, double* out) nogil:
    cdef double h_safe = dmax(h, h_floor)
    cdef double w = uh / (l * l * h_safe)
    out[0] = uh / (l * l)
    out[1] = tracer_ratio_c(h, ph) * out[0]
    out[2] = w * uh + h * h / (2.0 * l)


def sw_flux(q, double l, double h_floor):
    """Transformed shallow water flux at an array of states, shape (..., 3)."""
    cdef cnp.ndarray[double, ndim=2] qa = np.ascontiguousarray(q, dtype=np.float64).reshape(-1, 3)
    cdef cnp.ndarray[double, ndim=2] f = np.empty_like(qa)
    cdef Py_ssize_t j, n = qa.shape[0]
    for j in range(n):
        state_flux(qa[j, 0], qa[j, 1], qa[j, 2], l, h_floor, &f[j, 0])
    return f.reshape(np.shape(q))


def sw_max_speeds(q, double l, double h_floor):
    """Per-cell largest characteristic speed magnitude, shape (J,)."""
    cdef cnp.ndarray[double, ndim=2] qa = np.ascontiguousarray(q, dtype=np.float64)
    cdef Py_ssize_t j, n = qa.shape[0]
    cdef cnp.ndarray[double, ndim=1] out = np.empty(n)
    cdef double h_safe, w, c, l15 = l * sqrt(l)
    for j in range(n):
        h_safe = dmax(qa[j, 0], h_floor)
        w = qa[j, 2] / (l * l * h_safe)
        c = sqrt(dmax(qa[j, 0], 0.0)) / l15
        out[j] = dmax(fabs(w - c), fabs(w + c))
    return out


cdef inline double minmod3(double a, double b, double c) nogil:
    cdef double lo = dmin(dmin(a, b), c)
    cdef double hi = dmax(dmax(a, b), c)
    if lo > 0.0:
        return lo
    if hi < 0.0:
        return hi
    return 0.0


def sw_reconstruct(q, ghost_l, ghost_r, double dy, double theta):
    """Limited linear reconstruction at the J - 1 interior interfaces."""
    cdef cnp.ndarray[double, ndim=2] qa = np.ascontiguousarray(q, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] gl = np.ascontiguousarray(ghost_l, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] gr = np.ascontiguousarray(ghost_r, dtype=np.float64)
    cdef Py_ssize_t j, k, nj = qa.shape[0]
    cdef cnp.ndarray[double, ndim=2] slope = np.empty((nj, 3))
    cdef cnp.ndarray[double, ndim=2] qm = np.empty((nj - 1, 3))
    cdef cnp.ndarray[double, ndim=2] qp = np.empty((nj - 1, 3))
    cdef double dlo, dhi
    for j in range(nj):
        for k in range(3):
            dlo = ((qa[j, k] - gl[k]) if j == 0 else (qa[j, k] - qa[j - 1, k])) / dy
            dhi = ((gr[k] - qa[j, k]) if j == nj - 1 else (qa[j + 1, k] - qa[j, k])) / dy
            slope[j, k] = minmod3(theta * dlo, 0.5 * (dlo + dhi), theta * dhi)
    for j in range(nj - 1):
        for k in range(3):
            qm[j, k] = qa[j, k] + 0.5 * dy * slope[j, k]
            qp[j, k] = qa[j + 1, k] - 0.5 * dy * slope[j + 1, k]
            if k < 2:
                qm[j, k] = dmax(qm[j, k], 0.0)
                qp[j, k] = dmax(qp[j, k], 0.0)
    return qm, qp


def sw_interface_flux(qm, qp, double l, double h_floor):
    """Central-upwind numerical flux from interface states, shape (J - 1, 3)."""
    cdef cnp.ndarray[double, ndim=2] am = np.ascontiguousarray(qm, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2] ap = np.ascontiguousarray(qp, dtype=np.float64)
    cdef Py_ssize_t j, k, n = am.shape[0]
    cdef cnp.ndarray[double, ndim=2] flux = np.empty((n, 3))
    cdef double hm, hp, wm, wp, cm, cp, a_plus, a_minus, width
    cdef double fm[3]
    cdef double fp[3]
    cdef double l15 = l * sqrt(l)
    for j in range(n):
        hm = dmax(am[j, 0], h_floor)
        hp = dmax(ap[j, 0], h_floor)
        wm = am[j, 2] / (l * l * hm)
        wp = ap[j, 2] / (l * l * hp)
        cm = sqrt(dmax(am[j, 0], 0.0)) / l15
        cp = sqrt(dmax(ap[j, 0], 0.0)) / l15
        a_plus = dmax(dmax(wm + cm, wp + cp), 0.0)
        a_minus = dmin(dmin(wm - cm, wp - cp), 0.0)
        state_flux(am[j, 0], am[j, 1], am[j, 2], l, h_floor, fm)
        state_flux(ap[j, 0], ap[j, 1], ap[j, 2], l, h_floor, fp)
        width = a_plus - a_minus
        for k in range(3):
            if width > 0.0:
                flux[j, k] = (a_plus * fm[k] - a_minus * fp[k]
                              + (a_plus * a_minus) * (ap[j, k] - am[j, k])) / width
            else:
                flux[j, k] = fm[k]
    return flux
