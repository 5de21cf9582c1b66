"""Core abstractions for 1-D hyperbolic balance laws on moving domains.

A balance law

.. math:: \\partial_t Q + \\partial_x F(Q) = \\Psi(Q, x, t)

is posed on a moving domain ``x_L(t) <= x <= x_R(t)``.  The moving domain
is mapped onto the fixed reference interval ``0 <= y <= 1`` and the state
is rescaled by a (possibly state-independent) matrix ``T(r, l)`` built
from the local frame velocity ``r`` and domain length ``l``.  In the
transformed variables the system is again a balance law

.. math:: \\partial_t \\mathcal{Q} + \\partial_y \\mathcal{F} = \\mathcal{S}

whose flux and source are assembled here from the physical ones.
"""

import numpy as np


class ConfigurationError(ValueError):
    """A problem or solver was set up with inconsistent data."""


# ---------------------------------------------------------------------------
# domain mapping


def map_to_reference(x, x_l, x_r):
    """Map physical coordinates to the reference interval [0, 1]."""
    return (np.asarray(x) - x_l) / (x_r - x_l)


def map_from_reference(y, x_l, x_r):
    """Map reference coordinates back to the physical domain."""
    return x_l + np.asarray(y) * (x_r - x_l)


def frame_velocity(y, xdot_l, xdot_r):
    """Velocity of the moving frame, linear in y between the endpoint rates."""
    y = np.asarray(y)
    return (1.0 - y) * xdot_l + y * xdot_r


def transform_speed(lam, r, l):
    """Convert a physical wave speed to the reference frame: (lam - r) / l."""
    return (lam - r) / l


class MovingFrame:
    """Instantaneous kinematics of the domain transform.

    Parameters
    ----------
    x_l, x_r : float
        Current endpoint positions.
    xdot_l, xdot_r : float
        Endpoint velocities.
    xddot_l, xddot_r : float
        Endpoint accelerations; only needed when evaluating the
        transformed source, which contains d(frame velocity)/dt.
    """

    def __init__(self, x_l, x_r, xdot_l=0.0, xdot_r=0.0, xddot_l=0.0, xddot_r=0.0):
        if not x_r > x_l:
            raise ConfigurationError(f"empty domain: x_l={x_l}, x_r={x_r}")
        self.x_l = x_l
        self.x_r = x_r
        self.xdot_l = xdot_l
        self.xdot_r = xdot_r
        self.xddot_l = xddot_l
        self.xddot_r = xddot_r

    @property
    def length(self):
        return self.x_r - self.x_l

    @property
    def dlength_dt(self):
        return self.xdot_r - self.xdot_l

    def velocity(self, y):
        return frame_velocity(y, self.xdot_l, self.xdot_r)

    def acceleration(self, y):
        """Explicit time derivative of the frame velocity at fixed y."""
        y = np.asarray(y)
        return (1.0 - y) * self.xddot_l + y * self.xddot_r


# ---------------------------------------------------------------------------
# eigenstructure


class EigenDecomposition:
    """Eigenstructure of a flux Jacobian.

    ``values`` must be ascending, ``left`` holds left eigenvectors as rows,
    ``right`` holds right eigenvectors as columns and must satisfy
    ``left @ right = I``.  If ``right`` is omitted it is computed by
    inversion.
    """

    def __init__(self, values, left, right=None, tol=1e-10):
        values = np.asarray(values, dtype=float)
        left = np.asarray(left, dtype=float)
        n = values.shape[0]
        if left.shape != (n, n):
            raise ConfigurationError(f"left eigenvector matrix is {left.shape}, expected {(n, n)}")
        if np.any(np.diff(values) < -tol * max(1.0, np.max(np.abs(values)))):
            raise ConfigurationError(f"eigenvalues not ascending: {values}")
        if right is not None:
            right = np.asarray(right, dtype=float)
            resid = left @ right - np.eye(n)
            if np.max(np.abs(resid)) > tol * max(1.0, np.max(np.abs(left)) * np.max(np.abs(right))):
                raise ConfigurationError("left and right eigenvectors are not mutually inverse")
        self.values = values
        self.left = left
        self._right = right

    @property
    def right(self):
        # computed on demand; most consumers only need the left rows
        if self._right is None:
            self._right = np.linalg.inv(self.left)
        return self._right

    @property
    def n(self):
        return self.values.shape[0]


def transform_eigensystem(eig, transform, r, l):
    """Push a physical eigensystem through the domain transform.

    Speeds map as (lam - r)/l and left rows pick up a factor of T^-1
    (right columns a factor of T), so biorthonormality is preserved.
    """
    t_mat = transform.matrix(r, l)
    left = eig.left @ np.linalg.inv(t_mat)
    right = t_mat @ eig.right
    return EigenDecomposition(transform_speed(eig.values, r, l), left, right)


# ---------------------------------------------------------------------------
# balance law and transform


class BalanceLaw:
    """A physical 1-D balance law dQ/dt + dF/dx = Psi.

    Subclasses provide the flux, the source (default zero) and the
    eigensystem of dF/dQ.
    """

    n_vars = None

    def flux(self, q):
        raise NotImplementedError

    def source(self, q, x, t):
        return np.zeros_like(q)

    def eigensystem(self, q):
        raise NotImplementedError


class StateTransform:
    """State rescaling matrix T(r, l) and the advection split of the flux.

    The physical flux is split as F = u Q + F_hat where ``u`` is the
    advective speed used by the transform; ``F_hat`` is whatever remains.
    Subclasses provide ``matrix``, its partial derivatives with respect
    to ``r`` and ``l``, and ``advection_speed``.
    """

    def matrix(self, r, l):
        raise NotImplementedError

    def dmatrix_dr(self, r, l):
        raise NotImplementedError

    def dmatrix_dl(self, r, l):
        raise NotImplementedError

    def advection_speed(self, q):
        raise NotImplementedError


class IdentityTransform(StateTransform):
    """T = I: plain coordinate mapping with no state rescaling."""

    def __init__(self, n):
        self.n = n

    def matrix(self, r, l):
        return np.eye(self.n)

    def dmatrix_dr(self, r, l):
        return np.zeros((self.n, self.n))

    def dmatrix_dl(self, r, l):
        return np.zeros((self.n, self.n))

    def advection_speed(self, q):
        return 0.0


def transform_state(transform, q, r, l):
    """Physical state to transformed state: Qhat = T(r, l) Q."""
    return transform.matrix(r, l) @ q


def untransform_state(transform, qhat, r, l):
    """Transformed state back to physical: Q = T(r, l)^-1 Qhat."""
    return np.linalg.solve(transform.matrix(r, l), qhat)


def transformed_flux(law, transform, qhat, y, frame):
    """Reference-frame flux of the transformed balance law.

    F_ref = ((u - r) Qhat + T (F(Q) - u Q)) / l  with Q = T^-1 Qhat.
    """
    l = frame.length
    r = frame.velocity(y)
    t_mat = transform.matrix(r, l)
    q = np.linalg.solve(t_mat, qhat)
    u = transform.advection_speed(q)
    f_hat = law.flux(q) - u * q
    return ((u - r) * qhat + t_mat @ f_hat) / l


def transformed_source(law, transform, qhat, y, t, frame):
    """Reference-frame source of the transformed balance law.

    Contains the physical source pushed through T plus geometric terms
    from the time dependence of the transform.
    """
    l = frame.length
    ldot = frame.dlength_dt
    r = frame.velocity(y)
    drdt = frame.acceleration(y)
    t_mat = transform.matrix(r, l)
    dt_dr = transform.dmatrix_dr(r, l)
    dt_dl = transform.dmatrix_dl(r, l)
    q = np.linalg.solve(t_mat, qhat)
    u = transform.advection_speed(q)
    f_hat = law.flux(q) - u * q
    x = map_from_reference(y, frame.x_l, frame.x_r)
    src = drdt * (dt_dr @ q)
    src = src + ldot * ((dt_dl - t_mat / l + (u - r) / l * dt_dr) @ q)
    src = src + (ldot / l) * (dt_dr @ f_hat)
    src = src + t_mat @ law.source(q, x, t)
    return src


# ---------------------------------------------------------------------------
# grid


class Grid1D:
    """Uniform finite-volume grid on the reference interval [0, 1].

    Boundary values live at y = 0 and y = 1; the distance from the last
    cell centre to the boundary is dy / 2.
    """

    def __init__(self, n_cells):
        if n_cells < 4:
            raise ConfigurationError(f"need at least 4 cells, got {n_cells}")
        self.n_cells = n_cells
        self.edges = np.linspace(0.0, 1.0, n_cells + 1)
        self.centers = 0.5 * (self.edges[:-1] + self.edges[1:])
        self.dy = 1.0 / n_cells
        # spacing between the boundary point and the adjacent cell centre
        self.dy_boundary = 0.5 * self.dy

    def physical_centers(self, x_l, x_r):
        return map_from_reference(self.centers, x_l, x_r)
