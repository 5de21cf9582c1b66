"""Strong-stability-preserving Runge-Kutta stepping by convex Euler combinations.

Each stage combines the step start value with an explicit Euler step,

.. math::

    v^{[s+1]} = \\eta^{[s]} v^{[0]} + (1 - \\eta^{[s]}) E(v^{[s]}),

so any convex-invariant property of the Euler map (TVD, positivity,
contraction towards a reference trajectory) is inherited by the full
step.  The stage times follow the same combination,
``t[s+1] = eta[s] t[0] + (1 - eta[s]) (t[s] + dt)``.
"""

import numpy as np

from .core import ConfigurationError


class StepRejected(Exception):
    """An Euler map reported an admissible step smaller than attempted.

    ``dt_admissible`` is the largest step the map would accept; the
    caller should retry with a smaller step.
    """

    def __init__(self, dt_admissible):
        super().__init__(f"step rejected, admissible dt = {dt_admissible}")
        self.dt_admissible = dt_admissible


class RkScheme:
    """Convex-combination coefficients eta[s], one per stage."""

    def __init__(self, eta):
        eta = tuple(float(e) for e in eta)
        if len(eta) == 0:
            raise ConfigurationError("scheme needs at least one stage")
        for e in eta:
            if not 0.0 <= e < 1.0:
                raise ConfigurationError(f"stage coefficient {e} outside [0, 1)")
        if eta[0] != 0.0:
            raise ConfigurationError("first stage must be a plain Euler step (eta[0] = 0)")
        self.eta = eta

    @property
    def n_stages(self):
        return len(self.eta)


# Optimal SSP schemes of order 1, 2, 3 with unit effective CFL.
SSP_SCHEMES = {
    1: RkScheme([0.0]),
    2: RkScheme([0.0, 0.5]),
    3: RkScheme([0.0, 0.75, 1.0 / 3.0]),
}


def ssp_scheme(order):
    try:
        return SSP_SCHEMES[order]
    except KeyError:
        raise ConfigurationError(f"no SSP scheme of order {order}; available: 1, 2, 3")


class StageInfo:
    """Context handed to the Euler map at each stage.

    Carries the stage index, the convex coefficient for the upcoming
    combination, and the value and time at the start of the full step
    (needed by Euler maps that couple to the stage combination, such as
    constraint-consistent boundary solvers).
    """

    def __init__(self, stage, eta, y_start, t_start):
        self.stage = stage
        self.eta = eta
        self.y_start = y_start
        self.t_start = t_start


def rk_step(y, t, dt, scheme, euler):
    """Advance ``y`` from ``t`` by ``dt`` with the given SSP scheme.

    ``euler(y, t, dt, stage)`` must return ``(y_new, dt_admissible)``
    where ``dt_admissible`` bounds the step the map considers stable
    (``np.inf`` if unconditionally stable).  Raises :class:`StepRejected`
    if any stage reports an admissible step smaller than ``dt``.

    Returns ``(y_next, dt_admissible)`` with the smallest admissible
    step reported over the stages.
    """
    y0 = np.array(y, dtype=float, copy=True)
    ys = y0
    ts = t
    admissible = np.inf
    for s, eta in enumerate(scheme.eta):
        y_e, dt_adm = euler(ys, ts, dt, StageInfo(s, eta, y0, t))
        admissible = min(admissible, dt_adm)
        if dt > dt_adm * (1.0 + 1e-9):
            raise StepRejected(admissible)
        ys = eta * y0 + (1.0 - eta) * y_e
        ts = eta * t + (1.0 - eta) * (ts + dt)
    return ys, admissible


def f_tilde(k, s, a, b, c, scheme):
    """Accumulation factor of per-stage perturbations over ``s`` stages.

    For an Euler map that amplifies an error-like quantity by ``k`` and
    adds ``b eta + c`` at a stage with coefficient eta (on top of an
    initial contribution ``a``), the quantity after stage ``s`` is

    f(k; s) = a k^s prod_{beta<s} (1 - eta[beta])
              + sum_{alpha<s} k^alpha (b eta[s-alpha-1] + c)
                prod_{s-alpha<=beta<s} (1 - eta[beta])

    with f(k; 0) = a.  Satisfies the recurrence
    f(k; s+1) = (1 - eta[s]) k f(k; s) + b eta[s] + c.
    """
    eta = scheme.eta
    if not 0 <= s <= len(eta):
        raise ConfigurationError(f"stage count {s} outside 0..{len(eta)}")
    if s == 0:
        return a
    total = a * k**s * np.prod([1.0 - eta[beta] for beta in range(s)])
    for alpha in range(s):
        tail = np.prod([1.0 - eta[beta] for beta in range(s - alpha, s)])
        total += k**alpha * (b * eta[s - alpha - 1] + c) * tail
    return float(total)


def theorem1_coefficient(order):
    """Per-step truncation accumulation factor (7 + 9 S) / (12 + 4 S).

    Equals f_tilde(1; S; 0, -1/2, 1) for the optimal SSP scheme of
    order S: the bound on the distance growth per step towards a
    reference trajectory is K + theorem1_coefficient(S) * L dt^2.
    """
    return (7.0 + 9.0 * order) / (12.0 + 4.0 * order)


def cfl_max_dt(dy, speeds, c_max):
    """Largest stable step: c_max * min_j(dy_j / |speed_j|).

    ``dy`` and ``speeds`` broadcast; zero speeds are ignored (no
    restriction).  Returns np.inf when nothing restricts the step.
    """
    speeds = np.abs(np.asarray(speeds, dtype=float))
    dy = np.broadcast_to(np.asarray(dy, dtype=float), speeds.shape)
    mask = speeds > 0.0
    if not np.any(mask):
        return np.inf
    return c_max * float(np.min(dy[mask] / speeds[mask]))


class StepController:
    """Runs steps at a safety fraction of the reported admissible size.

    The admissible size comes from the previous step (or an initial
    estimate); rejected steps shrink it.  When a stop time is within
    reach of the safe step the controller lands on it exactly.
    """

    def __init__(self, dt_admissible, safety=0.95):
        if not dt_admissible > 0.0:
            raise ConfigurationError(f"initial admissible step must be positive, got {dt_admissible}")
        self.safety = safety
        self.dt_admissible = dt_admissible

    def propose(self, t, t_stop):
        dt = self.safety * self.dt_admissible
        remaining = t_stop - t
        if remaining <= 0.0:
            raise ConfigurationError(f"already past stop time: t={t}, t_stop={t_stop}")
        if remaining <= dt:
            return remaining
        return dt

    def accept(self, dt_admissible):
        self.dt_admissible = dt_admissible

    def reject(self, dt_admissible):
        self.dt_admissible = min(self.dt_admissible, dt_admissible)
