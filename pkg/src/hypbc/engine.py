"""Moving-domain shallow water simulation with DAE boundary coupling.

The global unknown vector stacks the bulk cell averages, one small
boundary vector v = (hhat, phihhat, uhhat, xdot) per side, and the two
endpoint positions.  Every Euler substep first solves the boundary
systems (outgoing characteristic rows plus imposed conditions), then
updates the bulk with a second-order central-upwind scheme whose
momentum source uses the boundary accelerations just computed.

Both boundaries are handled by one right-boundary code path; the left
boundary is mirrored (y -> 1 - y, velocities negated) before and after
its solve.
"""

import numpy as np

from . import kernels
from .boundary import (DELTA_STATIC, bisect_event, boundary_gradient,
                       extrapolate_boundary, forcing_coefficients,
                       select_characteristic_rows)
from .core import ConfigurationError, Grid1D
from .dae import NonConvergenceError, RankDeficiencyError, solve_dense
from .ssprk import (StageInfo, StepController, StepRejected, cfl_max_dt,
                    rk_step, ssp_scheme)
from .swe import (H_FLOOR, alphawave_depth, alphawave_depth_dt,
                  alphawave_exact, energy_deficit_hat, energy_gate,
                  sw_eigensystem, sw_transformed_flux)

C_MAX = 0.125          # central-upwind CFL bound
THETA = 1.5            # generalized minmod parameter
ZERO_TOL = 1e-8        # positivity variables below this are zeroed
DRY_LOW = 1e-9         # supercritical mode abandoned below this depth
BLOWUP = 1e10
BOUNDARY_CLAMP = 1e4   # cap on boundary value relative to adjacent cell

BOUNDARY_POLICIES = ("rknr", "rk0")


def mirror(v):
    """Reflect a boundary vector or state triple (velocities negate)."""
    out = np.array(v, dtype=float)
    out[2:] *= -1.0
    return out


# ---------------------------------------------------------------------------
# boundary modes


class BoundaryMode:
    """One algebraic closure of the boundary system.

    ``g`` receives the oriented boundary vector v = (hhat, phihhat,
    uhhat, xdot), the evaluation time, and the side context.  ``g_v``
    defaults to finite differences.
    """

    name = None
    n_alg = 0
    nonreflecting = False

    def g(self, v, t, ctx):
        return np.zeros(0)

    def g_v(self, v, t, ctx, eps=1e-7):
        jac = np.zeros((self.n_alg, 4))
        for j in range(4):
            h = eps * max(1.0, abs(v[j]))
            vp = np.array(v)
            vm = np.array(v)
            vp[j] += h
            vm[j] -= h
            jac[:, j] = (self.g(vp, t, ctx) - self.g(vm, t, ctx)) / (2.0 * h)
        return jac

    def g_t(self, v, t, ctx):
        return np.zeros(self.n_alg)


class WallMode(BoundaryMode):
    """Impermeable stationary wall: zero discharge, zero motion."""

    name = "wall"
    n_alg = 2

    def g(self, v, t, ctx):
        return np.array([v[2], v[3]])

    def g_v(self, v, t, ctx):
        return np.array([[0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]])


class NonReflectingMode(BoundaryMode):
    """Fixed boundary passing outgoing waves; incoming characteristics
    keep forcing-only rows (no advection term)."""

    name = "nonreflecting"
    n_alg = 1
    nonreflecting = True

    def g(self, v, t, ctx):
        return np.array([v[3]])

    def g_v(self, v, t, ctx):
        return np.array([[0.0, 0.0, 0.0, 1.0]])


class DirichletDepthMode(BoundaryMode):
    """Imposed depth history and inflow tracer on a fixed boundary."""

    name = "dirichlet"
    n_alg = 3

    def __init__(self, depth, depth_dt, phi_in=1.0):
        self.depth = depth
        self.depth_dt = depth_dt
        self.phi_in = phi_in

    def g(self, v, t, ctx):
        return np.array([v[0] - ctx.l_alg * self.depth(t),
                         v[1] - self.phi_in * v[0],
                         v[3]])

    def g_v(self, v, t, ctx):
        return np.array([[1.0, 0.0, 0.0, 0.0],
                         [-self.phi_in, 1.0, 0.0, 0.0],
                         [0.0, 0.0, 0.0, 1.0]])

    def g_t(self, v, t, ctx):
        return np.array([-ctx.l_alg * self.depth_dt(t), 0.0, 0.0])


class FroudeFrontMode(BoundaryMode):
    """Moving front at a fixed Froude number: fluid moves with the
    boundary (zero relative discharge) at speed Fr sqrt(h)."""

    name = "froude"
    n_alg = 2

    def __init__(self, froude):
        self.froude = froude

    def g(self, v, t, ctx):
        h_safe = max(v[0], H_FLOOR)
        return np.array([v[2], v[3] - self.froude * np.sqrt(h_safe / ctx.l_alg)])

    def g_v(self, v, t, ctx):
        h_safe = max(v[0], H_FLOOR)
        return np.array([
            [0.0, 0.0, 1.0, 0.0],
            [-0.5 * self.froude / np.sqrt(h_safe * ctx.l_alg), 0.0, 0.0, 1.0],
        ])

    def g_t(self, v, t, ctx):
        # depth fixed, l(t) varies at rate ldot
        h_safe = max(v[0], H_FLOOR)
        ldot = v[3] + ctx.ldot_offset
        return np.array([0.0, 0.5 * self.froude * np.sqrt(h_safe) * ctx.l_alg ** -1.5 * ldot])


class SubcriticalEnergyMode(BoundaryMode):
    """Energy-limited overtopping of a barrier on a fixed boundary."""

    name = "subcritical"
    n_alg = 2

    def __init__(self, h_b):
        self.h_b = h_b

    def g(self, v, t, ctx):
        return np.array([energy_gate(v[0], v[2], ctx.l_alg, self.h_b), v[3]])

    def g_v(self, v, t, ctx, eps=1e-7):
        jac = np.zeros((2, 4))
        for j in (0, 2):
            h = eps * max(1.0, abs(v[j]))
            vp = np.array(v)
            vm = np.array(v)
            vp[j] += h
            vm[j] -= h
            jac[0, j] = (energy_gate(vp[0], vp[2], ctx.l_alg, self.h_b)
                         - energy_gate(vm[0], vm[2], ctx.l_alg, self.h_b)) / (2.0 * h)
        jac[1, 3] = 1.0
        return jac


class SupercriticalOutflowMode(BoundaryMode):
    """Supercritical outflow over the barrier: no condition on the state,
    only the boundary position is pinned."""

    name = "supercritical"
    n_alg = 1

    def g(self, v, t, ctx):
        return np.array([v[3]])

    def g_v(self, v, t, ctx):
        return np.array([[0.0, 0.0, 0.0, 1.0]])


class BoundaryConditionSpec:
    """A set of modes with transition logic."""

    def __init__(self, modes, initial):
        self.modes = {m.name: m for m in modes}
        self.initial = initial

    def mode(self, name):
        return self.modes[name]

    def hysteresis(self, name, w, ctx):
        """Mode override evaluated inside the boundary iteration."""
        return name

    def events(self, name):
        """List of (event_function, new_mode) watched in mode ``name``.

        Event functions receive (v_r, q_j, l) in the side's oriented
        frame and fire when their value drops below zero.
        """
        return []


class EnergyOvertoppingCondition(BoundaryConditionSpec):
    """Barrier overtopping with supercritical/subcritical switching."""

    def __init__(self, h_b):
        super().__init__([SubcriticalEnergyMode(h_b), SupercriticalOutflowMode()],
                         "subcritical")
        self.h_b = h_b

    def hysteresis(self, name, w, ctx):
        if name == "supercritical":
            h_r = w[0] / ctx.l
            h_j = ctx.q_j[0] / ctx.l
            if min(h_r, h_j) < DRY_LOW:
                return "subcritical"
        return name

    def _ratio(self, q_j, v_r, l):
        lam1 = sw_eigensystem(q_j, l).values[0]
        denom = min(np.sqrt(max(v_r[0] / l, 0.0)), 1e-4)
        if denom == 0.0:
            return np.copysign(np.inf, lam1) if lam1 != 0.0 else 0.0
        return lam1 / denom

    def enter_supercritical(self, v_r, q_j, l):
        args = (self._ratio(q_j, v_r, l),
                energy_deficit_hat(q_j[0], q_j[2], l, self.h_b) * 1e12,
                min(q_j[0], v_r[0]) * 1e6 - 1.0)
        return -min(args) + 1e-3

    def exit_supercritical(self, v_r, q_j, l):
        args = (self._ratio(q_j, v_r, l),
                energy_deficit_hat(q_j[0], q_j[2], l, self.h_b) * 1e12,
                min(q_j[0], v_r[0]) * 1e7 - 1.0)
        return min(args) + 1e-3

    def events(self, name):
        if name == "supercritical":
            return [(self.exit_supercritical, "subcritical")]
        return [(self.enter_supercritical, "supercritical")]


def wall_condition():
    return BoundaryConditionSpec([WallMode()], "wall")


def nonreflecting_condition():
    return BoundaryConditionSpec([NonReflectingMode()], "nonreflecting")


def dirichlet_condition(depth, depth_dt, phi_in=1.0):
    return BoundaryConditionSpec([DirichletDepthMode(depth, depth_dt, phi_in)],
                                 "dirichlet")


def froude_condition(froude):
    return BoundaryConditionSpec([FroudeFrontMode(froude)], "froude")


def energy_condition(h_b):
    return EnergyOvertoppingCondition(h_b)


# ---------------------------------------------------------------------------
# boundary solve


class SideContext:
    """Data a boundary solve needs about its side, in oriented frame."""

    def __init__(self, l, q_j, q_jm1, dy_boundary, dy_interior, ldot_offset, opts,
                 l_alg=None):
        self.l = l
        self.q_j = q_j
        self.q_jm1 = q_jm1
        self.dy_b = dy_boundary
        self.dy_int = dy_interior
        # ldot = v[3] + ldot_offset (rate of change of the domain length)
        self.ldot_offset = ldot_offset
        self.opts = opts
        # domain length at the algebraic evaluation point: the stage
        # combination advances the endpoints with known start-of-substep
        # rates, so this is fixed during the Newton iteration
        self.l_alg = l if l_alg is None else l_alg


class SideAux:
    """Mutable per-side solver state carried across steps."""

    def __init__(self, mode_name, zeroed=frozenset()):
        self.mode_name = mode_name
        self.zeroed = frozenset(zeroed)
        self.seeds = {}
        # events are suppressed below this time after a switch attempt
        # failed to stick, so the run cannot stall refiring it
        self.mute_until = 0.0

    def snapshot(self):
        aux = SideAux(self.mode_name, self.zeroed)
        aux.seeds = dict(self.seeds)
        aux.mute_until = self.mute_until
        return aux

    def restore(self, other):
        self.mode_name = other.mode_name
        self.zeroed = other.zeroed
        self.seeds = dict(other.seeds)
        self.mute_until = other.mute_until


def _characteristic_block(v, t, ctx, mode, zeroed):
    """Differential rows of the boundary system at substep-start values.

    Returns (b_mat, b_rate, zero_rows): kept characteristic rows (with
    the acceleration column), their right-hand-side rates, and the list
    of zeroed variable indices whose rows were replaced.
    """
    opts = ctx.opts
    l = ctx.l
    q_r = v[:3]
    eig_sel = sw_eigensystem(ctx.q_j, l)
    if opts.eigen_policy == "center":
        eig_ev = sw_eigensystem(0.5 * (np.asarray(ctx.q_j) + q_r), l)
    else:
        eig_ev = sw_eigensystem(q_r, l)
    d_coeffs = forcing_coefficients(eig_ev.values, eig_sel.values, opts.d_coeff,
                                    ctx.dy_b, opts.scope)
    q_hat = extrapolate_boundary(ctx.q_j, ctx.q_jm1, ctx.dy_int, ctx.dy_b, opts.extrap)
    grad = boundary_gradient(q_r, ctx.q_j, ctx.dy_b, opts.extrap)
    keep = select_characteristic_rows(eig_sel.values, 4 - mode.n_alg)
    zero_rows = sorted(zeroed)[: len(keep)]
    keep = keep[len(zero_rows):]
    b_mat = np.zeros((len(keep), 4))
    b_rate = np.zeros(len(keep))
    for i, m in enumerate(keep):
        lrow = eig_ev.left[m]
        b_mat[i, :3] = lrow
        # acceleration of the boundary enters the momentum source
        b_mat[i, 3] = lrow[2] * l * max(q_r[0], 0.0)
        rate = d_coeffs[m] * (lrow @ (q_hat - q_r))
        if not (mode.nonreflecting and eig_sel.values[m] < -DELTA_STATIC):
            rate -= eig_ev.values[m] * (lrow @ grad)
        b_rate[i] = rate
    return b_mat, b_rate, zero_rows


def _algebraic_rows(w, t, ctx, mode, zero_rows):
    g_list = [np.array([w[i] for i in zero_rows])] if zero_rows else []
    gv_list = []
    if zero_rows:
        gz = np.zeros((len(zero_rows), 4))
        for k, i in enumerate(zero_rows):
            gz[k, i] = 1.0
        gv_list.append(gz)
    g_list.append(np.atleast_1d(mode.g(w, t, ctx)))
    gv_list.append(np.atleast_2d(mode.g_v(w, t, ctx)))
    return np.concatenate(g_list), np.vstack(gv_list)


def newton_boundary_euler(aux, cond, v, t, dt, eta, v0, t0, ctx, stage,
                          tol=1e-12, max_iter=60):
    """Constraint-consistent Euler update of one boundary vector.

    Newton iteration on the stage increment dv: differential rows are
    frozen at substep-start values, algebraic rows are evaluated at the
    stage combination w = eta v0 + (1 - eta)(v + dv).  Variables whose
    unconstrained update falls below the positivity floor are zeroed by
    replacing the fastest characteristic rows with pin-to-zero rows.
    """
    mode_name = aux.mode_name
    dv = aux.seeds.get(stage)
    if dv is None:
        dv = np.zeros(4)
    t_target = eta * t0 + (1.0 - eta) * (t + dt)
    zeroed = set()
    prev_zeroed = None
    block = {}
    for it in range(max_iter):
        w = eta * v0 + (1.0 - eta) * (v + dv)
        new_name = cond.hysteresis(mode_name, w, ctx)
        if new_name != mode_name:
            mode_name = new_name
            block.clear()
        mode = cond.mode(mode_name)
        if it > 0:
            zeroed |= {i for i in (0, 1) if w[i] < ZERO_TOL}
        key = frozenset(zeroed)
        if key not in block:
            block[key] = _characteristic_block(v, t, ctx, mode, key)
        b_mat, b_rate, zero_rows = block[key]
        g_alg, g_jac = _algebraic_rows(w, t_target, ctx, mode, zero_rows)
        gv = (1.0 - eta) * g_jac
        mat = np.vstack([b_mat, gv])
        rhs = np.concatenate([b_rate * dt, gv @ dv - g_alg])
        dv_new = solve_dense(mat, rhs)
        if it == 0:
            # zeroing decided from the unconstrained update so that a
            # previously zeroed variable can rewet
            w_probe = eta * v0 + (1.0 - eta) * (v + dv_new)
            zeroed = {i for i in (0, 1) if w_probe[i] < ZERO_TOL}
        delta = np.max(np.abs(dv_new - dv))
        settled = (zeroed == prev_zeroed)
        prev_zeroed = set(zeroed)
        dv = dv_new
        if it > 0 and settled and delta < tol:
            break
    else:
        raise NonConvergenceError(f"boundary iteration stalled, |ddv| = {delta:.3e}")
    v_e = v + dv
    for i in zeroed:
        v_e[i] = 0.0
    for i in (0, 1):
        cap = BOUNDARY_CLAMP * ctx.q_j[i]
        if v_e[i] > cap:
            v_e[i] = cap
    # discharge magnitude limited the same way (depth enters the scale
    # so a still adjacent cell does not pin the boundary)
    cap = BOUNDARY_CLAMP * (abs(ctx.q_j[2]) + max(ctx.q_j[0], 0.0))
    if abs(v_e[2]) > cap:
        v_e[2] = np.copysign(cap, v_e[2])
    aux.mode_name = mode_name
    aux.zeroed = frozenset(zeroed)
    aux.seeds[stage] = dv
    return v_e, dv[3] / dt


def rk0_boundary_euler(aux, cond, v, t, dt, ctx):
    """Euler update from the index-reduced boundary ODE (no projection).

    Solves [B; G] vdot = [b; -g_t] at the current values; constraint
    drift accumulates at the truncation-error rate.  Zeroing is not
    handled on this path.
    """
    mode = cond.mode(aux.mode_name)
    b_mat, b_rate, _ = _characteristic_block(v, t, ctx, mode, frozenset())
    mat = np.vstack([b_mat, np.atleast_2d(mode.g_v(v, t, ctx))])
    rhs = np.concatenate([b_rate, -np.atleast_1d(mode.g_t(v, t, ctx))])
    vdot = solve_dense(mat, rhs)
    return v + dt * vdot, vdot[3]


def initialize_boundary_values(cond, mode_name, ctx, t, target, xdot_guess=0.0):
    """Project initial/reset physical values onto a boundary mode.

    Minimizes the squared distance of (h, phi, u) to the target subject
    to the mode's conditions and the positivity floors on the
    transformed column variables, then zeroes variables at the floor.
    Iterates over modes if the solved state demands a different one.
    Returns (v, zeroed, mode_name) in the oriented frame.
    """
    from scipy.optimize import minimize

    l = ctx.l
    h0, phi0, u0 = target

    def build_v(x):
        h, phi, u, xdot = x
        return np.array([l * h, l * phi * h, l * l * (u - xdot) * h, xdot])

    def objective(x):
        return (x[0] - h0) ** 2 + (x[1] - phi0) ** 2 + (x[2] - u0) ** 2

    tried = []
    for _ in range(4):
        mode = cond.mode(mode_name)
        # the target itself (boundary at rest or moving at the guessed
        # rate) often satisfies the conditions exactly; prefer it over
        # an optimizer solution that is only accurate to its tolerance
        for xdot in (0.0, xdot_guess, u0):
            v = build_v(np.array([h0, phi0, u0, xdot]))
            if (np.max(np.abs(np.atleast_1d(mode.g(v, t, ctx)))) < 1e-13
                    and min(l * h0, v[0]) >= 0.0):
                zeroed = set()
                for i in (0, 1):
                    if v[i] <= ZERO_TOL * (1.0 + 1e-6):
                        v[i] = 0.0
                        zeroed.add(i)
                return v, frozenset(zeroed), mode_name
        cons = [
            {"type": "eq", "fun": lambda x: np.atleast_1d(mode.g(build_v(x), t, ctx))},
            {"type": "ineq",
             "fun": lambda x: np.array([l * x[0] - ZERO_TOL, l * x[1] * x[0] - ZERO_TOL])},
        ]
        h_start = max(h0, 2.0 * ZERO_TOL / l)
        phi_start = max(phi0, 2.0 * ZERO_TOL / (l * h_start))
        x_init = np.array([h_start, phi_start, u0, xdot_guess])
        res = minimize(objective, x_init, method="SLSQP", constraints=cons,
                       options={"maxiter": 300, "ftol": 1e-16})
        v = build_v(res.x)
        resid = float(np.max(np.abs(np.atleast_1d(mode.g(v, t, ctx)))))
        tried.append((mode_name, resid))
        if resid > 1e-8:
            # try the remaining modes before giving up
            others = [m for m in cond.modes if m not in [n for n, _ in tried]]
            if not others:
                raise ConfigurationError(f"boundary initialization infeasible: {tried}")
            mode_name = others[0]
            continue
        next_name = cond.hysteresis(mode_name, v, ctx)
        if next_name == mode_name:
            break
        mode_name = next_name
    zeroed = set()
    for i in (0, 1):
        if v[i] <= ZERO_TOL * (1.0 + 1e-6):
            v[i] = 0.0
            zeroed.add(i)
    return v, frozenset(zeroed), mode_name


# ---------------------------------------------------------------------------
# problems


class SwProblem:
    """A shallow water setup: domain, initial fields, boundary conditions."""

    def __init__(self, name, x_l0, x_r0, initial, left_cond, right_cond, t_end):
        self.name = name
        self.x_l0 = x_l0
        self.x_r0 = x_r0
        self.initial = initial
        self.left_cond = left_cond
        self.right_cond = right_cond
        self.t_end = t_end


def _dam_initial(phi_wet):
    def initial(x):
        x = np.asarray(x, dtype=float)
        wet = x < 0.5
        return (np.where(wet, 1.0, 0.0),
                np.where(wet, phi_wet, 0.0),
                np.zeros_like(x))
    return initial


def _lock_initial(x):
    x = np.asarray(x, dtype=float)
    return np.ones_like(x), np.ones_like(x), np.zeros_like(x)


def _alphawave_initial(x):
    h, u = alphawave_exact(np.asarray(x, dtype=float), 0.0)
    return h, np.ones_like(h), u


SW_PROBLEMS = ("critwall", "particle", "alphawave", "lockrel-semi", "lockrel-finite")


def make_problem(name, froude=1.2, h_b=0.5):
    """Build one of the standard shallow water problems."""
    if name == "critwall":
        return SwProblem(name, 0.0, 1.0, _dam_initial(1.0),
                         wall_condition(), energy_condition(h_b), 0.5)
    if name == "particle":
        return SwProblem(name, 0.0, 1.0, _dam_initial(2.0),
                         wall_condition(), wall_condition(), 1.0)
    if name == "alphawave":
        return SwProblem(name, 0.0, 1.0, _alphawave_initial,
                         dirichlet_condition(alphawave_depth, alphawave_depth_dt, 1.0),
                         nonreflecting_condition(), 4.0)
    if name == "lockrel-semi":
        return SwProblem(name, 0.0, 1.0, _lock_initial,
                         nonreflecting_condition(), froude_condition(froude), 2.0)
    if name == "lockrel-finite":
        return SwProblem(name, 0.0, 1.0, _lock_initial,
                         wall_condition(), froude_condition(froude), 10.0)
    raise ConfigurationError(f"unknown problem {name!r}; choose from {SW_PROBLEMS}")


# ---------------------------------------------------------------------------
# simulation


class SolverOptions:
    """Numerical options shared by the bulk scheme and boundary solves."""

    def __init__(self, d_coeff=0.5, scope="outgoing-static", extrap=1,
                 eigen_policy="boundary", order=2, boundary_policy="rknr",
                 c_max=C_MAX, safety=0.95):
        if boundary_policy not in BOUNDARY_POLICIES:
            raise ConfigurationError(
                f"unknown boundary policy {boundary_policy!r}; choose from {BOUNDARY_POLICIES}")
        if eigen_policy not in ("boundary", "center"):
            raise ConfigurationError(f"unknown eigen policy {eigen_policy!r}")
        if d_coeff < 0.0:
            raise ConfigurationError("forcing coefficient must be non-negative")
        self.d_coeff = d_coeff
        self.scope = scope
        self.extrap = extrap
        self.eigen_policy = eigen_policy
        self.order = order
        self.boundary_policy = boundary_policy
        self.c_max = c_max
        self.safety = safety


class InstabilityReport:
    def __init__(self, time, reason):
        self.time = time
        self.reason = reason

    def __repr__(self):
        return f"InstabilityReport(t={self.time:.6g}, {self.reason!r})"


_GAUSS_NODES = np.array([-0.9061798459386640, -0.5384693101056831, 0.0,
                         0.5384693101056831, 0.9061798459386640])
_GAUSS_WEIGHTS = np.array([0.2369268850561891, 0.4786286704993665,
                           0.5688888888888889, 0.4786286704993665,
                           0.2369268850561891])


class SwRunResult:
    """Time series, snapshots and diagnostics of one simulation run."""

    def __init__(self, problem, grid, opts):
        self.problem = problem
        self.grid = grid
        self.opts = opts
        self.series = {k: [] for k in
                       ("t", "h_r", "u_r", "phi_r", "xdot_r", "x_r", "mode",
                        "g_res", "volume", "tracer")}
        self.snapshots = []
        self.mode_switches = []
        self.instability = None

    def finalize(self):
        for k in self.series:
            if k != "mode":
                self.series[k] = np.asarray(self.series[k])
        return self

    def snapshot_fields(self, idx=-1):
        """Physical (x, h, u, phi) at cell centres for one snapshot."""
        snap = self.snapshots[idx]
        l = snap["x_r"] - snap["x_l"]
        y = self.grid.centers
        bulk = snap["bulk"]
        h = bulk[:, 0] / l
        h_safe = np.maximum(bulk[:, 0], H_FLOOR)
        r = (1.0 - y) * snap["v_l"][3] + y * snap["v_r"][3]
        u = bulk[:, 2] / (l * h_safe) + r
        phi = bulk[:, 1] / h_safe
        x = snap["x_l"] + y * l
        return x, h, u, phi


class SwSimulation:
    """Explicit SSP-RK time stepping of the coupled bulk/boundary system."""

    def __init__(self, problem, n_cells, opts=None):
        self.problem = problem
        self.opts = opts if opts is not None else SolverOptions()
        self.grid = Grid1D(n_cells)
        self.scheme = ssp_scheme(self.opts.order)
        self.t = 0.0
        l0 = problem.x_r0 - problem.x_l0
        # boundary vectors first: the bulk momentum averages need the
        # initial frame velocity
        ctx_r = SideContext(l0, None, None, self.grid.dy_boundary, self.grid.dy,
                            0.0, self.opts)
        tr = tuple(float(np.asarray(f).reshape(())) for f in problem.initial(problem.x_r0))
        guess_r = getattr(problem.right_cond.mode(problem.right_cond.initial), "froude", None)
        xdot_guess = (guess_r * np.sqrt(max(tr[0], 0.0))) if guess_r else 0.0
        v_r, zr, mode_r = initialize_boundary_values(
            problem.right_cond, problem.right_cond.initial, ctx_r, 0.0, tr, xdot_guess)
        tl = tuple(float(np.asarray(f).reshape(())) for f in problem.initial(problem.x_l0))
        ctx_l = SideContext(l0, None, None, self.grid.dy_boundary, self.grid.dy,
                            0.0, self.opts)
        v_l_or, zl, mode_l = initialize_boundary_values(
            problem.left_cond, problem.left_cond.initial, ctx_l, 0.0,
            (tl[0], tl[1], -tl[2]), 0.0)
        v_l = mirror(v_l_or)
        self.aux = {"left": SideAux(mode_l, zl), "right": SideAux(mode_r, zr)}
        bulk = self._average_initial(l0, v_l[3], v_r[3])
        self.n_cells = n_cells
        self.y = np.concatenate([bulk.ravel(), v_l, v_r,
                                 [problem.x_l0, problem.x_r0]])
        self._zero_enforce()

    # -- state layout helpers

    def _unpack(self, y):
        n3 = 3 * self.grid.n_cells
        bulk = y[:n3].reshape(self.grid.n_cells, 3)
        return bulk, y[n3:n3 + 4], y[n3 + 4:n3 + 8], y[n3 + 8], y[n3 + 9]

    def _average_initial(self, l, xdot_l, xdot_r):
        grid = self.grid
        edges = grid.edges
        bulk = np.zeros((grid.n_cells, 3))
        for j in range(grid.n_cells):
            y_nodes = 0.5 * (edges[j] + edges[j + 1]) + 0.5 * grid.dy * _GAUSS_NODES
            x_nodes = self.problem.x_l0 + y_nodes * l
            h, phi, u = self.problem.initial(x_nodes)
            r = (1.0 - y_nodes) * xdot_l + y_nodes * xdot_r
            w = 0.5 * _GAUSS_WEIGHTS
            bulk[j, 0] = np.sum(w * l * h)
            bulk[j, 1] = np.sum(w * l * phi * h)
            bulk[j, 2] = np.sum(w * l * l * (u - r) * h)
        return bulk

    # -- Euler map

    def euler(self, y, t, dt, stage):
        opts = self.opts
        bulk, v_l, v_r, x_l, x_r = self._unpack(y)
        l = x_r - x_l
        if not l > 0.0:
            raise StepRejected(0.25 * dt)
        speeds = kernels.sw_max_speeds(bulk, l, H_FLOOR)
        bspeeds = kernels.sw_max_speeds(np.vstack([v_l[:3], v_r[:3]]), l, H_FLOOR)
        dt_max = cfl_max_dt(self.grid.dy, max(np.max(speeds), np.max(bspeeds)),
                            opts.c_max)
        if dt > dt_max * (1.0 + 1e-9):
            raise StepRejected(dt_max)
        bulk0, v_l0, v_r0, x_l0, x_r0 = self._unpack(stage.y_start)
        l_alg = (stage.eta * (x_r0 - x_l0)
                 + (1.0 - stage.eta) * (l + dt * (v_r[3] - v_l[3])))

        ctx_r = SideContext(l, bulk[-1], bulk[-2], self.grid.dy_boundary,
                            self.grid.dy, -v_l[3], opts, l_alg=l_alg)
        if opts.boundary_policy == "rknr":
            v_r_e, xddot_r = newton_boundary_euler(
                self.aux["right"], self.problem.right_cond, v_r.copy(), t, dt,
                stage.eta, v_r0.copy(), stage.t_start, ctx_r, stage.stage)
        else:
            v_r_e, xddot_r = rk0_boundary_euler(
                self.aux["right"], self.problem.right_cond, v_r.copy(), t, dt, ctx_r)

        ctx_l = SideContext(l, mirror(bulk[0]), mirror(bulk[1]),
                            self.grid.dy_boundary, self.grid.dy, v_r[3], opts,
                            l_alg=l_alg)
        if opts.boundary_policy == "rknr":
            v_or_e, xddot_or = newton_boundary_euler(
                self.aux["left"], self.problem.left_cond, mirror(v_l), t, dt,
                stage.eta, mirror(v_l0), stage.t_start, ctx_l, stage.stage)
        else:
            v_or_e, xddot_or = rk0_boundary_euler(
                self.aux["left"], self.problem.left_cond, mirror(v_l), t, dt, ctx_l)
        v_l_e = mirror(v_or_e)
        xddot_l = -xddot_or

        ghost_l = 2.0 * v_l[:3] - bulk[0]
        ghost_r = 2.0 * v_r[:3] - bulk[-1]
        qm, qp = kernels.sw_reconstruct(bulk, ghost_l, ghost_r, self.grid.dy, THETA)
        flux = np.empty((self.grid.n_cells + 1, 3))
        flux[0] = sw_transformed_flux(v_l[:3], l)
        flux[1:-1] = kernels.sw_interface_flux(qm, qp, l, H_FLOOR)
        flux[-1] = sw_transformed_flux(v_r[:3], l)
        rhs = -np.diff(flux, axis=0) / self.grid.dy
        drdt = (1.0 - self.grid.centers) * xddot_l + self.grid.centers * xddot_r
        rhs[:, 2] -= l * bulk[:, 0] * drdt
        bulk_e = bulk + dt * rhs

        y_e = np.concatenate([bulk_e.ravel(), v_l_e, v_r_e,
                              [x_l + dt * v_l[3], x_r + dt * v_r[3]]])
        return y_e, dt_max

    # -- step bookkeeping

    def _zero_enforce(self):
        bulk, v_l, v_r, _, _ = self._unpack(self.y)
        for i in self.aux["right"].zeroed:
            v_r[i] = 0.0
        for i in self.aux["left"].zeroed:
            v_l[i] = 0.0

    def _post_step(self):
        bulk, v_l, v_r, _, _ = self._unpack(self.y)
        dry = bulk[:, 0] < ZERO_TOL
        if np.any(dry):
            bulk[dry, 2] *= 0.9
        self._zero_enforce()

    def _snapshot_aux(self):
        return {s: self.aux[s].snapshot() for s in self.aux}

    def _restore_aux(self, snap):
        for s in snap:
            self.aux[s].restore(snap[s])

    def _right_ctx(self, y):
        bulk, v_l, v_r, x_l, x_r = self._unpack(y)
        return SideContext(x_r - x_l, bulk[-1], bulk[-2], self.grid.dy_boundary,
                           self.grid.dy, -v_l[3], self.opts)

    def _record(self, result, t):
        bulk, v_l, v_r, x_l, x_r = self._unpack(self.y)
        l = x_r - x_l
        h_safe = max(v_r[0], H_FLOOR)
        cond = self.problem.right_cond
        ctx = self._right_ctx(self.y)
        g_res = float(np.max(np.abs(np.atleast_1d(
            cond.mode(self.aux["right"].mode_name).g(v_r, t, ctx)))))
        s = result.series
        s["t"].append(t)
        s["h_r"].append(v_r[0] / l)
        s["u_r"].append(v_r[2] / (l * h_safe) + v_r[3])
        s["phi_r"].append(v_r[1] / h_safe)
        s["xdot_r"].append(v_r[3])
        s["x_r"].append(x_r)
        s["mode"].append(self.aux["right"].mode_name)
        s["g_res"].append(g_res)
        s["volume"].append(np.sum(bulk[:, 0]) * self.grid.dy)
        s["tracer"].append(np.sum(bulk[:, 1]) * self.grid.dy)

    def _take_snapshot(self, result, t):
        bulk, v_l, v_r, x_l, x_r = self._unpack(self.y)
        result.snapshots.append({"t": t, "bulk": bulk.copy(), "v_l": v_l.copy(),
                                 "v_r": v_r.copy(), "x_l": float(x_l),
                                 "x_r": float(x_r)})

    def _event_value(self, y, side, fn):
        bulk, v_l, v_r, x_l, x_r = self._unpack(y)
        l = x_r - x_l
        if side == "right":
            return fn(v_r, bulk[-1], l)
        return fn(mirror(v_l), mirror(bulk[0]), l)

    def _handle_events(self, y_new, t, dt, aux_snap):
        """Check mode-transition events across the trial step.

        Returns the event time if one fired (the state has then been
        advanced to the crossing by a plain Euler step and the boundary
        re-initialized in the new mode), else None.
        """
        for side in ("right", "left"):
            cond = self.problem.right_cond if side == "right" else self.problem.left_cond
            mode_before = aux_snap[side].mode_name
            if t < aux_snap[side].mute_until:
                continue
            for fn, new_mode in cond.events(mode_before):
                val_old = self._event_value(self.y, side, fn)
                val_new = self._event_value(y_new, side, fn)
                if not (val_old >= 0.0 > val_new):
                    continue
                self._restore_aux(aux_snap)

                def trial(s):
                    self._restore_aux(aux_snap)
                    y_e, _ = self.euler(self.y, t, s, StageInfo(0, 0.0, self.y, t))
                    return self._event_value(y_e, side, fn)

                s_lo = dt * 1e-12
                if trial(dt) < 0.0 and trial(s_lo) >= 0.0:
                    s_cross = bisect_event(trial, s_lo, dt, tol=dt * 1e-12)
                else:
                    # degenerate crossing (a single Euler step does not
                    # cross, or the value jumps for any step size):
                    # switch at the end of the step
                    s_cross = dt
                self._restore_aux(aux_snap)
                y_c, _ = self.euler(self.y, t, s_cross, StageInfo(0, 0.0, self.y, t))
                self.y = y_c
                self._post_step()
                t_event = t + s_cross
                self._reinitialize_side(side, new_mode, t_event)
                aux = self.aux[side]
                if aux.mode_name == mode_before:
                    # the switch did not stick (hysteresis reverted);
                    # hold this side's events for one step
                    aux.mute_until = t_event + dt
                else:
                    self.result.mode_switches.append((t_event, mode_before,
                                                      aux.mode_name))
                return t_event
        return None

    def _immediate_mode_checks(self):
        """Fire events whose value is already negative at a step start.

        The crossing detector only sees a downward sign change; when an
        in-iteration hysteresis reversion leaves the state inside the
        firing region the event must fire without a crossing.
        """
        for side in ("right", "left"):
            cond = (self.problem.right_cond if side == "right"
                    else self.problem.left_cond)
            aux = self.aux[side]
            if self.t < aux.mute_until:
                continue
            for fn, new_mode in cond.events(aux.mode_name):
                if self._event_value(self.y, side, fn) < 0.0:
                    old = aux.mode_name
                    self._reinitialize_side(side, new_mode, self.t)
                    if aux.mode_name != old:
                        self.result.mode_switches.append(
                            (self.t, old, aux.mode_name))
                    else:
                        aux.mute_until = self.t + self._dt_last
                    break

    def _reinitialize_side(self, side, mode_name, t):
        bulk, v_l, v_r, x_l, x_r = self._unpack(self.y)
        l = x_r - x_l
        if side == "right":
            v_or = v_r.copy()
            ctx = SideContext(l, bulk[-1], bulk[-2], self.grid.dy_boundary,
                              self.grid.dy, -v_l[3], self.opts)
            cond = self.problem.right_cond
        else:
            v_or = mirror(v_l)
            ctx = SideContext(l, mirror(bulk[0]), mirror(bulk[1]),
                              self.grid.dy_boundary, self.grid.dy, v_r[3], self.opts)
            cond = self.problem.left_cond
        h_safe = max(v_or[0], H_FLOOR)
        target = (v_or[0] / l, v_or[1] / h_safe, v_or[2] / (l * h_safe) + v_or[3])
        v_new, zeroed, final_mode = initialize_boundary_values(
            cond, mode_name, ctx, t, target, v_or[3])
        if side == "right":
            v_r[:] = v_new
        else:
            v_l[:] = mirror(v_new)
        aux = self.aux[side]
        aux.mode_name = final_mode
        aux.zeroed = zeroed
        aux.seeds = {}

    # -- driver

    def run(self, t_end=None, output_times=()):
        t_end = self.problem.t_end if t_end is None else t_end
        stops = sorted({float(s) for s in output_times if 0.0 < s <= t_end} | {t_end})
        self.result = SwRunResult(self.problem, self.grid, self.opts)
        result = self.result
        self._record(result, self.t)
        if self.t == 0.0 and 0.0 in set(output_times):
            self._take_snapshot(result, 0.0)
        bulk, v_l, v_r, _, _ = self._unpack(self.y)
        l = self.y[-1] - self.y[-2]
        speeds = max(np.max(kernels.sw_max_speeds(bulk, l, H_FLOOR)),
                     np.max(kernels.sw_max_speeds(np.vstack([v_l[:3], v_r[:3]]),
                                                  l, H_FLOOR)))
        controller = StepController(cfl_max_dt(self.grid.dy, speeds, self.opts.c_max),
                                    safety=self.opts.safety)
        self._dt_last = controller.dt_admissible
        shrink_failures = 0
        while self.t < t_end - 1e-13:
            self._immediate_mode_checks()
            next_stop = next(s for s in stops if s > self.t + 1e-13)
            dt = controller.propose(self.t, next_stop)
            self._dt_last = dt
            if dt < 1e-14:
                result.instability = InstabilityReport(self.t, "step size collapse")
                break
            aux_snap = self._snapshot_aux()
            try:
                y_new, adm = rk_step(self.y, self.t, dt, self.scheme, self.euler)
            except StepRejected as err:
                self._restore_aux(aux_snap)
                controller.reject(err.dt_admissible)
                continue
            except (NonConvergenceError, RankDeficiencyError) as err:
                self._restore_aux(aux_snap)
                shrink_failures += 1
                if shrink_failures > 60:
                    result.instability = InstabilityReport(self.t, f"boundary solve: {err}")
                    break
                controller.reject(0.5 * dt)
                continue
            shrink_failures = 0
            if not np.all(np.isfinite(y_new)) or np.max(np.abs(y_new)) > BLOWUP:
                result.instability = InstabilityReport(self.t + dt, "state blow-up")
                break
            t_event = self._handle_events(y_new, self.t, dt, aux_snap)
            if t_event is not None:
                self.t = t_event
                self._record(result, self.t)
                continue
            self.y = y_new
            self.t += dt
            controller.accept(adm)
            self._post_step()
            self._record(result, self.t)
            if any(abs(self.t - s) <= 1e-12 for s in stops):
                self._take_snapshot(result, self.t)
        return result.finalize()


def run_sw_problem(name, n_cells, t_end=None, output_times=(), opts=None, **problem_kw):
    """Convenience wrapper: build and run a standard problem."""
    problem = make_problem(name, **problem_kw)
    sim = SwSimulation(problem, n_cells, opts)
    return sim.run(t_end=t_end, output_times=output_times)
