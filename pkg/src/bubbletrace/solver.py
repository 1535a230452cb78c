"""Method-of-lines solver for u_tt = u_rr + u_r/r - sin(2u)/(2r^2) and its linearization.

Spatial discretization is the Hamiltonian one for the discrete energy in
``core.energy``:

    W_i u_i'' = F_{i+1/2} - F_{i-1/2} - W_i f(u_i) / r_i^2
    F_{i+1/2} = a_{i+1/2} (u_{i+1} - u_i) / (r_{i+1} - r_i)

with a the cell-midpoint radius, W the trapezoid r dr weights and the axis
handled by an implicit node u(0) = 0 (u odd through the axis).  The scheme
annihilates u = c r in the linear case and conserves the discrete energy
exactly in semi-discrete form.  The last node carries a Dirichlet value.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicSpline

from .core import FieldState, RadialGrid, energy
from .radiation import RadiationSpec, initial_data

SCHEMES = ("rk4", "leapfrog")
OUTER_BCS = ("fixed", "exact-exterior", "absorbing-sponge")


@dataclass(frozen=True)
class SolverConfig:
    grid: RadialGrid
    cfl: float = 0.5
    scheme: str = "rk4"
    outer_bc: str = "fixed"
    t_span: tuple = (0.0, 1.0)
    radiation: RadiationSpec | None = None
    exterior_margin: float = 0.05
    sponge_width: float = 0.5
    sponge_strength: float = 20.0

    def __post_init__(self):
        if not 0.0 < self.cfl < 1.0:
            raise ValueError(f"cfl must lie in (0, 1), got {self.cfl}")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.outer_bc not in OUTER_BCS:
            raise ValueError(f"unknown outer boundary {self.outer_bc!r}")
        if self.outer_bc == "exact-exterior" and self.radiation is None:
            raise ValueError("exact-exterior boundary needs a RadiationSpec")
        t0, t1 = self.t_span
        if not t1 > t0:
            raise ValueError("t_span must be increasing")

    @property
    def dt_max(self) -> float:
        return self.cfl * self.grid.min_spacing


class Operator:
    """Precomputed stencil for the radial wave-map operator on a grid."""

    def __init__(self, grid: RadialGrid):
        r = grid.nodes
        self.grid = grid
        self.r = r
        self.inv_r2 = 1.0 / (r * r)
        d = np.diff(r)
        self.coef = 0.5 * (r[1:] + r[:-1]) / d  # a_{i+1/2} / Delta_{i+1/2}
        self.inv_w = 1.0 / grid.weights

    def laplacian(self, u):
        """(F_{i+1/2} - F_{i-1/2}) / W_i, the discrete u_rr + u_r/r (last entry unused)."""
        flux = np.empty(u.size + 1)
        flux[0] = 0.5 * u[0]
        flux[1:-1] = self.coef * (u[1:] - u[:-1])
        flux[-1] = 0.0
        return (flux[1:] - flux[:-1]) * self.inv_w

    def accel(self, u, nonlinear=True):
        pot = 0.5 * np.sin(2.0 * u) if nonlinear else u
        a = self.laplacian(u) - pot * self.inv_r2
        a[-1] = 0.0
        return a


def rhs_nonlinear(state: FieldState, grid: RadialGrid):
    """(u_t, u_tt) for the wave-map equation; the last node is held fixed."""
    state.check_grid(grid)
    if not (np.all(np.isfinite(state.u)) and np.all(np.isfinite(state.u_dot))):
        raise FloatingPointError("non-finite state")
    ud = np.array(state.u_dot)
    ud[-1] = 0.0
    return ud, Operator(grid).accel(np.asarray(state.u), True)


def rhs_linear(state: FieldState, grid: RadialGrid):
    """(u_t, u_tt) for u_tt = u_rr + u_r/r - u/r^2 with the same stencils."""
    state.check_grid(grid)
    ud = np.array(state.u_dot)
    ud[-1] = 0.0
    return ud, Operator(grid).accel(np.asarray(state.u), False)


# ----------------------------------------------------------------------------
# time stepping
# ----------------------------------------------------------------------------


@dataclass
class Trajectory:
    """States at the requested output times (possibly cut short)."""

    grid: RadialGrid
    times: list = field(default_factory=list)
    u: list = field(default_factory=list)
    u_dot: list = field(default_factory=list)
    status: str = "ok"
    message: str = ""
    companion: "Trajectory | None" = None

    def state(self, k) -> FieldState:
        return FieldState(self.times[k], self.u[k], self.u_dot[k])

    def __len__(self):
        return len(self.times)

    def append(self, t, u, ud):
        self.times.append(float(t))
        self.u.append(np.array(u))
        self.u_dot.append(np.array(ud))


class _Stepper:
    def __init__(self, config: SolverConfig, nonlinear: bool):
        self.op = Operator(config.grid)
        self.nonlinear = nonlinear
        self.config = config
        r = config.grid.nodes
        if config.outer_bc == "absorbing-sponge":
            start = r[-1] - config.sponge_width
            s = np.clip((r - start) / config.sponge_width, 0.0, 1.0)
            self.damping = config.sponge_strength * s ** 3
        else:
            self.damping = None

    def rate(self, u, ud):
        a = self.op.accel(u, self.nonlinear)
        if self.damping is not None:
            a -= self.damping * ud
        v = ud.copy()
        v[-1] = 0.0
        a[-1] = 0.0
        return v, a

    def step(self, u, ud, dt):
        if self.config.scheme == "leapfrog":
            a = self.rate(u, ud)[1]
            vh = ud + 0.5 * dt * a
            vh[-1] = 0.0
            u1 = u + dt * vh
            a1 = self.rate(u1, vh)[1]
            v1 = vh + 0.5 * dt * a1
            v1[-1] = 0.0
            return u1, v1
        k1u, k1v = self.rate(u, ud)
        k2u, k2v = self.rate(u + 0.5 * dt * k1u, ud + 0.5 * dt * k1v)
        k3u, k3v = self.rate(u + 0.5 * dt * k2u, ud + 0.5 * dt * k2v)
        k4u, k4v = self.rate(u + dt * k3u, ud + dt * k3v)
        return (u + dt / 6.0 * (k1u + 2 * k2u + 2 * k3u + k4u),
                ud + dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v))


def _gradient_sup(u, grid):
    ext = np.concatenate(([0.0], u))
    return float(np.max(np.abs(np.diff(ext)) / grid.spacing))


def evolve(initial: FieldState, config: SolverConfig, nonlinear: bool = True,
           output_times=None, companion: FieldState | None = None) -> Trajectory:
    """Integrate from initial.t to the output times (default: t_span end points).

    With the exact-exterior boundary a companion radiation state (the
    radiation alone, evolved by the same nonlinear scheme) is advanced in
    lockstep and u is overwritten with pi + u* on r >= t + margin after every
    step.  If no companion is given, the radiation data is used and
    initial.t must be 0.
    """
    grid = config.grid
    initial.check_grid(grid)
    t0, t1 = config.t_span
    if output_times is None:
        output_times = [t0, t1]
    output_times = np.asarray(output_times, dtype=float)
    if np.any(np.diff(output_times) <= 0) or output_times[0] < initial.t - 1e-15:
        raise ValueError("output times must increase and start at or after the initial time")

    stepper = _Stepper(config, nonlinear)
    exterior = config.outer_bc == "exact-exterior"
    if exterior:
        if companion is None:
            if initial.t != 0.0:
                raise ValueError("exact-exterior needs a companion state when starting at t != 0")
            companion = initial_data(config.radiation, grid)
        companion.check_grid(grid)
        comp_stepper = _Stepper(SolverConfig(grid, config.cfl, config.scheme, "fixed", config.t_span), True)
        cu, cud = np.array(companion.u), np.array(companion.u_dot)

    traj = Trajectory(grid)
    if exterior:
        traj.companion = Trajectory(grid)
    u, ud = np.array(initial.u), np.array(initial.u_dot)
    t = initial.t
    g0 = max(_gradient_sup(u, grid), 1e-300)
    hmin = grid.min_spacing
    r = grid.nodes

    def record(tt):
        traj.append(tt, u, ud)
        if exterior:
            traj.companion.append(tt, cu, cud)

    for t_out in output_times:
        span = t_out - t
        if span > 0:
            n = int(np.ceil(span / config.dt_max - 1e-9))
            dt = span / n
            for k in range(n):
                u, ud = stepper.step(u, ud, dt)
                if exterior:
                    cu, cud = comp_stepper.step(cu, cud, dt)
                tk = t + (k + 1) * dt
                if exterior:
                    mask = r >= tk + config.exterior_margin
                    u[mask] = np.pi + cu[mask]
                    ud[mask] = cud[mask]
            t = t_out
            if not (np.all(np.isfinite(u)) and np.all(np.isfinite(ud))):
                traj.status = "nan"
                traj.message = f"non-finite values before t = {t_out:.6g}"
                return traj
            gs = _gradient_sup(u, grid)
            if gs > 10.0 * g0 and gs * hmin > 1.0:
                traj.status = "blowup"
                traj.message = f"gradient grew {gs / g0:.3g}x and concentrated below grid scale at t = {t:.6g}"
                record(t)
                return traj
        record(t)
    return traj


# ----------------------------------------------------------------------------
# energy diagnostics
# ----------------------------------------------------------------------------


def _odd_spline(grid, f):
    x = np.concatenate(([0.0], grid.nodes))
    y = np.concatenate(([0.0], np.asarray(f, dtype=float)))
    return CubicSpline(x, y)


def local_energy(state: FieldState, grid: RadialGrid, R: float, method: str = "trapezoid") -> float:
    """pi int_0^R (u_t^2 + u_r^2 + sin^2 u / r^2) r dr.

    ``trapezoid`` uses nodal densities with cone weights (monotone in R);
    ``spline`` integrates a cubic spline of the density times r, which is
    more accurate on the partial cell.
    """
    state.check_grid(grid)
    if R > grid.r_max * (1 + 1e-12):
        raise ValueError(f"radius {R} beyond grid end {grid.r_max}")
    if R <= 0:
        return 0.0
    r = grid.nodes
    if method == "trapezoid":
        ur = grid.derivative(state.u)
        dens = state.u_dot ** 2 + ur ** 2 + (np.sin(state.u) / r) ** 2
        return float(np.pi * np.dot(grid.cone_weights(R), dens))
    if method != "spline":
        raise ValueError(f"unknown method {method!r}")
    su = _odd_spline(grid, state.u)
    ur = su(r, 1)
    dens = (state.u_dot ** 2 + ur ** 2 + (np.sin(state.u) / r) ** 2) * r
    return float(np.pi * _odd_spline(grid, dens).integrate(0.0, min(R, grid.r_max)))


@dataclass(frozen=True)
class FluxRecord:
    t0: float
    t1: float
    flux: float
    loc_energy_start: float
    loc_energy_end: float

    @property
    def defect(self) -> float:
        return self.loc_energy_end - self.loc_energy_start - self.flux

    @property
    def relative_defect(self) -> float:
        scale = max(abs(self.loc_energy_end), abs(self.loc_energy_start), 1e-300)
        return abs(self.defect) / scale


def cone_trace(traj: Trajectory, k: int):
    """(u, u_t, u_r) at r = t for output slice k."""
    t = traj.times[k]
    su = _odd_spline(traj.grid, traj.u[k])
    sv = _odd_spline(traj.grid, traj.u_dot[k])
    return float(su(t)), float(sv(t)), float(su(t, 1))


def flux(traj: Trajectory, t0: float, t1: float) -> FluxRecord:
    """Both sides of E_loc(t1) - E_loc(t0) = pi int (|(d_t + d_r)u|^2 + sin^2 u / r^2) r dr on r = t."""
    times = np.asarray(traj.times)
    if t1 > traj.grid.r_max:
        raise ValueError("light cone leaves the grid")
    sel = np.where((times >= t0 - 1e-12) & (times <= t1 + 1e-12))[0]
    if sel.size < 3 or abs(times[sel[0]] - t0) > 1e-12 or abs(times[sel[-1]] - t1) > 1e-12:
        raise ValueError("trajectory must contain t0, t1 and at least one interior output")
    vals = []
    for k in sel:
        t = times[k]
        u, ut, ur = cone_trace(traj, k)
        vals.append(((ut + ur) ** 2 + (np.sin(u) / t) ** 2) * t if t > 0 else 0.0)
    F = float(np.pi * simpson(np.asarray(vals), x=times[sel]))
    e0 = local_energy(traj.state(sel[0]), traj.grid, times[sel[0]], "spline")
    e1 = local_energy(traj.state(sel[-1]), traj.grid, times[sel[-1]], "spline")
    return FluxRecord(float(times[sel[0]]), float(times[sel[-1]]), F, e0, e1)


def nonlinear_vs_linear_gap(nonlinear: Trajectory, linear: Trajectory, t: float, nu: float,
                            weight: str = "quadratic") -> float:
    """Weighted sup over 0 < r <= t of |u* - u*_L|.

    weight='quadratic' divides by r^2 t^(3nu-2); weight='linear' by r t^(3nu-1).
    Both trajectories must share grid and output times.
    """
    k = int(np.argmin(np.abs(np.asarray(nonlinear.times) - t)))
    if abs(nonlinear.times[k] - t) > 1e-12 or abs(linear.times[k] - t) > 1e-12:
        raise ValueError(f"time {t} not among the outputs")
    r = nonlinear.grid.nodes
    inside = r <= t
    gap = np.abs(nonlinear.u[k] - linear.u[k])[inside]
    rr = r[inside]
    if weight == "quadratic":
        w = rr ** 2 * t ** (3 * nu - 2)
    elif weight == "linear":
        w = rr * t ** (3 * nu - 1)
    else:
        raise ValueError(f"unknown weight {weight!r}")
    return float(np.max(gap / w))


# ----------------------------------------------------------------------------
# I/O
# ----------------------------------------------------------------------------


def write_trajectory(path, traj: Trajectory):
    """Flat float64 layout: [N, T], nodes (N), times (T), then u, u_dot per slice."""
    n = len(traj.grid)
    times = np.asarray(traj.times, dtype=np.float64)
    with open(path, "wb") as fh:
        np.asarray([n, times.size], dtype=np.float64).tofile(fh)
        np.asarray(traj.grid.nodes, dtype=np.float64).tofile(fh)
        times.tofile(fh)
        for u, ud in zip(traj.u, traj.u_dot):
            np.asarray(u, dtype=np.float64).tofile(fh)
            np.asarray(ud, dtype=np.float64).tofile(fh)


def read_trajectory(path) -> Trajectory:
    raw = np.fromfile(path, dtype=np.float64)
    n, nt = int(raw[0]), int(raw[1])
    nodes = raw[2:2 + n]
    times = raw[2 + n:2 + n + nt]
    body = raw[2 + n + nt:].reshape(nt, 2, n)
    traj = Trajectory(RadialGrid(nodes))
    for t, (u, ud) in zip(times, body):
        traj.append(t, u, ud)
    return traj


def summary_rows(traj: Trajectory):
    rows = []
    for k, t in enumerate(traj.times):
        s = traj.state(k)
        R = min(t, traj.grid.r_max)
        rows.append((t, energy(s, traj.grid), local_energy(s, traj.grid, R), float(np.max(np.abs(s.u)))))
    return rows


def write_summary_csv(path, traj: Trajectory):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "energy", "loc_energy", "sup_abs_u"])
        for row in summary_rows(traj):
            w.writerow([repr(float(v)) for v in row])
