"""Modulation decomposition u = Q_lambda + u* + g and the diagnostics zeta, b, b_bar, w_dot.

Scaled profiles use the L2-critical convention f_lam(r) = f(r / lam) / lam.
Pairings are <f, g> = int f g r dr; cone-truncated integrals run to r = t
with the last cell split by linear interpolation (RadialGrid.cone_weights).
The velocity remainder is g_dot = u_t - u*_t.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize

from .core import (DEFAULT_CUTOFF, CutoffSpec, FieldState, RadialGrid, h_norm, l2_norm, lambda_q_scaled,
                   q_profile, z_profile, z_profile_prime)


class DecompositionError(RuntimeError):
    """The solution left the modulation tube (no root in the bracket)."""


# ----------------------------------------------------------------------------
# orthogonality and extraction
# ----------------------------------------------------------------------------


def z_scaled(lam, r, cutoff: CutoffSpec = DEFAULT_CUTOFF):
    r = np.asarray(r, dtype=float)
    return z_profile(r / lam, cutoff) / lam


def lambda0_z_scaled(lam, r, cutoff: CutoffSpec = DEFAULT_CUTOFF):
    """(Lambda_0 Z)_lam with Lambda_0 = 1 + r d/dr."""
    x = np.asarray(r, dtype=float) / lam
    return (z_profile(x, cutoff) + x * z_profile_prime(x, cutoff)) / lam


def remainder_on(grid: RadialGrid, state: FieldState, ustar: FieldState, lam: float):
    """(g, g_dot) = (u - Q_lam - u*, u_t - u*_t)."""
    g = state.u - q_profile(lam, grid.nodes) - ustar.u
    gdot = state.u_dot - ustar.u_dot
    return g, gdot


def orthogonality(grid, state, ustar, lam, cutoff=DEFAULT_CUTOFF) -> float:
    """F(lam) = <Z_lam, u - Q_lam - u*>."""
    g = state.u - q_profile(lam, grid.nodes) - ustar.u
    return grid.integrate(z_scaled(lam, grid.nodes, cutoff) * g)


def orthogonality_residual(grid, g, lam, cutoff=DEFAULT_CUTOFF) -> float:
    """|<Z_lam, g>| / (||Z_lam|| ||g||), zero when g vanishes identically."""
    z = z_scaled(lam, grid.nodes, cutoff)
    num = abs(grid.integrate(z * g))
    den = l2_norm(z, grid) * l2_norm(g, grid)
    return 0.0 if den == 0.0 else num / den


def extract_lambda(grid: RadialGrid, state: FieldState, ustar: FieldState, lambda_guess: float,
                   cutoff: CutoffSpec = DEFAULT_CUTOFF) -> float:
    """Solve <Z_lam, u - Q_lam - u*> = 0 by Brent on [guess/4, 4 guess], then polish."""
    if not lambda_guess > 0:
        raise ValueError("lambda_guess must be positive")
    state.check_grid(grid)
    ustar.check_grid(grid)
    F = lambda lam: orthogonality(grid, state, ustar, lam, cutoff)
    a, b = lambda_guess / 4.0, 4.0 * lambda_guess
    fa, fb = F(a), F(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if np.sign(fa) == np.sign(fb):
        raise DecompositionError(f"no sign change of the orthogonality condition on [{a:.4g}, {b:.4g}]")
    lam = optimize.brentq(F, a, b, xtol=1e-15 * lambda_guess, rtol=4 * np.finfo(float).eps, maxiter=200)
    # secant polish: brentq stops on the bracket width, a step or two shrinks F itself
    for _ in range(3):
        f0 = F(lam)
        if f0 == 0.0:
            break
        h = 1e-7 * lam
        d = (F(lam + h) - F(lam - h)) / (2 * h)
        if d == 0.0:
            break
        step = f0 / d
        if abs(step) > 1e-6 * lam:
            break
        new = lam - step
        if abs(F(new)) >= abs(f0):
            break
        lam = new
    return float(lam)


# ----------------------------------------------------------------------------
# cone diagnostics
# ----------------------------------------------------------------------------


def _check_regime(t, lam):
    if not lam > 0:
        raise ValueError("lambda must be positive")
    if not lam < t:
        raise ValueError(f"need lambda < t (got lambda = {lam:.4g}, t = {t:.4g})")


def zeta(grid: RadialGrid, t: float, lam: float, g) -> float:
    """zeta = 4 lam log(t/lam) - int_0^t (Lambda Q)_lam g r dr."""
    _check_regime(t, lam)
    c = grid.cone_weights(t)
    return float(4.0 * lam * np.log(t / lam) - np.dot(c, lambda_q_scaled(lam, grid.nodes) * g))


@dataclass(frozen=True)
class VirialSpec:
    """Truncated virial weight: q = r^2/2 on [0, R], q' = r T(s) on [R, R_tilde], constant beyond.

    s = log(r/R) / log(R_tilde/R) and T = 1 - septic smoothstep, with
    R_tilde = kappa e^(kappa/c) R.
    """

    c: float = 0.25
    R: float = 2.0
    kappa: float = 35.0 / 16.0

    def __post_init__(self):
        if not (self.c > 0 and self.R > 0 and self.kappa > 0):
            raise ValueError("virial parameters must be positive")

    @property
    def log_ratio(self) -> float:
        # log(R_tilde / R)
        return float(np.log(self.kappa) + self.kappa / self.c)

    @property
    def R_tilde(self) -> float:
        return float(self.R * np.exp(self.log_ratio))


def _taper(s):
    s = np.clip(s, 0.0, 1.0)
    return 1.0 - s ** 4 * (35.0 - 84.0 * s + 70.0 * s * s - 20.0 * s ** 3)


def _taper_d(s, k):
    # k-th derivative of T in s, k = 1, 2, 3
    s = np.clip(s, 0.0, 1.0)
    if k == 1:
        return -140.0 * s ** 3 * (1.0 - s) ** 3
    if k == 2:
        return -420.0 * s ** 2 * (1.0 - s) ** 2 * (1.0 - 2.0 * s)
    if k == 3:
        return -840.0 * s * (1.0 - s) * (1.0 - 5.0 * s + 5.0 * s * s)
    raise ValueError(k)


def virial_q_prime(r, spec: VirialSpec = VirialSpec()):
    """(q', q'') at radii r."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    L = spec.log_ratio
    s = np.log(np.maximum(r, spec.R) / spec.R) / L
    T = _taper(s)
    return r * T, T + _taper_d(s, 1) / L


def virial_q(r, spec: VirialSpec = VirialSpec()):
    """(q, q', q'') at radii r."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    L = spec.log_ratio
    q1, q2 = virial_q_prime(r, spec)
    s = np.log(np.maximum(r, spec.R) / spec.R) / L
    q = np.empty_like(r)
    inner = r <= spec.R
    q[inner] = 0.5 * r[inner] ** 2
    # q(r) = R^2/2 + int_0^s L R^2 e^{2 L s'} T(s') ds'
    f = lambda x: L * spec.R ** 2 * np.exp(2 * L * x) * _taper(x)
    for i in np.where(~inner)[0]:
        q[i] = 0.5 * spec.R ** 2 + integrate.quad(f, 0.0, min(s[i], 1.0), epsabs=0.0, epsrel=1e-12, limit=200)[0]
    return q, q1, q2


def virial_properties(spec: VirialSpec = VirialSpec(), n: int = 20001):
    """Measured quantities behind P3-P6 on a dense log grid of [R/10, 10 R_tilde].

    P5 is read with the 2d radial Laplacian, for which
    Delta^2 q = (2 T'' + T''' / L) / (L^2 r^2) on the taper region.
    """
    L = spec.log_ratio
    r = np.geomspace(spec.R / 10, 10 * spec.R_tilde, n)
    q1, q2 = virial_q_prime(r, spec)
    s = np.clip(np.log(np.maximum(r, spec.R) / spec.R) / L, 0.0, 1.0)
    taper = (r > spec.R) & (r < spec.R_tilde)
    bilap_r2 = np.where(taper, (2 * _taper_d(s, 2) + _taper_d(s, 3) / L) / L ** 2, 0.0)
    return {
        "max_abs_q1_over_r": float(np.max(np.abs(q1 / r))),
        "max_abs_q2": float(np.max(np.abs(q2))),
        "min_q2": float(np.min(q2)),
        "min_q1_over_r": float(np.min(q1 / r)),
        "max_r2_bilaplacian": float(np.max(bilap_r2)),
        "max_abs_r_dlog": float(np.max(np.abs(_taper_d(s, 1) / L) * taper)),
        "c": spec.c,
    }


def apply_virial_ops(grid: RadialGrid, g, lam: float, spec: VirialSpec = VirialSpec(), which: str = "A0"):
    """A(lam) g = q'(r/lam) g_r;  A0(lam) g = (q''(r/lam)/(2 lam) + q'(r/lam)/(2r)) g + q'(r/lam) g_r."""
    r = grid.nodes
    q1, q2 = virial_q_prime(r / lam, spec)
    gr = grid.derivative(g)
    if which == "A":
        return q1 * gr
    if which == "A0":
        return (q2 / (2 * lam) + q1 / (2 * r)) * g + q1 * gr
    raise ValueError(f"unknown operator {which!r}")


def b_diagnostic(grid: RadialGrid, t: float, lam: float, g, gdot, virial: VirialSpec = VirialSpec()) -> float:
    """b = -int_0^t (Lambda Q)_lam g_dot r dr - <g_dot, A0(lam) g>."""
    _check_regime(t, lam)
    c = grid.cone_weights(t)
    first = -np.dot(c, lambda_q_scaled(lam, grid.nodes) * gdot)
    second = -grid.integrate(gdot * apply_virial_ops(grid, g, lam, virial, "A0"))
    return float(first + second)


def cone_norm_lambda_q_sq(grid: RadialGrid, t: float, lam: float) -> float:
    """Discrete ||(Lambda Q)_lam||^2 on r <= t (tends to lambda_q_l2_truncated(t/lam))."""
    c = grid.cone_weights(t)
    return float(np.dot(c, lambda_q_scaled(lam, grid.nodes) ** 2))


def b_bar_diagnostic(grid: RadialGrid, t: float, lam: float, gdot) -> float:
    """b_bar = -||Lambda Q||^-2_{r <= t/lam} int_0^t (Lambda Q)_lam g_dot r dr."""
    _check_regime(t, lam)
    c = grid.cone_weights(t)
    lq = lambda_q_scaled(lam, grid.nodes)
    return float(-np.dot(c, lq * gdot) / np.dot(c, lq * lq))


def w_dot(grid: RadialGrid, gdot, b_bar: float, t: float, lam: float):
    """g_dot + b_bar 1_{r<=t} (Lambda Q)_lam (corrected on every node the cone weights touch)."""
    inside = grid.cone_weights(t) > 0
    return np.asarray(gdot, dtype=float) + b_bar * np.where(inside, lambda_q_scaled(lam, grid.nodes), 0.0)


def w_dot_norm_sq(grid: RadialGrid, gdot, b_bar: float, t: float, lam: float) -> float:
    """||w_dot||^2 with the cone cell split: inside weights see w_dot, outside weights see g_dot."""
    c = grid.cone_weights(t)
    wd = w_dot(grid, gdot, b_bar, t, lam)
    return float(np.dot(c, wd * wd) + np.dot(grid.weights - c, np.asarray(gdot) ** 2))


def pythagoras_defect(grid: RadialGrid, gdot, t: float, lam: float) -> float:
    """(||w_dot||^2 + b_bar^2 ||Lambda Q||^2_cone - ||g_dot||^2) / ||g_dot||^2."""
    bb = b_bar_diagnostic(grid, t, lam, gdot)
    lhs = w_dot_norm_sq(grid, gdot, bb, t, lam) + bb * bb * cone_norm_lambda_q_sq(grid, t, lam)
    rhs = l2_norm(gdot, grid) ** 2
    return float((lhs - rhs) / rhs) if rhs > 0 else float(lhs)


def lambda_prime(grid: RadialGrid, lam: float, g, gdot, cutoff: CutoffSpec = DEFAULT_CUTOFF) -> float:
    """lambda' from differentiating the orthogonality condition:

    lambda' (<Z_lam, (Lambda Q)_lam> - <(Lambda_0 Z)_lam, g> / lam) = -<Z_lam, g_dot>.
    """
    r = grid.nodes
    z = z_scaled(lam, r, cutoff)
    den = grid.integrate(z * lambda_q_scaled(lam, r)) - grid.integrate(lambda0_z_scaled(lam, r, cutoff) * g) / lam
    return float(-grid.integrate(z * gdot) / den)


# ----------------------------------------------------------------------------
# tracking
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class ModulationSample:
    t: float
    lam: float
    zeta: float
    b: float
    b_bar: float
    g_h_norm: float
    g_dot_l2: float
    ortho_residual: float
    lambda_prime: float = float("nan")
    pythagoras_defect: float = float("nan")

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lambda must be positive")


CSV_COLUMNS = ("t", "lambda", "zeta", "b", "b_bar", "g_H", "gdot_L2", "ortho_residual")


def sample(grid, state, ustar, lam_guess, cutoff=DEFAULT_CUTOFF, virial=VirialSpec()) -> ModulationSample:
    t = state.t
    lam = extract_lambda(grid, state, ustar, lam_guess, cutoff)
    g, gdot = remainder_on(grid, state, ustar, lam)
    return ModulationSample(
        t=t,
        lam=lam,
        zeta=zeta(grid, t, lam, g),
        b=b_diagnostic(grid, t, lam, g, gdot, virial),
        b_bar=b_bar_diagnostic(grid, t, lam, gdot),
        g_h_norm=h_norm(g, grid),
        g_dot_l2=l2_norm(gdot, grid),
        ortho_residual=orthogonality_residual(grid, g, lam, cutoff),
        lambda_prime=lambda_prime(grid, lam, g, gdot, cutoff),
        pythagoras_defect=pythagoras_defect(grid, gdot, t, lam) if np.any(gdot) else 0.0,
    )


@dataclass
class Track:
    samples: list = field(default_factory=list)
    failed_at: float | None = None
    message: str = ""

    @property
    def times(self):
        return np.array([s.t for s in self.samples])

    @property
    def lambdas(self):
        return np.array([s.lam for s in self.samples])

    def speed_constant(self) -> float:
        """Fitted C in |lambda'| <= C ||g_dot||_L2 (max ratio over samples)."""
        ratios = [abs(s.lambda_prime) / s.g_dot_l2 for s in self.samples if s.g_dot_l2 > 0]
        return float(max(ratios)) if ratios else 0.0


def track(traj, ustar_traj, lambda_guess: float, cutoff: CutoffSpec = DEFAULT_CUTOFF,
          virial: VirialSpec = VirialSpec()) -> Track:
    """Extract lambda and the diagnostics on every slice, seeding each root with the previous one."""
    if len(traj) != len(ustar_traj) or any(abs(a - b) > 1e-12 for a, b in zip(traj.times, ustar_traj.times)):
        raise ValueError("trajectories are not time-aligned")
    out = Track()
    guess = lambda_guess
    for k in range(len(traj)):
        try:
            s = sample(traj.grid, traj.state(k), ustar_traj.state(k), guess, cutoff, virial)
        except (DecompositionError, ValueError) as exc:
            out.failed_at = traj.times[k]
            out.message = str(exc)
            break
        out.samples.append(s)
        guess = s.lam
    return out


def write_samples_csv(path, samples):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for s in samples:
            w.writerow([repr(float(v)) for v in (s.t, s.lam, s.zeta, s.b, s.b_bar, s.g_h_norm, s.g_dot_l2,
                                                  s.ortho_residual)])

