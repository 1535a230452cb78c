"""Formal modulation ODE for the bubble scale and blow-up rate fits.

    lambda' = -b,    b' = q p t^(nu-1) |log t|^mu / log(t / lambda)

(mu = 0 except for log-modified radiation).  The concentrating solution
lambda ~ p|q| t^(nu+1) |log t|^(mu-1) / (nu^2 (nu+1)) is an unstable
separatrix when followed toward t = 0: neighbouring solutions peel away like
t^-(2nu+1).  It is therefore computed by integrating forward in t from a deep
seed on the asymptote, where it is an attractor, in the well-scaled variables

    x = log t,   L = log lambda,   w = t lambda' / lambda,
    dL/dx = w,   dw/dx = w - w^2 - q p |x|^mu e^((nu+1) x - L) / (x - L).
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .radiation import RadiationSpec, p_constant

MODELS = ("pure-power", "power-over-log", "power-times-logpow")


class RegimeError(RuntimeError):
    """The trajectory left 0 < lambda < t."""


@dataclass(frozen=True)
class ReducedState:
    t: float
    lam: float
    b: float

    def __post_init__(self):
        if not self.lam > 0:
            raise RegimeError(f"lambda must be positive, got {self.lam}")
        if not self.lam < self.t:
            raise RegimeError(f"need lambda < t, got lambda = {self.lam}, t = {self.t}")


def _mu(spec):
    return spec.mu if spec.kind == "log-position" else 0.0


def forcing(spec: RadiationSpec, t):
    """q p t^(nu-1) |log t|^mu, the radiation's pull on b."""
    return spec.q * p_constant(spec) * t ** (spec.nu - 1) * np.abs(np.log(t)) ** _mu(spec)


def rhs_reduced(state: ReducedState, spec: RadiationSpec):
    """(lambda', b')."""
    if not 0 < state.lam < state.t:
        raise RegimeError("log(t/lambda) must be positive")
    return -state.b, float(forcing(spec, state.t) / np.log(state.t / state.lam))


def lambda_c(t, spec: RadiationSpec):
    """p|q| t^(nu+1) |log t|^(mu-1) / (nu^2 (nu+1))."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0) or np.any(t >= 1):
        raise ValueError("lambda_c needs 0 < t < 1")
    nu = spec.nu
    A = p_constant(spec) * abs(spec.q) / (nu * nu * (nu + 1))
    return A * t ** (nu + 1) * np.abs(np.log(t)) ** (_mu(spec) - 1)


def lambda_c_prime(t, spec: RadiationSpec):
    t = np.asarray(t, dtype=float)
    L = np.abs(np.log(t))
    return lambda_c(t, spec) * (spec.nu + 1 - (_mu(spec) - 1) / L) / t


def asymptote_state(t: float, spec: RadiationSpec) -> ReducedState:
    lam = float(lambda_c(t, spec))
    return ReducedState(t, lam, -float(lambda_c_prime(t, spec)))


def _scaled_rhs(spec):
    qp = spec.q * p_constant(spec)
    nu, mu = spec.nu, _mu(spec)

    def f(x, y):
        L, w = y
        return [w, w - w * w - qp * abs(x) ** mu * np.exp((nu + 1) * x - L) / (x - L)]

    return f


def _regime_event(x, y):
    return x - y[0]  # log t - log lambda


_regime_event.terminal = True


@dataclass
class ReducedTrajectory:
    spec: RadiationSpec
    t: np.ndarray
    lam: np.ndarray
    b: np.ndarray
    status: str = "ok"
    message: str = ""

    @property
    def ratio(self):
        """lambda |log t|^(1-mu) / t^(nu+1), tending to p|q| / (nu^2 (nu+1))."""
        mu = _mu(self.spec)
        return self.lam * np.abs(np.log(self.t)) ** (1 - mu) / self.t ** (self.spec.nu + 1)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "lambda", "b", "ratio"])
            for row in zip(self.t, self.lam, self.b, self.ratio):
                w.writerow([repr(float(v)) for v in row])


def integrate_reduced(spec: RadiationSpec, t_start: float, t_end: float, initial: ReducedState,
                      t_eval=None, rtol: float = 1e-12, atol: float = 1e-13) -> ReducedTrajectory:
    """Integrate from initial.t = t_start to t_end (either direction) in log t.

    Stops with status 'regime-exit' if lambda reaches t or 0, and 'failed' if
    the stepper gives up; the last good state is kept.
    """
    if abs(initial.t - t_start) > 1e-15 * t_start:
        raise ValueError("initial state must sit at t_start")
    if not (0 < t_start < 1 and 0 < t_end < 1):
        raise ValueError("times must lie in (0, 1)")
    x0, x1 = np.log(t_start), np.log(t_end)
    y0 = [np.log(initial.lam), -t_start * initial.b / initial.lam]
    xe = None if t_eval is None else np.log(np.asarray(t_eval, dtype=float))
    with np.errstate(over="ignore", invalid="ignore"):
        sol = solve_ivp(_scaled_rhs(spec), (x0, x1), y0, method="DOP853", rtol=rtol, atol=atol,
                        t_eval=xe, events=_regime_event)
    x = sol.t
    L, w = sol.y
    good = np.isfinite(L) & np.isfinite(w)
    x, L, w = x[good], L[good], w[good]
    t = np.exp(x)
    lam = np.exp(L)
    status, message = "ok", ""
    if sol.status == 1:
        status, message = "regime-exit", f"lambda reached t at t = {np.exp(sol.t_events[0][0]):.6g}"
    elif sol.status < 0 or not np.all(good):
        status, message = "failed", sol.message
    return ReducedTrajectory(spec, t, lam, -w * lam / t, status, message)


def asymptotic_trajectory(spec: RadiationSpec, t_lo: float = 1e-6, t_hi: float = 1e-3, n: int = 31,
                          seed_factor: float = 1e-6, rtol: float = 1e-12) -> ReducedTrajectory:
    """The concentrating solution on [t_lo, t_hi], reported in decreasing t.

    Seeded on the closed-form asymptote at t_lo * seed_factor and integrated
    forward; memory of the seed decays like (t_seed / t)^(2 nu + 1).
    """
    t_seed = t_lo * seed_factor
    ts = np.geomspace(t_hi, t_lo, n)
    traj = integrate_reduced(spec, t_seed, t_hi, asymptote_state(t_seed, spec), t_eval=ts[::-1], rtol=rtol)
    if traj.status != "ok":
        raise RegimeError(f"asymptotic integration failed: {traj.message}")
    return ReducedTrajectory(spec, traj.t[::-1], traj.lam[::-1], traj.b[::-1], traj.status, traj.message)


# ----------------------------------------------------------------------------
# rate fits
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class RateFit:
    model: str
    A: float
    alpha: float
    beta: float
    residual: float
    t_min: float
    t_max: float
    n: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2)


def fit_rate(t, lam, model: str = "power-times-logpow") -> RateFit:
    """Least squares for log lambda = log A + alpha log t + beta log |log t|.

    pure-power fixes beta = 0, power-over-log fixes beta = -1.
    """
    if model not in MODELS:
        raise ValueError(f"unknown model {model!r}")
    t = np.asarray(t, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if t.size < 10 or np.log10(t.max() / t.min()) < 2 - 1e-9:
        raise ValueError("need at least 10 samples spanning 2 decades")
    lt = np.log(t)
    llt = np.log(np.abs(lt))
    y = np.log(lam)
    if model == "power-times-logpow":
        X = np.column_stack([np.ones_like(lt), lt, llt])
    else:
        X = np.column_stack([np.ones_like(lt), lt])
        if model == "power-over-log":
            y = y + llt
    coef, _, rank, _ = np.linalg.lstsq(X, y, rcond=None)
    if rank < X.shape[1]:
        raise np.linalg.LinAlgError("degenerate design matrix")
    beta = coef[2] if model == "power-times-logpow" else (0.0 if model == "pure-power" else -1.0)
    fitted = np.exp(coef[0] + coef[1] * lt + beta * llt)
    return RateFit(model, float(np.exp(coef[0])), float(coef[1]), float(beta),
                   float(np.max(np.abs(fitted / lam - 1.0))), float(t.min()), float(t.max()), int(t.size))


# ----------------------------------------------------------------------------
# sign classification
# ----------------------------------------------------------------------------


def is_concentrating(traj: ReducedTrajectory, t_hi: float, decades: float = 1.0) -> bool:
    """Does the trajectory cover [t_hi 10^-decades, t_hi] inside 0 < lambda < t
    with lambda shrinking toward t = 0 at a decelerating pace (lambda' > 0, lambda'' > 0)?"""
    t_lo = t_hi * 10.0 ** (-decades)
    if traj.status != "ok" or traj.t.size < 3:
        return False
    if traj.t.min() > t_lo * (1 + 1e-9) or traj.t.max() < t_hi * (1 - 1e-9):
        return False
    sel = (traj.t >= t_lo * (1 - 1e-9)) & (traj.t <= t_hi * (1 + 1e-9))
    lam, b, t = traj.lam[sel], traj.b[sel], traj.t[sel]
    if np.any(lam <= 0) or np.any(lam >= t):
        return False
    lam_prime = -b
    lam_second = -forcing(traj.spec, t) / np.log(t / lam)
    return bool(np.all(lam_prime > 0) and np.all(lam_second > 0))


def sign_sweep(spec: RadiationSpec, t_hi: float = 1e-3, decades: float = 1.0, n_lam: int = 7, n_speed: int = 7):
    """Backward integrations from a grid of seeds (lambda, lambda') at t_hi.

    Seeds: lambda = lambda_c(t_hi) 10^k, lambda' = s lambda / t_hi over a
    range of s; plus, for q < 0, the concentrating solution itself.
    Returns (found, records).
    """
    ref = RadiationSpec(spec.kind, -abs(spec.q), spec.nu, spec.mu, spec.cutoff)
    lam0 = float(lambda_c(t_hi, ref))
    records = []
    t_lo = t_hi * 10.0 ** (-decades)
    for k in np.linspace(-2, 2, n_lam):
        for s in np.linspace(0.5, 2 * (spec.nu + 1), n_speed):
            lam = lam0 * 10.0 ** k
            if lam >= t_hi:
                continue
            seed = ReducedState(t_hi, lam, -s * lam / t_hi)
            traj = integrate_reduced(spec, t_hi, t_lo, seed, t_eval=np.geomspace(t_hi, t_lo, 41))
            records.append({"lambda0": lam, "speed": float(s), "status": traj.status,
                            "concentrating": is_concentrating(traj, t_hi, decades)})
    if spec.q < 0:
        traj = asymptotic_trajectory(spec, t_lo, t_hi, n=41)
        records.append({"lambda0": float(traj.lam[0]), "speed": float(-traj.b[0] * traj.t[0] / traj.lam[0]),
                        "status": traj.status, "concentrating": is_concentrating(traj, t_hi, decades)})
    return any(r["concentrating"] for r in records), records
