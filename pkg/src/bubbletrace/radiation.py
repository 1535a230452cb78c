"""Prescribed radiation: power-law data, its exact free 4d evolution, and the constants p(nu).

The radial 1-equivariant linear flow u_tt - u_rr - u_r/r + u/r^2 = 0 is the
free 4d wave equation for v = u/r.  For power-law data the 4d Kirchhoff
formula reduces to a one-variable profile: inside the cone r <= |t|,

    position data (chi q r^nu, 0):        u_L(t, r) = r |t|^(nu-1) psi(r/|t|)
    velocity data (0, chi q r^(nu-1)):    u_L(t, r) = r t |t|^(nu-2) psi(r/|t|)

with psi = nu(nu+2) phi - (2nu+1) z phi' + z^2 phi''  (position) and
psi = (nu+1) phi - z phi'  (velocity), where

    phi(z) = (q/8) avg_{|y|<=1} |y + z e1|^m (1 - |y|^2)^(-1/2) dy,

m = nu - 1 (position) or nu - 2 (velocity).  The ball average is reduced to a
single integral using the closed form of the S^3 spherical mean of |x|^m.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, special
from scipy.interpolate import CubicSpline

from .core import DEFAULT_CUTOFF, CutoffSpec, FieldState, RadialGrid

KINDS = ("position", "velocity", "log-position")


@dataclass(frozen=True)
class RadiationSpec:
    """Radiation data near the origin.

    position:      (q chi r^nu, 0)
    velocity:      (0, q chi r^(nu-1))
    log-position:  (q chi r^nu |log r|^mu, 0)
    """

    kind: str = "position"
    q: float = -1.0
    nu: float = 5.0
    mu: float = 0.0
    cutoff: CutoffSpec = field(default=DEFAULT_CUTOFF)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown radiation kind {self.kind!r}")
        if not self.nu > 0:
            raise ValueError(f"nu must be positive, got {self.nu}")
        if self.kind != "log-position" and self.mu != 0.0:
            raise ValueError("mu is only meaningful for the log-position kind")

    @property
    def exponent(self) -> float:
        """Power m of the 4d data v_0 = u_0 / r near the origin."""
        return self.nu - 2.0 if self.kind == "velocity" else self.nu - 1.0

    def to_dict(self):
        return {
            "kind": self.kind,
            "q": self.q,
            "nu": self.nu,
            "mu": self.mu,
            "cutoff": {"kind": self.cutoff.kind, "inner": self.cutoff.inner, "outer": self.cutoff.outer},
        }

    @classmethod
    def from_dict(cls, d):
        c = d.get("cutoff", {})
        cutoff = CutoffSpec(c.get("kind", "smoothstep-quintic"), c.get("inner", 0.5), c.get("outer", 1.0))
        return cls(d.get("kind", "position"), float(d.get("q", -1.0)), float(d.get("nu", 5.0)),
                   float(d.get("mu", 0.0)), cutoff)


def _check_nu(nu):
    if not nu > 0:
        raise ValueError(f"nu must be positive, got {nu}")
    if nu <= 4.5:
        warnings.warn(f"nu = {nu} <= 9/2: pointwise cone expansions are not controlled", stacklevel=3)


# ----------------------------------------------------------------------------
# interaction constants
# ----------------------------------------------------------------------------


def p_constant_gamma(nu: float, kind: str = "position") -> float:
    """Closed form of the interaction constant.

    position:  nu (nu+2) sqrt(pi) Gamma((3+nu)/2) / (4 Gamma((4+nu)/2))
    velocity:  (nu+1) sqrt(pi) Gamma((2+nu)/2) / (4 Gamma((3+nu)/2))

    The log-position kind shares the position constant at leading order.
    """
    _check_nu(nu)
    if kind in ("position", "log-position"):
        lg = special.gammaln((3 + nu) / 2) - special.gammaln((4 + nu) / 2)
        return float(nu * (nu + 2) * np.sqrt(np.pi) * np.exp(lg) / 4.0)
    if kind == "velocity":
        lg = special.gammaln((2 + nu) / 2) - special.gammaln((3 + nu) / 2)
        return float((nu + 1) * np.sqrt(np.pi) * np.exp(lg) / 4.0)
    raise ValueError(f"unknown radiation kind {kind!r}")


def _chebyshev_moment(k, tol=1e-13):
    # int_0^1 rho^k (1 - rho^2)^(-1/2) d rho = int_0^{pi/2} sin^k s ds
    val, err = integrate.quad(lambda s: np.sin(s) ** k, 0.0, np.pi / 2, epsabs=0.0, epsrel=tol, limit=200)
    if err > 1e3 * tol * abs(val):
        raise ArithmeticError(f"moment quadrature did not converge (achieved {err:.3e})")
    return val


def p_constant_quadrature(nu: float, kind: str = "position") -> float:
    """Integral form of the interaction constant.

    position:  (nu (nu+2) / 2) int_0^1 rho^(nu+2) (1-rho^2)^(-1/2) d rho
    velocity:  ((nu+1) / 2)    int_0^1 rho^(nu+1) (1-rho^2)^(-1/2) d rho
    """
    _check_nu(nu)
    if kind in ("position", "log-position"):
        return nu * (nu + 2) / 2.0 * _chebyshev_moment(nu + 2)
    if kind == "velocity":
        return (nu + 1) / 2.0 * _chebyshev_moment(nu + 1)
    raise ValueError(f"unknown radiation kind {kind!r}")


def p_constant(spec: RadiationSpec) -> float:
    return p_constant_gamma(spec.nu, spec.kind)


def mixed_constant(q1: float, q2: float, nu: float, time_sign: int = 1) -> float:
    """Effective q p for data (q1 r^nu, q2 r^(nu-1)) near the origin.

    The velocity part is odd in t, so for t < 0 (time_sign = -1) its
    contribution flips sign.
    """
    if time_sign not in (1, -1):
        raise ValueError("time_sign must be +1 or -1")
    return q1 * p_constant_gamma(nu, "position") + time_sign * q2 * p_constant_gamma(nu, "velocity")


# ----------------------------------------------------------------------------
# data
# ----------------------------------------------------------------------------


def data_profile(spec: RadiationSpec, r):
    """The nonzero component of the data (u_0 or u_1) at radii r."""
    r = np.asarray(r, dtype=float)
    chi = spec.cutoff(r)
    if spec.kind == "position":
        return spec.q * chi * r ** spec.nu
    if spec.kind == "velocity":
        return spec.q * chi * r ** (spec.nu - 1)
    with np.errstate(divide="ignore"):
        logs = np.abs(np.log(np.where(r > 0, r, 1.0)))
    return np.where(r > 0, spec.q * chi * r ** spec.nu * logs ** spec.mu, 0.0)


def initial_data(spec: RadiationSpec, grid: RadialGrid) -> FieldState:
    """Sample the radiation data at t = 0."""
    f = data_profile(spec, grid.nodes)
    zero = np.zeros(len(grid))
    if spec.kind == "velocity":
        return FieldState(0.0, zero, f)
    return FieldState(0.0, f, zero)


# ----------------------------------------------------------------------------
# Kirchhoff profile
# ----------------------------------------------------------------------------


def sphere_mean_power(m, rho, z):
    """Mean of |rho w + z e1|^m over w in S^3, with hyp2f1 derivatives in z.

    Returns (M, dM/dz, d2M/dz2) for z >= 0.
    """
    rho = np.asarray(rho, dtype=float)
    z = float(z)
    a, b, c = -m / 2.0, -m / 2.0 - 1.0, 2.0
    out_m = np.empty_like(rho)
    out_d1 = np.empty_like(rho)
    out_d2 = np.empty_like(rho)
    outer = rho >= z  # R = rho, r = z
    if np.any(outer):
        R = rho[outer]
        x = (z / R) ** 2
        F = special.hyp2f1(a, b, c, x)
        F1 = a * b / c * special.hyp2f1(a + 1, b + 1, c + 1, x)
        F2 = a * b * (a + 1) * (b + 1) / (c * (c + 1)) * special.hyp2f1(a + 2, b + 2, c + 2, x)
        Rm = R ** m
        dx = 2 * z / R ** 2
        out_m[outer] = Rm * F
        out_d1[outer] = Rm * F1 * dx
        out_d2[outer] = Rm * (F2 * dx * dx + F1 * 2 / R ** 2)
    inner = ~outer  # R = z, r = rho
    if np.any(inner):
        r = rho[inner]
        x = (r / z) ** 2
        F = special.hyp2f1(a, b, c, x)
        F1 = a * b / c * special.hyp2f1(a + 1, b + 1, c + 1, x)
        F2 = a * b * (a + 1) * (b + 1) / (c * (c + 1)) * special.hyp2f1(a + 2, b + 2, c + 2, x)
        dx = -2 * r * r / z ** 3
        ddx = 6 * r * r / z ** 4
        out_m[inner] = z ** m * F
        out_d1[inner] = m * z ** (m - 1) * F + z ** m * F1 * dx
        out_d2[inner] = (m * (m - 1) * z ** (m - 2) * F + 2 * m * z ** (m - 1) * F1 * dx
                         + z ** m * (F2 * dx * dx + F1 * ddx))
    return out_m, out_d1, out_d2


def phi_exact(spec: RadiationSpec, z: float, n_gauss: int = 96):
    """(phi, phi', phi'') at a single z in [-1, 1].

    phi(z) = (q/2) int_0^{pi/2} sin^3 s M(sin s, z) ds, split at the radius
    where the sphere passes through the shifted origin.
    """
    if spec.kind == "log-position":
        raise ValueError("Kirchhoff profile is only tabulated for pure power data")
    if abs(z) > 1.0:
        raise ValueError(f"z = {z} outside [-1, 1]")
    m = spec.exponent
    sgn = -1.0 if z < 0 else 1.0
    az = abs(z)
    xg, wg = np.polynomial.legendre.leggauss(n_gauss)
    s_split = np.arcsin(az)
    total = np.zeros(3)
    for lo, hi in ((0.0, s_split), (s_split, np.pi / 2)):
        if hi - lo <= 0.0:
            continue
        s = 0.5 * (hi - lo) * xg + 0.5 * (hi + lo)
        w = 0.5 * (hi - lo) * wg
        rho = np.sin(s)
        M, M1, M2 = sphere_mean_power(m, rho, az)
        weight = w * rho ** 3
        total += [np.dot(weight, M), np.dot(weight, M1), np.dot(weight, M2)]
    total *= spec.q / 2.0
    return float(total[0]), float(sgn * total[1]), float(total[2])


def assemble_psi(spec: RadiationSpec, z, phi, dphi, ddphi):
    nu = spec.nu
    if spec.kind == "velocity":
        return (nu + 1) * phi - z * dphi
    return nu * (nu + 2) * phi - (2 * nu + 1) * z * dphi + z * z * ddphi


@dataclass(frozen=True)
class PhiTable:
    """Tabulated Kirchhoff profile on [-1, 1]."""

    spec: RadiationSpec
    z: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    ddphi: np.ndarray
    psi: np.ndarray

    def __post_init__(self):
        for name in ("z", "phi", "dphi", "ddphi", "psi"):
            a = np.array(getattr(self, name), dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        object.__setattr__(self, "_psi_spline", CubicSpline(self.z, self.psi))

    def psi_at(self, z, nu_deriv: int = 0):
        return self._psi_spline(np.asarray(z, dtype=float), nu_deriv)

    def evenness_defect(self) -> float:
        """max |phi(z) - phi(-z)| / max |phi| (nodes are symmetric)."""
        return float(np.max(np.abs(self.phi - self.phi[::-1])) / np.max(np.abs(self.phi)))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["z", "phi", "dphi", "ddphi", "psi"])
            for row in zip(self.z, self.phi, self.dphi, self.ddphi, self.psi):
                w.writerow([repr(float(v)) for v in row])


def phi_table(spec: RadiationSpec, n_z: int = 2001, n_gauss: int = 96) -> PhiTable:
    """Tabulate phi, phi', phi'', psi at Chebyshev-Lobatto points of [-1, 1]."""
    if spec.nu <= 4.5:
        raise ValueError(f"phi_table needs nu > 9/2 (got {spec.nu})")
    z = -np.cos(np.pi * np.arange(n_z) / (n_z - 1))
    z = 0.5 * (z - z[::-1])  # exactly symmetric nodes
    vals = np.empty((n_z, 3))
    # compute on z >= 0 and reflect by parity (phi even, phi' odd, phi'' even)
    for i in range(n_z // 2, n_z):
        vals[i] = phi_exact(spec, z[i], n_gauss)
    for i in range(n_z // 2):
        j = n_z - 1 - i
        vals[i] = (vals[j, 0], -vals[j, 1], vals[j, 2])
    psi = assemble_psi(spec, z, vals[:, 0], vals[:, 1], vals[:, 2])
    return PhiTable(spec, z, vals[:, 0], vals[:, 1], vals[:, 2], psi)


def _time_factor(spec, t):
    at = abs(t)
    if spec.kind == "velocity":
        return t * at ** (spec.nu - 2)
    return at ** (spec.nu - 1)


def linear_evolution(spec: RadiationSpec, t: float, r, table: PhiTable | None = None):
    """Exact free evolution (u_L, d/dt u_L) of the radiation data inside the cone r <= |t|."""
    r = np.asarray(r, dtype=float)
    if t == 0.0:
        raise ValueError("the cone profile needs t != 0")
    if np.any(r > abs(t) * (1 + 1e-14)):
        raise ValueError("linear_evolution is only valid inside the light cone r <= |t|")
    if table is None:
        table = phi_table(spec)
    at = abs(t)
    z = np.minimum(r / at, 1.0)
    psi = table.psi_at(z)
    dpsi = table.psi_at(z, 1)
    tf = _time_factor(spec, t)
    u = r * tf * psi
    # d/dt [T(t) psi(r/|t|)] = T'(t) psi - T(t) (r/|t|^2) sign(t) psi'
    if spec.kind == "velocity":
        dtf = (spec.nu - 1) * at ** (spec.nu - 2)
    else:
        dtf = (spec.nu - 1) * at ** (spec.nu - 2) * np.sign(t)
    ut = r * (dtf * psi - tf * z / at * np.sign(t) * dpsi)
    return u, ut


def leading_order(spec: RadiationSpec, t: float, r):
    """Linear-in-r leading term q p |t|^(nu-1) r of the radiation near the axis.

    The velocity kind carries t |t|^(nu-2) and the log-position kind an extra
    |log t|^mu.
    """
    r = np.asarray(r, dtype=float)
    p = p_constant(spec)
    tf = _time_factor(spec, t)
    if spec.kind == "log-position":
        tf = tf * abs(np.log(abs(t))) ** spec.mu
    return spec.q * p * tf * r


def log_center_coefficient(spec: RadiationSpec, t: float) -> float:
    """(d/dr u_L)(t, 0) / (q |t|^(nu-1) |log t|^mu) for log-position data, exactly.

    From the 4d Poisson formula at the axis,
    v(t, 0) = (q/2) t^(nu-1) [nu(nu+2) K - (2nu+2) K' + K''] with
    K(L) = int rho^(nu+2) (L + log(1/rho))^mu (1-rho^2)^(-1/2) d rho and
    L = |log t|.  Tends to p(nu) as t -> 0 with an O(1/|log t|) correction.
    """
    if spec.kind != "log-position":
        raise ValueError("only defined for log-position data")
    if not 0.0 < abs(t) < spec.cutoff.inner:
        raise ValueError("need 0 < |t| < cutoff.inner so the cone sees pure data")
    nu, mu = spec.nu, spec.mu
    L = abs(np.log(abs(t)))

    def moment(k):
        # k-th L-derivative of K
        coef = 1.0
        for j in range(k):
            coef *= mu - j
        if coef == 0.0:
            return 0.0
        f = lambda s: np.sin(s) ** (nu + 2) * (L - np.log(np.sin(s))) ** (mu - k)
        val, _ = integrate.quad(f, 0.0, np.pi / 2, epsabs=0.0, epsrel=1e-13, limit=400)
        return coef * val

    K0, K1, K2 = moment(0), moment(1), moment(2)
    v0 = 0.5 * (nu * (nu + 2) * K0 - (2 * nu + 2) * K1 + K2)
    return float(v0 / L ** mu)


def write_phi_csv(table: PhiTable, path):
    table.to_csv(path)
