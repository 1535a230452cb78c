"""Harmonic-map family, radial grids, energies and norms for 1-equivariant wave maps.

Every radial quantity lives on a :class:`RadialGrid`.  Fields are odd through
the axis (u(0) = 0), so the grid carries an implicit node at r = 0 where the
field vanishes.  Integrals use the r dr measure:

    <f, g> = int_0^inf f(r) g(r) r dr

which is the 2d radial L2 pairing with the 2 pi dropped.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FOUR_PI = 4.0 * np.pi


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


# ----------------------------------------------------------------------------
# cutoffs
# ----------------------------------------------------------------------------


def _smoothstep5(s):
    return s ** 3 * (10.0 - 15.0 * s + 6.0 * s * s)


def _smoothstep5_prime(s):
    return 30.0 * s * s * (1.0 - s) ** 2


def _bump_step(s):
    # C-infinity step 0 -> 1 on [0, 1]
    s = np.clip(s, 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
        b = np.where(s < 1, np.exp(-1.0 / np.where(s < 1, 1.0 - s, 1.0)), 0.0)
    return a / (a + b)


def _bump_step_prime(s):
    inside = (s > 0) & (s < 1)
    ss = np.where(inside, s, 0.5)
    a = np.exp(-1.0 / ss)
    b = np.exp(-1.0 / (1.0 - ss))
    da = a / ss ** 2
    db = -b / (1.0 - ss) ** 2
    d = (da * (a + b) - a * (da + db)) / (a + b) ** 2
    return np.where(inside, d, 0.0)


@dataclass(frozen=True)
class CutoffSpec:
    """Smooth radial cutoff: 1 on r <= inner, 0 on r >= outer, nonincreasing."""

    kind: str = "smoothstep-quintic"
    inner: float = 0.5
    outer: float = 1.0

    def __post_init__(self):
        if self.kind not in ("smoothstep-quintic", "exp-bump"):
            raise ValueError(f"unknown cutoff kind {self.kind!r}")
        if not (0.0 < self.inner < self.outer):
            raise ValueError("cutoff needs 0 < inner < outer")

    def _s(self, r):
        return np.clip((np.asarray(r, dtype=float) - self.inner) / (self.outer - self.inner), 0.0, 1.0)

    def __call__(self, r):
        s = self._s(r)
        if self.kind == "smoothstep-quintic":
            return 1.0 - _smoothstep5(s)
        return 1.0 - _bump_step(s)

    def derivative(self, r):
        s = self._s(r)
        scale = 1.0 / (self.outer - self.inner)
        if self.kind == "smoothstep-quintic":
            return -_smoothstep5_prime(s) * scale
        return -_bump_step_prime(s) * scale

    def scaled(self, factor: float) -> "CutoffSpec":
        """Cutoff r -> chi(r / factor)."""
        return CutoffSpec(self.kind, self.inner * factor, self.outer * factor)


DEFAULT_CUTOFF = CutoffSpec()


# ----------------------------------------------------------------------------
# grids and states
# ----------------------------------------------------------------------------


def _trapezoid_weights(nodes):
    # trapezoid for int_0^{r_max} f(r) r dr with the implicit origin node
    ext = np.concatenate(([0.0], nodes))
    d = np.diff(ext)
    w = np.empty_like(nodes)
    w[:-1] = nodes[:-1] * (d[:-1] + d[1:]) / 2.0
    w[-1] = nodes[-1] * d[-1] / 2.0
    return w


@dataclass(frozen=True)
class RadialGrid:
    """Strictly increasing radial nodes plus trapezoid weights in the r dr measure."""

    nodes: np.ndarray
    weights: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 3:
            raise ValueError("grid needs at least 3 nodes")
        if nodes[0] <= 0.0 or np.any(np.diff(nodes) <= 0.0):
            raise ValueError("grid nodes must be positive and strictly increasing")
        object.__setattr__(self, "nodes", _frozen(nodes))
        w = _trapezoid_weights(nodes) if self.weights is None else np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", _frozen(w))

    # constructors ---------------------------------------------------------

    @classmethod
    def uniform(cls, r_max: float, n: int) -> "RadialGrid":
        """n nodes h, 2h, ..., r_max."""
        return cls(np.linspace(r_max / n, r_max, n))

    @classmethod
    def geometric(cls, r_min: float, r_max: float, n: int) -> "RadialGrid":
        return cls(np.geomspace(r_min, r_max, n))

    @classmethod
    def hybrid(cls, r_min: float, r_max: float, h: float, ratio: float | None = None) -> "RadialGrid":
        """Geometric nodes from r_min up to where the cell size reaches h, uniform beyond.

        ``ratio`` is the geometric growth factor; by default 1 + h, which glues
        onto the uniform part at r = 1.
        """
        if ratio is None:
            ratio = 1.0 + h
        if ratio <= 1.0:
            raise ValueError("geometric ratio must exceed 1")
        r_glue = min(h / (ratio - 1.0), r_max)
        if r_min >= r_glue:
            n = max(int(np.ceil(r_max / h)), 3)
            return cls.uniform(r_max, n)
        n_geo = int(np.ceil(np.log(r_glue / r_min) / np.log(ratio)))
        geo = r_min * ratio ** np.arange(n_geo + 1)
        geo = geo * (r_glue / geo[-1])  # land exactly on the glue radius
        n_uni = int(np.ceil((r_max - r_glue) / h))
        if n_uni > 0:
            uni = np.linspace(r_glue, r_max, n_uni + 1)[1:]
            nodes = np.concatenate((geo, uni))
        else:
            nodes = geo
        return cls(nodes)

    # basic properties -----------------------------------------------------

    def __len__(self):
        return self.nodes.size

    @property
    def r_max(self) -> float:
        return float(self.nodes[-1])

    @property
    def spacing(self) -> np.ndarray:
        """Cell widths including the axis cell [0, r_0]."""
        return np.diff(np.concatenate(([0.0], self.nodes)))

    @property
    def midpoints(self) -> np.ndarray:
        ext = np.concatenate(([0.0], self.nodes))
        return 0.5 * (ext[1:] + ext[:-1])

    @property
    def min_spacing(self) -> float:
        return float(np.min(np.diff(self.nodes)))

    def refined(self) -> "RadialGrid":
        """Insert every midpoint (halves each cell; keeps r_0 and r_max)."""
        mids = 0.5 * (self.nodes[1:] + self.nodes[:-1])
        nodes = np.empty(2 * self.nodes.size - 1)
        nodes[0::2] = self.nodes
        nodes[1::2] = mids
        return RadialGrid(nodes)

    # quadrature -----------------------------------------------------------

    def integrate(self, f) -> float:
        """int_0^{r_max} f r dr."""
        return float(np.dot(self.weights, f))

    def cone_weights(self, R: float) -> np.ndarray:
        """Weights c with sum(c * f) = int_0^R f r dr.

        The cell containing R is split by linearly interpolating the integrand
        f r at R.
        """
        r = self.nodes
        if R >= r[-1]:
            return np.array(self.weights)
        c = np.zeros_like(r)
        if R <= 0.0:
            return c
        k = int(np.searchsorted(r, R, side="right")) - 1  # r[k] <= R < r[k+1]
        if k < 0:
            theta = R / r[0]
            c[0] = 0.5 * R * theta * r[0]
            return c
        ext = np.concatenate(([0.0], r))
        d = np.diff(ext)
        # full segments [0, r_0], ..., [r_{k-1}, r_k]
        c[:k] = r[:k] * (d[:k] + d[1:k + 1]) / 2.0
        c[k] = r[k] * d[k] / 2.0
        seg = R - r[k]
        theta = seg / (r[k + 1] - r[k])
        c[k] += 0.5 * seg * (2.0 - theta) * r[k]
        c[k + 1] += 0.5 * seg * theta * r[k + 1]
        return c

    def integrate_to(self, f, R: float) -> float:
        return float(np.dot(self.cone_weights(R), f))

    def derivative(self, f) -> np.ndarray:
        """Second-order d/dr for fields vanishing on the axis."""
        f = np.asarray(f, dtype=float)
        x = np.concatenate(([0.0], self.nodes))
        y = np.concatenate(([0.0], f))
        hm = x[1:-1] - x[:-2]
        hp = x[2:] - x[1:-1]
        d = np.empty_like(f)
        d[:-1] = (hm ** 2 * (y[2:] - y[1:-1]) + hp ** 2 * (y[1:-1] - y[:-2])) / (hm * hp * (hm + hp))
        # one-sided second order at r_max
        h1 = x[-1] - x[-2]
        h2 = x[-2] - x[-3]
        d[-1] = ((2 * h1 + h2) / (h1 * (h1 + h2))) * y[-1] - ((h1 + h2) / (h1 * h2)) * y[-2] + (h1 / (h2 * (h1 + h2))) * y[-3]
        return d

    def interpolate(self, f, r):
        """Cubic interpolation of an axis-odd field at radii r."""
        from scipy.interpolate import CubicSpline

        x = np.concatenate(([0.0], self.nodes))
        y = np.concatenate(([0.0], np.asarray(f, dtype=float)))
        return CubicSpline(x, y)(r)


@dataclass(frozen=True)
class FieldState:
    """A Cauchy slice (u, u_t) at time t."""

    t: float
    u: np.ndarray
    u_dot: np.ndarray

    def __post_init__(self):
        u = np.asarray(self.u, dtype=float)
        ud = np.asarray(self.u_dot, dtype=float)
        if u.shape != ud.shape or u.ndim != 1:
            raise ValueError(f"u and u_dot shapes differ: {u.shape} vs {ud.shape}")
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(ud))):
            raise ValueError("field state has non-finite entries")
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "u", _frozen(u))
        object.__setattr__(self, "u_dot", _frozen(ud))

    def check_grid(self, grid: RadialGrid):
        if self.u.size != len(grid):
            raise ValueError(f"state has {self.u.size} samples, grid has {len(grid)}")


def bubble_state(lam: float, grid: RadialGrid, t: float = 0.0) -> FieldState:
    """The static harmonic map (Q_lambda, 0)."""
    return FieldState(t, q_profile(lam, grid.nodes), np.zeros(len(grid)))


# ----------------------------------------------------------------------------
# closed forms
# ----------------------------------------------------------------------------


def _check_scale(lam):
    if not lam > 0:
        raise ValueError(f"scale must be positive, got {lam}")


def q_profile(lam: float, r):
    """Q_lambda(r) = 2 arctan(r / lambda)."""
    _check_scale(lam)
    return 2.0 * np.arctan(np.asarray(r, dtype=float) / lam)


def lambda_q(r):
    """Lambda Q = r Q'(r) = 2r / (1 + r^2)."""
    r = np.asarray(r, dtype=float)
    return 2.0 * r / (1.0 + r * r)


def lambda_q_prime(r):
    r = np.asarray(r, dtype=float)
    return 2.0 * (1.0 - r * r) / (1.0 + r * r) ** 2


def lambda0_lambda_q(r):
    """(1 + r d/dr) Lambda Q = 4r / (1 + r^2)^2."""
    r = np.asarray(r, dtype=float)
    return 4.0 * r / (1.0 + r * r) ** 2


def lambda_q_scaled(lam: float, r):
    """L2-critical rescaling (Lambda Q)_lambda(r) = Lambda Q(r / lambda) / lambda."""
    _check_scale(lam)
    return lambda_q(np.asarray(r, dtype=float) / lam) / lam


def lambda_q_l2_truncated(R: float) -> float:
    """int_0^R (Lambda Q)^2 r dr = -2R^2 / (1 + R^2) + 2 log(1 + R^2)."""
    if not R > 0:
        raise ValueError(f"truncation radius must be positive, got {R}")
    R2 = R * R
    return float(-2.0 * R2 / (1.0 + R2) + 2.0 * np.log1p(R2))


def z_profile(r, cutoff: CutoffSpec = DEFAULT_CUTOFF):
    """Orthogonality profile Z = chi Lambda Q (compactly supported)."""
    return cutoff(r) * lambda_q(r)


def z_profile_prime(r, cutoff: CutoffSpec = DEFAULT_CUTOFF):
    return cutoff.derivative(r) * lambda_q(r) + cutoff(r) * lambda_q_prime(r)


# ----------------------------------------------------------------------------
# energies and norms
# ----------------------------------------------------------------------------


def _cell_gradient_sq(v, grid: RadialGrid):
    # sum over cells (incl. axis cell, v(0) = 0) of int v_r^2 r dr, midpoint rule
    ext = np.concatenate(([0.0], np.asarray(v, dtype=float)))
    dv = np.diff(ext)
    d = grid.spacing
    return float(np.sum(grid.midpoints * dv * dv / d))


def potential_energy(u, grid: RadialGrid) -> float:
    """pi int (u_r^2 + sin^2 u / r^2) r dr in the discretization used by the solver."""
    u = np.asarray(u, dtype=float)
    s = np.sin(u) / grid.nodes
    return float(np.pi * (_cell_gradient_sq(u, grid) + np.dot(grid.weights, s * s)))


def energy(state: FieldState, grid: RadialGrid) -> float:
    """Wave-map energy pi int (u_t^2 + u_r^2 + sin^2 u / r^2) r dr."""
    state.check_grid(grid)
    kinetic = np.pi * np.dot(grid.weights, state.u_dot ** 2)
    return float(kinetic + potential_energy(state.u, grid))


def bogomolny_defect(state: FieldState, grid: RadialGrid, form: str = "factorized") -> float:
    """E(u) - 4 pi, either by direct subtraction or via the perfect-square form.

    The factorized form is pi ||u_t||^2 + pi int (u_r - sin u / r)^2 r dr,
    plus the boundary term 2 pi (1 - cos u(r_max)) - 4 pi which vanishes when
    u(r_max) = pi exactly.
    """
    state.check_grid(grid)
    if form == "direct":
        return energy(state, grid) - FOUR_PI
    if form != "factorized":
        raise ValueError(f"unknown form {form!r}")
    ext = np.concatenate(([0.0], state.u))
    du = np.diff(ext)
    ubar = 0.5 * (ext[1:] + ext[:-1])
    mid = grid.midpoints
    d = grid.spacing
    square = np.sum(mid * d * (du / d - np.sin(ubar) / mid) ** 2)
    kinetic = np.dot(grid.weights, state.u_dot ** 2)
    boundary = 2.0 * np.pi * (1.0 - np.cos(state.u[-1])) - FOUR_PI
    return float(np.pi * (kinetic + square) + boundary)


def h_norm(v, grid: RadialGrid) -> float:
    """||v||_H = (int (v_r^2 + v^2 / r^2) r dr)^(1/2), no pi prefactor."""
    v = np.asarray(v, dtype=float)
    if v.size != len(grid):
        raise ValueError("field and grid lengths differ")
    s = v / grid.nodes
    return float(np.sqrt(_cell_gradient_sq(v, grid) + np.dot(grid.weights, s * s)))


def l2_norm(v, grid: RadialGrid) -> float:
    v = np.asarray(v, dtype=float)
    return float(np.sqrt(np.dot(grid.weights, v * v)))


def sup_norm(v, grid: RadialGrid, a: float = 0.0, b: float = np.inf) -> float:
    v = np.asarray(v, dtype=float)
    mask = (grid.nodes >= a) & (grid.nodes <= b)
    return float(np.max(np.abs(v[mask]))) if np.any(mask) else 0.0
