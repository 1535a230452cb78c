"""Experiment pipelines: configuration, checks, reports and file outputs.

Every experiment returns a RunReport whose checks carry the acceptance id
(C1 ... C10), the measured value and the tolerance.  Outputs are written with
repr() formatting and fixed column order so that identical configs give
byte-identical CSV files.
"""

from __future__ import annotations

import copy
import hashlib
import json
import os
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import integrate

from . import core, modulation, radiation, reduced, solver
from .core import DEFAULT_CUTOFF, CutoffSpec, FieldState, RadialGrid
from .modulation import VirialSpec
from .radiation import RadiationSpec

SCHEMA_VERSION = 1
EXPERIMENTS = ("constants", "kirchhoff-check", "radiation-evolve", "bubble-track", "reduced-rates")
RESOLUTIONS = ("low", "default", "high")


# ----------------------------------------------------------------------------
# configuration
# ----------------------------------------------------------------------------


def _cutoff_dict(c: CutoffSpec):
    return {"kind": c.kind, "inner": c.inner, "outer": c.outer}


def _cutoff_from(d):
    d = d or {}
    return CutoffSpec(d.get("kind", "smoothstep-quintic"), float(d.get("inner", 0.5)), float(d.get("outer", 1.0)))


@dataclass(frozen=True)
class SolverSettings:
    cfl: float = 0.5
    scheme: str = "rk4"
    outer_bc: str = "exact-exterior"

    def __post_init__(self):
        if not 0 < self.cfl < 1:
            raise ValueError("cfl must lie in (0, 1)")
        if self.scheme not in solver.SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.outer_bc not in solver.OUTER_BCS:
            raise ValueError(f"unknown outer boundary {self.outer_bc!r}")


@dataclass(frozen=True)
class ModulationSettings:
    cutoff: CutoffSpec = DEFAULT_CUTOFF
    virial: VirialSpec = VirialSpec()


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    radiation: RadiationSpec = RadiationSpec()
    solver: SolverSettings = SolverSettings()
    modulation: ModulationSettings = ModulationSettings()
    params: dict = field(default_factory=dict)
    output_dir: str = "out"
    seed: int = 0
    resolution: str = "default"
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.experiment!r}")
        if self.resolution not in RESOLUTIONS:
            raise ValueError(f"unknown resolution {self.resolution!r}")
        if self.schema_version != SCHEMA_VERSION:
            raise ValueError(f"unsupported config schema {self.schema_version}")

    def to_dict(self):
        return {
            "schema_version": self.schema_version,
            "experiment": self.experiment,
            "radiation": self.radiation.to_dict(),
            "solver": asdict(self.solver),
            "modulation": {"cutoff": _cutoff_dict(self.modulation.cutoff), "virial": asdict(self.modulation.virial)},
            "params": copy.deepcopy(self.params),
            "output_dir": self.output_dir,
            "seed": self.seed,
            "resolution": self.resolution,
        }

    @classmethod
    def from_dict(cls, d):
        mod = d.get("modulation", {})
        return cls(
            experiment=d["experiment"],
            radiation=RadiationSpec.from_dict(d.get("radiation", {})),
            solver=SolverSettings(**d.get("solver", {})),
            modulation=ModulationSettings(_cutoff_from(mod.get("cutoff")), VirialSpec(**mod.get("virial", {}))),
            params=copy.deepcopy(d.get("params", {})),
            output_dir=d.get("output_dir", "out"),
            seed=int(d.get("seed", 0)),
            resolution=d.get("resolution", "default"),
            schema_version=int(d.get("schema_version", SCHEMA_VERSION)),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def config_hash(self) -> str:
        d = self.to_dict()
        d.pop("output_dir")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:16]

    def param(self, key, default):
        return self.params.get(key, default)


# ----------------------------------------------------------------------------
# reports
# ----------------------------------------------------------------------------


@dataclass
class Check:
    id: str
    name: str
    value: float
    tolerance: str
    passed: bool

    def line(self):
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.id} {self.name}: {self.value:.6g} (want {self.tolerance})"


@dataclass
class RunReport:
    experiment: str
    config_hash: str
    checks: list = field(default_factory=list)
    artifacts: list = field(default_factory=list)
    info: dict = field(default_factory=dict)

    def add(self, cid, name, value, tolerance, passed):
        self.checks.append(Check(cid, name, float(value), tolerance, bool(passed)))

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, cid, name=None):
        for c in self.checks:
            if c.id == cid and (name is None or c.name == name):
                return c
        raise KeyError(cid)

    def to_dict(self):
        return {
            "experiment": self.experiment,
            "config_hash": self.config_hash,
            "passed": self.passed,
            "checks": [asdict(c) for c in self.checks],
            "artifacts": sorted(self.artifacts),
            "info": self.info,
        }

    def write(self, out_dir):
        path = os.path.join(out_dir, f"report_{self.experiment}.json")
        with open(path, "w") as fh:
            json.dump(_jsonable(self.to_dict()), fh, sort_keys=True, indent=2)
        return path


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return None if not np.isfinite(x) else float(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _write_csv(path, header, rows):
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating, int, np.integer)) and not isinstance(v, bool)
                        else str(v) for v in row])


def _res(config, low, default, high):
    return {"low": low, "default": default, "high": high}[config.resolution]


# ----------------------------------------------------------------------------
# constants (C1, C3)
# ----------------------------------------------------------------------------


def run_constants(config: ExperimentConfig) -> RunReport:
    out = config.output_dir
    os.makedirs(out, exist_ok=True)
    rep = RunReport("constants", config.config_hash())
    rng = np.random.default_rng(config.seed)

    nus = np.asarray(config.param("nus", list(np.linspace(4.6, 12.0, 20))), dtype=float)
    if np.any(nus <= 4.5):
        raise ValueError("constants sweep needs nu > 9/2 (cone expansions are not controlled below)")
    rows, worst = [], 0.0
    for nu in nus:
        for kind in ("position", "velocity"):
            pg = radiation.p_constant_gamma(nu, kind)
            pq = radiation.p_constant_quadrature(nu, kind)
            rel = abs(pg - pq) / pg
            worst = max(worst, rel)
            rows.append((nu, kind, pg, pq, rel))
    _write_csv(os.path.join(out, "constants.csv"), ["nu", "kind", "p_gamma", "p_quadrature", "rel_diff"], rows)
    rep.artifacts.append("constants.csv")
    rep.add("C1", "p gamma vs quadrature (max rel)", worst, "<= 1e-10", worst <= 1e-10)
    e5 = abs(radiation.p_constant_gamma(5.0, "position") - 8.0)
    e6 = abs(radiation.p_constant_gamma(6.0, "velocity") - 1.6)
    rep.add("C1", "p(5) = 8", e5, "<= 1e-12", e5 <= 1e-12)
    rep.add("C1", "p_tip(6) = 1.6", e6, "<= 1e-12", e6 <= 1e-12)

    n = _res(config, 8000, 16000, 32000)
    grid = RadialGrid.geometric(1e-7, 1e6, n)
    erows, worst_e, worst_b = [], 0.0, 0.0
    for lam in (0.1, 1.0, 10.0):
        st = core.bubble_state(lam, grid)
        E = core.energy(st, grid)
        rel = abs(E - core.FOUR_PI) / core.FOUR_PI
        bf = core.bogomolny_defect(st, grid)
        bd = core.bogomolny_defect(st, grid, "direct")
        worst_e, worst_b = max(worst_e, rel), max(worst_b, abs(bf))
        erows.append((lam, E, rel, bf, bd))
    _write_csv(os.path.join(out, "bubble_energy.csv"),
               ["lambda", "energy", "rel_err", "defect_factorized", "defect_direct"], erows)
    rep.artifacts.append("bubble_energy.csv")
    rep.add("C3", "energy of Q_lambda (max rel err)", worst_e, "<= 1e-6", worst_e <= 1e-6)
    rep.add("C3", "Bogomolny defect of Q_lambda", worst_b, "<= 1e-6", worst_b <= 1e-6)

    lrows, worst_l = [], 0.0
    f = lambda r: (2 * r / (1 + r * r)) ** 2 * r
    for R in (0.5, 1.0, 10.0, 100.0):
        closed = core.lambda_q_l2_truncated(R)
        pts = [1.0] if R > 1 else None
        quad = integrate.quad(f, 0.0, R, epsabs=0.0, epsrel=1e-13, limit=400, points=pts)[0]
        rel = abs(closed - quad) / abs(quad)
        worst_l = max(worst_l, rel)
        lrows.append((R, closed, quad, rel))
    _write_csv(os.path.join(out, "laq_l2.csv"), ["R", "closed_form", "quadrature", "rel_diff"], lrows)
    rep.artifacts.append("laq_l2.csv")
    rep.add("C3", "LaQL2 closed form vs quadrature", worst_l, "<= 1e-10", worst_l <= 1e-10)

    # randomized Bogomolny consistency (seeded)
    g2 = RadialGrid.geometric(1e-6, 1e5, _res(config, 4000, 8000, 16000))
    worst_c = 0.0
    for _ in range(int(config.param("random_fields", 20))):
        lam = 10 ** rng.uniform(-1, 1)
        amp, width, centre = rng.uniform(-0.5, 0.5), rng.uniform(0.2, 2), rng.uniform(0.5, 5)
        bump = amp * g2.nodes ** 2 / (1 + g2.nodes ** 2) * np.exp(-((g2.nodes - centre) / width) ** 2)
        st = FieldState(0.0, core.q_profile(lam, g2.nodes) + bump, 0.1 * bump)
        E = core.energy(st, g2)
        d = abs(E - (core.FOUR_PI + core.bogomolny_defect(st, g2))) / E
        worst_c = max(worst_c, d)
    rep.info["bogomolny_random_consistency"] = worst_c
    return rep


# ----------------------------------------------------------------------------
# Kirchhoff profile (C2)
# ----------------------------------------------------------------------------


def kirchhoff_residual(spec, table, t, r, h):
    u = lambda tt, rr: radiation.linear_evolution(spec, tt, rr, table)[0]
    c = u(t, r)
    utt = (u(t + h, r) - 2 * c + u(t - h, r)) / h ** 2
    urr = (u(t, r + h) - 2 * c + u(t, r - h)) / h ** 2
    ur = (u(t, r + h) - u(t, r - h)) / (2 * h)
    return float(abs(utt - urr - ur / r + c / r ** 2))


def run_kirchhoff(config: ExperimentConfig) -> RunReport:
    out = config.output_dir
    os.makedirs(out, exist_ok=True)
    rep = RunReport("kirchhoff-check", config.config_hash())
    n_z = int(config.param("n_z", _res(config, 801, 2001, 4001)))
    q = config.radiation.q
    worst_psi, worst_even, orders = 0.0, 0.0, []
    rows = []
    cases = [(5.0, "position"), (7.5, "position"), (6.0, "velocity")]
    own = (float(config.radiation.nu), config.radiation.kind)
    if own[1] != "log-position" and own not in cases:
        cases.append(own)
    for nu, kind in cases:
        spec = RadiationSpec(kind, q, nu, 0.0, config.radiation.cutoff)
        table = radiation.phi_table(spec, n_z)
        name = f"phi_{kind}_nu{nu:g}.csv"
        table.to_csv(os.path.join(out, name))
        rep.artifacts.append(name)
        psi0 = float(table.psi[n_z // 2]) / q
        p = radiation.p_constant(spec)
        rel = abs(psi0 - p) / p
        even = table.evenness_defect()
        if kind == "position" and nu in (5.0, 7.5):
            worst_psi = max(worst_psi, rel)
            worst_even = max(worst_even, even)
        for r in (0.1, 0.2, 0.3):
            res = [kirchhoff_residual(spec, table, 0.5, r, h) for h in (0.02, 0.01, 0.005)]
            o = [np.log2(res[i] / res[i + 1]) for i in range(2)]
            if kind == "position" and nu in (5.0, 7.5):
                orders.extend(o)
            rows.append((nu, kind, r, res[0], res[1], res[2], o[0], o[1]))
        rep.info[f"psi0_over_q_{kind}_nu{nu:g}"] = psi0
    _write_csv(os.path.join(out, "kirchhoff_residual.csv"),
               ["nu", "kind", "r", "res_h0.02", "res_h0.01", "res_h0.005", "order_1", "order_2"], rows)
    rep.artifacts.append("kirchhoff_residual.csv")
    rep.add("C2", "psi(0)/q vs p (max rel)", worst_psi, "<= 1e-8", worst_psi <= 1e-8)
    rep.add("C2", "phi evenness", worst_even, "<= 1e-9", worst_even <= 1e-9)
    dev = max(abs(o - 2.0) for o in orders)
    rep.add("C2", "Kirchhoff residual order deviation from 2", dev, "<= 0.3", dev <= 0.3)
    return rep


# ----------------------------------------------------------------------------
# radiation / solver runs (C4, C5, C6)
# ----------------------------------------------------------------------------


def _stationarity(h, r_max, cfl, scheme):
    grid = RadialGrid.uniform(r_max, int(round(r_max / h)))
    st = core.bubble_state(1.0, grid)
    cfg = solver.SolverConfig(grid, cfl, scheme, "fixed", (0.0, 1.0))
    tr = solver.evolve(st, cfg, True, np.linspace(0.0, 1.0, 21))
    inner = grid.nodes <= 5.0
    drift = max(float(np.max(np.abs(u - st.u)[inner])) for u in tr.u)
    E = [core.energy(tr.state(k), grid) for k in range(len(tr))]
    return drift, max(abs(e - E[0]) for e in E) / E[0]


def run_radiation_evolve(config: ExperimentConfig) -> RunReport:
    out = config.output_dir
    os.makedirs(out, exist_ok=True)
    rep = RunReport("radiation-evolve", config.config_hash())
    spec = config.radiation
    s = config.solver

    # C4: (Q_1, 0) stationarity and energy conservation
    h = float(config.param("stationary_h", _res(config, 0.02, 0.01, 0.005)))
    d1, e1 = _stationarity(h, 10.0, s.cfl, s.scheme)
    d2, _ = _stationarity(h / 2, 10.0, s.cfl, s.scheme)
    order = np.log2(d1 / d2)
    rep.add("C4", "sup |u - Q_1| on r <= 5", d1, "<= 5e-4", d1 <= 5e-4)
    rep.add("C4", "stationarity convergence order", order, "2 +- 0.3", abs(order - 2) <= 0.3)
    rep.add("C4", "relative energy drift", e1, "<= 1e-6", e1 <= 1e-6)
    _write_csv(os.path.join(out, "stationarity.csv"), ["h", "sup_drift"], [(h, d1), (h / 2, d2)])
    rep.artifacts.append("stationarity.csv")

    # C5: flux identity on the radiation-only nonlinear run
    r_max = 3.0
    hf = float(config.param("flux_h", _res(config, 0.0025, 0.000625, 0.0003125)))
    grid = RadialGrid.uniform(r_max, int(round(r_max / hf)))
    t_end = float(config.param("t_end", 1.0))
    n_out = int(config.param("n_out", 201))
    outs = np.round(np.linspace(0.0, t_end, n_out), 12)
    cfg = solver.SolverConfig(grid, s.cfl, s.scheme, "fixed", (0.0, t_end))
    tr = solver.evolve(radiation.initial_data(spec, grid), cfg, True, outs)
    ft0, ft1 = config.param("flux_window", [0.2, 0.8])
    fr = solver.flux(tr, ft0, ft1)
    rep.add("C5", "flux identity defect / E_loc", fr.relative_defect, "<= 1e-5", fr.relative_defect <= 1e-5)
    rep.info["flux"] = asdict(fr)
    solver.write_summary_csv(os.path.join(out, "radiation_summary.csv"), tr)
    rep.artifacts.append("radiation_summary.csv")
    keep = list(range(0, len(tr), max(1, (len(tr) - 1) // 20)))
    sub = solver.Trajectory(grid, [tr.times[k] for k in keep], [tr.u[k] for k in keep], [tr.u_dot[k] for k in keep])
    solver.write_trajectory(os.path.join(out, "radiation_trajectory.bin"), sub)
    rep.artifacts.append("radiation_trajectory.bin")

    # C6: nonlinear vs linear gap in the cone, same stencils for both
    hg = float(config.param("gap_h", _res(config, 0.005, 0.0025, 0.00125)))
    gg = RadialGrid.uniform(r_max, int(round(r_max / hg)))
    times = [0.0, 0.2, 0.4, 0.8]
    gcfg = solver.SolverConfig(gg, s.cfl, s.scheme, "fixed", (0.0, 0.8))
    data = radiation.initial_data(spec, gg)
    nl = solver.evolve(data, gcfg, True, times)
    li = solver.evolve(data, gcfg, False, times)
    rows = []
    for t in times[1:]:
        rows.append((t, solver.nonlinear_vs_linear_gap(nl, li, t, spec.nu, "quadratic"),
                     solver.nonlinear_vs_linear_gap(nl, li, t, spec.nu, "linear")))
    _write_csv(os.path.join(out, "cone_gap.csv"), ["t", "weighted_sup_r2", "weighted_sup_r1"], rows)
    rep.artifacts.append("cone_gap.csv")
    w = [r[1] for r in rows]
    spread = max(w) / min(w)
    rep.add("C6", "spread of r^2 t^(3nu-2) weighted gap over t", spread, "< 4", spread < 4)
    rep.info["cone_gap_linear_weight_spread"] = max(r[2] for r in rows) / min(r[2] for r in rows)
    return rep


# ----------------------------------------------------------------------------
# bubble track (C7, C10)
# ----------------------------------------------------------------------------


def radiation_at(spec: RadiationSpec, t0: float, grid: RadialGrid, h: float, cfl=0.5, scheme="rk4") -> FieldState:
    """u*(t0) from the radiation data, evolved on a uniform grid and splined onto grid."""
    r_max = grid.r_max
    gu = RadialGrid.uniform(r_max, int(round(r_max / h)))
    tr = solver.evolve(radiation.initial_data(spec, gu), solver.SolverConfig(gu, cfl, scheme, "fixed", (0, t0)),
                       True, [0.0, t0])
    return FieldState(t0, gu.interpolate(tr.u[-1], grid.nodes), gu.interpolate(tr.u_dot[-1], grid.nodes))


def ansatz(spec: RadiationSpec, t0: float, lam: float, grid: RadialGrid, ustar: FieldState,
           cutoff: CutoffSpec = DEFAULT_CUTOFF) -> FieldState:
    """v(t0) = Q_lam + u*(t0) + (1 - chi(r/t0)) (pi - Q_lam), velocity u*_t(t0)."""
    Q = core.q_profile(lam, grid.nodes)
    chi = cutoff.scaled(t0)(grid.nodes)
    return FieldState(t0, Q + ustar.u + (1 - chi) * (np.pi - Q), ustar.u_dot)


def bubble_grid(lam, config):
    h = float(config.param("h", _res(config, 0.01, 0.005, 0.0025)))
    ratio = float(config.param("ratio", _res(config, 1.1, 1.05, 1.025)))
    r_max = float(config.param("r_max", 3.0))
    return RadialGrid.hybrid(lam / 20.0, r_max, h, ratio)


def initial_g_constant(spec, t0, config, h_rad):
    """C in ||g(t0)||_H^2 = C t0^(2nu) |log t0|^-2 for the ansatz at t0."""
    lam = float(reduced.lambda_c(t0, spec))
    grid = bubble_grid(lam, config)
    us = radiation_at(spec, t0, grid, h_rad)
    v = ansatz(spec, t0, lam, grid, us, config.modulation.cutoff)
    g, gdot = modulation.remainder_on(grid, v, us, lam)
    norm2 = core.h_norm(g, grid) ** 2 + core.l2_norm(gdot, grid) ** 2
    return norm2 * np.log(t0) ** 2 / t0 ** (2 * spec.nu)


def run_bubble_track(config: ExperimentConfig) -> RunReport:
    out = config.output_dir
    os.makedirs(out, exist_ok=True)
    rep = RunReport("bubble-track", config.config_hash())
    spec = config.radiation
    s = config.solver
    cutoff = config.modulation.cutoff
    virial = config.modulation.virial
    t0 = float(config.param("t0", 0.4))
    window = float(config.param("window", 0.012))
    n_out = int(config.param("n_out", 13))
    eps = float(config.param("epsilon", 0.25))
    h_rad = float(config.param("h_radiation", 0.0025))

    lam0 = float(reduced.lambda_c(t0, spec))
    grid = bubble_grid(lam0, config)
    us = radiation_at(spec, t0, grid, h_rad, s.cfl, s.scheme)
    v = ansatz(spec, t0, lam0, grid, us, cutoff)

    # C7: exact-ansatz and along-family extraction
    lam_x = modulation.extract_lambda(grid, v, us, 1.3 * lam0, cutoff)
    err0 = abs(lam_x / lam0 - 1)
    rep.add("C7", "exact-ansatz extraction (rel err)", err0, "<= 1e-12", err0 <= 1e-12)
    shifted = FieldState(t0, v.u + core.q_profile(1.1 * lam0, grid.nodes) - core.q_profile(lam0, grid.nodes), v.u_dot)
    err1 = abs(modulation.extract_lambda(grid, shifted, us, lam0, cutoff) / (1.1 * lam0) - 1)
    rep.info["family_shift_extraction_rel_err"] = err1

    # C10 initial remainder size across t0
    t0s = config.param("g_size_t0s", [0.1, 0.2, 0.4])
    Cs = [initial_g_constant(spec, tt, config, h_rad) for tt in t0s]
    rep.info["initial_g_constants"] = dict(zip([str(x) for x in t0s], Cs))

    outer_bc = s.outer_bc
    cfg = solver.SolverConfig(grid, s.cfl, s.scheme, outer_bc, (t0, t0 + window), radiation=spec)
    outs = np.linspace(t0, t0 + window, n_out)
    tr = solver.evolve(v, cfg, True, outs, companion=us if outer_bc == "exact-exterior" else None)
    if outer_bc == "exact-exterior":
        ustar_traj = tr.companion
    else:
        ustar_traj = solver.evolve(us, solver.SolverConfig(grid, s.cfl, s.scheme, outer_bc, (t0, t0 + window)),
                                   True, outs)
    tk = modulation.track(tr, ustar_traj, lam0, cutoff, virial)
    if tk.failed_at is not None:
        rep.info["track_failure"] = {"t": tk.failed_at, "message": tk.message}
    samples = tk.samples
    modulation.write_samples_csv(os.path.join(out, "modulation.csv"), samples)
    rep.artifacts.append("modulation.csv")
    lc = [float(reduced.lambda_c(x.t, spec)) for x in samples]
    _write_csv(os.path.join(out, "lambda_track.csv"), ["t", "lambda", "lambda_c", "ratio"],
               [(x.t, x.lam, c, x.lam / c) for x, c in zip(samples, lc)])
    rep.artifacts.append("lambda_track.csv")

    complete = tk.failed_at is None and len(samples) == n_out and tr.status == "ok"
    ortho = max(x.ortho_residual for x in samples) if samples else np.inf
    pyth = max(abs(x.pythagoras_defect) for x in samples) if samples else np.inf
    C_speed = tk.speed_constant()
    rep.add("C7", "orthogonality residual (max over track)", ortho, "<= 1e-10", complete and ortho <= 1e-10)
    rep.add("C7", "Pythagoras identity defect (max rel)", pyth, "<= 1e-10", complete and pyth <= 1e-10)
    rep.add("C7", "fitted C in |lambda'| <= C ||g_dot||", C_speed, "finite", complete and np.isfinite(C_speed))

    ratios = np.array([x.lam / c for x, c in zip(samples, lc)])
    lo, hi = (float(ratios.min()), float(ratios.max())) if samples else (np.nan, np.nan)
    rep.add("C10", "min lambda/lambda_c on window", lo, f">= {1 - eps:g}", complete and lo >= 1 - eps)
    rep.add("C10", "max lambda/lambda_c on window", hi, f"<= {1 + eps:g}", complete and hi <= 1 + eps)
    C_g = Cs[t0s.index(t0)] if t0 in t0s else initial_g_constant(spec, t0, config, h_rad)
    spread = max(Cs) / min(Cs)
    rep.add("C10", "C in ||g(t0)||^2 <= C t0^(2nu) |log t0|^-2", C_g, "finite", bool(np.isfinite(C_g)))
    rep.add("C10", "spread of C over t0 values", spread, "<= 4", spread <= 4)

    # informational: leading-order size of ||g_dot||^2
    if samples:
        p = radiation.p_constant(spec)
        last = samples[-1]
        pred = 4 * p * p * spec.q ** 2 / spec.nu ** 3 * last.t ** (2 * spec.nu) / abs(np.log(last.t))
        rep.info["gdot_sq_over_leading_order_at_end"] = last.g_dot_l2 ** 2 / pred
    rep.info["grid_nodes"] = len(grid)
    rep.info["lambda_c_t0"] = lam0
    rep.info["solver_status"] = tr.status
    rep.info["label"] = "scale-inflated desk window; not a verification of the asymptotic constant"
    return rep


# ----------------------------------------------------------------------------
# reduced rates (C8, C9)
# ----------------------------------------------------------------------------


def run_reduced_rates(config: ExperimentConfig) -> RunReport:
    out = config.output_dir
    os.makedirs(out, exist_ok=True)
    rep = RunReport("reduced-rates", config.config_hash())
    t_lo = float(config.param("t_lo", 1e-6))
    t_hi = float(config.param("t_hi", 1e-3))
    n = int(config.param("n", 31))
    q = config.radiation.q
    nu = config.radiation.nu
    cut = config.radiation.cutoff

    cases = [("position", nu, 0.0), ("log-position", nu, 0.0), ("log-position", nu, 1.0),
             ("log-position", nu, 2.0), ("velocity", nu + 1, 0.0)]
    fits = {}
    rows = []
    for kind, nu_k, mu in cases:
        spec = RadiationSpec(kind, q, nu_k, mu, cut)
        tag = f"{kind}_nu{nu_k:g}" + (f"_mu{mu:g}" if kind == "log-position" else "")
        traj = reduced.asymptotic_trajectory(spec, t_lo, t_hi, n)
        traj.write_csv(os.path.join(out, f"reduced_{tag}.csv"))
        rep.artifacts.append(f"reduced_{tag}.csv")
        fit = reduced.fit_rate(traj.t, traj.lam)
        fits[tag] = fit
        A = radiation.p_constant(spec) * abs(q) / (nu_k ** 2 * (nu_k + 1))
        rows.append((tag, fit.A, fit.alpha, fit.beta, fit.residual, A, float(traj.ratio[-1] / A)))
        if kind == "position":
            main, A_main = traj, A
    _write_csv(os.path.join(out, "rate_fits.csv"),
               ["case", "A_fit", "alpha", "beta", "residual", "A_predicted", "endpoint_ratio_over_A"], rows)
    rep.artifacts.append("rate_fits.csv")
    with open(os.path.join(out, "ratefit.json"), "w") as fh:
        json.dump({k: asdict(v) for k, v in sorted(fits.items())}, fh, sort_keys=True, indent=2)
    rep.artifacts.append("ratefit.json")

    # C8 on the position case
    dev_end = abs(main.ratio[-1] / A_main - 1)
    decades = np.log10(t_hi / main.t)
    marks = [int(np.argmin(np.abs(decades - d))) for d in range(int(round(np.log10(t_hi / t_lo))) + 1)]
    devs = [abs(main.ratio[k] / A_main - 1) for k in marks]
    shrinking = all(devs[i + 1] < devs[i] for i in range(len(devs) - 1))
    rep.add("C8", "endpoint |ratio/A - 1|", dev_end, "<= 0.1", dev_end <= 0.1)
    rep.add("C8", "deviation decreasing across decades", float(shrinking), "1", shrinking)
    pos = fits[f"position_nu{nu:g}"]
    rep.add("C8", "alpha (position)", pos.alpha, f"{nu + 1:g} +- 0.05", abs(pos.alpha - (nu + 1)) <= 0.05)
    rep.add("C8", "beta (position)", pos.beta, "-1 +- 0.1", abs(pos.beta + 1) <= 0.1)
    kst = fits[f"log-position_nu{nu:g}_mu1"]
    rep.add("C8", "beta (log-modified mu = 1)", kst.beta, "0 +- 0.05", abs(kst.beta) <= 0.05)
    rep.info["decade_deviations"] = devs
    # beta with the exact log(t/lambda) structure divided out, for context
    corr = main.lam * np.log(main.t / main.lam) / main.t ** (nu + 1)
    rep.info["ratio_with_log_t_over_lambda"] = [float(corr[0]), float(corr[-1])]

    # C9 sign classification
    found_neg, rec_neg = reduced.sign_sweep(RadiationSpec("position", -abs(q), nu, 0.0, cut), t_hi)
    found_pos, rec_pos = reduced.sign_sweep(RadiationSpec("position", abs(q), nu, 0.0, cut), t_hi)
    _write_csv(os.path.join(out, "sign_sweep.csv"), ["q_sign", "lambda0", "speed", "status", "concentrating"],
               [("-", r["lambda0"], r["speed"], r["status"], int(r["concentrating"])) for r in rec_neg]
               + [("+", r["lambda0"], r["speed"], r["status"], int(r["concentrating"])) for r in rec_pos])
    rep.artifacts.append("sign_sweep.csv")
    rep.add("C9", "q < 0 admits a concentrating decade", float(found_neg), "1", found_neg)
    rep.add("C9", "q > 0 admits none", float(not found_pos), "1", not found_pos)
    return rep


RUNNERS = {
    "constants": run_constants,
    "kirchhoff-check": run_kirchhoff,
    "radiation-evolve": run_radiation_evolve,
    "bubble-track": run_bubble_track,
    "reduced-rates": run_reduced_rates,
}


def run(config: ExperimentConfig, write_report: bool = True) -> RunReport:
    rep = RUNNERS[config.experiment](config)
    if write_report:
        rep.write(config.output_dir)
    return rep


def timed(config: ExperimentConfig):
    t = time.perf_counter()
    rep = run(config)
    return rep, time.perf_counter() - t
