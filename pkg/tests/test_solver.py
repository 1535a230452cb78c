import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bubbletrace.core import FieldState, RadialGrid, bubble_state, energy, potential_energy, q_profile
from bubbletrace.radiation import RadiationSpec, initial_data
from bubbletrace.solver import (
    Operator, SolverConfig, Trajectory, evolve, flux, local_energy, nonlinear_vs_linear_gap,
    read_trajectory, rhs_linear, rhs_nonlinear, write_summary_csv, write_trajectory,
)

SPEC = RadiationSpec("position", -1.0, 5.0)


# ---------------------------------------------------------------- stencil

@pytest.mark.parametrize("grid", [RadialGrid.uniform(3.0, 300), RadialGrid.hybrid(1e-3, 3.0, 0.02, 1.05)])
def test_linear_operator_annihilates_r(grid):
    a = Operator(grid).accel(2.5 * grid.nodes, nonlinear=False)
    assert np.max(np.abs(a[:-1] * grid.nodes[:-1])) < 1e-9 * 2.5  # roundoff only


def test_laplacian_second_order():
    # u = r^3: u_rr + u_r / r - u / r^2 = 8 r; truncation error is h^2 / r
    errs = []
    for n in (100, 200, 400):
        g = RadialGrid.uniform(1.0, n)
        r = g.nodes[:-1]
        e = Operator(g).accel(g.nodes ** 3, nonlinear=False)[:-1] - 8 * r
        h = 1.0 / n
        assert np.all(np.abs(e) <= 1.01 * h * h / r)
        errs.append(np.max(np.abs(e[r >= 0.25])))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(orders - 2) < 0.3)


def test_discrete_energy_gradient_matches_operator():
    # dE_pot/du_i = -2 pi w_i accel_i, so the semi-discrete flow conserves energy exactly
    g = RadialGrid.hybrid(5e-3, 2.0, 0.05, 1.1)
    rng = np.random.default_rng(0)
    u = q_profile(0.3, g.nodes) + 0.2 * rng.standard_normal(len(g)) * g.nodes
    a = Operator(g).accel(u)
    h = 1e-6
    for i in rng.choice(len(g) - 1, 12, replace=False):
        e = np.zeros(len(g))
        e[i] = h
        d = (potential_energy(u + e, g) - potential_energy(u - e, g)) / (2 * h)
        assert d == pytest.approx(-2 * np.pi * g.weights[i] * a[i], rel=1e-6, abs=1e-10)


def test_bubble_nearly_stationary():
    g = RadialGrid.uniform(5.0, 500)
    ud, acc = rhs_nonlinear(bubble_state(1.0, g), g)
    assert np.all(ud == 0)
    r = g.nodes
    assert np.max(np.abs(acc[r >= 0.5])) < 1e-4
    assert np.all(np.abs(acc[:-1]) <= 1e-4 / r[:-1])


def test_rhs_linear_holds_last_node():
    g = RadialGrid.uniform(1.0, 50)
    s = FieldState(0.0, g.nodes ** 2, np.ones(len(g)))
    ud, acc = rhs_linear(s, g)
    assert ud[-1] == 0 and acc[-1] == 0


def test_config_validation():
    g = RadialGrid.uniform(1.0, 10)
    for bad in (dict(cfl=1.5), dict(scheme="euler"), dict(outer_bc="periodic"), dict(t_span=(1.0, 0.0)),
                dict(outer_bc="exact-exterior")):
        with pytest.raises(ValueError):
            SolverConfig(g, **bad)


# ---------------------------------------------------------------- evolution

def test_energy_conservation_rk4_and_leapfrog():
    g = RadialGrid.hybrid(1e-2, 6.0, 0.02, 1.05)
    u = q_profile(1.0, g.nodes) + 0.05 * g.nodes ** 2 * np.exp(-(g.nodes - 1.5) ** 2 * 4)
    s = FieldState(0.0, u, np.zeros(len(g)))
    e0 = energy(s, g)
    for scheme in ("rk4", "leapfrog"):
        tr = evolve(s, SolverConfig(g, scheme=scheme, t_span=(0.0, 1.0)))
        assert tr.status == "ok"
        drift = abs(energy(tr.state(-1), g) - e0) / e0
        assert drift < (1e-8 if scheme == "rk4" else 1e-4)


def test_schemes_agree():
    g = RadialGrid.uniform(3.0, 300)
    s = initial_data(SPEC, g)
    a = evolve(s, SolverConfig(g, scheme="rk4", t_span=(0, 0.5)))
    b = evolve(s, SolverConfig(g, scheme="leapfrog", cfl=0.2, t_span=(0, 0.5)))
    assert np.max(np.abs(a.u[-1] - b.u[-1])) < 1e-3 * np.max(np.abs(s.u))


def test_output_times_and_validation():
    g = RadialGrid.uniform(2.0, 100)
    tr = evolve(initial_data(SPEC, g), SolverConfig(g, t_span=(0, 0.3)), output_times=[0.0, 0.1, 0.3])
    assert tr.times == [0.0, 0.1, 0.3]
    with pytest.raises(ValueError):
        evolve(initial_data(SPEC, g), SolverConfig(g), output_times=[0.2, 0.1])


def test_exact_exterior_tracks_companion():
    g = RadialGrid.uniform(3.0, 300)
    s = initial_data(SPEC, g)
    q = q_profile(0.05, g.nodes)
    start = FieldState(0.0, q + s.u, s.u_dot)
    cfg = SolverConfig(g, outer_bc="exact-exterior", radiation=SPEC, t_span=(0, 0.5))
    tr = evolve(start, cfg, output_times=[0.5])
    mask = g.nodes >= 0.5 + cfg.exterior_margin
    np.testing.assert_allclose(tr.u[-1][mask], np.pi + tr.companion.u[-1][mask])


def test_sponge_absorbs_outgoing_wave():
    g = RadialGrid.uniform(4.0, 400)
    u = 0.01 * g.nodes * np.exp(-((g.nodes - 1.0) / 0.2) ** 2)
    s = FieldState(0.0, u, np.zeros(len(g)))
    e0 = energy(s, g)
    fixed = evolve(s, SolverConfig(g, t_span=(0, 7.0)), nonlinear=False)
    sponge = evolve(s, SolverConfig(g, outer_bc="absorbing-sponge", sponge_width=1.0, t_span=(0, 7.0)),
                    nonlinear=False)
    assert energy(fixed.state(-1), g) == pytest.approx(e0, rel=1e-4)  # RK4 damping only
    assert energy(sponge.state(-1), g) < 0.2 * e0


# ---------------------------------------------------------------- diagnostics

@given(st.floats(0.0, 2.9), st.floats(0.0, 0.1))
@settings(max_examples=40, deadline=None)
def test_local_energy_monotone_in_radius(R, dR):
    g = RadialGrid.uniform(3.0, 120)
    s = FieldState(0.0, q_profile(0.7, g.nodes), 0.1 * np.sin(g.nodes))
    assert local_energy(s, g, R + dR) >= local_energy(s, g, R) - 1e-14


def test_local_energy_full_radius_close_to_energy():
    g = RadialGrid.uniform(3.0, 600)
    s = bubble_state(1.0, g)
    for method in ("trapezoid", "spline"):
        assert local_energy(s, g, 3.0, method) == pytest.approx(energy(s, g), rel=1e-3)
    with pytest.raises(ValueError):
        local_energy(s, g, 5.0)


@pytest.fixture(scope="module")
def radiation_pair():
    g = RadialGrid.uniform(2.0, 800)
    times = np.linspace(0.0, 0.6, 61)
    s = initial_data(SPEC, g)
    nl = evolve(s, SolverConfig(g, t_span=(0, 0.6)), output_times=times)
    li = evolve(s, SolverConfig(g, t_span=(0, 0.6)), nonlinear=False, output_times=times)
    return nl, li


def test_flux_identity(radiation_pair):
    nl, _ = radiation_pair
    rec = flux(nl, 0.2, 0.5)
    assert rec.loc_energy_end > rec.loc_energy_start
    assert rec.relative_defect < 1e-3


def test_flux_requires_outputs(radiation_pair):
    nl, _ = radiation_pair
    with pytest.raises(ValueError):
        flux(nl, 0.2051, 0.5)


def test_gap_positive_and_small(radiation_pair):
    nl, li = radiation_pair
    ws = [nonlinear_vs_linear_gap(nl, li, t, 5.0, "linear") for t in (0.2, 0.4)]
    assert all(np.isfinite(ws)) and all(w > 0 for w in ws)
    k = 40
    assert np.max(np.abs(nl.u[k] - li.u[k])) < 1e-3 * np.max(np.abs(li.u[k]))
    with pytest.raises(ValueError):
        nonlinear_vs_linear_gap(nl, li, 0.333, 5.0)


# ---------------------------------------------------------------- I/O

def test_trajectory_round_trip(tmp_path, radiation_pair):
    nl, _ = radiation_pair
    p = tmp_path / "traj.bin"
    write_trajectory(p, nl)
    back = read_trajectory(p)
    np.testing.assert_array_equal(back.grid.nodes, nl.grid.nodes)
    assert back.times == nl.times
    for a, b in zip(back.u_dot, nl.u_dot):
        np.testing.assert_array_equal(a, b)


def test_summary_csv(tmp_path):
    g = RadialGrid.uniform(2.0, 50)
    tr = Trajectory(g)
    tr.append(0.5, q_profile(1.0, g.nodes), np.zeros(len(g)))
    p = tmp_path / "s.csv"
    write_summary_csv(p, tr)
    rows = list(csv.reader(open(p)))
    assert rows[0] == ["t", "energy", "loc_energy", "sup_abs_u"]
    assert float(rows[1][0]) == 0.5
