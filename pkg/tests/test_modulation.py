import csv

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bubbletrace.core import FieldState, RadialGrid, lambda_q_scaled, q_profile
from bubbletrace.modulation import (
    CSV_COLUMNS, DecompositionError, ModulationSample, Track, VirialSpec, apply_virial_ops,
    b_bar_diagnostic, extract_lambda, lambda_prime, orthogonality_residual, pythagoras_defect,
    remainder_on, sample, track, virial_properties, virial_q, virial_q_prime, w_dot, write_samples_csv,
    zeta,
)
from bubbletrace.solver import Trajectory

GRID = RadialGrid.hybrid(1e-4, 3.0, 0.005, 1.05)


def _ustar(grid, amp=-0.02, t=0.4):
    r = grid.nodes
    return FieldState(t, amp * r * np.exp(-r * r), 0.3 * amp * r)


def _bump(grid, center, width, amp):
    r = grid.nodes
    return amp * r * np.exp(-((r - center) / width) ** 2)


# ---------------------------------------------------------------- extraction

@given(st.floats(0.005, 0.05), st.floats(0.3, 3.0))
@settings(max_examples=25, deadline=None)
def test_exact_ansatz_recovered(lam, guess_ratio):
    us = _ustar(GRID)
    state = FieldState(0.4, q_profile(lam, GRID.nodes) + us.u, us.u_dot)
    got = extract_lambda(GRID, state, us, lam * guess_ratio)
    assert got == pytest.approx(lam, rel=1e-12)


@given(st.floats(0.01, 0.04), st.floats(1e-3, 1e-2), st.sampled_from([-1, 1]))
@settings(max_examples=25, deadline=None)
def test_orthogonality_after_extraction(lam, amp, sign):
    # the normalized residual needs a remainder well above roundoff
    amp *= sign
    us = _ustar(GRID)
    u = q_profile(lam, GRID.nodes) + us.u + _bump(GRID, 2 * lam, lam, amp)
    state = FieldState(0.4, u, us.u_dot)
    got = extract_lambda(GRID, state, us, lam)
    g, _ = remainder_on(GRID, state, us, got)
    assert orthogonality_residual(GRID, g, got) <= 1e-10


@given(st.floats(0.5, 4.0), st.floats(-0.005, 0.005))
@settings(max_examples=20, deadline=None)
def test_extraction_scaling_covariance(s, amp):
    lam = 0.02
    us = _ustar(GRID, t=0.4)
    u = q_profile(lam, GRID.nodes) + us.u + _bump(GRID, 3 * lam, lam, amp)
    l1 = extract_lambda(GRID, FieldState(0.4, u, us.u_dot), us, lam)
    scaled = RadialGrid(s * GRID.nodes)  # same samples on stretched nodes: u(r) -> u(r / s)
    l2 = extract_lambda(scaled, FieldState(0.4, u, us.u_dot), FieldState(0.4, us.u, us.u_dot), s * lam)
    assert l2 == pytest.approx(s * l1, rel=1e-11)


def test_extraction_fails_outside_tube():
    us = FieldState(0.4, np.zeros(len(GRID)), np.zeros(len(GRID)))
    state = FieldState(0.4, q_profile(0.02, GRID.nodes), np.zeros(len(GRID)))
    with pytest.raises(DecompositionError):
        extract_lambda(GRID, state, us, 0.002)
    with pytest.raises(ValueError):
        extract_lambda(GRID, state, us, -1.0)


def test_lambda_prime_matches_implicit_derivative():
    # u_s = Q_lam0 + g0 + s gdot: d lambda / ds at s = 0 by finite differences
    lam0 = 0.02
    r = GRID.nodes
    g0 = _bump(GRID, 2 * lam0, lam0, 0.003)
    gdot = _bump(GRID, 1.5 * lam0, 0.7 * lam0, 0.5)
    zero = FieldState(0.4, np.zeros(len(GRID)), np.zeros(len(GRID)))
    lam_at = lambda s: extract_lambda(GRID, FieldState(0.4, q_profile(lam0, r) + g0 + s * gdot, gdot), zero, lam0)
    l0 = lam_at(0.0)
    h = 1e-5
    fd = (lam_at(h) - lam_at(-h)) / (2 * h)
    g = q_profile(lam0, r) + g0 - q_profile(l0, r)
    assert lambda_prime(GRID, l0, g, gdot) == pytest.approx(fd, rel=1e-6)


# ---------------------------------------------------------------- cone diagnostics

def test_zeta_of_pure_bubble():
    assert zeta(GRID, 0.4, 0.01, np.zeros(len(GRID))) == pytest.approx(4 * 0.01 * np.log(40.0))
    with pytest.raises(ValueError):
        zeta(GRID, 0.01, 0.02, np.zeros(len(GRID)))


@given(st.integers(0, 10_000), st.floats(0.05, 2.5), st.floats(0.002, 0.04))
@settings(max_examples=40, deadline=None)
def test_pythagoras_and_projection(seed, t, lam):
    if lam >= t:
        lam = t / 2
    rng = np.random.default_rng(seed)
    gdot = rng.standard_normal(len(GRID)) * np.exp(-GRID.nodes)
    assert abs(pythagoras_defect(GRID, gdot, t, lam)) <= 1e-10
    bb = b_bar_diagnostic(GRID, t, lam, gdot)
    wd = w_dot(GRID, gdot, bb, t, lam)
    c = GRID.cone_weights(t)
    lq = lambda_q_scaled(lam, GRID.nodes)
    assert abs(np.dot(c, lq * wd)) <= 1e-10 * np.sqrt(np.dot(c, lq * lq) * np.dot(c, wd * wd))


def test_b_bar_of_pure_dilation():
    # g_dot = -beta (Lambda Q)_lam gives b_bar = beta exactly
    lam, t = 0.01, 0.4
    assert b_bar_diagnostic(GRID, t, lam, -0.7 * lambda_q_scaled(lam, GRID.nodes)) == pytest.approx(0.7, rel=1e-13)


# ---------------------------------------------------------------- virial weight

def test_virial_profile_consistency():
    spec = VirialSpec()
    r = np.geomspace(0.5, 3 * spec.R_tilde, 40)
    q, q1, q2 = virial_q(r, spec)
    h = 1e-6 * r
    qp = virial_q(r + h, spec)[0]
    qm = virial_q(r - h, spec)[0]
    assert np.all(np.abs(q1 - (qp - qm) / (2 * h)) <= 1e-6 * (np.abs(q1) + q / r))
    q1p = virial_q_prime(r + h, spec)[0]
    q1m = virial_q_prime(r - h, spec)[0]
    np.testing.assert_allclose(q2, (q1p - q1m) / (2 * h), rtol=1e-5, atol=1e-7)
    inner = r <= spec.R
    np.testing.assert_allclose(q[inner], r[inner] ** 2 / 2)
    assert np.all(q1[r >= spec.R_tilde] == 0)


@pytest.mark.parametrize("c", [0.1, 0.25])
def test_virial_bounds(c):
    spec = VirialSpec(c=c)
    p = virial_properties(spec)
    assert p["min_q2"] >= -c
    assert p["max_abs_r_dlog"] <= c
    assert p["max_abs_q1_over_r"] <= 1 + 1e-12
    assert p["max_r2_bilaplacian"] <= c
    assert spec.R_tilde == pytest.approx(spec.R * spec.kappa * np.exp(spec.kappa / c))


def test_A0_antisymmetric():
    # <g, A0 g> = 0 for g vanishing at both ends, up to O(h^2) discretization
    lam = 0.02
    vals = []
    for h in (0.01, 0.005, 0.0025):
        grid = RadialGrid.hybrid(1e-4, 3.0, h, 1.05)
        g = _bump(grid, 0.3, 0.1, 1.0)
        val = grid.integrate(g * apply_virial_ops(grid, g, lam, which="A0"))
        scale = grid.integrate(np.abs(g * apply_virial_ops(grid, g, lam, which="A")))
        vals.append(abs(val) / scale)
    assert vals[-1] < 1e-3
    assert vals[0] / vals[1] > 3 and vals[1] / vals[2] > 3
    with pytest.raises(ValueError):
        apply_virial_ops(GRID, g, lam, which="B")


# ---------------------------------------------------------------- samples and tracks

def test_sample_track_and_csv(tmp_path):
    lam = 0.02
    us = _ustar(GRID)
    traj, utraj = Trajectory(GRID), Trajectory(GRID)
    for k, t in enumerate((0.4, 0.41)):
        lk = lam * (1 + 0.01 * k)
        traj.append(t, q_profile(lk, GRID.nodes) + us.u, us.u_dot)
        utraj.append(t, us.u, us.u_dot)
    tr = track(traj, utraj, lam)
    assert tr.failed_at is None
    np.testing.assert_allclose(tr.lambdas, [lam, 1.01 * lam], rtol=1e-12)
    assert tr.speed_constant() >= 0
    p = tmp_path / "mod.csv"
    write_samples_csv(p, tr.samples)
    rows = list(csv.reader(open(p)))
    assert tuple(rows[0]) == CSV_COLUMNS and len(rows) == 3
    bad = Trajectory(GRID)
    bad.append(0.5, us.u, us.u_dot)
    with pytest.raises(ValueError):
        track(bad, Trajectory(GRID), lam)


def test_track_records_failure():
    us = _ustar(GRID)
    traj, utraj = Trajectory(GRID), Trajectory(GRID)
    traj.append(0.4, us.u, us.u_dot)  # no bubble at all
    utraj.append(0.4, us.u, us.u_dot)
    tr = track(traj, utraj, 0.02)
    assert tr.failed_at == 0.4 and not tr.samples


def test_sample_fields():
    lam = 0.02
    us = _ustar(GRID)
    s = sample(GRID, FieldState(0.4, q_profile(lam, GRID.nodes) + us.u, us.u_dot), us, lam)
    assert s.g_h_norm < 1e-10 and s.g_dot_l2 == 0 and s.pythagoras_defect == 0
    with pytest.raises(ValueError):
        ModulationSample(0.4, -1.0, 0, 0, 0, 0, 0, 0)
