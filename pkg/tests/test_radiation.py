import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from bubbletrace.core import CutoffSpec, RadialGrid
from bubbletrace.radiation import (
    RadiationSpec, data_profile, initial_data, leading_order, linear_evolution, log_center_coefficient,
    mixed_constant, p_constant, p_constant_gamma, p_constant_quadrature, phi_exact, phi_table,
    sphere_mean_power,
)


@pytest.fixture(scope="module")
def table5():
    return phi_table(RadiationSpec("position", -1.0, 5.0), n_z=401)


@pytest.fixture(scope="module")
def table_vel():
    return phi_table(RadiationSpec("velocity", 0.7, 6.0), n_z=401)


# ---------------------------------------------------------------- constants

def test_known_constants():
    assert p_constant_gamma(5.0, "position") == pytest.approx(8.0, rel=1e-12)
    assert p_constant_gamma(6.0, "velocity") == pytest.approx(1.6, rel=1e-12)


@given(st.floats(4.51, 12.0), st.sampled_from(["position", "velocity"]))
@settings(max_examples=30, deadline=None)
def test_gamma_matches_quadrature(nu, kind):
    a = p_constant_gamma(nu, kind)
    assert p_constant_quadrature(nu, kind) == pytest.approx(a, rel=1e-10)


@pytest.mark.parametrize("nu", [5.0, 6.5, 9.0])
def test_position_constant_wallis_oracle(nu):
    # int_0^{pi/2} sin^k = sqrt(pi) Gamma((k+1)/2) / (2 Gamma(k/2 + 1)), via beta function
    k = nu + 2
    moment = 0.5 * special.beta((k + 1) / 2, 0.5)
    assert p_constant_gamma(nu) == pytest.approx(nu * (nu + 2) / 2 * moment, rel=1e-13)


def test_small_nu_warns_and_bad_kind_raises():
    with pytest.warns(UserWarning):
        p_constant_gamma(4.0)
    with pytest.raises(ValueError):
        p_constant_gamma(5.0, "sideways")
    with pytest.raises(ValueError):
        p_constant_gamma(-1.0)


def test_mixed_constant_time_sign():
    pp, pv = p_constant_gamma(6.0), p_constant_gamma(6.0, "velocity")
    assert mixed_constant(-1.0, 2.0, 6.0, 1) == pytest.approx(-pp + 2 * pv)
    assert mixed_constant(-1.0, 2.0, 6.0, -1) == pytest.approx(-pp - 2 * pv)
    with pytest.raises(ValueError):
        mixed_constant(1.0, 1.0, 6.0, 0)


# ---------------------------------------------------------------- spec and data

def test_spec_validation_and_round_trip():
    with pytest.raises(ValueError):
        RadiationSpec("position", mu=1.0)
    with pytest.raises(ValueError):
        RadiationSpec("nonsense")
    spec = RadiationSpec("log-position", 0.3, 6.5, 2.0, CutoffSpec("exp-bump", 0.4, 0.9))
    assert RadiationSpec.from_dict(spec.to_dict()) == spec


def test_data_profiles():
    r = np.array([0.1, 0.3, 0.6, 1.2])
    chi = CutoffSpec()(r)
    np.testing.assert_allclose(data_profile(RadiationSpec("position", -1, 5), r), -chi * r ** 5)
    np.testing.assert_allclose(data_profile(RadiationSpec("velocity", 2, 6), r), 2 * chi * r ** 5)
    lg = RadiationSpec("log-position", 1, 5, 1)
    np.testing.assert_allclose(data_profile(lg, r), chi * r ** 5 * np.abs(np.log(r)))
    g = RadialGrid.uniform(2.0, 20)
    s = initial_data(RadiationSpec("velocity", 1, 6), g)
    assert np.all(s.u == 0) and np.any(s.u_dot != 0)


# ---------------------------------------------------------------- Kirchhoff profile

def _sphere_mean_quad(m, rho, z):
    # mean over S^3 of |rho w + z e1|^m: density (2/pi) sin^2 theta on [0, pi]
    f = lambda th: (rho * rho + z * z + 2 * rho * z * np.cos(th)) ** (m / 2) * np.sin(th) ** 2
    val, _ = integrate.quad(f, 0, np.pi, epsabs=0, epsrel=1e-13, limit=200)
    return 2 / np.pi * val


@pytest.mark.parametrize("m", [4.0, 4.5, 5.0, 6.5])
@pytest.mark.parametrize("z", [0.0, 0.3, 0.8, 1.0])
def test_sphere_mean_matches_direct_quadrature(m, z):
    rho = np.array([0.05, 0.3, 0.79, 0.81, 1.0])
    M, M1, M2 = sphere_mean_power(m, rho, z)
    ref = [_sphere_mean_quad(m, r, z) for r in rho]
    np.testing.assert_allclose(M, ref, rtol=1e-11)
    if z > 0:
        h = 1e-5
        Mp = sphere_mean_power(m, rho, z + h)[0]
        Mm = sphere_mean_power(m, rho, z - h)[0]
        np.testing.assert_allclose(M1, (Mp - Mm) / (2 * h), rtol=1e-6, atol=1e-9)
        np.testing.assert_allclose(M2, (Mp - 2 * M + Mm) / h ** 2, rtol=1e-4, atol=1e-6)


def test_phi_matches_nested_quadrature():
    spec = RadiationSpec("position", -1.0, 5.5)
    for z in (0.0, 0.4, 0.9):
        inner = lambda s: np.sin(s) ** 3 * _sphere_mean_quad(spec.exponent, np.sin(s), z)
        ref, _ = integrate.quad(inner, 0, np.pi / 2, epsabs=0, epsrel=1e-12, points=[np.arcsin(z)])
        assert phi_exact(spec, z)[0] == pytest.approx(spec.q / 2 * ref, rel=1e-10)


@pytest.mark.parametrize("fixture", ["table5", "table_vel"])
def test_psi_center_is_q_p(fixture, request):
    tab = request.getfixturevalue(fixture)
    i0 = np.argmin(np.abs(tab.z))
    assert tab.z[i0] == 0.0
    assert tab.psi[i0] / tab.spec.q == pytest.approx(p_constant(tab.spec), rel=1e-8)


def test_phi_even(table5):
    assert table5.evenness_defect() <= 1e-9
    np.testing.assert_allclose(table5.dphi, -table5.dphi[::-1], atol=1e-12)


def test_phi_table_refuses_small_nu():
    with pytest.raises(ValueError):
        phi_table(RadiationSpec("position", -1.0, 4.0), n_z=11)


def _wave_residual(spec, table, t, r, h):
    def u(tt, rr):
        return linear_evolution(spec, tt, rr, table)[0]
    utt = (u(t + h, r) - 2 * u(t, r) + u(t - h, r)) / h ** 2
    urr = (u(t, r + h) - 2 * u(t, r) + u(t, r - h)) / h ** 2
    ur = (u(t, r + h) - u(t, r - h)) / (2 * h)
    return np.max(np.abs(utt - urr - ur / r + u(t, r) / r ** 2))


@pytest.mark.parametrize("fixture", ["table5", "table_vel"])
def test_cone_profile_solves_linear_wave(fixture, request):
    tab = request.getfixturevalue(fixture)
    r = np.linspace(0.05, 0.25, 9)
    res = [_wave_residual(tab.spec, tab, 0.4, r, h) for h in (4e-3, 2e-3)]
    scale = np.max(np.abs(linear_evolution(tab.spec, 0.4, r, tab)[0] / r ** 2))
    assert res[1] < 1e-4 * scale
    assert res[0] / res[1] > 3.0  # second-order stencil error dominates


def test_time_derivative_consistent(table5):
    spec = table5.spec
    r = np.linspace(0.01, 0.29, 15)
    h = 1e-5
    u_p = linear_evolution(spec, 0.3 + h, r, table5)[0]
    u_m = linear_evolution(spec, 0.3 - h, r, table5)[0]
    ut = linear_evolution(spec, 0.3, r, table5)[1]
    np.testing.assert_allclose(ut, (u_p - u_m) / (2 * h), rtol=1e-6, atol=1e-12)


def test_leading_order_near_axis(table5):
    spec, t = table5.spec, 0.3
    r = np.array([1e-3, 1e-2])
    dev = linear_evolution(spec, t, r, table5)[0] / leading_order(spec, t, r) - 1
    assert np.all(np.abs(dev) < 2.0 * (r / t) ** 2)
    assert dev[1] / dev[0] == pytest.approx(100.0, rel=0.01)  # O((r/t)^2) correction


def test_cone_profile_matches_numerical_linear_evolution(table5):
    from bubbletrace.solver import SolverConfig, evolve

    spec = table5.spec
    grid = RadialGrid.uniform(2.0, 800)
    traj = evolve(initial_data(spec, grid), SolverConfig(grid, t_span=(0.0, 0.3)), nonlinear=False,
                  output_times=[0.3])
    sel = grid.nodes <= 0.5 - 0.3  # domain of dependence stays where chi = 1
    exact = linear_evolution(spec, 0.3, grid.nodes[sel], table5)[0]
    err = np.max(np.abs(traj.u[-1][sel] - exact)) / np.max(np.abs(exact))
    assert err < 1e-3


def test_linear_evolution_domain():
    spec = RadiationSpec()
    with pytest.raises(ValueError):
        linear_evolution(spec, 0.0, [0.1])
    with pytest.raises(ValueError):
        linear_evolution(spec, 0.2, [0.3])


def test_log_center_coefficient():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        plain = RadiationSpec("log-position", -1.0, 5.0, 0.0)
        assert log_center_coefficient(plain, 0.01) == pytest.approx(8.0, rel=1e-10)
        spec = RadiationSpec("log-position", -1.0, 5.0, 1.0)
        devs = [abs(log_center_coefficient(spec, t) / 8.0 - 1) for t in (1e-2, 1e-4, 1e-8)]
    assert devs[0] > devs[1] > devs[2]
    # O(1/|log t|) correction
    assert devs[2] * abs(np.log(1e-8)) == pytest.approx(devs[1] * abs(np.log(1e-4)), rel=0.2)
    with pytest.raises(ValueError):
        log_center_coefficient(RadiationSpec(), 0.1)
