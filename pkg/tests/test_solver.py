import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

from inhomdiff.errors import (InvalidSpecError, RangeError, SchemeFailureError,
                              StiffnessError)
from inhomdiff.exact import Barenblatt
from inhomdiff.solver import (RadialGrid, RadialState, SolverConfig, all_fluxes,
                              bump_amplitude, flux, init_bump, init_profile, run,
                              stable_dt, step)

from conftest import make_bundle

PME = dict(p=2.0, m=2.0)


def cfg(**kw):
    return SolverConfig(**{**PME, **kw})


def test_grid_volumes_sum_to_ball(euclid, ball_volume):
    g = RadialGrid.uniform(euclid, 64, 3.0)
    assert np.all(g.w > 0)
    assert g.w.sum() == pytest.approx(ball_volume * 27.0, rel=1e-12)
    # unit density: weighted and plain volumes coincide
    np.testing.assert_allclose(g.wrho, g.w, rtol=1e-13)


def test_grid_weighted_volume_against_quad(euclid_a1):
    g = RadialGrid.uniform(euclid_a1, 40, 8.0)
    rho = euclid_a1.rho
    ref = [quad(lambda r: 4 * math.pi * r * r * float(rho(r)), a, b, points=[math.e])[0]
           for a, b in zip(g.edges[:-1], g.edges[1:])]
    np.testing.assert_allclose(g.wrho, ref, rtol=1e-10)


def test_stretched_grid_shape(euclid):
    g = RadialGrid.stretched(euclid, 0.05, 2.0, 50.0, 1.1)
    d = np.diff(g.edges)
    assert np.allclose(d[:40], 0.05)
    assert g.R_max >= 50.0
    assert np.all(d[41:] / d[40:-1] > 1.0)


# --- flux --------------------------------------------------------------------


def test_flux_hand_value(euclid):
    # dr = 0.1, edge 10 sits at r = 1; w = u^2 and kappa = 1/2 for p = m = 2
    g = RadialGrid.uniform(euclid, 40, 4.0)
    u = np.zeros(40)
    u[9] = 1.0
    state = RadialState(0.0, u, g)
    F = flux(state, 10, cfg())
    hand = -0.5 * (4 * math.pi * 1.0**2) * (0.0 - 1.0) / 0.1
    assert hand == pytest.approx(20 * math.pi)
    assert F == pytest.approx(hand, rel=1e-13)
    # edge 9 at r = 0.9 sees w going 0 -> 1, so the flux points inward
    assert flux(state, 9, cfg()) == pytest.approx(-0.5 * 4 * math.pi * 0.81 / 0.1, rel=1e-13)


def test_flux_general_p_hand_value(euclid):
    # p = 3, m = 1.5: q = (p+m-2)/(p-1) = 1.25, kappa = q^-(p-1)
    g = RadialGrid.uniform(euclid, 40, 4.0)
    u = np.zeros(40)
    u[9], u[10] = 2.0, 0.5
    c = SolverConfig(p=3.0, m=1.5)
    q = 1.25
    grad = (0.5**q - 2.0**q) / 0.1
    hand = -(q ** -2.0) * 4 * math.pi * abs(grad) * grad
    assert flux(RadialState(0.0, u, g), 10, c) == pytest.approx(hand, rel=1e-13)


def test_flux_boundaries_constant_and_vacuum(euclid):
    g = RadialGrid.uniform(euclid, 32, 4.0)
    s = RadialState(0.0, np.full(32, 0.7), g)
    F, _ = all_fluxes(s, cfg())
    assert np.all(F == 0.0)
    z = RadialState(0.0, np.zeros(32), g)
    assert np.all(all_fluxes(z, cfg())[0] == 0.0)
    assert flux(s, 0, cfg()) == 0.0 and flux(s, 32, cfg()) == 0.0
    with pytest.raises(RangeError):
        flux(s, 33, cfg())


def test_flux_antisymmetric_under_swap(euclid):
    g = RadialGrid.uniform(euclid, 20, 2.0)
    u = np.zeros(20)
    u[4], u[5] = 0.3, 1.2
    a = flux(RadialState(0.0, u, g), 5, cfg())
    u[4], u[5] = 1.2, 0.3
    b = flux(RadialState(0.0, u, g), 5, cfg())
    assert a == pytest.approx(-b, rel=1e-14)


# --- initial data ---------------------------------------------------------------


def test_init_bump_mass_and_support(euclid):
    g = RadialGrid.uniform(euclid, 256, 8.0)
    s = init_bump(g, 1.0, 1.0)
    assert s.mass == pytest.approx(1.0, rel=1e-12)
    assert s.support_radius <= 1.0 + 1e-12
    assert s.u.min() >= 0


def test_bump_amplitude_against_quad(euclid):
    g = RadialGrid.uniform(euclid, 256, 8.0)
    ref = quad(lambda r: (1 - r * r) ** 2 * 4 * math.pi * r * r, 0, 1)[0]
    assert ref == pytest.approx(32 * math.pi / 105)
    assert bump_amplitude(g, 1.0, 3.0) == pytest.approx(3.0 / ref, rel=1e-12)


def test_init_bump_errors(euclid):
    g = RadialGrid.uniform(euclid, 64, 8.0)
    with pytest.raises(InvalidSpecError):
        init_bump(g, 1.0, 0.0)
    with pytest.raises(InvalidSpecError):
        init_bump(g, 2.5, 1.0)


# --- config ---------------------------------------------------------------


@pytest.mark.parametrize("kw", [dict(p=2.0, m=1.0), dict(p=1.0, m=3.0), dict(cfl=0.0),
                                dict(cfl=1.5), dict(eps_supp=0.0), dict(grid="hex")])
def test_config_validation(kw):
    with pytest.raises(InvalidSpecError):
        SolverConfig(**{**PME, **kw})


def test_config_w_form_constants():
    c = SolverConfig(p=2.0, m=2.0)
    assert c.q == 2.0 and c.kappa == 0.5
    c = SolverConfig(p=3.0, m=1.5)
    assert c.q == pytest.approx(1.25) and c.kappa == pytest.approx(0.8**2)


# --- step -----------------------------------------------------------------


def test_zero_state_is_fixed_point(euclid):
    g = RadialGrid.uniform(euclid, 32, 4.0)
    s = step(RadialState(0.5, np.zeros(32), g), cfg(), dt=0.1)
    assert s.t == pytest.approx(0.6)
    assert np.all(s.u == 0)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(0.0, 5.0), min_size=24, max_size=24),
       st.sampled_from([(2.0, 2.0), (3.0, 1.5), (1.5, 2.5), (2.5, 1.0)]))
def test_step_conserves_mass_and_positivity(vals, pm):
    bundle = _bundle_a1()
    g = RadialGrid.uniform(bundle, 24, 3.0)
    u = np.array(vals)
    if u.max() == 0:
        u[3] = 1.0
    c = SolverConfig(p=pm[0], m=pm[1])
    s0 = RadialState(0.0, u, g)
    s1 = step(s0, c)
    assert abs(s1.mass - s0.mass) <= 1e-12 * s0.mass
    assert s1.u.min() >= 0
    assert s1.sup <= s0.sup * (1 + 1e-12)


_A1 = []


def _bundle_a1():
    if not _A1:
        _A1.append(make_bundle(alpha=1.0))
    return _A1[0]


def test_step_failures(euclid):
    g = RadialGrid.uniform(euclid, 32, 4.0)
    s = init_bump(g, 0.5, 1.0)
    with pytest.raises(SchemeFailureError):
        step(s, cfg(), dt=100 * stable_dt(s, cfg()))
    late = RadialState(1e20, s.u, g)
    with pytest.raises(StiffnessError):
        step(late, cfg())


# --- exact solution oracle ----------------------------------------------------------


@pytest.mark.parametrize("p,m", [(2.0, 2.0), (2.0, 3.0), (3.0, 1.5)])
def test_barenblatt_solves_the_equation(p, m):
    # independent central differences of u_t - r^-2 (r^2 u^{m-1}|u_r|^{p-2}u_r)_r
    sol = Barenblatt.with_mass(3, p, m, 1.0)
    t, h = 1.3, 1e-4
    R = sol.support_radius(t)
    r = np.linspace(0.2, 0.8, 7) * R

    def fl(rr):
        ur = (sol(rr + h, t) - sol(rr - h, t)) / (2 * h)
        return rr**2 * sol(rr, t) ** (m - 1) * np.abs(ur) ** (p - 2) * ur

    ut = (sol(r, t + h) - sol(r, t - h)) / (2 * h)
    rhs = (fl(r + h) - fl(r - h)) / (2 * h) / r**2
    np.testing.assert_allclose(ut, rhs, rtol=2e-5, atol=1e-7 * sol.sup(t))


@pytest.mark.parametrize("p,m", [(2.0, 2.0), (3.0, 1.5)])
def test_barenblatt_mass_against_quad(p, m):
    sol = Barenblatt(3, p, m, 0.8)
    R = sol.support_radius(2.0)
    ref = quad(lambda r: 4 * math.pi * r * r * float(sol(r, 2.0)), 0, R, limit=200)[0]
    assert sol.mass() == pytest.approx(ref, rel=1e-8)


def test_barenblatt_pme_coefficient():
    sol = Barenblatt(3, 2.0, 2.0, 1.0)
    # t^{-3/5}(C - r^2 t^{-2/5}/10)_+ for u_t = div(u grad u)
    assert sol.a == pytest.approx(0.6)
    r = np.array([0.0, 0.5, 1.0])
    np.testing.assert_allclose(sol(r, 2.0), 2.0**-0.6 * np.clip(1 - r**2 * 2.0**-0.4 / 10, 0, None))


def test_barenblatt_short_evolution(euclid):
    from inhomdiff.config import ProblemSpec
    from inhomdiff.harness import barenblatt_errors

    linf, l1, _ = barenblatt_errors(ProblemSpec(), 2048, 1.0, 1.1)
    assert linf <= 0.01 and l1 <= 0.01


def test_barenblatt_no_evolution_is_projection_only():
    from inhomdiff.config import ProblemSpec
    from inhomdiff.harness import barenblatt_errors

    linf, l1, _ = barenblatt_errors(ProblemSpec(), 512, 1.0, 1.0)
    assert linf < 1e-12 and l1 < 1e-12


def test_barenblatt_sup_slope(euclid):
    from inhomdiff.harness import fit_power_law

    sol = Barenblatt.with_mass(3, 2.0, 2.0, 1.0)
    c = cfg(K=512, R_max=1.25 * sol.support_radius(10.0))
    g = c.make_grid(euclid)
    s = init_profile(g, lambda r: sol(r, 1.0), 1.0, support=sol.support_radius(1.0))
    rs = run(s, c, 10.0, times=np.geomspace(1.0, 10.0, 21)[1:])
    f = fit_power_law(rs.t, rs.sup)
    assert abs(f.exponent + 0.6) <= 0.03


# --- run ------------------------------------------------------------------


def test_run_edge_cases(euclid):
    g = RadialGrid.uniform(euclid, 64, 8.0)
    s = init_bump(g, 1.0, 1.0, t0=2.0)
    rs = run(s, cfg(), 2.0)
    assert rs.t.size == 0 and rs.steps == 0
    with pytest.raises(RangeError):
        run(s, cfg(), 1.0)


def test_run_scheme_properties_alpha1(euclid_a1):
    c = cfg(K=256, R_max=8.0)
    s = init_bump(c.make_grid(euclid_a1), 1.0, 1.0)
    rs = run(s, c, 2e4, times=np.geomspace(1e-2, 2e4, 40))
    assert np.all(np.diff(rs.support_radius) >= 0)
    assert np.all(np.diff(rs.sup) <= 0)
    assert rs.worst_undershoot <= 1e-12
    assert rs.max_mass_drift <= 1e-12 * max(1.0, rs.steps / 1e6)
    assert rs.extensions >= 1  # support outgrew R_max = 8
    assert rs.final.u.min() >= 0


def test_boundary_does_not_matter_while_interior(euclid_a1):
    a = cfg(K=128, R_max=8.0, auto_extend=False)
    b = cfg(K=256, R_max=16.0, auto_extend=False)
    sa = run(init_bump(a.make_grid(euclid_a1), 1.0, 1.0), a, 2.0, times=[1.0, 2.0])
    sb = run(init_bump(b.make_grid(euclid_a1), 1.0, 1.0), b, 2.0, times=[1.0, 2.0])
    assert sa.support_radius[-1] < 6.0
    np.testing.assert_allclose(sb.final.u[:128], sa.final.u, rtol=0, atol=1e-10 * sa.final.sup)
    assert np.all(sb.final.u[128:] == 0)


def test_uniform_extension_conserves_mass(euclid_a1):
    g = RadialGrid.uniform(euclid_a1, 64, 8.0)
    s = init_bump(g, 1.5, 1.0)
    g2, u2 = g.extended(s.u)
    assert g2.K == 64 and g2.R_max == pytest.approx(16.0)
    assert np.dot(g2.wrho, u2) == pytest.approx(s.mass, rel=1e-13)


def test_truncation_warning(euclid):
    c = cfg(K=64, R_max=2.0, auto_extend=False)
    s = init_bump(c.make_grid(euclid), 0.45, 1.0)
    with pytest.warns(RuntimeWarning, match="outer wall"):
        rs = run(s, c, 50.0, times=[50.0])
    assert rs.truncated and rs.warnings
    # reflecting wall keeps mass
    assert rs.mass[-1] == pytest.approx(1.0, rel=1e-12)
    assert 0 < rs.interior_steps < rs.steps
    assert rs.interior_mass_drift <= rs.max_mass_drift
    assert rs.drift_per_million_steps(interior=True) <= 1e-12


def test_checkpoint_roundtrip(euclid_a1, tmp_path):
    c = cfg(K=128, R_max=8.0)
    s = init_bump(c.make_grid(euclid_a1), 1.0, 1.0)
    full = run(s, c, 2.0, times=[1.0, 2.0])
    half = run(s, c, 1.0, times=[1.0])
    path = tmp_path / "ck.json"
    half.final.to_json(path)
    back = RadialState.from_json(path, euclid_a1)
    assert back.t == 1.0
    np.testing.assert_array_equal(back.u, half.final.u)
    rest = run(back, c, 2.0, times=[2.0])
    np.testing.assert_array_equal(rest.final.u, full.final.u)


def test_run_is_deterministic(euclid_a1, tmp_path):
    c = cfg(K=128, R_max=8.0)
    s = init_bump(c.make_grid(euclid_a1), 1.0, 1.0)
    a, b = run(s, c, 5.0), run(s, c, 5.0)
    a.to_csv(tmp_path / "a.csv")
    b.to_csv(tmp_path / "b.csv")
    assert (tmp_path / "a.csv").read_text() == (tmp_path / "b.csv").read_text()


def test_observe_every_grid(euclid):
    c = cfg(K=64, R_max=8.0)
    s = init_bump(c.make_grid(euclid), 1.0, 1.0)
    rs = run(s, c, 1.0, observe_every=0.25)
    np.testing.assert_allclose(rs.t, [0.25, 0.5, 0.75, 1.0])


def test_interior_drift_equals_full_drift_without_truncation(euclid_a1):
    c = cfg(K=128, R_max=8.0)
    rs = run(init_bump(c.make_grid(euclid_a1), 1.0, 1.0), c, 10.0, times=[1.0, 10.0])
    assert not rs.truncated
    assert rs.interior_steps == rs.steps
    assert rs.interior_mass_drift == rs.max_mass_drift
