import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import simpson

from inhomdiff.errors import InvalidAssumptionError, InvalidSpecError, RangeError, RegimeError
from inhomdiff.geometry import (DensityProfile, ManifoldProfile, MonotoneTable,
                                sphere_area)

from conftest import make_bundle


def warp_oracle(r, beta, nu=0.0, A=math.e):
    """Independent transcription of the power-log warp."""
    C = A ** (beta - 1.0) * math.log(A) ** nu
    r = np.asarray(r, dtype=float)
    out = C * r
    big = r > A
    out[big] = r[big] ** beta * np.log(r[big]) ** nu
    return out


def test_sphere_area():
    assert sphere_area(3) == pytest.approx(4 * math.pi)
    assert sphere_area(2) == pytest.approx(2 * math.pi)


def test_euclidean_unit_ball_volume(euclid, ball_volume):
    assert euclid.volume(1.0) == pytest.approx(ball_volume, rel=1e-13)
    assert euclid.volume(0.0) == 0.0


def test_warp_continuous_at_matching_point():
    man = ManifoldProfile.power_log(3, beta=0.9, nu=0.5)
    A = man.warp_params["A"]
    left = man.warp(np.array([A * (1 - 1e-15)]))[0]
    right = man.warp(np.array([A * (1 + 1e-15)]))[0]
    assert abs(left - right) < 1e-13 * right


def test_density_continuous_and_nonincreasing():
    d = DensityProfile.power_log(1.5, mu=0.3, B=5.0)
    r = np.geomspace(1e-6, 1e6, 2000)
    rho = d(r)
    assert np.all(rho > 0)
    assert np.all(np.diff(rho) <= 1e-15 * rho[:-1])
    assert d(np.array([5.0 * (1 - 1e-15)]))[0] == pytest.approx(d(np.array([5.0 * (1 + 1e-15)]))[0], rel=1e-13)


def test_volume_beta09_against_simpson_oracle(beta09):
    r = np.linspace(0.0, 10.0, 10**6 + 1)
    simpson_value = 4 * math.pi * simpson(warp_oracle(r, 0.9) ** 2, x=r)
    assert beta09.volume(10.0) == pytest.approx(simpson_value, rel=1e-10)


def test_volume_adaptive_cross_check(beta09):
    val, err = beta09.volume_adaptive(10.0, tol=1e-11)
    assert abs(val - beta09.volume(10.0)) <= max(err, 1e-10 * val)


def test_volume_beyond_range_raises(euclid):
    with pytest.raises(RangeError):
        euclid.volume(2e6)


def test_isoperimetric_euclidean(euclid, ball_volume):
    assert euclid.isoperimetric_h(ball_volume) == pytest.approx(4 * math.pi, rel=1e-10)
    v = np.array([0.1, 3.0, 500.0])
    assert np.allclose(euclid.isoperimetric_h(v), (36 * math.pi) ** (1 / 3) * v ** (2 / 3), rtol=1e-9)


def test_isoperimetric_beta09_ball_profile(beta09):
    v = beta09.volume(10.0)
    direct = 4 * math.pi * warp_oracle(np.array([10.0]), 0.9)[0] ** 2
    assert beta09.isoperimetric_h(v) == pytest.approx(direct, rel=1e-9)


@given(st.floats(1e-3, 1e5))
@settings(max_examples=60, deadline=None)
def test_h_of_V_is_sphere_area(R):
    b = _BETA09
    assert b.isoperimetric_h(b.volume(R)) == pytest.approx(b.area(R), rel=1e-8)


def test_vol_rho_euclidean_alpha0(euclid, ball_volume):
    assert euclid.vol_rho(2.0) == pytest.approx(ball_volume * 8, rel=1e-12)
    assert euclid.inv_vol_rho(ball_volume) == pytest.approx(1.0, rel=1e-10)
    assert euclid.vol_rho(0.0) == 0.0


def test_vol_rho_alpha1_at_B(euclid_a1):
    e = math.e
    assert euclid_a1.vol_rho(e) == pytest.approx(e ** -1 * 4 * math.pi / 3 * e**3, rel=1e-12)


@given(st.floats(1e-4, 9e5))
@settings(max_examples=60, deadline=None)
def test_inv_vol_rho_round_trip(R):
    b = _A1
    assert b.inv_vol_rho(b.vol_rho(R)) == pytest.approx(R, rel=1e-8)


def test_psi_closed_form(euclid):
    assert euclid.psi(2, 2, 2.0) == pytest.approx(128 * math.pi / 3, rel=1e-12)
    assert euclid.z_tilde(2, 2, euclid.psi(2, 2, 1.0)) == pytest.approx(1.0, rel=1e-10)


@given(st.floats(1e-3, 1e5))
@settings(max_examples=60, deadline=None)
def test_z_tilde_round_trip(R):
    for b in (_EUCLID, _A1, _BETA09):
        assert b.z_tilde(2, 2, b.psi(2, 2, R)) == pytest.approx(R, rel=1e-7)


def test_psi_log_slope_alpha1(euclid_a1):
    R = np.geomspace(1e2, 1e4, 50)
    slope = np.polyfit(np.log(R), np.log(euclid_a1.psi(2, 2, R)), 1)[0]
    assert slope == pytest.approx(3.0, abs=0.05)


def test_supercritical_inversion_errors():
    b = make_bundle(alpha=3.0)
    with pytest.raises(InvalidAssumptionError):
        b.inv_vol_rho(1.0)
    with pytest.raises(RegimeError):
        b.z_tilde(2, 2, 1.0)


def test_monotone_table_rejects_non_monotone():
    with pytest.raises(InvalidAssumptionError):
        MonotoneTable(np.array([1.0, 2.0, 3.0]), np.array([1.0, 3.0, 2.0]))


def test_monotone_table_round_trip():
    x = np.geomspace(1e-3, 1e3, 200)
    tab = MonotoneTable(x, x**3 + x, exact=lambda z: z**3 + z)
    y = np.array([1e-2, 5.0, 7e8])
    assert np.allclose(tab(tab.invert(y)), y, rtol=1e-8)
    with pytest.raises(RangeError):
        tab.invert(1e12)


def test_characteristic_W():
    b = make_bundle(alpha=1.0, window=(0.5, 1.5))
    s = float(b.vol_rho(1.0))
    assert b.characteristic_W(2, s) == pytest.approx(float(b.rho(1.0)) * s ** (-(2 - 1.5) / (3 - 0.5)), rel=1e-8)
    s = float(b.vol_rho(10.0))
    direct = 10.0**-1 * 10.0**2 * s ** (-0.5 / 2.5)
    assert b.characteristic_W(2, s) == pytest.approx(direct, rel=1e-8)
    small = make_bundle(window=(0.01, 0.02))
    assert np.all(small.characteristic_W(2, np.array([0.1, 1.0, 1e3])) > 0)


def test_characteristic_W_needs_window(euclid_a1):
    with pytest.raises(InvalidSpecError):
        euclid_a1.characteristic_W(2, 1.0)


def test_B_below_A_rejected():
    from inhomdiff.geometry import GeometricBundle
    with pytest.raises(InvalidSpecError):
        GeometricBundle(ManifoldProfile.power_log(3, A=5.0), DensityProfile.power_log(1.0, B=3.0))


def test_csv_export(tmp_path, euclid):
    path = tmp_path / "tab.csv"
    euclid.to_csv(path, 2, 2)
    head = path.read_text().splitlines()[0]
    assert head.split(",") == ["r", "V", "h", "omega", "vol_rho", "psi"]


_EUCLID = make_bundle()
_A1 = make_bundle(alpha=1.0)
_BETA09 = make_bundle(beta=0.9, alpha=1.0)
