import json
import math

import numpy as np
import pytest

from inhomdiff.config import ProblemSpec
from inhomdiff.errors import FitError, InvalidExperimentError
from inhomdiff.harness import (ExperimentResult, decade_slopes, experiment_barenblatt,
                               experiment_blowup, experiment_decay, experiment_fsp,
                               experiment_universal, fit_power_law, last_decades,
                               run_experiment)


def test_fit_exact_power_law():
    t = np.geomspace(1, 1e3, 30)
    f = fit_power_law(t, 3.0 * t**-0.6)
    assert f.exponent == pytest.approx(-0.6, abs=1e-12)
    assert math.exp(f.intercept) == pytest.approx(3.0, rel=1e-12)
    assert f.r2 == pytest.approx(1.0)


def test_fit_with_log_periodic_ripple():
    t = np.geomspace(1, 1e4, 200)
    y = t**-0.5 * (1 + 0.05 * np.sin(np.log(t)))
    assert fit_power_law(t, y).exponent == pytest.approx(-0.5, abs=0.01)


def test_fit_constant_and_windows():
    t = np.geomspace(1, 100, 40)
    assert fit_power_law(t, np.full(40, 2.0)).exponent == pytest.approx(0.0, abs=1e-14)
    w = last_decades(t, 1.0)
    assert w == pytest.approx((10.0, 100.0))
    assert fit_power_law(t, t**2, w).n == 20


def test_fit_errors():
    t = np.geomspace(1, 10, 9)
    with pytest.raises(FitError):
        fit_power_law(t, t)
    t = np.geomspace(1, 10, 20)
    y = t.copy()
    y[3] = 0.0
    with pytest.raises(FitError):
        fit_power_law(t, y)


def test_decade_slopes():
    t = np.geomspace(1, 1e3, 31)
    edges, s = decade_slopes(t, t**0.5)
    np.testing.assert_allclose(edges, [1, 10, 100, 1000])
    np.testing.assert_allclose(s, 0.5, atol=1e-12)


# --- experiments at reduced size -----------------------------------------------


def quick(alpha=0.0, **kw):
    exp = {"t_end": kw.pop("t_end", 1e4)}
    return ProblemSpec(alpha=alpha, solver={"K": 256}, experiment=exp, **kw)


def test_decay_quick():
    res = experiment_decay(quick())
    assert res.verdicts["decay_exponent"]["passed"]
    assert res.fits["decay_exponent"] == pytest.approx(-0.6, abs=0.01)


def test_fsp_quick_alpha1():
    res = experiment_fsp(quick(1.0, t_end=1e5))
    assert res.passed, res.verdicts
    assert np.all(np.diff(res.series["run"]["support_radius"]) >= 0)


def test_fsp_requires_prediction():
    with pytest.raises(InvalidExperimentError):
        experiment_fsp(quick(2.6))


def test_universal_requires_flag_and_mass_span():
    with pytest.raises(InvalidExperimentError):
        experiment_universal(quick(1.0))
    with pytest.raises(InvalidExperimentError):
        experiment_universal(quick(2.6), masses=[1.0, 2.0])


def test_universal_identical_masses_identical_curves():
    spec = quick(1.0, t_end=100.0)
    res = experiment_universal(spec, masses=[1.0, 1.0], require_flags=False)
    assert res.verdicts["mass_collapse"]["value"] <= 1e-12


def test_blowup_requires_flag():
    with pytest.raises(InvalidExperimentError):
        experiment_blowup(quick(1.0))


def test_blowup_negative_control_fails_front_verdict():
    res = experiment_blowup(quick(1.0, t_end=100.0), require_flags=False)
    assert not res.verdicts["super_power_front"]["passed"]
    assert res.extra["proxy"] is True
    assert res.extra["mass_drift"] <= 1e-12


def test_barenblatt_rejects_non_euclidean():
    with pytest.raises(InvalidExperimentError):
        experiment_barenblatt(ProblemSpec(alpha=1.0))
    with pytest.raises(InvalidExperimentError):
        experiment_barenblatt(ProblemSpec(beta=0.9))


def test_barenblatt_small_grid():
    res = experiment_barenblatt(ProblemSpec(solver={"K": 1024}))
    assert res.extra["linf"] < 1e-3
    assert 1.5 <= res.extra["refinement_factor"] <= 3.0


def test_run_experiment_outputs(tmp_path):
    res = run_experiment("decay", quick(t_end=1e3), tmp_path)
    files = sorted(p.name for p in tmp_path.iterdir())
    assert files == ["decay_plot.dat", "decay_result.json", "decay_run.csv"]
    data = json.loads((tmp_path / "decay_result.json").read_text())
    assert data["passed"] == res.passed
    assert data["provenance"]["config_hash"] == quick(t_end=1e3).config_hash
    plot = (tmp_path / "decay_plot.dat").read_text().splitlines()
    assert plot[1].startswith("# x: t")
    assert any(line.startswith("# reference: y =") for line in plot)
    head = (tmp_path / "decay_run.csv").read_text().splitlines()[0]
    assert head.split(",")[:4] == ["t", "sup", "support_radius", "mass"]


def test_experiments_are_deterministic(tmp_path):
    a = run_experiment("fsp", quick(1.0, t_end=1e3), tmp_path / "a")
    b = run_experiment("fsp", quick(1.0, t_end=1e3), tmp_path / "b")
    assert a.passed == b.passed
    assert (tmp_path / "a" / "fsp_run.csv").read_bytes() == (tmp_path / "b" / "fsp_run.csv").read_bytes()


def test_unknown_experiment():
    with pytest.raises(InvalidExperimentError):
        run_experiment("nope", quick())


def test_result_passed_needs_all_verdicts():
    r = ExperimentResult("x", {}, {}, verdicts={"a": {"passed": True}, "b": {"passed": False}})
    assert not r.passed
