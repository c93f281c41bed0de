import json
import warnings

import numpy as np
import pytest

from darkbright.presets import T_RES, paper_device
from darkbright.thermometry import (
    AmbiguityError,
    CalibrationModel,
    ConfigurationError,
    FitReport,
    FitWarning,
    OutOfRangeError,
    Thermometer,
    bright_dark_diagram,
    calibration_curve,
    csv_text,
    fit_calibration,
    fit_local,
    local_curve,
    temperature_curve,
    transition_frequency,
)

from oracles import two_level_transmission

POWERS = np.linspace(0.0, 10.0, 8)


@pytest.fixture(scope="module")
def dev():
    return paper_device()


@pytest.fixture(scope="module")
def q1(dev):
    return dev.single(1)


def test_transition_frequencies(dev, q1):
    assert transition_frequency(q1, "ge") == pytest.approx(7.8)
    assert transition_frequency(q1, "ef") == pytest.approx(7.575)
    f_b = transition_frequency(dev, "00B")
    f_d = transition_frequency(dev, "DD'")
    assert f_b == pytest.approx(7.85, abs=1e-3)
    assert f_d - f_b == pytest.approx(-0.2285, abs=2e-3)


def test_transition_needs_matching_device(dev, q1):
    with pytest.raises(ConfigurationError):
        transition_frequency(dev, "ge")
    with pytest.raises(ConfigurationError):
        transition_frequency(q1, "00B")
    with pytest.raises(ConfigurationError):
        transition_frequency(q1, "gf")


def test_cold_resonant_depth_set_by_nonradiative_loss(q1):
    # on resonance at T = 0: |t| = gamma_loc / (gamma_glob + gamma_loc)
    c = temperature_curve(q1, "global", "ge", [0.0], a_in=1e-4, t_other=0.0)
    assert c.abs_t[0] == pytest.approx(0.05 / 2.05, abs=1e-6)
    lossless = temperature_curve(q1.replace(gamma_loc1=0.0), "global", "ge", [0.0], a_in=1e-4)
    assert lossless.abs_t[0] == pytest.approx(two_level_transmission(0.0, 2.0), abs=1e-6)


def test_hot_limit_and_monotone_ge(q1):
    c = temperature_curve(q1, "global", "ge", [0.02, 0.1, 0.3, 1.0, 1e4])
    assert np.all(np.diff(c.abs_t) > 0)
    assert c.abs_t[-1] > 0.99


def test_ef_dip_deepens_with_temperature(q1):
    c = temperature_curve(q1, "global", "ef", [0.02, 0.1, 0.2])
    assert c.abs_t[0] > 0.999
    assert c.abs_t[2] < c.abs_t[1] < c.abs_t[0]


def test_curve_csv_and_validation(q1):
    c = temperature_curve(q1, "local", "ge", [0.05, 0.1])
    lines = c.to_csv().splitlines()
    assert lines[0] == "temperature_k,abs_t"
    assert len(lines) == 3
    with pytest.raises(ValueError):
        temperature_curve(q1, "global", "ge", [])
    with pytest.raises(ValueError):
        temperature_curve(q1, "global", "ge", [-0.1])
    with pytest.raises(ConfigurationError):
        temperature_curve(q1, "both", "ge", [0.1])


def test_diagram_shape_and_crossing(dev):
    d = bright_dark_diagram(dev, "global", np.geomspace(0.02, 2.0, 6))
    assert len(d) == 6
    assert d.t_00B[0] < 0.5 < d.t_00B[-1]
    i = d.crossing()
    assert d.t_00B[i] > 0.5 and d.t_00B[i - 1] <= 0.5
    assert d.crossing(2.0) is None
    assert d.to_csv().splitlines()[0] == "sweep_value,t_00B_abs,t_DDp_abs"
    with pytest.raises(ConfigurationError):
        bright_dark_diagram(dev.single(1), "global", [0.1])


def test_threads_do_not_change_results(dev):
    grid = [0.05, 0.2, 0.8]
    a = bright_dark_diagram(dev, "local", grid, threads=1)
    b = bright_dark_diagram(dev, "local", grid, threads=3)
    assert a.to_csv() == b.to_csv()


def test_calibration_model():
    m = CalibrationModel(0.095, 0.04)
    assert np.allclose(m.temperature([0, 10]), [0.095, 0.495])
    with pytest.raises(ValueError):
        CalibrationModel(0.0, 0.1)
    with pytest.raises(ValueError):
        CalibrationModel(0.1, -0.1)


def test_fit_calibration_recovers_truth(q1):
    data = calibration_curve(q1, "global", POWERS, CalibrationModel(0.095, 0.04))
    rep = fit_calibration(POWERS, data, q1)
    assert rep.converged
    assert rep.params["T_res"] == pytest.approx(0.095, rel=1e-6)
    assert rep.params["alpha"] == pytest.approx(0.04, rel=1e-6)
    body = json.loads(rep.to_json())
    assert set(body) == {"params", "residual", "converged", "iterations", "bounds"}
    assert rep.calibration() == CalibrationModel(rep.params["T_res"], rep.params["alpha"])


def test_flat_calibration_warns(q1):
    data = calibration_curve(q1, "global", POWERS, CalibrationModel(0.095, 0.0))
    with pytest.warns(FitWarning, match="flat"):
        rep = fit_calibration(POWERS, data, q1)
    assert rep.params["alpha"] < 1e-6


def test_fit_calibration_input_checks(q1):
    with pytest.raises(ValueError):
        fit_calibration([0, 1, 2], [0.1, 0.2, 0.3], q1)


def test_local_curve_uses_side_pin_ratio(dev):
    p = [0.0, 5.0]
    a = local_curve(dev, 1, p, T_RES, 0.08, 0.05)
    b = local_curve(dev, 2, p, T_RES, 0.08, 0.05)
    # qubit 2 couples 1.78 times more strongly, so heats further at equal power
    assert b[1] > a[1]


def test_fit_local_recovers_and_penalizes_wrong_ratio(dev):
    cal = CalibrationModel(T_RES, 0.04)
    p = np.linspace(0.0, 10.0, 6)
    d1 = local_curve(dev, 1, p, T_RES, 0.08, 0.05)
    d2 = local_curve(dev, 2, p, T_RES, 0.08, 0.05)
    rep = fit_local((p, d1), (p, d2), dev, cal, gamma_loc1_guess=0.01)
    assert rep.params["alpha_loc"] == pytest.approx(0.08, rel=1e-6)
    assert rep.params["gamma_loc1"] == pytest.approx(0.05, rel=1e-6)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", FitWarning)
        wrong = fit_local((p, d1), (p, d2), dev.replace(k_ratio=1.0), cal, gamma_loc1_guess=0.01)
    assert wrong.residual > 100 * max(rep.residual, 1e-12)


def test_fit_local_input_checks(dev):
    cal = CalibrationModel(T_RES, 0.04)
    ok = ([0.0, 1.0], [0.1, 0.2])
    with pytest.raises(ConfigurationError):
        fit_local(ok, ok, dev.single(1), cal)
    with pytest.raises(ValueError):
        fit_local(ok, ok, dev, CalibrationModel(T_RES, 0.0))
    with pytest.raises(ValueError):
        fit_local(([0.0, 1.0], [0.1]), ok, dev, cal)


def test_fit_report_json_roundtrip():
    rep = FitReport({"T_res": 0.1, "alpha": 0.02}, 1e-12, True, 7, {"T_res": [0.005, 1.0]})
    body = json.loads(rep.to_json())
    assert body["params"]["alpha"] == 0.02 and body["iterations"] == 7


@pytest.fixture(scope="module")
def small_thermometer(dev):
    return Thermometer(dev, grid_shape=(6, 6), starts=4)


def test_inversion_recovers_interior_point(small_thermometer):
    th = small_thermometer
    target = th.forward(0.1, 0.4)
    inf = th.infer(*target)
    assert inf.T_glob == pytest.approx(0.1, rel=1e-5)
    assert inf.T_loc == pytest.approx(0.4, rel=1e-5)
    assert inf.residual < 1e-8
    body = json.loads(inf.to_json())
    assert body["target"] == pytest.approx(list(target))


def test_unreachable_target_reports_nearest(small_thermometer):
    with pytest.raises(OutOfRangeError) as err:
        small_thermometer.infer(1.0, 1.0)
    assert len(err.value.nearest) == 2


def test_thermometer_needs_pair_with_local_bath(dev):
    with pytest.raises(ConfigurationError):
        Thermometer(dev.single(1))
    with pytest.raises(ConfigurationError):
        Thermometer(dev.replace(gamma_loc1=0.0))


def test_ambiguity_error_carries_candidates():
    err = AmbiguityError("two", [(0.1, 0.2), (0.3, 0.4)])
    assert len(err.candidates) == 2


def test_csv_text_precision():
    text = csv_text(["x", "y"], [(0.1, 1 / 3)])
    assert text.splitlines()[1] == "0.10000000000000001,0.33333333333333331"
