import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from validity_lab.scaling import (
    ScalingLawModel, fit_power_law, power_law_points, predict_hypothetical, read_points_csv, save_model,
    write_points_csv,
)

XS = np.logspace(0, 6, 50)


def test_noiseless_recovery():
    model = fit_power_law(power_law_points(-0.05, 3.0, XS))
    assert model.exponent == pytest.approx(-0.05, abs=1e-9)
    assert model.scale == pytest.approx(3.0, abs=1e-9)
    assert model.residual_std == pytest.approx(0.0, abs=1e-12)
    assert (model.x_min, model.x_max, model.n_points) == (1.0, 1e6, 50)


def test_noisy_recovery_rate():
    hits = 0
    for seed in range(100):
        rng = np.random.default_rng(seed)
        hits += abs(fit_power_law(power_law_points(-0.05, 3.0, XS, 0.01, rng)).exponent + 0.05) <= 0.005
    assert hits >= 95


@pytest.mark.parametrize("points", [
    [(1.0, 2.0)],
    [(1.0, 2.0), (1.0, 3.0)],
    [(0.0, 1.0), (2.0, 1.0)],
    [(1.0, -1.0), (2.0, 1.0)],
])
def test_bad_inputs(points):
    with pytest.raises(ValueError):
        fit_power_law(points)


def test_hypothetical_estimate():
    model = ScalingLawModel(-0.05, 3.0, 0.0, 50, 1.0, 1e5)
    ext = predict_hypothetical(model, 1e6)
    assert ext.estimate == pytest.approx(3 * 10 ** -0.3)
    assert ext.estimate == pytest.approx(1.50356, abs=1e-5)
    assert ext.lower == ext.upper == ext.estimate
    assert ext.extrapolated


def test_band_and_range_flag():
    model = ScalingLawModel(-0.05, 3.0, 0.1, 50, 1.0, 1e6)
    ext = predict_hypothetical(model, 100.0)
    assert not ext.extrapolated
    assert ext.upper / ext.estimate == pytest.approx(math.exp(0.2))
    assert ext.estimate / ext.lower == pytest.approx(math.exp(0.2))
    with pytest.raises(ValueError):
        predict_hypothetical(model, 0.0)


@settings(max_examples=50)
@given(st.floats(-2, 2), st.floats(0.1, 10), st.floats(0.01, 100))
def test_scale_equivariance(alpha, c, k):
    rng = np.random.default_rng(0)
    pts = power_law_points(alpha, c, XS[:20], 0.05, rng)
    base = fit_power_law(pts)
    scaled = fit_power_law([(x * k, y) for x, y in pts])
    assert scaled.exponent == pytest.approx(base.exponent, abs=1e-9)
    assert scaled.scale == pytest.approx(base.scale * k ** (-base.exponent), rel=1e-9)


@settings(max_examples=50)
@given(st.floats(-2, 2), st.floats(0.1, 10))
def test_refit_is_idempotent(alpha, c):
    rng = np.random.default_rng(1)
    model = fit_power_law(power_law_points(alpha, c, XS[:20], 0.05, rng))
    again = fit_power_law([(x, float(model(x))) for x in XS[:20]])
    assert again.exponent == pytest.approx(model.exponent, abs=1e-9)
    assert again.scale == pytest.approx(model.scale, rel=1e-9)


def test_csv_and_json_io(tmp_path):
    pts = power_law_points(-0.1, 2.0, XS[:5])
    write_points_csv(pts, tmp_path / "pts.csv")
    assert read_points_csv(tmp_path / "pts.csv") == pts
    model = fit_power_law(pts)
    save_model(model, tmp_path / "m.json", extra={"seed": 0})
    payload = json.loads((tmp_path / "m.json").read_text())
    assert ScalingLawModel.from_dict(payload) == model
    assert set(payload) == {"exponent", "scale", "residual_std", "n_points", "x_min", "x_max", "seed"}


def test_csv_errors(tmp_path):
    (tmp_path / "bad.csv").write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_points_csv(tmp_path / "bad.csv")
    (tmp_path / "bad2.csv").write_text("x,y\n1,oops\n")
    with pytest.raises(ValueError, match="row 2"):
        read_points_csv(tmp_path / "bad2.csv")


def test_model_invariants():
    with pytest.raises(ValueError):
        ScalingLawModel(-0.05, 0.0, 0.0, 2, 1.0, 2.0)
    with pytest.raises(ValueError):
        ScalingLawModel(-0.05, 1.0, -0.1, 2, 1.0, 2.0)
