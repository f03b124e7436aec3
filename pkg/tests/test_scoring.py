import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from validity_lab import ecosim
from validity_lab.ecosystem import Dataset
from validity_lab.predictors import ConstantPredictor, pre_recorded_adapter
from validity_lab.scoring import (
    BRIER, LOG_LOSS, ScoringRule, calibration_table, expected_score, expected_validity, mean_score, score,
)


def grid(system, episodes=1, seed=0):
    return ecosim.grid_ecosystem(ecosim.GridEcosystemSpec(system, episodes, seed))


def test_brier_example():
    assert score("brier", 0.7, 1) == pytest.approx(0.09)


def test_coin_expected_scores():
    assert expected_score(BRIER, 0.7, 0.7) == pytest.approx(0.21)
    assert expected_score(LOG_LOSS, 0.7, 0.7) == pytest.approx(-(0.7 * math.log(0.7) + 0.3 * math.log(0.3)))
    assert expected_score(LOG_LOSS, 0.7, 0.7) == pytest.approx(0.6109, abs=1e-4)


def test_logloss_alias_and_clipping():
    assert ScoringRule("logloss").kind == "log_loss"
    assert math.isfinite(score(LOG_LOSS, 0.0, 1))
    assert score(LOG_LOSS, 0.0, 1) == pytest.approx(-math.log(1e-15))


def test_log_loss_rejects_graded_validity():
    with pytest.raises(ValueError):
        score(LOG_LOSS, 0.5, 0.5)


@pytest.mark.parametrize("p,v", [(-0.1, 1), (1.1, 0), (0.5, 2)])
def test_out_of_range_inputs(p, v):
    with pytest.raises(ValueError):
        score(BRIER, p, v)


def test_unknown_rule():
    with pytest.raises(ValueError):
        ScoringRule("hinge")


@given(st.floats(0, 1), st.floats(0, 1))
def test_brier_is_proper(p, q):
    # expected score under truth q is minimized by reporting q
    assert expected_score(BRIER, q, q) <= expected_score(BRIER, p, q) + 1e-12


@given(st.floats(0.001, 0.999), st.floats(0.001, 0.999))
def test_log_loss_is_proper(p, q):
    assert expected_score(LOG_LOSS, q, q) <= expected_score(LOG_LOSS, p, q) + 1e-12


@pytest.mark.parametrize("system", ecosim.GRID_SYSTEMS[:5])
def test_grid_expected_validity(system):
    assert expected_validity(grid(system)) == 0.625


def test_expected_validity_empty_raises():
    from validity_lab.ecosystem import make_history
    with pytest.raises(ValueError):
        expected_validity(make_history([]))


def test_constant_on_grid_d():
    data = Dataset.from_history(grid("D"))
    assert mean_score(BRIER, ConstantPredictor(value=0.625), data) == pytest.approx(0.234375)
    assert mean_score(BRIER, ConstantPredictor(value=0.5), data) == pytest.approx(0.25)


def test_perfect_predictor_scores_zero():
    h = grid("D")
    data = Dataset.from_history(h)
    assert mean_score(BRIER, pre_recorded_adapter(ecosim.grid_oracle_predictions(h)), data) == 0.0


def test_calibration_constant_single_bin():
    data = Dataset.from_history(grid("D", 3))
    table = calibration_table(ConstantPredictor(value=0.625), data)
    filled = [b for b in table if b.count]
    assert len(filled) == 1
    assert filled[0].mean_p == 0.625 and filled[0].count == 48


def test_calibration_overconfident_gap():
    data = Dataset.from_history(grid("D", 3))
    table = calibration_table(ConstantPredictor(value=1.0), data)
    assert table[-1].count == len(data)
    assert table[-1].gap == pytest.approx(0.375)


def test_calibration_of_calibrated_predictor():
    h = ecosim.grid_ecosystem(ecosim.GridEcosystemSpec("F", 500, 0))
    data = Dataset.from_history(h)
    p = np.full(len(data), 0.625)
    table = calibration_table(pre_recorded_adapter(dict(zip(data.keys, p))), data)
    assert all(b.gap <= 0.02 for b in table if b.count)


def test_calibration_needs_two_bins():
    with pytest.raises(ValueError):
        calibration_table(ConstantPredictor(), Dataset.from_history(grid("A")), bins=1)
