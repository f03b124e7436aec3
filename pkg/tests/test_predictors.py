import itertools
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from validity_lab import ecosim
from validity_lab.ecosystem import Dataset, FeatureVector, InteractionRecord, make_history
from validity_lab.errors import SchemaError
from validity_lab.predictors import (
    ConstantPredictor, FamilySpec, fit_constant, fit_logistic, fit_majority, fit_tree, load_predictor,
    make_reactive, pre_recorded_adapter, predictor_from_dict, save_predictor, self_estimation_adapter,
)
from validity_lab.scoring import BRIER, mean_score
from validity_lab.unpredictability import QProtocol, split_dataset

WIND, FOG = "i_windingness", "i_fogginess"


def grid_data(system, episodes=1, seed=0):
    return Dataset.from_history(ecosim.grid_ecosystem(ecosim.GridEcosystemSpec(system, episodes, seed)))


def constant_data(v, n=20):
    recs = [InteractionRecord(t=k, instance_id=f"x{k}", system_id="s", user_id="u",
                              instance_features=FeatureVector.of({"i_x": float(k)}), validity=v)
            for k in range(n)]
    return Dataset.from_history(make_history(recs))


# -- constant / majority -----------------------------------------------------


@pytest.mark.parametrize("v", [0.0, 1.0])
def test_constant_on_pure_data(v):
    assert fit_constant(constant_data(v)).value == v


def test_constant_on_grid_d():
    assert fit_constant(grid_data("D")).value == 0.625


def test_majority_is_hard():
    assert fit_majority(grid_data("D")).value == 1.0
    assert fit_majority(constant_data(0.0)).value == 0.0


def test_empty_dataset_rejected():
    empty = constant_data(1.0).subset([])
    for fit in (fit_constant, fit_majority, lambda d: fit_logistic(d), lambda d: fit_tree(d, 2)):
        with pytest.raises(ValueError):
            fit(empty)


# -- logistic ----------------------------------------------------------------


def test_logistic_wind_on_grid_a():
    data = grid_data("A", 20)
    train, _, test = split_dataset(data, QProtocol(seed=0))
    assert mean_score(BRIER, fit_logistic(train, (WIND,)), test) <= 0.02


def test_logistic_fog_on_grid_a_matches_constant():
    data = grid_data("A", 20)
    train, _, test = split_dataset(data, QProtocol(seed=0))
    fog = mean_score(BRIER, fit_logistic(train, (FOG,)), test)
    const = mean_score(BRIER, fit_constant(train), test)
    assert abs(fog - const) <= 0.02


def test_logistic_empty_subset_is_constant():
    data = grid_data("D", 3)
    p = fit_logistic(data).predict(data)
    np.testing.assert_allclose(p, fit_constant(data).value, atol=1e-6)


def test_logistic_budget_and_unknown_hyperparameters():
    data = grid_data("A")
    with pytest.raises(ValueError):
        fit_logistic(data, (WIND, FOG), budget=1)
    with pytest.raises(ValueError):
        fit_logistic(data, (WIND,), momentum=0.9)
    with pytest.raises(SchemaError):
        fit_logistic(data, ("i_nope",))


def test_logistic_loss_history_non_increasing():
    data = grid_data("C", 2)
    pred = fit_logistic(data, (WIND, FOG))
    hist = np.array(pred.loss_history)
    assert np.all(np.diff(hist) <= 0)
    assert pred.final_loss == hist[-1]


def test_logistic_is_deterministic():
    data = grid_data("E", 2)
    assert fit_logistic(data, (WIND, FOG)) == fit_logistic(data, (WIND, FOG))


def test_predictor_reads_only_fitted_features():
    data = grid_data("A", 2)
    pred = fit_logistic(data, (WIND,))
    # dropping an unused column must not change predictions
    keep = [data.names.index(WIND)]
    narrowed = replace(data, names=(WIND,), X=data.X[:, keep])
    np.testing.assert_array_equal(pred.predict(narrowed), pred.predict(data))


# -- tree --------------------------------------------------------------------


def test_tree_separates_grid_d():
    data = grid_data("D", 2)
    for budget in (10, 16):
        assert mean_score(BRIER, fit_tree(data, budget), data) == 0.0


def test_tree_budget_one_is_constant():
    data = grid_data("C", 2)
    tree = fit_tree(data, 1)
    np.testing.assert_array_equal(tree.predict(data), fit_constant(data).predict(data))
    assert tree.n_leaves == 1


def test_tree_pure_data_single_leaf():
    tree = fit_tree(constant_data(1.0), 8)
    assert tree.n_leaves == 1
    assert set(tree.predict(constant_data(1.0))) == {1.0}


def test_tree_respects_leaf_budget():
    data = grid_data("E", 3)
    for budget in range(1, 8):
        assert fit_tree(data, budget).n_leaves <= budget


def test_tree_split_thresholds_are_midpoints():
    tree = fit_tree(grid_data("A", 1), 2, features=(WIND,))
    feature, threshold, *_ = tree.nodes[0]
    # A = [1, 1, .5, 0] by windingness: cutting between 1 and 2 leaves the least squared error
    assert feature == 0 and threshold == 1.5


def _brute_best_stump_sse(x, v):
    best = np.sum((v - v.mean()) ** 2)
    for thr in np.unique(x)[:-1]:
        left, right = v[x <= thr], v[x > thr]
        best = min(best, np.sum((left - left.mean()) ** 2) + np.sum((right - right.mean()) ** 2))
    return best


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 5), st.sampled_from([0.0, 1.0])), min_size=3, max_size=30))
def test_stump_matches_exhaustive_search(pairs):
    recs = [InteractionRecord(t=k, instance_id=f"x{k}", system_id="s", user_id="u",
                              instance_features=FeatureVector.of({"i_x": float(x)}), validity=v)
            for k, (x, v) in enumerate(pairs)]
    data = Dataset.from_history(make_history(recs))
    p = fit_tree(data, 2).predict(data)
    sse = float(np.sum((p - data.v) ** 2))
    assert sse == pytest.approx(_brute_best_stump_sse(data.X[:, 0], data.v), abs=1e-9)


# -- adapters ----------------------------------------------------------------


def test_self_estimation_calibrated_coin_floor():
    h = ecosim.agent_task_ecosystem(5, 2000, seed=0, confidence="calibrated")
    data = Dataset.from_history(h)
    truth = ecosim.agent_task_probabilities(5, 2000, seed=0)
    expected = np.mean([p * (1 - p) for p in (truth[k] for k in data.keys)])
    assert mean_score(BRIER, self_estimation_adapter(), data) == pytest.approx(expected, abs=0.01)


def test_self_estimation_overconfident_constant_one():
    data = grid_data("D", 3)
    ones = replace(data, self_confidence=np.ones(len(data)))
    assert mean_score(BRIER, self_estimation_adapter(), ones) == pytest.approx(0.375)
    assert mean_score(BRIER, fit_tree(ones, 16), ones) < 0.375


def test_self_estimation_perfect_self_knowledge():
    data = grid_data("D", 2)
    exact = replace(data, self_confidence=data.v.copy())
    assert mean_score(BRIER, self_estimation_adapter(), exact) == 0.0


def test_self_estimation_without_confidence_raises():
    with pytest.raises(SchemaError):
        self_estimation_adapter().predict(grid_data("A"))


def test_reactive_tree_on_output_oracle():
    h = ecosim.output_oracle_ecosystem(400, 1.0, seed=0)
    reactive = Dataset.from_history(h, mode="reactive")
    anticipative = Dataset.from_history(h)
    assert mean_score(BRIER, fit_tree(reactive, 4), reactive) == 0.0
    assert mean_score(BRIER, fit_tree(anticipative, 4), anticipative) > 0.0


def test_reactive_wrapper_over_constant():
    h = ecosim.output_oracle_ecosystem(50, 1.0, seed=0)
    data = Dataset.from_history(h, mode="reactive")
    base = ConstantPredictor(value=0.3)
    np.testing.assert_array_equal(make_reactive(base).predict(data), base.predict(data))
    with pytest.raises(SchemaError):
        make_reactive(base).predict(grid_data("A"))


def test_pre_recorded():
    data = grid_data("D", 2)
    assert mean_score(BRIER, pre_recorded_adapter({k: 0.5 for k in data.keys}), data) == 0.25
    pure = constant_data(1.0)
    assert mean_score(BRIER, pre_recorded_adapter({k: 1.0 for k in pure.keys}), pure) == 0.0
    with pytest.raises(SchemaError):
        pre_recorded_adapter({}).predict(data)
    with pytest.raises(ValueError):
        pre_recorded_adapter({"a": 1.5})


def test_pre_recorded_truth_on_grid_f_hits_floor():
    data = grid_data("F", 500)
    score = mean_score(BRIER, pre_recorded_adapter({k: 0.625 for k in data.keys}), data)
    assert score == pytest.approx(0.234375, abs=0.01)


# -- families and serialization ----------------------------------------------


def test_family_candidates_sorted_and_budgeted():
    data = grid_data("C", 2)
    names = [d for d, _ in FamilySpec("logistic", 2).candidates(data)]
    assert names == sorted(names)
    assert "logistic[]" in names
    varying = [n for j, n in enumerate(data.names) if np.ptp(data.X[:, j]) > 0]
    assert varying == [WIND, FOG]
    assert len(names) == sum(1 for k in range(3) for _ in itertools.combinations(varying, k))


def test_family_validation():
    with pytest.raises(ValueError):
        FamilySpec("svm")
    with pytest.raises(ValueError):
        FamilySpec("logistic", 1, ((WIND, FOG),))
    with pytest.raises(ValueError):
        FamilySpec("tree", 0)
    with pytest.raises(SchemaError):
        FamilySpec("logistic", 1, (("i_nope",),)).candidates(grid_data("A"))


def test_family_dict_roundtrip():
    fam = FamilySpec("logistic", 1, ((WIND,), (FOG,)), {"lr": 0.1})
    assert FamilySpec.from_dict(fam.to_dict()) == fam


@pytest.mark.parametrize("make", [
    lambda d: fit_constant(d),
    lambda d: fit_logistic(d, (WIND, FOG)),
    lambda d: fit_tree(d, 5),
    lambda d: pre_recorded_adapter({k: 0.5 for k in d.keys}),
    lambda d: self_estimation_adapter("reactive"),
])
def test_predictor_save_load(tmp_path, make):
    data = grid_data("E", 2)
    pred = make(data)
    save_predictor(pred, tmp_path / "p.json", extra={"seed": 3})
    back = load_predictor(tmp_path / "p.json")
    assert back.to_dict() == pred.to_dict()
    if pred.kind != "self_estimation":
        np.testing.assert_array_equal(back.predict(data), pred.predict(data))


def test_predictor_from_dict_rejects_unknown_kind():
    with pytest.raises(ValueError):
        predictor_from_dict({"kind": "forest"})
