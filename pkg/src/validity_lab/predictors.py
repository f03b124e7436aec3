"""Budget-constrained validity predictors.

Every predictor maps a :class:`~validity_lab.ecosystem.Dataset` to estimates
``p_hat`` in ``[0, 1]`` and reads only the feature names it was fitted on.
"""

from __future__ import annotations

import itertools
import json
import os
from dataclasses import dataclass, field, replace
from typing import Any, Callable, ClassVar, Mapping, Sequence

import numpy as np

from .ecosystem import MODES, Dataset
from .errors import FitError, SchemaError

LOGISTIC_DEFAULTS = {"lr": 0.5, "max_iter": 5000, "tol": 1e-9, "l2": 1e-6, "seed": 0}
# smallest step the logistic line search will try before declaring convergence
_MIN_STEP = 1e-12
# a split must reduce the squared error by more than this to be taken
_SPLIT_EPS = 1e-12


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass(frozen=True)
class Predictor:
    """Base class.  Subclasses implement :meth:`_predict`."""

    kind: ClassVar[str] = "predictor"

    feature_names: tuple[str, ...] = ()
    mode: str = "anticipative"

    def predict(self, dataset: Dataset) -> np.ndarray:
        if self.mode == "reactive" and not any(n.startswith("o_") for n in dataset.names):
            raise SchemaError("reactive predictor needs output (o_) features; dataset has none")
        X = dataset.columns(self.feature_names)
        p = np.asarray(self._predict(X, dataset), dtype=float)
        return np.clip(p, 0.0, 1.0)

    def __call__(self, dataset: Dataset) -> np.ndarray:
        return self.predict(dataset)

    def _predict(self, X: np.ndarray, dataset: Dataset) -> np.ndarray:
        raise NotImplementedError

    def _params(self) -> dict:
        return {}

    def to_dict(self) -> dict:
        return {"kind": self.kind, "mode": self.mode, "feature_names": list(self.feature_names), **self._params()}


@dataclass(frozen=True)
class ConstantPredictor(Predictor):
    kind: ClassVar[str] = "constant"

    value: float = 0.5

    def _predict(self, X, dataset):
        return np.full(len(dataset), self.value)

    def _params(self):
        return {"value": self.value}


@dataclass(frozen=True)
class LogisticPredictor(Predictor):
    """``sigmoid(w . z + c)`` over standardized inputs ``z = (x - mean) / scale``."""

    kind: ClassVar[str] = "logistic"

    weights: tuple[float, ...] = ()
    intercept: float = 0.0
    mean: tuple[float, ...] = ()
    scale: tuple[float, ...] = ()
    final_loss: float = float("nan")
    n_iter: int = 0
    hyperparameters: Mapping[str, Any] = field(default_factory=dict)
    loss_history: tuple[float, ...] = field(default=(), compare=False, repr=False)

    def _predict(self, X, dataset):
        if not self.weights:
            return np.full(len(dataset), _sigmoid(self.intercept))
        Z = (X - np.asarray(self.mean)) / np.asarray(self.scale)
        return _sigmoid(Z @ np.asarray(self.weights) + self.intercept)

    def _params(self):
        return {
            "weights": list(self.weights), "intercept": self.intercept, "mean": list(self.mean),
            "scale": list(self.scale), "final_loss": self.final_loss, "n_iter": self.n_iter,
            "hyperparameters": dict(self.hyperparameters),
        }


@dataclass(frozen=True)
class TreePredictor(Predictor):
    """Binary regression tree; rows with ``x[feature] <= threshold`` go left.

    ``nodes`` holds ``(feature, threshold, left, right, value)`` tuples with
    ``feature == -1`` marking a leaf.  Node 0 is the root.
    """

    kind: ClassVar[str] = "tree"

    nodes: tuple[tuple[int, float, int, int, float], ...] = ((-1, 0.0, -1, -1, 0.5),)
    leaf_budget: int = 1

    @property
    def n_leaves(self) -> int:
        return sum(1 for node in self.nodes if node[0] == -1)

    def _predict(self, X, dataset):
        out = np.empty(len(dataset))
        stack = [(0, np.arange(len(dataset)))]
        while stack:
            node_id, rows = stack.pop()
            feature, threshold, left, right, value = self.nodes[node_id]
            if feature == -1:
                out[rows] = value
                continue
            go_left = X[rows, feature] <= threshold
            stack.append((left, rows[go_left]))
            stack.append((right, rows[~go_left]))
        return out

    def _params(self):
        return {"leaf_budget": self.leaf_budget, "nodes": [list(n) for n in self.nodes]}


@dataclass(frozen=True)
class SelfEstimationPredictor(Predictor):
    """Replays each record's own logged confidence as the estimate."""

    kind: ClassVar[str] = "self_estimation"

    def _predict(self, X, dataset):
        conf = dataset.self_confidence
        missing = np.isnan(conf)
        if missing.any():
            key = dataset.keys[int(np.argmax(missing))]
            raise SchemaError(f"record {key} carries no self_confidence; the base system exposes none")
        return conf


@dataclass(frozen=True)
class PreRecordedPredictor(Predictor):
    """Replays externally supplied estimates keyed by record key."""

    kind: ClassVar[str] = "pre_recorded"

    predictions: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for key, p in self.predictions.items():
            if not (0.0 <= p <= 1.0):
                raise ValueError(f"recorded estimate for {key} outside [0, 1]: {p}")

    def _predict(self, X, dataset):
        out = np.empty(len(dataset))
        for i, key in enumerate(dataset.keys):
            try:
                out[i] = self.predictions[key]
            except KeyError:
                raise SchemaError(f"no recorded prediction for record {key}") from None
        return out

    def _params(self):
        return {"predictions": dict(self.predictions)}


# ---------------------------------------------------------------------------
# fitting


def fit_constant(dataset: Dataset) -> ConstantPredictor:
    """Constant predictor equal to the training mean validity."""
    if len(dataset) == 0:
        raise ValueError("cannot fit a predictor on an empty dataset")
    return ConstantPredictor(value=float(np.mean(dataset.v)), mode=dataset.mode)


def fit_majority(dataset: Dataset) -> ConstantPredictor:
    """Hard majority-class prediction (1 when at least half the records are valid)."""
    if len(dataset) == 0:
        raise ValueError("cannot fit a predictor on an empty dataset")
    return ConstantPredictor(value=1.0 if np.mean(dataset.v) >= 0.5 else 0.0, mode=dataset.mode)


def _logistic_objective(Z, v, w, b, l2, squared):
    z = Z @ w + b if w.size else np.full(len(v), b)
    if squared:
        p = _sigmoid(z)
        resid = p - v
        loss = np.mean(resid**2)
        r = 2.0 * resid * p * (1.0 - p)
    else:
        loss = np.mean(np.logaddexp(0.0, z) - v * z)
        r = _sigmoid(z) - v
    loss += l2 * float(w @ w)
    gw = Z.T @ r / len(v) + 2.0 * l2 * w
    gb = float(np.mean(r))
    return float(loss), gw, gb


def fit_logistic(dataset: Dataset, feature_subset: Sequence[str] = (), budget: int | None = None,
                 **hyperparameters) -> LogisticPredictor:
    """Fit ``sigmoid(w . x + c)`` by full-batch gradient descent.

    Minimizes mean log loss on binary data and mean squared error on graded
    data, plus an L2 penalty on ``w``.  Inputs are standardized with the
    training mean and standard deviation.  The intercept starts at the logit
    of the training mean, so an empty ``feature_subset`` reproduces the
    constant predictor.  If a step would raise the loss it is halved until it
    does not, which keeps the recorded loss history non-increasing.

    Hyperparameters: ``lr`` (0.5), ``max_iter`` (5000), ``tol`` (1e-9, stop
    when an iteration improves the loss by less), ``l2`` (1e-6), ``seed``.
    """
    unknown = set(hyperparameters) - set(LOGISTIC_DEFAULTS)
    if unknown:
        raise ValueError(f"unknown logistic hyperparameter(s): {sorted(unknown)}")
    hp = {**LOGISTIC_DEFAULTS, **hyperparameters}
    features = tuple(feature_subset)
    if budget is not None and len(features) > budget:
        raise ValueError(f"{len(features)} features exceed the budget of {budget}")
    if len(dataset) == 0:
        raise ValueError("cannot fit a predictor on an empty dataset")
    X = dataset.columns(features)
    v = dataset.v
    mean = X.mean(axis=0) if features else np.zeros(0)
    scale = X.std(axis=0) if features else np.zeros(0)
    scale = np.where(scale > 0, scale, 1.0)
    Z = (X - mean) / scale

    m = float(np.clip(np.mean(v), 1e-9, 1 - 1e-9))
    b = float(np.log(m / (1 - m)))
    w = np.zeros(len(features))
    squared = not dataset.binary
    lr, l2, tol = float(hp["lr"]), float(hp["l2"]), float(hp["tol"])

    loss, gw, gb = _logistic_objective(Z, v, w, b, l2, squared)
    history = [loss]
    step = lr
    it = 0
    for it in range(1, int(hp["max_iter"]) + 1):
        while True:
            w_new, b_new = w - step * gw, b - step * gb
            new_loss, new_gw, new_gb = _logistic_objective(Z, v, w_new, b_new, l2, squared)
            if not np.isfinite(new_loss):
                raise FitError(f"non-finite training loss at iteration {it}")
            if new_loss <= loss or step < _MIN_STEP:
                break
            step *= 0.5
        if new_loss > loss:
            it -= 1
            break
        improvement = loss - new_loss
        w, b, loss, gw, gb = w_new, b_new, new_loss, new_gw, new_gb
        history.append(loss)
        if improvement < tol:
            break

    return LogisticPredictor(
        feature_names=features, mode=dataset.mode, weights=tuple(float(x) for x in w), intercept=float(b),
        mean=tuple(float(x) for x in mean), scale=tuple(float(x) for x in scale), final_loss=loss,
        n_iter=it, hyperparameters=hp, loss_history=tuple(history))


def _best_split(X: np.ndarray, v: np.ndarray, rows: np.ndarray):
    """Best ``(gain, feature, threshold)`` for one node, or ``None``.

    Ties go to the lowest feature index, then the lowest threshold.
    """
    n = len(rows)
    if n < 2:
        return None
    y = v[rows]
    total = y.sum()
    if np.all(y == y[0]):
        return None
    base = total * total / n
    best = None
    for j in range(X.shape[1]):
        x = X[rows, j]
        order = np.argsort(x, kind="stable")
        xs, ys = x[order], y[order]
        cuts = np.nonzero(xs[:-1] < xs[1:])[0]
        if cuts.size == 0:
            continue
        left_sum = np.cumsum(ys)[cuts]
        n_left = cuts + 1.0
        gains = left_sum**2 / n_left + (total - left_sum) ** 2 / (n - n_left) - base
        k = int(np.argmax(gains))
        gain = float(gains[k])
        if best is None or gain > best[0] + _SPLIT_EPS:
            best = (gain, j, float((xs[cuts[k]] + xs[cuts[k] + 1]) / 2.0))
    if best is None or best[0] <= _SPLIT_EPS:
        return None
    return best


def fit_tree(dataset: Dataset, leaf_budget: int, features: Sequence[str] | None = None) -> TreePredictor:
    """Greedy regression tree grown best-split-first.

    At each step the leaf whose best split removes the most squared error is
    split, until ``leaf_budget`` leaves exist or no split helps.  Leaves
    predict the mean validity of their rows.
    """
    if leaf_budget < 1:
        raise ValueError(f"leaf_budget must be >= 1, got {leaf_budget}")
    if len(dataset) == 0:
        raise ValueError("cannot fit a predictor on an empty dataset")
    names = tuple(dataset.names if features is None else features)
    X = dataset.columns(names)
    v = dataset.v

    # node: [feature, threshold, left, right, value]
    nodes: list[list] = [[-1, 0.0, -1, -1, float(np.mean(v))]]
    rows_of = {0: np.arange(len(v))}
    candidates = {0: _best_split(X, v, rows_of[0])}
    n_leaves = 1
    while n_leaves < leaf_budget:
        open_leaves = [(nid, c) for nid, c in sorted(candidates.items()) if c is not None]
        if not open_leaves:
            break
        # max gain; the earliest-created leaf wins ties
        nid, (gain, j, thr) = open_leaves[0]
        for other, cand in open_leaves[1:]:
            if cand[0] > gain + _SPLIT_EPS:
                nid, (gain, j, thr) = other, cand
        rows = rows_of.pop(nid)
        del candidates[nid]
        go_left = X[rows, j] <= thr
        children = []
        for part in (rows[go_left], rows[~go_left]):
            cid = len(nodes)
            nodes.append([-1, 0.0, -1, -1, float(np.mean(v[part]))])
            rows_of[cid] = part
            candidates[cid] = _best_split(X, v, part)
            children.append(cid)
        nodes[nid][0:4] = [j, thr, children[0], children[1]]
        n_leaves += 1

    return TreePredictor(feature_names=names, mode=dataset.mode,
                         nodes=tuple(tuple(n) for n in nodes), leaf_budget=leaf_budget)


def self_estimation_adapter(mode: str = "anticipative") -> SelfEstimationPredictor:
    """Predictor that returns each record's own ``self_confidence``."""
    return SelfEstimationPredictor(mode=mode)


def pre_recorded_adapter(predictions: Mapping[str, float]) -> PreRecordedPredictor:
    """Wrap externally recorded estimates (keyed by record key) as a predictor."""
    return PreRecordedPredictor(predictions={str(k): float(p) for k, p in predictions.items()})


def make_reactive(base: Predictor) -> Predictor:
    """Mark ``base`` as reactive: it then requires output features at predict time."""
    return replace(base, mode="reactive")


# ---------------------------------------------------------------------------
# families


FAMILY_KINDS = ("constant", "logistic", "tree")


@dataclass(frozen=True)
class FamilySpec:
    """A budgeted predictor family.

    ``budget`` counts input features for ``logistic`` and leaves for ``tree``.
    ``candidate_feature_subsets=None`` means every subset of at most
    ``budget`` features (logistic) or all features in one fit (tree).  Columns
    that are constant on the training data are left out of the automatic
    enumeration since they cannot carry signal.
    """

    kind: str = "constant"
    budget: int = 0
    candidate_feature_subsets: tuple[tuple[str, ...], ...] | None = None
    hyperparameters: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in FAMILY_KINDS:
            raise ValueError(f"family kind must be one of {FAMILY_KINDS}, got {self.kind!r}")
        if self.budget < 0:
            raise ValueError(f"budget must be non-negative, got {self.budget}")
        if self.kind == "tree" and self.budget < 1:
            raise ValueError("tree families need a leaf budget of at least 1")
        if self.candidate_feature_subsets is not None:
            subsets = tuple(tuple(s) for s in self.candidate_feature_subsets)
            object.__setattr__(self, "candidate_feature_subsets", subsets)
            if self.kind == "logistic":
                for s in subsets:
                    if len(s) > self.budget:
                        raise ValueError(f"candidate {list(s)} exceeds the budget of {self.budget}")

    def candidates(self, train: Dataset) -> list[tuple[str, Callable[[Dataset], Predictor]]]:
        """``(description, fit)`` pairs, sorted by description."""
        if self.kind == "constant":
            return [("constant", fit_constant)]
        subsets = self.candidate_feature_subsets
        if subsets is not None:
            missing = train.missing(sorted({n for s in subsets for n in s}))
            if missing:
                raise SchemaError(f"family references feature(s) absent from the data: {', '.join(missing)}",
                                  missing)
        hp = dict(self.hyperparameters)
        out = []
        if self.kind == "logistic":
            if subsets is None:
                usable = [n for j, n in enumerate(train.names) if np.ptp(train.X[:, j]) > 0]
                subsets = [c for k in range(self.budget + 1) for c in itertools.combinations(usable, k)]
            for s in subsets:
                out.append((f"logistic[{','.join(s)}]",
                            lambda ds, s=s: fit_logistic(ds, s, budget=self.budget, **hp)))
        else:
            if subsets is None:
                out.append((f"tree<={self.budget}[*]", lambda ds: fit_tree(ds, self.budget)))
            else:
                for s in subsets:
                    out.append((f"tree<={self.budget}[{','.join(s)}]",
                                lambda ds, s=s: fit_tree(ds, self.budget, features=s)))
        out.sort(key=lambda c: c[0])
        return out

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "budget": self.budget,
            "candidate_feature_subsets": None if self.candidate_feature_subsets is None
            else [list(s) for s in self.candidate_feature_subsets],
            "hyperparameters": dict(self.hyperparameters),
        }

    @classmethod
    def from_dict(cls, payload: Mapping[str, Any]) -> "FamilySpec":
        subsets = payload.get("candidate_feature_subsets")
        return cls(kind=payload.get("kind", "constant"), budget=int(payload.get("budget", 0)),
                   candidate_feature_subsets=None if subsets is None else tuple(tuple(s) for s in subsets),
                   hyperparameters=dict(payload.get("hyperparameters", {})))


# ---------------------------------------------------------------------------
# serialization

_KINDS = {cls.kind: cls for cls in (ConstantPredictor, LogisticPredictor, TreePredictor,
                                     SelfEstimationPredictor, PreRecordedPredictor)}


def predictor_from_dict(payload: Mapping[str, Any]) -> Predictor:
    kind = payload.get("kind")
    if kind not in _KINDS:
        raise ValueError(f"unknown predictor kind {kind!r}")
    mode = payload.get("mode", "anticipative")
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    common = {"feature_names": tuple(payload.get("feature_names", ())), "mode": mode}
    if kind == "constant":
        return ConstantPredictor(value=float(payload["value"]), **common)
    if kind == "logistic":
        return LogisticPredictor(
            weights=tuple(payload["weights"]), intercept=payload["intercept"], mean=tuple(payload["mean"]),
            scale=tuple(payload["scale"]), final_loss=payload.get("final_loss", float("nan")),
            n_iter=payload.get("n_iter", 0), hyperparameters=dict(payload.get("hyperparameters", {})),
            **common)
    if kind == "tree":
        nodes = tuple((int(f), float(th), int(lft), int(rgt), float(val))
                      for f, th, lft, rgt, val in payload["nodes"])
        return TreePredictor(nodes=nodes, leaf_budget=int(payload.get("leaf_budget", 1)), **common)
    if kind == "self_estimation":
        return SelfEstimationPredictor(**common)
    return PreRecordedPredictor(predictions=dict(payload["predictions"]), **common)


def predictor_to_json(predictor: Predictor) -> str:
    return json.dumps(predictor.to_dict(), indent=1, sort_keys=True)


def save_predictor(predictor: Predictor, path: str | os.PathLike, extra: Mapping[str, Any] | None = None) -> None:
    payload = predictor.to_dict()
    if extra:
        payload = {**payload, **extra}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_predictor(path: str | os.PathLike) -> Predictor:
    with open(path, encoding="utf-8") as fh:
        return predictor_from_dict(json.load(fh))
