"""Estimating the unpredictability Q of an ecosystem for a predictor family.

Q is the lowest expected score a budgeted family can reach on held-out
data.  Candidates are fitted on a training split, the one with the lowest
validation score is selected, and its test score is reported.
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .ecosystem import MODES, Dataset, EcosystemHistory
from .predictors import FamilySpec, Predictor
from .scoring import ScoringRule, as_rule

MIN_RECORDS = 10
THREADS_ENV = "VALIDITY_LAB_THREADS"
GROUP_BY = ("instance", "system", "user", "all")


@dataclass(frozen=True)
class QProtocol:
    """How Q is estimated from a single logged history.

    The split is by seeded shuffle for memoryless data and by time prefix
    (train on early timesteps, test on late ones) whenever a horizon or a
    history window is requested.
    """

    split: tuple[float, float, float] = (0.5, 0.2, 0.3)
    seed: int = 0
    rule: ScoringRule = field(default_factory=ScoringRule)
    horizon: int = 0
    mode: str = "anticipative"
    history_window: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "rule", as_rule(self.rule))
        split = tuple(float(x) for x in self.split)
        object.__setattr__(self, "split", split)
        if len(split) != 3 or any(x <= 0 for x in split) or abs(sum(split) - 1.0) > 1e-9:
            raise ValueError(f"split fractions must be three positive numbers summing to 1, got {split}")
        if self.horizon < 0:
            raise ValueError(f"horizon must be non-negative, got {self.horizon}")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.history_window is not None and self.history_window < 1:
            raise ValueError("history_window must be a positive integer")

    @property
    def temporal(self) -> bool:
        return self.horizon > 0 or bool(self.history_window)

    def to_dict(self) -> dict:
        return {"split": list(self.split), "seed": self.seed, "rule": self.rule.kind,
                "horizon": self.horizon, "mode": self.mode, "history_window": self.history_window}

    @classmethod
    def from_dict(cls, payload: dict) -> "QProtocol":
        return cls(split=tuple(payload.get("split", (0.5, 0.2, 0.3))), seed=int(payload.get("seed", 0)),
                   rule=payload.get("rule", "brier"), horizon=int(payload.get("horizon", 0)),
                   mode=payload.get("mode", "anticipative"), history_window=payload.get("history_window"))


class CandidateScore(NamedTuple):
    candidate: str
    val_score: float
    test_score: float


@dataclass(frozen=True)
class QReport:
    q_value: float
    best_candidate: str
    best_predictor: Predictor
    per_candidate_scores: tuple[CandidateScore, ...]
    n_train: int
    n_val: int
    n_test: int
    protocol: QProtocol
    family: FamilySpec

    def to_dict(self) -> dict:
        return {
            "q_value": self.q_value,
            "best_candidate": self.best_candidate,
            "best_predictor": self.best_predictor.to_dict(),
            "per_candidate_scores": [c._asdict() for c in self.per_candidate_scores],
            "n_train": self.n_train, "n_val": self.n_val, "n_test": self.n_test,
            "protocol": self.protocol.to_dict(),
            "family": self.family.to_dict(),
        }


def horizon_pairs(dataset: Dataset, horizon: int) -> Dataset:
    """Pair each row's features with the validity ``horizon`` steps later in its (system, user) stream.

    Rows without a partner at ``t + horizon`` are dropped.
    """
    if horizon == 0:
        return dataset
    first_at: dict[tuple[str, str, int], int] = {}
    for i, (sid, uid, t) in enumerate(zip(dataset.system_ids, dataset.user_ids, dataset.t.tolist())):
        first_at.setdefault((sid, uid, t), i)
    rows, targets = [], []
    for i, (sid, uid, t) in enumerate(zip(dataset.system_ids, dataset.user_ids, dataset.t.tolist())):
        j = first_at.get((sid, uid, t + horizon))
        if j is not None:
            rows.append(i)
            targets.append(dataset.v[j])
    return dataset.subset(rows).with_targets(np.array(targets, dtype=float))


def _split_sizes(n: int, split: tuple[float, float, float]) -> tuple[int, int, int]:
    n_train = int(round(split[0] * n))
    n_val = int(round(split[1] * n))
    return n_train, n_val, n - n_train - n_val


def split_dataset(dataset: Dataset, protocol: QProtocol) -> tuple[Dataset, Dataset, Dataset]:
    n = len(dataset)
    n_train, n_val, n_test = _split_sizes(n, protocol.split)
    if min(n_train, n_val, n_test) < 1:
        raise ValueError(f"{n} records are too few for the split {protocol.split}; "
                         f"need at least {MIN_RECORDS}")
    if protocol.temporal:
        if len(np.unique(dataset.t)) < 2:
            raise ValueError("temporal protocol requested on data with a single timestep")
        order = np.argsort(dataset.t, kind="stable")
    else:
        order = np.random.default_rng(protocol.seed).permutation(n)
    return (dataset.subset(order[:n_train]), dataset.subset(order[n_train:n_train + n_val]),
            dataset.subset(order[n_train + n_val:]))


def _thread_cap() -> int:
    try:
        return max(1, int(os.environ.get(THREADS_ENV, "1")))
    except ValueError:
        return 1


def _search(family: FamilySpec, train: Dataset, val: Dataset, test: Dataset, rule: ScoringRule):
    candidates = family.candidates(train)

    def evaluate(item):
        desc, fit = item
        pred = fit(train)
        val_score = float(np.mean(rule.losses(pred.predict(val), val.v)))
        test_score = float(np.mean(rule.losses(pred.predict(test), test.v)))
        return desc, pred, val_score, test_score

    threads = min(_thread_cap(), len(candidates))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(evaluate, candidates))
    else:
        results = [evaluate(c) for c in candidates]
    # candidates arrive sorted by description, so the first minimum is the lexicographic tie-break
    best = min(range(len(results)), key=lambda k: results[k][2])
    return results, best


def estimate_q(history: EcosystemHistory, family: FamilySpec, protocol: QProtocol | None = None) -> QReport:
    """Unpredictability of ``history`` relative to ``family``.

    For ``protocol.horizon = h > 0`` each row's features at ``t`` are paired
    with the validity at ``t + h`` of the same (system, user) stream.
    """
    protocol = protocol or QProtocol()
    if len(history) < MIN_RECORDS:
        raise ValueError(f"need at least {MIN_RECORDS} records to estimate Q, got {len(history)}")
    dataset = Dataset.from_history(history, mode=protocol.mode, history_window=protocol.history_window)
    dataset = horizon_pairs(dataset, protocol.horizon)
    if protocol.horizon and len(dataset) == 0:
        raise ValueError(f"no records have a partner {protocol.horizon} steps ahead")
    train, val, test = split_dataset(dataset, protocol)
    results, best = _search(family, train, val, test, protocol.rule)
    desc, pred, _, test_score = results[best]
    return QReport(
        q_value=test_score, best_candidate=desc, best_predictor=pred,
        per_candidate_scores=tuple(CandidateScore(d, vs, ts) for d, _, vs, ts in results),
        n_train=len(train), n_val=len(val), n_test=len(test), protocol=protocol, family=family)


def estimate_q_memoryless(history: EcosystemHistory, family: FamilySpec,
                          protocol: QProtocol | None = None) -> QReport:
    """Q for i.i.d. ``<instance, system, user>`` tuples: shuffled split, no history, no outputs."""
    protocol = protocol or QProtocol()
    if protocol.horizon != 0 or protocol.history_window or protocol.mode != "anticipative":
        raise ValueError("the memoryless estimate needs horizon 0, no history window and anticipative mode")
    return estimate_q(history, family, protocol)


class GroupRow(NamedTuple):
    key: str
    predicted: float
    observed: float
    count: int


def aggregate_predictions(predictor: Predictor, dataset: Dataset, group_by: str = "all") -> list[GroupRow]:
    """Roll instance-level estimates up to group means, sorted by group key."""
    if group_by not in GROUP_BY:
        raise ValueError(f"group_by must be one of {GROUP_BY}, got {group_by!r}")
    p = predictor.predict(dataset)
    if group_by == "all":
        keys = ("all",) * len(dataset)
    else:
        keys = {"instance": dataset.instance_ids, "system": dataset.system_ids, "user": dataset.user_ids}[group_by]
    groups: dict[str, list[int]] = {}
    for i, k in enumerate(keys):
        groups.setdefault(k, []).append(i)
    return [GroupRow(k, float(p[idx].mean()), float(dataset.v[idx].mean()), len(idx))
            for k, idx in sorted(groups.items())]


def write_candidates_csv(report: QReport, path: str | os.PathLike, comments=()) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in comments:
            fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["candidate", "val_score", "test_score"])
        for c in report.per_candidate_scores:
            writer.writerow([c.candidate, repr(c.val_score), repr(c.test_score)])


def write_qreport_json(report: QReport, path: str | os.PathLike, extra: dict | None = None) -> None:
    payload = report.to_dict()
    if extra:
        payload.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")
