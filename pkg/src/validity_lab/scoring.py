"""Proper scoring rules and validity aggregates."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .ecosystem import Dataset, EcosystemHistory

RULE_KINDS = ("brier", "log_loss")
_RULE_ALIASES = {"brier": "brier", "log_loss": "log_loss", "logloss": "log_loss"}


@dataclass(frozen=True)
class ScoringRule:
    """A proper scoring rule; lower scores are better.

    ``brier`` is the squared difference ``(p_hat - v)**2``, which also covers
    graded validity.  ``log_loss`` uses the natural logarithm and clips
    ``p_hat`` to ``[epsilon, 1 - epsilon]``; it is only defined for binary
    validity.
    """

    kind: str = "brier"
    epsilon: float = 1e-15

    def __post_init__(self):
        kind = _RULE_ALIASES.get(self.kind)
        if kind is None:
            raise ValueError(f"unknown scoring rule {self.kind!r}; expected one of {RULE_KINDS}")
        object.__setattr__(self, "kind", kind)
        if not (0.0 < self.epsilon < 0.5):
            raise ValueError(f"epsilon must lie in (0, 0.5), got {self.epsilon}")

    def losses(self, p_hat, v) -> np.ndarray:
        """Elementwise scores for arrays of estimates and observed validities."""
        p = np.asarray(p_hat, dtype=float)
        v = np.asarray(v, dtype=float)
        if np.any((p < 0) | (p > 1)) or np.any(np.isnan(p)):
            raise ValueError("estimates must lie in [0, 1]")
        if np.any((v < 0) | (v > 1)):
            raise ValueError("validity must lie in [0, 1]")
        if self.kind == "brier":
            return (p - v) ** 2
        if np.any((v != 0) & (v != 1)):
            raise ValueError("log_loss is undefined for graded validity; use brier")
        q = np.clip(p, self.epsilon, 1 - self.epsilon)
        return -(v * np.log(q) + (1 - v) * np.log1p(-q))

    @property
    def max_loss(self) -> float:
        return 1.0 if self.kind == "brier" else -math.log(self.epsilon)


BRIER = ScoringRule("brier")
LOG_LOSS = ScoringRule("log_loss")


def as_rule(rule: ScoringRule | str | None) -> ScoringRule:
    if rule is None:
        return BRIER
    return rule if isinstance(rule, ScoringRule) else ScoringRule(rule)


def score(rule: ScoringRule | str, p_hat: float, v: float) -> float:
    """Score a single estimate against one observed validity."""
    return float(as_rule(rule).losses(p_hat, v))


def expected_score(rule: ScoringRule | str, p_hat: float, q: float) -> float:
    """Expected score of estimate ``p_hat`` when ``V ~ Bernoulli(q)``."""
    rule = as_rule(rule)
    return q * score(rule, p_hat, 1.0) + (1 - q) * score(rule, p_hat, 0.0)


def expected_validity(history: EcosystemHistory | Dataset) -> float:
    """Empirical expected validity: the mean validity over records."""
    v = history.v if isinstance(history, Dataset) else history.validities()
    if len(v) == 0:
        raise ValueError("expected validity of an empty history is undefined")
    return float(np.mean(v))


def mean_score(rule: ScoringRule | str, predictor, dataset: Dataset) -> float:
    """Mean score of ``predictor`` over ``dataset``.

    Raises :class:`~validity_lab.errors.SchemaError` when the dataset lacks
    features the predictor was fitted on.
    """
    if len(dataset) == 0:
        raise ValueError("mean score over an empty dataset is undefined")
    return float(np.mean(as_rule(rule).losses(predictor.predict(dataset), dataset.v)))


class CalibrationBin(NamedTuple):
    bin_lo: float
    bin_hi: float
    mean_p: float | None
    mean_v: float | None
    count: int

    @property
    def gap(self) -> float | None:
        if self.count == 0:
            return None
        return abs(self.mean_p - self.mean_v)


def calibration_table(predictor, dataset: Dataset, bins: int = 10) -> list[CalibrationBin]:
    """Reliability statistics over ``bins`` equal-width bins of ``[0, 1]``.

    An estimate of exactly 1 falls in the last bin.  Empty bins are reported
    with ``count=0`` and ``None`` means.
    """
    if bins < 2:
        raise ValueError(f"need at least 2 bins, got {bins}")
    p = np.asarray(predictor.predict(dataset), dtype=float)
    idx = np.minimum((p * bins).astype(int), bins - 1)
    table = []
    for b in range(bins):
        mask = idx == b
        count = int(mask.sum())
        mean_p = float(p[mask].mean()) if count else None
        mean_v = float(dataset.v[mask].mean()) if count else None
        table.append(CalibrationBin(b / bins, (b + 1) / bins, mean_p, mean_v, count))
    return table


def write_calibration_csv(table: list[CalibrationBin], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["bin_lo", "bin_hi", "mean_p", "mean_v", "count"])
        for row in table:
            writer.writerow([
                repr(row.bin_lo), repr(row.bin_hi),
                "" if row.mean_p is None else repr(row.mean_p),
                "" if row.mean_v is None else repr(row.mean_v),
                row.count,
            ])
