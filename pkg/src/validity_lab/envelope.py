"""Validity envelopes, rejection curves and the validity/predictability frontier."""

from __future__ import annotations

import csv
import math
import os
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from .ecosystem import Dataset
from .scoring import BRIER, ScoringRule, as_rule

# accepted validity reported at 100% rejection on a curve
FULL_REJECTION_VALIDITY = 1.0


@dataclass(frozen=True)
class EnvelopeSpec:
    """Minimum expected validity ``omega``, maximum loss ``sigma`` and optional threshold ``tau``."""

    omega: float = 0.0
    sigma: float = math.inf
    tau: float | None = None

    def __post_init__(self):
        if not (0.0 <= self.omega <= 1.0):
            raise ValueError(f"omega must lie in [0, 1], got {self.omega}")
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be non-negative, got {self.sigma}")
        if self.tau is not None and not (0.0 <= self.tau <= 1.0):
            raise ValueError(f"tau must lie in [0, 1], got {self.tau}")


@dataclass(frozen=True)
class EnvelopeReport:
    tau_used: float
    coverage: float
    accepted_validity: float | None
    accepted_loss: float | None
    satisfied: bool
    n_accepted: int = 0

    def to_dict(self) -> dict:
        return asdict(self)


class _Sweep:
    """Cumulative statistics of records sorted by descending estimate."""

    def __init__(self, p: np.ndarray, v: np.ndarray, loss: np.ndarray):
        order = np.argsort(-p, kind="stable")
        self.p_desc = p[order]
        self.cum_v = np.concatenate(([0.0], np.cumsum(v[order])))
        self.cum_loss = np.concatenate(([0.0], np.cumsum(loss[order])))
        self.n = len(p)

    def at(self, tau: float, spec: EnvelopeSpec) -> EnvelopeReport:
        # records with p >= tau form a prefix of the descending order
        k = int(np.searchsorted(-self.p_desc, -tau, side="right"))
        if k == 0:
            return EnvelopeReport(tau, 0.0, None, None, False, 0)
        validity = float(self.cum_v[k] / k)
        loss = float(self.cum_loss[k] / k)
        ok = validity >= spec.omega and loss <= spec.sigma
        return EnvelopeReport(tau, k / self.n, validity, loss, ok, k)


def tau_grid(p_hat: np.ndarray) -> list[float]:
    """Every distinct estimate plus 0 and 1, ascending."""
    return sorted(set(float(x) for x in np.unique(p_hat)) | {0.0, 1.0})


def envelope_sweep(predictor, dataset: Dataset, spec: EnvelopeSpec, rule: ScoringRule | str = BRIER,
                   grid: Sequence[float] | None = None) -> list[EnvelopeReport]:
    """Envelope report at every threshold of ``grid`` (default :func:`tau_grid`)."""
    if len(dataset) == 0:
        raise ValueError("envelope of an empty dataset is undefined")
    p = predictor.predict(dataset)
    sweep = _Sweep(p, dataset.v, as_rule(rule).losses(p, dataset.v))
    return [sweep.at(float(tau), spec) for tau in (tau_grid(p) if grid is None else grid)]


def compute_envelope(predictor, dataset: Dataset, spec: EnvelopeSpec,
                     rule: ScoringRule | str = BRIER) -> EnvelopeReport:
    """Accept records with ``p_hat >= tau`` and check the (omega, sigma) constraints.

    Without a given ``tau`` the smallest grid threshold meeting both
    constraints (hence the largest coverage) is used.  If none does, the
    report for the failing threshold with the largest coverage is returned.
    """
    if spec.tau is not None:
        return envelope_sweep(predictor, dataset, spec, rule, grid=[spec.tau])[0]
    reports = envelope_sweep(predictor, dataset, spec, rule)
    for rep in reports:
        if rep.satisfied:
            return rep
    return max(reports, key=lambda r: r.coverage)


@dataclass(frozen=True)
class RejectionCurve:
    """``n + 1`` points ``(rejection_rate, accepted_validity)``.

    Records are rejected in ascending order of the estimate.  Inside a
    group of tied estimates the accepted validity is the expectation over
    the order in which the tied records are rejected, so ties carry no
    spurious information.  At full rejection the accepted validity is
    ``FULL_REJECTION_VALIDITY`` by convention.
    """

    rejection_rate: tuple[float, ...]
    accepted_validity: tuple[float, ...]
    metadata: dict = field(default_factory=lambda: {
        "full_rejection_validity": FULL_REJECTION_VALIDITY, "ties": "expected over tied records"})

    def __len__(self) -> int:
        return len(self.rejection_rate)

    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.rejection_rate, self.accepted_validity))

    def at_rate(self, rate: float) -> float:
        k = int(round(rate * (len(self) - 1)))
        return self.accepted_validity[k]


def rejection_curve(predictor, dataset: Dataset) -> RejectionCurve:
    p = np.asarray(predictor.predict(dataset), dtype=float)
    return rejection_curve_from_scores(p, dataset.v)


def rejection_curve_from_scores(p_hat, v) -> RejectionCurve:
    p = np.asarray(p_hat, dtype=float)
    v = np.asarray(v, dtype=float)
    n = len(p)
    if n == 0:
        raise ValueError("rejection curve of an empty dataset is undefined")
    order = np.argsort(p, kind="stable")
    ps, vs = p[order], v[order]
    starts = np.concatenate(([0], np.nonzero(ps[1:] != ps[:-1])[0] + 1))
    ends = np.concatenate((starts[1:], [n]))
    sizes = ends - starts
    group_sum = np.add.reduceat(vs, starts)
    # validity of everything after each group
    after = np.concatenate((np.cumsum(group_sum[::-1])[::-1][1:], [0.0]))
    group_of = np.repeat(np.arange(len(starts)), sizes)
    k = np.arange(n)
    j = k - starts[group_of]
    m = sizes[group_of]
    acc_sum = after[group_of] + (m - j) / m * group_sum[group_of]
    acc = acc_sum / (n - k)
    rates = np.arange(n + 1) / n
    return RejectionCurve(tuple(float(x) for x in rates),
                          tuple(float(x) for x in acc) + (FULL_REJECTION_VALIDITY,))


def aurc(curve: RejectionCurve | Sequence[tuple[float, float]]) -> float:
    """Trapezoidal area under accepted validity over rejection rate."""
    pts = curve.points() if isinstance(curve, RejectionCurve) else list(curve)
    if len(pts) < 2:
        raise ValueError("AURC needs at least two curve points")
    area = 0.0
    for (x0, y0), (x1, y1) in zip(pts, pts[1:]):
        area += (x1 - x0) * (y0 + y1) / 2.0
    return area


@dataclass(frozen=True)
class ParetoPoint:
    system_id: str
    v: float
    q: float
    dominated: bool = False


def _dominates(a: ParetoPoint, b: ParetoPoint) -> bool:
    return a.v >= b.v and a.q <= b.q and (a.v > b.v or a.q < b.q)


def mark_dominance(points: Sequence[ParetoPoint]) -> list[ParetoPoint]:
    """Copy of ``points`` with ``dominated`` set (higher v and lower q are better)."""
    for pt in points:
        if not (math.isfinite(pt.v) and math.isfinite(pt.q)):
            raise ValueError(f"point {pt.system_id} has non-finite coordinates")
    return [replace(a, dominated=any(_dominates(b, a) for b in points)) for a in points]


def pareto_frontier(points: Sequence[ParetoPoint]) -> list[ParetoPoint]:
    """Non-dominated points sorted by ascending q; identical points are all kept."""
    marked = mark_dominance(points)
    return sorted((p for p in marked if not p.dominated), key=lambda p: p.q)


# ---------------------------------------------------------------------------
# export


def _comment_lines(fh, comments):
    for line in comments:
        fh.write(f"# {line}\n")


def write_curve_csv(curve: RejectionCurve, path: str | os.PathLike, comments=()) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        _comment_lines(fh, comments)
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["rejection_rate", "accepted_validity"])
        for x, y in curve.points():
            writer.writerow([repr(x), repr(y)])


def write_frontier_csv(points: Sequence[ParetoPoint], path: str | os.PathLike, comments=()) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        _comment_lines(fh, comments)
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["system_id", "v", "q", "dominated"])
        for p in points:
            writer.writerow([p.system_id, repr(p.v), repr(p.q), str(p.dominated).lower()])
