"""Acceptance criteria, each with its tolerance and wall-clock budget.

Every test appends one PASS/FAIL line to the ``acceptance criteria``
section printed at the end of the pytest run.
"""

import filecmp
import math
import time
from contextlib import contextmanager
from fractions import Fraction

import pytest

from validity_lab import ecosim, suites
from validity_lab.ecosystem import Dataset, FeatureVector, InteractionRecord, make_history
from validity_lab.envelope import EnvelopeSpec, aurc, compute_envelope, rejection_curve
from validity_lab.predictors import FamilySpec
from validity_lab.scoring import LOG_LOSS
from validity_lab.unpredictability import QProtocol, estimate_q


class _Checks:
    """Collects named sub-checks so a criterion reports every failing part."""

    def __init__(self):
        self.failed = []
        self.notes = []

    def __call__(self, ok: bool, label: str):
        (self.notes if ok else self.failed).append(label)


@contextmanager
def criterion(log, number, title, budget_s):
    checks = _Checks()
    start = time.perf_counter()
    try:
        yield checks
    except Exception as exc:
        log.append((number, "FAIL", title, f"{type(exc).__name__}: {exc}"))
        raise
    elapsed = time.perf_counter() - start
    checks(elapsed < budget_s, f"runtime {elapsed:.2f}s < {budget_s}s")
    if checks.failed:
        log.append((number, "FAIL", title, "; ".join(checks.failed)))
        pytest.fail(f"criterion {number} failed: " + "; ".join(checks.failed))
    log.append((number, "PASS", title, "; ".join(checks.notes)))


def _constant_history(v, n=40):
    recs = [InteractionRecord(t=k, instance_id=f"x{k}", system_id="s", user_id="u",
                              instance_features=FeatureVector.of({"i_x": float(k % 5)}), validity=v)
            for k in range(n)]
    return make_history(recs)


def test_criterion_01_aleatoric_floor(acceptance_log):
    with criterion(acceptance_log, 1, "aleatoric floor (coin q=0.7)", 5.0) as check:
        history = ecosim.coin_ecosystem(0.7, 100_000, seed=0)
        for family in (FamilySpec("constant"), FamilySpec("logistic", 1), FamilySpec("tree", 4)):
            q = estimate_q(history, family, QProtocol(seed=0)).q_value
            check(abs(q - 0.21) <= 0.02, f"Q_brier[{family.kind}]={q:.4f} in 0.21+-0.02")
        report = estimate_q(history, FamilySpec("constant"), QProtocol(seed=0, rule=LOG_LOSS))
        check(abs(report.q_value - 0.6109) <= 0.02, f"log_loss={report.q_value:.4f} in 0.6109+-0.02")


def test_criterion_02_degenerate_ecosystems(acceptance_log):
    with criterion(acceptance_log, 2, "degenerate ecosystems give Q=0", 1.0) as check:
        for v in (1.0, 0.0):
            q = estimate_q(_constant_history(v), FamilySpec("constant"), QProtocol(seed=0)).q_value
            check(q == 0.0, f"all-{v:g}: Q={q!r} == 0")


def test_criterion_03_grid_structure(acceptance_log):
    with criterion(acceptance_log, 3, "six-system grid structure", 30.0) as check:
        table = suites.fig1_q_table(seed=0)
        for sid in "ABCDE":
            check(table[sid]["v"] == 0.625, f"V({sid})={table[sid]['v']} == 0.625")
        check(abs(table["F"]["v"] - 0.625) <= 0.02, f"V(F)={table['F']['v']:.4f} in 0.625+-0.02")
        a = table["A"]
        check(a["q_f1_wind"] <= 0.02, f"Q(A|F1 wind)={a['q_f1_wind']:.4f} <= 0.02")
        check(a["q_f1_fog"] >= 0.20, f"Q(A|F1 fog)={a['q_f1_fog']:.4f} >= 0.20")
        gap = table["C"]["q_f1"] - table["C"]["q_f2"]
        check(gap >= 0.10, f"Q(C|F1)-Q(C|F2)={gap:.4f} >= 0.10")
        check(table["E"]["q_f2"] >= 0.15, f"Q(E|F2)={table['E']['q_f2']:.4f} >= 0.15")
        for key in ("q_f1_wind", "q_f1_fog", "q_f1", "q_f2", "q_tree16"):
            check(abs(table["F"][key] - 0.234) <= 0.02, f"Q(F|{key[2:]})={table['F'][key]:.4f} in 0.234+-0.02")


def test_criterion_04_method_ladder(acceptance_log):
    with criterion(acceptance_log, 4, "method ladder strictly decreasing", 20.0) as check:
        scores = suites.method_ladder(seed=0)
        chain = [scores[m] for m in suites.LADDER_ORDER]
        text = " > ".join(f"{m}={s:.4f}" for m, s in zip(suites.LADDER_ORDER, chain))
        check(all(x > y for x, y in zip(chain, chain[1:])), text)


def _aurc_oracle(p, v):
    """Exact-arithmetic trapezoid over tie-averaged accepted validity, one record at a time."""
    p = [Fraction(x) for x in p]
    v = [Fraction(x) for x in v]
    n = len(p)
    order = sorted(range(n), key=lambda i: p[i])
    ys = []
    for k in range(n):
        cut = p[order[k]]
        above = sum((v[i] for i in range(n) if p[i] > cut), Fraction(0))
        group = [i for i in range(n) if p[i] == cut]
        rejected_in_group = sum(1 for i in order[:k] if p[i] == cut)
        share = Fraction(len(group) - rejected_in_group, len(group))
        ys.append((above + share * sum((v[i] for i in group), Fraction(0))) / (n - k))
    ys.append(Fraction(1))
    return float(sum((ys[k] + ys[k + 1]) / 2 for k in range(n)) / n)


def test_criterion_05_rejection_tradeoff(acceptance_log):
    with criterion(acceptance_log, 5, "rejection trade-off and AURC ordering", 10.0) as check:
        scenario = suites.assessor_scenario(seed=0)
        check(scenario["validity_with_rejection"] > scenario["validity_without_rejection"],
              f"V(tau=0.01)={scenario['validity_with_rejection']:.4f} > V(tau=0)="
              f"{scenario['validity_without_rejection']:.4f}")
        data, preds = suites.grid_d_predictors(seed=0)
        areas = {}
        for name, pred in preds.items():
            areas[name] = aurc(rejection_curve(pred, data))
            oracle = _aurc_oracle(pred.predict(data), data.v)
            check(abs(areas[name] - oracle) <= 1e-9, f"AURC[{name}]={areas[name]:.6f} matches oracle to 1e-9")
        check(areas["oracle"] > areas["calibrated"] > areas["constant"], "AURC oracle > calibrated > constant")


def test_criterion_06_envelope(acceptance_log):
    with criterion(acceptance_log, 6, "envelope on grid A", 1.0) as check:
        history = ecosim.grid_ecosystem(ecosim.GridEcosystemSpec("A", 4, seed=0))
        family = FamilySpec("logistic", 1, (("i_windingness",),))
        predictor = estimate_q(history, family, QProtocol(seed=0)).best_predictor
        report = compute_envelope(predictor, Dataset.from_history(history), EnvelopeSpec(omega=0.9, sigma=0.05))
        check(report.satisfied, "constraints satisfied")
        check(math.isclose(report.coverage, 0.5, abs_tol=1e-12), f"coverage={report.coverage}")
        check(math.isclose(report.accepted_validity, 1.0, abs_tol=1e-12),
              f"accepted_validity={report.accepted_validity}")


def test_criterion_07_reactive_gap(acceptance_log):
    with criterion(acceptance_log, 7, "reactive vs anticipative gap", 5.0) as check:
        history = ecosim.output_oracle_ecosystem(4000, leak=1.0, seed=0)
        reactive = estimate_q(history, FamilySpec("tree", 2), QProtocol(seed=0, mode="reactive")).q_value
        anticipative = estimate_q(history, FamilySpec("tree", 2), QProtocol(seed=0)).q_value
        check(reactive <= 0.01, f"reactive Brier={reactive:.4f} <= 0.01")
        check(abs(anticipative - 0.25) <= 0.02, f"anticipative floor={anticipative:.4f} in 0.25+-0.02")


DRIFT = dict(n_steps=10_000, success_boost=0.6, failure_drop=0.1, sharpness=30.0, noise=0.5)


def test_criterion_08_horizon_signal(acceptance_log):
    with criterion(acceptance_log, 8, "history window beats memoryless at h=1", 20.0) as check:
        history = ecosim.drift_ecosystem(ecosim.DriftEcosystemSpec(seed=0, **DRIFT))
        family = FamilySpec("logistic", 2)
        memoryless = estimate_q(history, family, QProtocol(seed=0, horizon=1)).q_value
        windowed = estimate_q(history, family, QProtocol(seed=0, horizon=1, history_window=4)).q_value
        check(memoryless - windowed >= 0.02,
              f"Q memoryless={memoryless:.4f} - Q window={windowed:.4f} = {memoryless - windowed:.4f} >= 0.02")


def test_criterion_09_scaling_recovery(acceptance_log):
    with criterion(acceptance_log, 9, "power-law exponent recovery", 5.0) as check:
        result = suites.scaling_recovery(seed=0, trials=100)
        check(result["within_tolerance"] >= 95, f"{result['within_tolerance']}/100 within +-0.005")


def test_criterion_10_determinism(acceptance_log, tmp_path):
    with criterion(acceptance_log, 10, "scenario suites byte-identical across runs", 60.0) as check:
        for name in suites.SUITES:
            a, b = tmp_path / "a" / name, tmp_path / "b" / name
            suites.scenario_suite(name, a, seed=0)
            suites.scenario_suite(name, b, seed=0)
            files = sorted(p.name for p in a.iterdir())
            same = sorted(p.name for p in b.iterdir()) == files and \
                all(filecmp.cmp(a / f, b / f, shallow=False) for f in files)
            check(same, f"{name}: {len(files)} files identical")
