"""Canned end-to-end scenarios with fixed seeds.

Each suite writes its artifacts into ``out_dir`` and returns a summary
dict (also saved as ``summary.json``).  Reruns with the same seed produce
byte-identical files.
"""

from __future__ import annotations

import os
from pathlib import Path

import numpy as np

from . import ecosim, plots
from .ecosystem import Dataset
from .envelope import (
    EnvelopeSpec, ParetoPoint, aurc, compute_envelope, mark_dominance, rejection_curve, write_curve_csv,
    write_frontier_csv,
)
from .predictors import (
    FamilySpec, fit_constant, fit_logistic, fit_majority, fit_tree, pre_recorded_adapter,
    self_estimation_adapter,
)
from .provenance import config_hash, stamp_line, write_json
from .scaling import fit_power_law, power_law_points, predict_hypothetical
from .scoring import BRIER, LOG_LOSS, expected_score, expected_validity, mean_score
from .unpredictability import QProtocol, estimate_q, split_dataset

SUITES = ("fig1", "coin", "ladder", "tradeoff", "scaling")

FIG1_EPISODES = 400
LADDER_AGENTS, LADDER_TASKS = 5, 2000
COIN_Q, COIN_N = 0.7, 100_000
SCALING_TRIALS, SCALING_POINTS = 100, 50
SCALING_EXPONENT, SCALING_SCALE, SCALING_NOISE, SCALING_TOL = -0.05, 3.0, 0.01, 0.005
REJECT_TAU = 0.01

WIND, FOG = "i_windingness", "i_fogginess"


def _stamp(name: str, seed: int) -> tuple[str, dict]:
    digest = config_hash({"suite": name, "seed": seed})
    return digest, {"suite": name, "seed": seed, "config_hash": digest}


def _write_csv(path: Path, header: list[str], rows: list[list], comment: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# {comment}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(r if isinstance(r, str) else repr(r) for r in row) + "\n")


def _write_text(path: Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


# ---------------------------------------------------------------------------


def fig1_q_table(seed: int = 0, episodes: int = FIG1_EPISODES) -> dict[str, dict[str, float]]:
    """Expected validity and Q under several families for grid systems A-F."""
    families = {
        "f1_wind": FamilySpec("logistic", 1, ((WIND,),)),
        "f1_fog": FamilySpec("logistic", 1, ((FOG,),)),
        "f1": FamilySpec("logistic", 1),
        "f2": FamilySpec("logistic", 2),
        "tree16": FamilySpec("tree", 16),
    }
    protocol = QProtocol(seed=seed)
    table = {}
    for sid in ecosim.GRID_SYSTEMS:
        history = ecosim.grid_ecosystem(ecosim.GridEcosystemSpec(sid, episodes, seed))
        row = {"v": expected_validity(history)}
        for name, fam in families.items():
            row[f"q_{name}"] = estimate_q(history, fam, protocol).q_value
        table[sid] = row
    return table


def suite_fig1(out: Path, seed: int) -> dict:
    digest, meta = _stamp("fig1", seed)
    table = fig1_q_table(seed)
    cols = ["v", "q_f1_wind", "q_f1_fog", "q_f1", "q_f2", "q_tree16"]
    _write_csv(out / "fig1_q_table.csv", ["system_id"] + cols,
               [[sid] + [table[sid][c] for c in cols] for sid in table], stamp_line(seed, digest))
    points = mark_dominance([ParetoPoint(sid, row["v"], row["q_f2"]) for sid, row in table.items()])
    write_frontier_csv(points, out / "frontier.csv", comments=[stamp_line(seed, digest)])
    tree_points = mark_dominance([ParetoPoint(sid, row["v"], row["q_tree16"]) for sid, row in table.items()])
    write_frontier_csv(tree_points, out / "frontier_tree16.csv", comments=[stamp_line(seed, digest)])
    svg = plots.scatter_chart([(p.system_id, p.q, p.v, not p.dominated) for p in points],
                              "Validity vs unpredictability (logistic, 2 features)", "Q (Brier)",
                              "expected validity", comment=stamp_line(seed, digest))
    _write_text(out / "frontier.svg", svg)
    return {**meta, "q_table": table,
            "frontier_f2": [p.system_id for p in points if not p.dominated],
            "frontier_tree16": [p.system_id for p in tree_points if not p.dominated]}


def suite_coin(out: Path, seed: int) -> dict:
    digest, meta = _stamp("coin", seed)
    history = ecosim.coin_ecosystem(COIN_Q, COIN_N, seed)
    family = FamilySpec("constant")
    q_brier = estimate_q(history, family, QProtocol(seed=seed, rule=BRIER))
    q_log = estimate_q(history, family, QProtocol(seed=seed, rule=LOG_LOSS))
    return {**meta, "q": COIN_Q, "n": COIN_N, "empirical_validity": expected_validity(history),
            "q_brier": q_brier.q_value, "q_log_loss": q_log.q_value,
            "analytic_brier": expected_score(BRIER, COIN_Q, COIN_Q),
            "analytic_log_loss": expected_score(LOG_LOSS, COIN_Q, COIN_Q),
            "best_constant": q_brier.best_predictor.to_dict()["value"]}


def method_ladder(seed: int = 0, n_agents: int = LADDER_AGENTS, n_tasks: int = LADDER_TASKS,
                  skill_spread: float = 1.5) -> dict[str, float]:
    """Held-out Brier of the five prediction approaches, simplest first."""
    history = ecosim.agent_task_ecosystem(n_agents, n_tasks, seed, skill_spread=skill_spread)
    data = Dataset.from_history(history)
    train, _, test = split_dataset(data, QProtocol(seed=seed))
    agents = tuple(n for n in data.names if n.startswith("s_agent_"))
    instance = tuple(n for n in data.names if n.startswith("i_"))
    fits = {
        "majority": fit_majority(train),
        "global_accuracy": fit_constant(train),
        "agent_accuracy": fit_tree(train, n_agents, features=agents),
        "all_features_agent": fit_logistic(train, instance + agents),
        "relevant_features_agent": fit_logistic(train, ecosim.AGENT_RELEVANT_FEATURES + agents),
        "decoy_features_agent": fit_logistic(train, ecosim.AGENT_DECOY_FEATURES + agents),
    }
    return {name: mean_score(BRIER, pred, test) for name, pred in fits.items()}


LADDER_ORDER = ("majority", "global_accuracy", "agent_accuracy", "relevant_features_agent")


def suite_ladder(out: Path, seed: int) -> dict:
    digest, meta = _stamp("ladder", seed)
    scores = method_ladder(seed)
    _write_csv(out / "ladder.csv", ["method", "brier"], [[m, s] for m, s in scores.items()], stamp_line(seed, digest))
    ordered = [scores[m] for m in LADDER_ORDER]
    return {**meta, "brier": scores,
            "strictly_decreasing": all(a > b for a, b in zip(ordered, ordered[1:]))}


def grid_d_predictors(seed: int = 0, episodes: int = 4):
    """Oracle, calibrated (per-windingness rate) and constant predictors on grid D."""
    history = ecosim.grid_ecosystem(ecosim.GridEcosystemSpec("D", episodes, seed))
    data = Dataset.from_history(history)
    preds = {
        "oracle": pre_recorded_adapter(ecosim.grid_oracle_predictions(history)),
        "calibrated": fit_tree(data, 4, features=(WIND,)),
        "constant": fit_constant(data),
    }
    return data, preds


def assessor_scenario(seed: int = 0) -> dict:
    """Logistic assessor vs logged self-confidence on held-out agent tasks, with threshold rejection."""
    history = ecosim.agent_task_ecosystem(LADDER_AGENTS, LADDER_TASKS, seed, confidence="calibrated")
    data = Dataset.from_history(history)
    train, _, test = split_dataset(data, QProtocol(seed=seed))
    agents = tuple(n for n in data.names if n.startswith("s_agent_"))
    assessor = fit_logistic(train, ecosim.AGENT_RELEVANT_FEATURES + agents)
    base = compute_envelope(assessor, test, EnvelopeSpec(tau=0.0))
    rej = compute_envelope(assessor, test, EnvelopeSpec(tau=REJECT_TAU))
    p = assessor.predict(test)
    rejected = p < REJECT_TAU
    failures, correct = test.v == 0, test.v == 1
    return {
        "assessor_brier": mean_score(BRIER, assessor, test),
        "self_estimation_brier": mean_score(BRIER, self_estimation_adapter(), test),
        "tau": REJECT_TAU,
        "validity_without_rejection": base.accepted_validity,
        "validity_with_rejection": rej.accepted_validity,
        "coverage_with_rejection": rej.coverage,
        "failures_avoided": float(np.mean(rejected[failures])) if failures.any() else 0.0,
        "correct_rejected": float(np.mean(rejected[correct])) if correct.any() else 0.0,
    }


def suite_tradeoff(out: Path, seed: int) -> dict:
    digest, meta = _stamp("tradeoff", seed)
    data, preds = grid_d_predictors(seed)
    curves = {name: rejection_curve(pred, data) for name, pred in preds.items()}
    areas = {name: aurc(curve) for name, curve in curves.items()}
    for name, curve in curves.items():
        write_curve_csv(curve, out / f"rejection_curve_{name}.csv", comments=[stamp_line(seed, digest)])
    svg = plots.line_chart([(name, curve.points()) for name, curve in curves.items()],
                           "Accuracy-rejection curves on grid D", "rejection rate", "accepted validity",
                           xr=(0.0, 1.0), yr=(0.5, 1.02), comment=stamp_line(seed, digest))
    _write_text(out / "rejection_curves.svg", svg)
    _write_csv(out / "aurc.csv", ["predictor", "aurc"], [[n, a] for n, a in areas.items()], stamp_line(seed, digest))
    return {**meta, "aurc": areas, "assessor": assessor_scenario(seed)}


def scaling_recovery(seed: int = 0, trials: int = SCALING_TRIALS) -> dict:
    """Refit noisy power laws ``trials`` times; count exponent recoveries within tolerance."""
    xs = np.logspace(0, 6, SCALING_POINTS)
    exps = []
    for k in range(trials):
        rng = ecosim.stream_rng(seed * 1_000_003 + k, 7)
        model = fit_power_law(power_law_points(SCALING_EXPONENT, SCALING_SCALE, xs, SCALING_NOISE, rng))
        exps.append(model.exponent)
    exps = np.array(exps)
    hits = int(np.sum(np.abs(exps - SCALING_EXPONENT) <= SCALING_TOL))
    return {"trials": trials, "within_tolerance": hits, "exponent_mean": float(exps.mean()),
            "exponent_std": float(exps.std())}


def suite_scaling(out: Path, seed: int) -> dict:
    digest, meta = _stamp("scaling", seed)
    recovery = scaling_recovery(seed)
    xs = np.logspace(0, 6, SCALING_POINTS)
    pts = power_law_points(SCALING_EXPONENT, SCALING_SCALE, xs, SCALING_NOISE, ecosim.stream_rng(seed, 8))
    model = fit_power_law(pts)
    ext = predict_hypothetical(model, 1e6)
    write_json({**model.to_dict(), "seed": seed, "config_hash": digest}, out / "scaling_model.json")
    grid = np.logspace(0, 9, 60)
    svg = plots.line_chart(
        [("observed", [(float(np.log10(x)), float(np.log10(y))) for x, y in pts]),
         ("fit", [(float(np.log10(x)), float(np.log10(model(x)))) for x in grid])],
        "Power-law fit (log10 axes)", "log10 x", "log10 y", comment=stamp_line(seed, digest), markers=False)
    _write_text(out / "scaling_fit.svg", svg)
    return {**meta, "recovery": recovery, "model": model.to_dict(),
            "hypothetical_x": 1e6, "hypothetical": ext._asdict()}


_RUNNERS = {"fig1": suite_fig1, "coin": suite_coin, "ladder": suite_ladder,
            "tradeoff": suite_tradeoff, "scaling": suite_scaling}


def scenario_suite(name: str, out_dir: str | os.PathLike, seed: int = 0) -> dict:
    """Run suite ``name`` into ``out_dir``; writes ``summary.json`` and ``index.json``."""
    if name not in _RUNNERS:
        raise ValueError(f"unknown suite {name!r}; expected one of {SUITES}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = _RUNNERS[name](out, seed)
    write_json(summary, out / "summary.json")
    files = sorted(p.name for p in out.iterdir() if p.is_file() and p.name != "index.json")
    write_json({"suite": name, "seed": seed, "config_hash": summary["config_hash"], "files": files},
               out / "index.json")
    return summary
