"""Seeded synthetic ecosystems.

Each generator draws from its own RNG stream, derived from the user seed
and a fixed per-generator stream id through one SplitMix64 mixing step
(increment ``0x9E3779B97F4A7C15``).  Same seed and arguments give a
bit-identical history.
"""

from __future__ import annotations

import functools
import math
from dataclasses import asdict, dataclass
from typing import Any, Mapping

import numpy as np

from .ecosystem import EcosystemHistory, FeatureVector, InteractionRecord
from .errors import ValidationError

_MASK64 = (1 << 64) - 1
SPLITMIX_GAMMA = 0x9E3779B97F4A7C15

# per-generator stream ids
STREAM_GRID = 1
STREAM_COIN = 2
STREAM_AGENT = 3
STREAM_DRIFT = 4
STREAM_ORACLE = 5
STREAM_GRID_E = 6

GRID_SYSTEMS = ("A", "B", "C", "D", "E", "F")
GRID_LEVELS = (0, 1, 2, 3)
GRID_MEAN = 0.625
# seed of the fixed cell layout of system E (independent of the user seed)
GRID_E_LAYOUT_SEED = 2024
GRID_E_MIN_BRIER = 0.15


def splitmix64(x: int) -> int:
    z = (x + SPLITMIX_GAMMA) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def stream_rng(seed: int, stream: int) -> np.random.Generator:
    """Independent generator for ``stream`` derived from ``seed``."""
    return np.random.default_rng(splitmix64((int(seed) & _MASK64) ^ splitmix64(stream)))


def _record(t, instance_id, system_id, user_id, validity, instance=(), system=(), output=(), conf=None):
    return InteractionRecord(
        t=t, instance_id=instance_id, system_id=system_id, user_id=user_id,
        instance_features=FeatureVector(tuple(instance)), system_features=FeatureVector(tuple(system)),
        output_features=FeatureVector(tuple(output)), validity=float(validity), self_confidence=conf)


# ---------------------------------------------------------------------------
# Fig.-1 style grid


@dataclass(frozen=True)
class GridEcosystemSpec:
    system_id: str = "A"
    episodes_per_cell: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.system_id not in GRID_SYSTEMS:
            raise ValueError(f"unknown grid system {self.system_id!r}; expected one of {GRID_SYSTEMS}")
        if self.episodes_per_cell < 1:
            raise ValueError("episodes_per_cell must be positive")


def _grid_design():
    """All 16 cells as (w, f) rows, w-major order."""
    return [(w, f) for w in GRID_LEVELS for f in GRID_LEVELS]


def _min_logistic_brier(cells: np.ndarray) -> float:
    """Lowest training Brier any logistic fit on (w, f) reaches on a 16-cell table."""
    from .ecosystem import Dataset
    from .predictors import fit_logistic

    design = np.array(_grid_design(), dtype=float)
    ds = Dataset(names=("i_windingness", "i_fogginess"), X=design, v=cells.astype(float),
                 keys=tuple(str(k) for k in range(16)), t=np.zeros(16, dtype=np.int64),
                 system_ids=("E",) * 16, instance_ids=tuple(str(k) for k in range(16)),
                 user_ids=("u0",) * 16, self_confidence=np.full(16, np.nan), validity_kind="binary")
    best = 1.0
    for subset in ((), ("i_windingness",), ("i_fogginess",), ("i_windingness", "i_fogginess")):
        pred = fit_logistic(ds, subset)
        best = min(best, float(np.mean((pred.predict(ds) - ds.v) ** 2)))
    return best


@functools.lru_cache(maxsize=None)
def grid_e_cells() -> tuple[int, ...]:
    """Fixed pseudo-random 10-of-16 valid cells for system E.

    Layouts are redrawn until no logistic model on (w, f) gets training
    Brier below ``GRID_E_MIN_BRIER``.
    """
    rng = stream_rng(GRID_E_LAYOUT_SEED, STREAM_GRID_E)
    for _ in range(10_000):
        cells = np.zeros(16, dtype=int)
        cells[rng.choice(16, size=10, replace=False)] = 1
        if _min_logistic_brier(cells) >= GRID_E_MIN_BRIER:
            return tuple(int(c) for c in cells)
    raise RuntimeError("no admissible layout for grid system E")  # pragma: no cover


def grid_cell_validity(system_id: str, w: int, f: int) -> float | None:
    """Deterministic validity of a cell, or ``None`` for the stochastic system F."""
    if system_id == "A":
        return (1.0, 1.0, 0.5, 0.0)[w]
    if system_id == "B":
        return (1.0, 1.0, 0.5, 0.0)[f]
    if system_id == "C":
        return 1.0 if w + f <= 3 else 0.0
    if system_id == "D":
        return 1.0 if abs(w - f) <= 1 else 0.0
    if system_id == "E":
        return float(grid_e_cells()[w * 4 + f])
    if system_id == "F":
        return None
    raise ValueError(f"unknown grid system {system_id!r}")


def grid_ecosystem(spec: GridEcosystemSpec) -> EcosystemHistory:
    """Six-system driving grid over windingness and fogginess.

    Each episode ``e`` visits all 16 cells at timestep ``e``.  Systems A-E
    have deterministic cell tables with mean exactly 0.625; F draws every
    validity from Bernoulli(0.625) regardless of the cell.
    """
    rng = stream_rng(spec.seed, STREAM_GRID)
    sid = spec.system_id
    onehot = tuple((f"s_id_{s}", 1.0 if s == sid else 0.0) for s in GRID_SYSTEMS)
    cells = _grid_design()
    if sid != "F":
        table = [grid_cell_validity(sid, w, f) for w, f in cells]
        if sum(table) / 16 != GRID_MEAN:
            raise ValidationError(f"grid system {sid} mean {sum(table) / 16} != {GRID_MEAN}")
    records = []
    for e in range(spec.episodes_per_cell):
        draws = rng.random(16) < GRID_MEAN if sid == "F" else None
        for k, (w, f) in enumerate(cells):
            v = float(draws[k]) if draws is not None else table[k]
            records.append(_record(
                e, f"w{w}f{f}e{e}", sid, "u0", v,
                instance=(("i_windingness", float(w)), ("i_fogginess", float(f))), system=onehot))
    kind = "graded" if sid in ("A", "B") else "binary"
    return EcosystemHistory(tuple(records), name=f"grid_{sid}", validity_kind=kind)


def grid_oracle_predictions(history: EcosystemHistory) -> dict[str, float]:
    """True per-record success probability of a grid history (0.625 for F)."""
    out = {}
    for rec in history:
        w = int(rec.instance_features.get("i_windingness"))
        f = int(rec.instance_features.get("i_fogginess"))
        cell = grid_cell_validity(rec.system_id, w, f)
        out[rec.key] = GRID_MEAN if cell is None else cell
    return out


# ---------------------------------------------------------------------------
# biased coin


def coin_ecosystem(q: float, n: int, seed: int = 0) -> EcosystemHistory:
    """``n`` flips of a coin landing valid with probability ``q``."""
    if not (0.0 <= q <= 1.0):
        raise ValueError(f"q must lie in [0, 1], got {q}")
    if n < 1:
        raise ValueError("n must be at least 1")
    draws = stream_rng(seed, STREAM_COIN).random(n) < q
    dummy = (("i_dummy", 1.0),)
    records = tuple(_record(k, f"flip{k}", "coin", "u0", float(draws[k]), instance=dummy) for k in range(n))
    return EcosystemHistory(records, name="coin", validity_kind="binary")


# ---------------------------------------------------------------------------
# agents x tasks


AGENT_RELEVANT_FEATURES = ("i_reward_size", "i_distance", "i_y_position")
AGENT_DECOY_FEATURES = ("i_decoy_a", "i_decoy_b")


def task_demand(reward_size, distance, y_position):
    """Fixed linear demand of a navigation task (higher is harder)."""
    return 0.8 * np.asarray(distance) - 1.0 * np.asarray(reward_size) + 2.0 * np.asarray(y_position) - 3.0


def agent_skills(n_agents: int, skill_spread: float, rng: np.random.Generator) -> np.ndarray:
    skills = np.linspace(-skill_spread, skill_spread, n_agents)
    return skills[rng.permutation(n_agents)]


def _agent_task_draws(n_agents, n_tasks, seed, skill_spread):
    rng = stream_rng(seed, STREAM_AGENT)
    tasks = {
        "i_reward_size": rng.uniform(0.5, 5.0, n_tasks),
        "i_distance": rng.uniform(0.0, 10.0, n_tasks),
        "i_y_position": rng.uniform(0.0, 1.0, n_tasks),
        "i_decoy_a": rng.normal(0.0, 1.0, n_tasks),
        "i_decoy_b": rng.uniform(0.0, 1.0, n_tasks),
    }
    skills = agent_skills(n_agents, skill_spread, rng)
    demand = task_demand(tasks["i_reward_size"], tasks["i_distance"], tasks["i_y_position"])
    margin = skills[None, :] - demand[:, None]
    return tasks, margin, rng


def agent_task_ecosystem(n_agents: int, n_tasks: int, seed: int = 0, skill_spread: float = 1.5,
                         confidence: str | None = None) -> EcosystemHistory:
    """Every agent attempts every task once.

    Tasks carry three relevant features (reward size, distance, y position)
    and two decoys.  Agent ``a`` solves task ``k`` with probability
    ``sigmoid(skill[a] - demand[k])``.  ``confidence`` optionally logs a
    self-estimate: ``"calibrated"`` records the true probability,
    ``"overconfident"`` records ``sigmoid(2 * (skill - demand) + 1)``.
    """
    if n_agents < 2 or n_tasks < 10:
        raise ValueError("need at least 2 agents and 10 tasks")
    if confidence not in (None, "calibrated", "overconfident"):
        raise ValueError(f"unknown confidence mode {confidence!r}")
    tasks, margin, rng = _agent_task_draws(n_agents, n_tasks, seed, skill_spread)
    prob = 1.0 / (1.0 + np.exp(-margin))
    success = rng.random((n_tasks, n_agents)) < prob
    if confidence == "overconfident":
        conf = 1.0 / (1.0 + np.exp(-(2.0 * margin + 1.0)))
    elif confidence == "calibrated":
        conf = prob
    else:
        conf = None

    ids = [f"agent{a:02d}" for a in range(n_agents)]
    onehots = [tuple((f"s_agent_{other}", 1.0 if other == sid else 0.0) for other in ids) for sid in ids]
    names = ("i_reward_size", "i_distance", "i_y_position", "i_decoy_a", "i_decoy_b")
    records = []
    for k in range(n_tasks):
        inst = tuple((n, float(tasks[n][k])) for n in names)
        for a, sid in enumerate(ids):
            records.append(_record(k, f"task{k:05d}", sid, "u0", float(success[k, a]), instance=inst,
                                   system=onehots[a], conf=None if conf is None else float(conf[k, a])))
    return EcosystemHistory(tuple(records), name="agent_tasks", validity_kind="binary")


def agent_task_probabilities(n_agents: int, n_tasks: int, seed: int = 0,
                             skill_spread: float = 1.5) -> dict[str, float]:
    """True success probability per record key of the matching :func:`agent_task_ecosystem`."""
    _, margin, _ = _agent_task_draws(n_agents, n_tasks, seed, skill_spread)
    prob = 1.0 / (1.0 + np.exp(-margin))
    return {f"{k}:task{k:05d}:agent{a:02d}:u0": float(prob[k, a])
            for k in range(n_tasks) for a in range(n_agents)}


# ---------------------------------------------------------------------------
# history-dependent requests


@dataclass(frozen=True)
class DriftEcosystemSpec:
    """A user who asks harder after successes and easier after failures.

    ``noise`` is the standard deviation of the observation noise on the
    recorded difficulty feature; ``sharpness`` scales the logit of success.
    """

    n_steps: int = 1000
    success_boost: float = 0.1
    failure_drop: float = 0.1
    base_difficulty: float = 0.5
    noise: float = 0.3
    capability: float = 0.5
    sharpness: float = 8.0
    seed: int = 0

    def __post_init__(self):
        if self.n_steps < 0:
            raise ValueError("n_steps must be non-negative")
        if self.success_boost < 0 or self.failure_drop < 0 or self.noise < 0:
            raise ValueError("boost, drop and noise must be non-negative")
        if not (0.0 <= self.base_difficulty <= 1.0):
            raise ValueError("base_difficulty must lie in [0, 1]")


def drift_ecosystem(spec: DriftEcosystemSpec) -> EcosystemHistory:
    """Sequential requests whose difficulty follows the user's past outcomes.

    Step ``t`` succeeds with probability
    ``sigmoid(sharpness * (capability - d_t))``; afterwards ``d`` rises by
    ``success_boost`` or falls by ``failure_drop`` and is clamped to [0, 1].
    The record exposes ``i_difficulty = d_t + noise * N(0, 1)``.
    """
    rng = stream_rng(spec.seed, STREAM_DRIFT)
    d = spec.base_difficulty
    records = []
    for t in range(spec.n_steps):
        p = 1.0 / (1.0 + math.exp(-spec.sharpness * (spec.capability - d)))
        obs = d + spec.noise * float(rng.normal())
        success = float(rng.random()) < p
        records.append(_record(t, f"req{t:06d}", "sys0", "user0", float(success),
                               instance=(("i_difficulty", obs),)))
        d = min(1.0, d + spec.success_boost) if success else max(0.0, d - spec.failure_drop)
    return EcosystemHistory(tuple(records), name="drift", validity_kind="binary")


# ---------------------------------------------------------------------------
# output leaks validity


def output_oracle_ecosystem(n: int, leak: float, seed: int = 0) -> EcosystemHistory:
    """Validity ~ Bernoulli(0.5); ``o_flag`` equals it with probability ``leak``, else its negation."""
    if not (0.0 <= leak <= 1.0):
        raise ValueError(f"leak must lie in [0, 1], got {leak}")
    if n < 0:
        raise ValueError("n must be non-negative")
    rng = stream_rng(seed, STREAM_ORACLE)
    v = rng.random(n) < 0.5
    keep = rng.random(n) < leak
    flag = np.where(keep, v, ~v)
    records = tuple(
        _record(k, f"run{k}", "sys0", "u0", float(v[k]), instance=(("i_dummy", 1.0),),
                output=(("o_flag", float(flag[k])),))
        for k in range(n))
    return EcosystemHistory(records, name="output_oracle", validity_kind="binary")


# ---------------------------------------------------------------------------
# config entry point

GENERATORS = ("grid", "coin", "agent_task", "drift", "output_oracle")


def generate(config: Mapping[str, Any], seed: int | None = None) -> EcosystemHistory:
    """Run the generator described by a JSON-style config.

    ``{"generator": "grid", "system_id": "A", "episodes_per_cell": 4}``;
    ``seed`` overrides the config's own ``seed``.
    """
    cfg = dict(config)
    name = cfg.pop("generator", None)
    if seed is None:
        seed = int(cfg.pop("seed", 0))
    else:
        cfg.pop("seed", None)
    try:
        if name == "grid":
            return grid_ecosystem(GridEcosystemSpec(seed=seed, **cfg))
        if name == "coin":
            return coin_ecosystem(float(cfg.get("q", 0.7)), int(cfg.get("n", 1000)), seed)
        if name == "agent_task":
            return agent_task_ecosystem(seed=seed, **cfg)
        if name == "drift":
            return drift_ecosystem(DriftEcosystemSpec(seed=seed, **cfg))
        if name == "output_oracle":
            return output_oracle_ecosystem(int(cfg.get("n", 1000)), float(cfg.get("leak", 1.0)), seed)
    except TypeError as exc:
        raise ValueError(f"bad {name} generator config: {exc}") from None
    raise ValueError(f"unknown generator {name!r}; expected one of {GENERATORS}")


def spec_dict(spec) -> dict:
    return asdict(spec)
