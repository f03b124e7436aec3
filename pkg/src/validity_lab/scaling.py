"""Power-law fits ``y = scale * x**exponent`` and extrapolation to unbuilt systems."""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import asdict, dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np


@dataclass(frozen=True)
class ScalingLawModel:
    exponent: float
    scale: float
    residual_std: float
    n_points: int
    x_min: float
    x_max: float

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        if self.residual_std < 0:
            raise ValueError("residual_std must be non-negative")

    def __call__(self, x):
        return self.scale * np.power(x, self.exponent)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: dict) -> "ScalingLawModel":
        return cls(**{k: payload[k] for k in ("exponent", "scale", "residual_std", "n_points", "x_min", "x_max")})


class Extrapolation(NamedTuple):
    estimate: float
    lower: float
    upper: float
    extrapolated: bool


def fit_power_law(points: Iterable[tuple[float, float]]) -> ScalingLawModel:
    """Ordinary least squares of ``ln y`` on ``ln x``.

    ``residual_std`` is the population standard deviation of the log-space
    residuals.
    """
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
        raise ValueError("need at least two (x, y) points")
    x, y = pts[:, 0], pts[:, 1]
    if np.any(x <= 0) or np.any(y <= 0) or not np.all(np.isfinite(pts)):
        raise ValueError("power-law fitting needs strictly positive, finite x and y")
    if len(np.unique(x)) < 2:
        raise ValueError("power-law fitting needs at least two distinct x values")
    lx, ly = np.log(x), np.log(y)
    mx, my = lx.mean(), ly.mean()
    slope = float(np.sum((lx - mx) * (ly - my)) / np.sum((lx - mx) ** 2))
    intercept = float(my - slope * mx)
    resid = ly - (intercept + slope * lx)
    return ScalingLawModel(exponent=slope, scale=math.exp(intercept), residual_std=float(np.std(resid)),
                           n_points=len(x), x_min=float(x.min()), x_max=float(x.max()))


def predict_hypothetical(model: ScalingLawModel, x: float) -> Extrapolation:
    """Point estimate at ``x`` with the multiplicative band ``exp(+-2 * residual_std)``."""
    if not x > 0:
        raise ValueError(f"x must be positive, got {x}")
    est = model.scale * x**model.exponent
    width = math.exp(2.0 * model.residual_std)
    return Extrapolation(est, est / width, est * width, not (model.x_min <= x <= model.x_max))


def power_law_points(exponent: float, scale: float, xs: Sequence[float], log_noise: float = 0.0,
                     rng: np.random.Generator | None = None) -> list[tuple[float, float]]:
    """Points on ``scale * x**exponent`` with optional multiplicative log-normal noise."""
    xs = np.asarray(xs, dtype=float)
    ys = scale * xs**exponent
    if log_noise:
        ys = ys * np.exp(log_noise * rng.standard_normal(len(xs)))
    return [(float(a), float(b)) for a, b in zip(xs, ys)]


def read_points_csv(path: str | os.PathLike) -> list[tuple[float, float]]:
    """Read an ``x,y`` CSV (header required; ``#`` lines skipped)."""
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(line for line in fh if not line.lstrip().startswith("#")) if r]
    if not rows or [c.strip() for c in rows[0][:2]] != ["x", "y"]:
        raise ValueError(f"{path}: expected header 'x,y'")
    out = []
    for n, row in enumerate(rows[1:], start=2):
        try:
            out.append((float(row[0]), float(row[1])))
        except (ValueError, IndexError):
            raise ValueError(f"{path}: row {n}: cannot parse {row!r}") from None
    return out


def write_points_csv(points: Sequence[tuple[float, float]], path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["x", "y"])
        for x, y in points:
            writer.writerow([repr(float(x)), repr(float(y))])


def save_model(model: ScalingLawModel, path: str | os.PathLike, extra: dict | None = None) -> None:
    payload = model.to_dict()
    if extra:
        payload.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1, sort_keys=True)
        fh.write("\n")
