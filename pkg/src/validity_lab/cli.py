"""``validity-lab`` command line.

Every command takes an optional JSON ``--config``; ``--seed``, ``--rule``
and ``--input`` override the matching config keys.  Relative paths inside a
config resolve against the config file's directory.  Each run writes its
artifacts under ``--out`` together with ``run.json`` (the effective config,
its hash and the seed).

Exit status: 0 success, 1 invalid input or configuration, 2 I/O failure.
"""

from __future__ import annotations

import argparse
import json
import shutil
import sys
from pathlib import Path

from . import ecosim, plots
from .ecosystem import Dataset, load_history, make_history, write_history_csv
from .envelope import (
    EnvelopeSpec, ParetoPoint, aurc, compute_envelope, mark_dominance, rejection_curve, write_curve_csv,
    write_frontier_csv,
)
from .predictors import FamilySpec, load_predictor, predictor_from_dict, save_predictor
from .provenance import config_hash, stamp_line, write_json
from .scaling import fit_power_law, predict_hypothetical, read_points_csv
from .scoring import expected_validity
from .suites import SUITES, scenario_suite
from .unpredictability import QProtocol, estimate_q, write_candidates_csv

COMMANDS = ("simulate", "fit", "assess", "envelope", "pareto", "scaling", "report", "suite")


class _Run:
    """Effective configuration plus provenance for one command invocation."""

    def __init__(self, command: str, args: argparse.Namespace):
        self.command = command
        self.base = Path(".")
        cfg: dict = {}
        if args.config:
            self.base = Path(args.config).parent
            with open(args.config, encoding="utf-8") as fh:
                try:
                    cfg = json.load(fh)
                except json.JSONDecodeError as exc:
                    raise ValueError(f"{args.config}: invalid JSON: {exc}") from None
            if not isinstance(cfg, dict):
                raise ValueError(f"{args.config}: config must be a JSON object")
        if args.seed is not None:
            cfg["seed"] = args.seed
        cfg.setdefault("seed", 0)
        if args.rule is not None:
            cfg["rule"] = args.rule
        if getattr(args, "input", None):
            cfg["input"] = [str(Path(p).resolve()) for p in args.input] if command == "report" else \
                str(Path(args.input[0]).resolve())
        self.config = cfg
        self.seed = int(cfg["seed"])
        self.digest = config_hash({"command": command, **cfg})
        self.out = Path(args.out)

    def path(self, value: str) -> Path:
        p = Path(value)
        return p if p.is_absolute() else self.base / p

    def require(self, key: str):
        if key not in self.config:
            raise ValueError(f"{self.command}: config is missing {key!r}")
        return self.config[key]

    @property
    def stamp(self) -> str:
        return stamp_line(self.seed, self.digest)

    @property
    def provenance(self) -> dict:
        return {"seed": self.seed, "config_hash": self.digest}

    def finish(self, outputs: list[str]) -> None:
        write_json({"command": self.command, "config": self.config, **self.provenance,
                    "outputs": sorted(outputs)}, self.out / "run.json")


def _history(run: _Run):
    return load_history(run.path(run.require("input")))


def _protocol(run: _Run) -> QProtocol:
    proto = dict(run.config.get("protocol", {}))
    proto.setdefault("seed", run.seed)
    proto.setdefault("rule", run.config.get("rule", "brier"))
    return QProtocol.from_dict(proto)


def _family(run: _Run) -> FamilySpec:
    return FamilySpec.from_dict(run.config.get("family", {"kind": "constant"}))


def cmd_simulate(run: _Run) -> list[str]:
    generator = run.require("generator")
    if isinstance(generator, str):
        generator = {k: v for k, v in run.config.items() if k not in ("seed", "rule", "input")}
    history = ecosim.generate(generator, seed=run.seed)
    write_history_csv(history, run.out / "interactions.csv", comments=[run.stamp])
    return ["interactions.csv"]


def cmd_assess(run: _Run) -> list[str]:
    report = estimate_q(_history(run), _family(run), _protocol(run))
    write_json({**report.to_dict(), **run.provenance}, run.out / "qreport.json")
    write_candidates_csv(report, run.out / "candidates.csv", comments=[run.stamp])
    return ["qreport.json", "candidates.csv"]


def cmd_fit(run: _Run) -> list[str]:
    report = estimate_q(_history(run), _family(run), _protocol(run))
    save_predictor(report.best_predictor, run.out / "predictor.json",
                   extra={**run.provenance, "candidate": report.best_candidate,
                          "validation_family": report.family.to_dict()})
    return ["predictor.json"]


def _predictor(run: _Run, history):
    if "predictor" in run.config:
        ref = run.config["predictor"]
        return predictor_from_dict(ref) if isinstance(ref, dict) else load_predictor(run.path(ref))
    return estimate_q(history, _family(run), _protocol(run)).best_predictor


def cmd_envelope(run: _Run) -> list[str]:
    history = _history(run)
    predictor = _predictor(run, history)
    env = dict(run.config.get("envelope", {}))
    sigma = env.get("sigma")
    spec = EnvelopeSpec(omega=float(env.get("omega", 0.0)),
                        sigma=float("inf") if sigma is None else float(sigma), tau=env.get("tau"))
    data = Dataset.from_history(history, mode=predictor.mode)
    report = compute_envelope(predictor, data, spec, run.config.get("rule", "brier"))
    curve = rejection_curve(predictor, data)
    write_json({**report.to_dict(), "aurc": aurc(curve), **run.provenance}, run.out / "envelope.json")
    write_curve_csv(curve, run.out / "rejection_curve.csv", comments=[run.stamp])
    svg = plots.line_chart([("predictor", curve.points())], "Accuracy-rejection curve", "rejection rate",
                           "accepted validity", xr=(0.0, 1.0), comment=run.stamp)
    (run.out / "rejection_curve.svg").write_text(svg, encoding="utf-8")
    return ["envelope.json", "rejection_curve.csv", "rejection_curve.svg"]


def cmd_pareto(run: _Run) -> list[str]:
    family, protocol = _family(run), _protocol(run)
    histories = []
    if "systems" in run.config:
        for entry in run.config["systems"]:
            histories.append((entry["system_id"], load_history(run.path(entry["input"]))))
    else:
        history = _history(run)
        by_system: dict[str, list] = {}
        for rec in history.records:
            by_system.setdefault(rec.system_id, []).append(rec)
        histories = [(sid, make_history(recs, name=sid)) for sid, recs in sorted(by_system.items())]
    points = mark_dominance([ParetoPoint(sid, expected_validity(h), estimate_q(h, family, protocol).q_value)
                             for sid, h in histories])
    write_frontier_csv(points, run.out / "frontier.csv", comments=[run.stamp])
    svg = plots.scatter_chart([(p.system_id, p.q, p.v, not p.dominated) for p in points],
                              "Validity vs unpredictability", f"Q ({protocol.rule.kind})", "expected validity",
                              comment=run.stamp)
    (run.out / "frontier.svg").write_text(svg, encoding="utf-8")
    return ["frontier.csv", "frontier.svg"]


def cmd_scaling(run: _Run) -> list[str]:
    points = read_points_csv(run.path(run.require("input")))
    model = fit_power_law(points)
    hypothetical = [predict_hypothetical(model, float(x))._asdict() | {"x": float(x)}
                    for x in run.config.get("hypothetical", [])]
    write_json({**model.to_dict(), "hypothetical": hypothetical, **run.provenance}, run.out / "scaling_model.json")
    xs = sorted(x for x, _ in points)
    xs_fit = sorted(set(xs) | {h["x"] for h in hypothetical})
    svg = plots.line_chart([("observed", sorted(points)), ("fit", [(x, float(model(x))) for x in xs_fit])],
                           "Power-law fit", "x", "y", comment=run.stamp, markers=True)
    (run.out / "scaling_fit.svg").write_text(svg, encoding="utf-8")
    return ["scaling_model.json", "scaling_fit.svg"]


def cmd_report(run: _Run) -> list[str]:
    sources = run.require("input")
    sources = [sources] if isinstance(sources, str) else sources
    copied = []
    for src in sources:
        src_path = run.path(src)
        if not src_path.exists():
            raise FileNotFoundError(f"report input not found: {src_path}")
        files = sorted(p for p in src_path.rglob("*") if p.is_file()) if src_path.is_dir() else [src_path]
        root = src_path if src_path.is_dir() else src_path.parent
        for f in files:
            rel = Path(src_path.name) / f.relative_to(root) if src_path.is_dir() else Path(f.name)
            dest = run.out / rel
            dest.parent.mkdir(parents=True, exist_ok=True)
            shutil.copyfile(f, dest)
            copied.append(rel.as_posix())
    write_json({"files": sorted(copied), **run.provenance}, run.out / "index.json")
    return sorted(copied) + ["index.json"]


_HANDLERS = {"simulate": cmd_simulate, "fit": cmd_fit, "assess": cmd_assess, "envelope": cmd_envelope,
             "pareto": cmd_pareto, "scaling": cmd_scaling, "report": cmd_report}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="validity-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        if name == "suite":
            p.add_argument("name", help=f"one of {', '.join(SUITES)}")
        else:
            p.add_argument("--config", help="JSON run configuration")
            p.add_argument("--rule", choices=("brier", "logloss"))
            p.add_argument("--input", nargs="+" if name == "report" else 1,
                           help="input file(s); overrides the config's 'input'")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", required=True, help="output directory")
    return parser


def run(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "suite":
            if args.name not in SUITES:
                raise ValueError(f"unknown suite {args.name!r}; expected one of {', '.join(SUITES)}")
            scenario_suite(args.name, args.out, 0 if args.seed is None else args.seed)
            return 0
        ctx = _Run(args.command, args)
        ctx.out.mkdir(parents=True, exist_ok=True)
        ctx.finish(_HANDLERS[args.command](ctx))
        return 0
    except OSError as exc:
        print(f"validity-lab {args.command}: I/O error: {exc}", file=sys.stderr)
        return 2
    except (ValueError, KeyError, TypeError) as exc:
        print(f"validity-lab {args.command}: error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
