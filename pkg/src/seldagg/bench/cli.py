"""Command-line entry point: ``seldagg <verb> [options]``.

Exit codes: 0 success, 1 validation failure, 2 runtime or numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import jsonschema

from ..aggregation import TopologyError, dump_topology, load_topology, make_topology, topology_to_dict, validate_topology
from ..autograd import CheckpointError, DimensionError
from ..metrics import MetricsReport, UndefinedMetricError, evaluate_tracks
from ..model import ModelConfig
from ..scene import CorruptDatasetError, GenerateConfig, generate_dataset
from ..track import read_track
from .compare import compare, comparison_csv, comparison_json, format_table
from .config import ExperimentConfig, load_config
from .gradcheck import run_gradcheck
from .train import NumericError, evaluate, train

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2


class ValidationFailure(Exception):
    """A check ran to completion and reported a failure."""


def _emit(doc, out: str | None, name: str) -> None:
    text = json.dumps(doc, indent=2) + "\n"
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    if path.suffix != ".json":
        path.mkdir(parents=True, exist_ok=True)
        path = path / name
    else:
        path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    print(f"wrote {path}", file=sys.stderr)


def _read_json(path: str) -> dict:
    return json.loads(Path(path).read_text())


# -- verbs -------------------------------------------------------------------------


def cmd_generate(args) -> int:
    cfg = GenerateConfig.from_dict(_read_json(args.config)) if args.config else GenerateConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    out = generate_dataset(cfg, args.out, args.wav)
    print(f"dataset written to {out}", file=sys.stderr)
    return EXIT_OK


def _experiment(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_seed(args.seed)
    if getattr(args, "aggregator", None):
        cfg = cfg.with_aggregator(args.aggregator)
    if getattr(args, "dataset", None):
        cfg.dataset = args.dataset
    return cfg


def cmd_train(args) -> int:
    cfg = _experiment(args)
    result = train(cfg, args.out, verbose=not args.quiet)
    summary = {
        "best_epoch": result.log.best_epoch,
        "best_seld": result.log.best_seld,
        "initial_seld": result.log.initial["seld"],
        "epochs_run": len(result.log.epochs),
        "stopped_early": result.log.stopped_early,
        "checkpoint": str(result.checkpoint),
    }
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def cmd_evaluate(args) -> int:
    if args.gt or args.pred:
        if not (args.gt and args.pred):
            raise ValueError("--gt and --pred must be given together")
        gt = read_track(args.gt)
        pred = read_track(args.pred, frames=gt.num_frames, classes=gt.num_classes)
        report = evaluate_tracks([gt], [pred], args.frames_per_segment)
    else:
        if not (args.config and args.checkpoint):
            raise ValueError("evaluate needs --config and --checkpoint, or --gt and --pred")
        report = evaluate(args.checkpoint, _experiment(args), split=args.split)
    _emit(report.to_dict(), args.out, "report.json")
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    model_cfg = None
    if args.config:
        doc = _read_json(args.config)
        model_cfg = ExperimentConfig.from_dict(doc).model if "model" in doc else ModelConfig.from_dict(doc)
    report = run_gradcheck(model_cfg, args.tolerance, args.seed or 0, args.corrupt)
    _emit(report, args.out, "gradcheck.json")
    for name, layer in {**report["layers"], "model": report["model"]}.items():
        status = "PASS" if layer["passed"] else "FAIL"
        print(f"{status}  {name:<24} max rel err {layer['max_error']:.2e}", file=sys.stderr)
    if not report["passed"]:
        raise ValidationFailure("gradient check failed")
    return EXIT_OK


def _scales_from(args):
    model = ModelConfig()
    if args.config:
        doc = _read_json(args.config)
        model = ExperimentConfig.from_dict(doc).model if "model" in doc else ModelConfig.from_dict(doc)
    return model.backbone_scales()


def cmd_topo(args) -> int:
    if args.action == "dump":
        spec = make_topology(args.target, _scales_from(args))
        if args.out:
            dump_topology(spec, args.out)
            print(f"wrote {args.out}", file=sys.stderr)
        else:
            sys.stdout.write(json.dumps(topology_to_dict(spec), indent=2) + "\n")
        return EXIT_OK
    spec = load_topology(args.target)
    violations = validate_topology(spec, max_level_jump=args.max_level_jump)
    doc = {"name": spec.name, "nodes": len(spec.nodes), "valid": not violations, "violations": [vars(v) for v in violations]}
    _emit(doc, args.out, "topology_check.json")
    if violations:
        raise ValidationFailure(f"{len(violations)} topology violation(s)")
    return EXIT_OK


def _load_report(ref) -> MetricsReport:
    return MetricsReport.from_dict(ref if isinstance(ref, dict) else _read_json(ref))


def cmd_compare(args) -> int:
    if args.config:
        doc = _read_json(args.config)
        if "control" not in doc:
            raise ValueError("compare config needs a 'control' report")
        control = _load_report(doc["control"])
        variants = [(v["name"], _load_report(v["report"]), int(v["nodes"])) for v in doc.get("variants", [])]
        rounded = args.rounded or bool(doc.get("rounded", False))
    else:
        if not args.control:
            raise ValueError("compare needs --control (or --config)")
        control = _load_report(args.control)
        variants = []
        for spec in args.variant or []:
            name, rest = spec.split("=", 1)
            path, nodes = rest.rsplit(":", 1)
            variants.append((name, _load_report(path), int(nodes)))
        rounded = args.rounded
    rows = compare(control, variants, rounded=rounded)
    print(format_table(rows), file=sys.stderr)
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "comparison.json").write_text(json.dumps(comparison_json(rows), indent=2) + "\n")
        (out / "comparison.csv").write_text(comparison_csv(rows))
    else:
        print(json.dumps(comparison_json(rows), indent=2))
    return EXIT_OK


# -- parser ------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="seldagg", description="SELD networks with feature aggregators.")
    sub = p.add_subparsers(dest="verb", required=True)

    g = sub.add_parser("generate", help="synthesize a labelled feature dataset")
    g.add_argument("--config", help="generate-config JSON (defaults if omitted)")
    g.add_argument("--out", required=True, help="dataset directory")
    g.add_argument("--seed", type=int)
    g.add_argument("--wav", help="also export 16-bit WAV clips to this directory")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train with early stopping on held-out SELD")
    t.add_argument("--config", required=True)
    t.add_argument("--out", required=True, help="run directory for checkpoint.json and training_log.json")
    t.add_argument("--seed", type=int)
    t.add_argument("--aggregator", help="override model.aggregator")
    t.add_argument("--dataset", help="override the dataset path")
    t.add_argument("--quiet", action="store_true")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("evaluate", help="score a checkpoint, or a prediction CSV against ground truth")
    e.add_argument("--config")
    e.add_argument("--checkpoint")
    e.add_argument("--split", default="test")
    e.add_argument("--dataset")
    e.add_argument("--seed", type=int)
    e.add_argument("--gt", help="ground-truth track CSV")
    e.add_argument("--pred", help="predicted track CSV")
    e.add_argument("--frames-per-segment", type=int, default=62)
    e.add_argument("--out")
    e.set_defaults(func=cmd_evaluate)

    c = sub.add_parser("gradcheck", help="finite-difference check of every layer and the full model")
    c.add_argument("--config", help="experiment or model config; aggregator etc. are taken from it")
    c.add_argument("--tolerance", type=float, default=1e-3)
    c.add_argument("--seed", type=int)
    c.add_argument("--corrupt", type=float, help="scale taped gradients to simulate a broken backward pass")
    c.add_argument("--out")
    c.set_defaults(func=cmd_gradcheck)

    o = sub.add_parser("topo", help="dump or validate aggregation topologies")
    o.add_argument("action", choices=["dump", "check"])
    o.add_argument("target", help="aggregator kind for dump (panet, bifpn, sen1, ...), topology JSON for check")
    o.add_argument("--config", help="model or experiment config providing backbone scales")
    o.add_argument("--max-level-jump", type=int)
    o.add_argument("--out")
    o.set_defaults(func=cmd_topo)

    m = sub.add_parser("compare", help="overall and per-node improvement of variants over a control")
    m.add_argument("--config", help="JSON with 'control' and 'variants' [{name, report, nodes}]")
    m.add_argument("--control", help="control MetricsReport JSON")
    m.add_argument("--variant", action="append", help="NAME=REPORT.json:NODES (repeatable)")
    m.add_argument("--rounded", action="store_true", help="round reports to reporting precision first")
    m.add_argument("--out", help="directory for comparison.json and comparison.csv")
    m.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValidationFailure, TopologyError, jsonschema.ValidationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (NumericError, CorruptDatasetError, CheckpointError, DimensionError, UndefinedMetricError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
