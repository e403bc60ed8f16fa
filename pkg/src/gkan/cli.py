"""Command-line entry point: ``gkan {train,table,sweep,gradcheck,synth}``."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .experiments import (
    SWEEP_VALUES,
    ExperimentSpec,
    SpecError,
    load_spec,
    run_experiment,
    run_sweep,
    run_table,
)
from .graph import export_graph, generate_synthetic
from .models import ModelConfig
from .training import grad_check

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _err(msg: str) -> None:
    print(f"gkan: error: {msg}", file=sys.stderr)


def _apply_overrides(spec: ExperimentSpec, args) -> ExperimentSpec:
    if getattr(args, "features", None) is not None:
        spec = replace(spec, dataset=replace(spec.dataset, features=args.features))
    if getattr(args, "data_dir", None) is not None:
        spec = replace(spec, dataset=replace(spec.dataset, data_dir=str(args.data_dir)))
    if getattr(args, "epochs", None) is not None:
        spec = replace(spec, train=replace(spec.train, epochs=args.epochs))
    if getattr(args, "no_timing", False):
        spec = replace(spec, train=replace(spec.train, record_time=False))
    repeats = args.repeats if args.repeats is not None else spec.repeats
    if args.seed is not None or args.repeats is not None:
        first = args.seed if args.seed is not None else spec.seeds[0]
        spec = replace(spec, repeats=repeats, seeds=tuple(range(first, first + repeats)))
    if args.out is not None:
        spec = replace(spec, output_dir=str(args.out))
    return spec


def _base_spec(args) -> ExperimentSpec:
    spec = load_spec(args.config) if args.config else ExperimentSpec()
    return _apply_overrides(spec, args)


def cmd_train(args) -> int:
    try:
        spec = _base_spec(args)
    except SpecError as exc:
        _err(str(exc))
        return EXIT_USAGE
    try:
        summary = run_experiment(spec, workers=args.jobs)
    except (FileNotFoundError, ValueError) as exc:
        _err(str(exc))
        return EXIT_FAIL
    print(f"model           {summary['model']}")
    print(f"parameters      {summary['num_parameters']:,d}")
    print(f"seeds           {summary['seeds']}")
    print(f"test accuracy   {summary['test_acc_mean']:.4f} +- {summary['test_acc_std']:.4f}")
    print(f"artifacts       {spec.output_dir}")
    return EXIT_OK


def cmd_table(args) -> int:
    try:
        spec = load_spec(args.config) if args.config else ExperimentSpec()
        if args.repeats is None and args.seed is None and not args.config:
            spec = replace(spec, repeats=5, seeds=(0, 1, 2, 3, 4))
        spec = _apply_overrides(spec, args)
    except SpecError as exc:
        _err(str(exc))
        return EXIT_USAGE
    out = Path(args.out or f"runs/table{args.table}")
    try:
        _, report = run_table(args.table, spec, out, workers=args.jobs)
    except FileNotFoundError as exc:
        _err(f"missing dataset: {exc}")
        return EXIT_FAIL
    print(report, end="")
    return EXIT_OK


def cmd_sweep(args) -> int:
    try:
        spec = _base_spec(args)
        values = args.values or list(SWEEP_VALUES[args.axis])
        out = Path(args.out or f"runs/sweep_{args.axis}")
        result = run_sweep(args.axis, values, spec, out, workers=args.jobs)
    except SpecError as exc:
        _err(str(exc))
        return EXIT_USAGE
    except FileNotFoundError as exc:
        _err(f"missing dataset: {exc}")
        return EXIT_FAIL
    print((out / f"sweep_{args.axis}.txt").read_text(), end="")
    print(f"best {args.axis}: {result.best_value}")
    return EXIT_OK


GRADCHECK_NODES = 8


def gradcheck_instance(seed: int = 0):
    return generate_synthetic(GRADCHECK_NODES, 2, 0.5, 0.1, 4, 1.0, seed)


def cmd_gradcheck(args) -> int:
    graph = gradcheck_instance(args.seed or 0)
    arch = args.arch.upper()
    spline = None if arch == "GCN" else (args.g, args.k)
    tol = args.tolerance if args.tolerance is not None else (1e-5 if arch == "GCN" else 1e-4)
    try:
        config = ModelConfig(arch, graph.num_features, args.h, graph.num_classes, spline=spline, seed=args.seed or 0)
    except ValueError as exc:
        _err(str(exc))
        return EXIT_USAGE
    report = grad_check(config, graph, tol)
    print(f"gradcheck {arch} k={args.k} g={args.g} h={args.h} on {GRADCHECK_NODES}-node synthetic graph")
    for line in report.lines():
        print("  " + line)
    return EXIT_OK if report.passed else EXIT_FAIL


def cmd_synth(args) -> int:
    try:
        graph = generate_synthetic(
            args.nodes, args.classes, args.p_in, args.p_out, args.dim, args.signal, args.seed or 0
        )
    except ValueError as exc:
        _err(str(exc))
        return EXIT_USAGE
    content, cites = export_graph(graph, args.out or "data/synthetic", args.name)
    print(f"wrote {content} and {cites} ({graph.num_nodes} nodes, {len(graph.edges)} edges)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="experiment spec (INI)")
    common.add_argument("--seed", type=int, help="first seed")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--features", type=int, help="use the first N feature columns")
    common.add_argument("--repeats", type=int, help="number of seeded runs")
    common.add_argument("--epochs", type=int, help="override the training epochs")
    common.add_argument("--data-dir", type=Path, help="directory holding cora.content / cora.cites")
    common.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    common.add_argument("--no-timing", action="store_true", help="write wall_s as 0 for byte-stable CSVs")

    p = argparse.ArgumentParser(prog="gkan", description="Graph KAN / GCN experiments")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("train", parents=[common], help="run one experiment spec")
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("table", parents=[common], help="reproduce published table 1 or 2 on Cora")
    s.add_argument("table", type=int, choices=(1, 2))
    s.set_defaults(func=cmd_table)

    s = sub.add_parser("sweep", parents=[common], help="vary one of g, k, h")
    s.add_argument("--axis", required=True, choices=("g", "k", "h"))
    s.add_argument("--values", type=int, nargs="+")
    s.set_defaults(func=cmd_sweep)

    s = sub.add_parser("gradcheck", parents=[common], help="finite-difference gradient check")
    s.add_argument("--arch", default="GKAN2", type=str.upper, choices=("GCN", "GKAN1", "GKAN2"))
    s.add_argument("-k", type=int, default=1)
    s.add_argument("-g", type=int, default=3)
    s.add_argument("--h", "--hidden", dest="h", type=int, default=4)
    s.add_argument("--tolerance", type=float)
    s.set_defaults(func=cmd_gradcheck)

    s = sub.add_parser("synth", parents=[common], help="write a synthetic SBM graph in Cora format")
    s.add_argument("--nodes", type=int, default=300)
    s.add_argument("--classes", type=int, default=3)
    s.add_argument("--p-in", type=float, default=0.1)
    s.add_argument("--p-out", type=float, default=0.01)
    s.add_argument("--dim", type=int, default=8)
    s.add_argument("--signal", type=float, default=1.0)
    s.add_argument("--name", default="synthetic")
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
