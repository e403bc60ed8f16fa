"""Experiment specs, repeated runs, table reproduction and hyperparameter sweeps.

An experiment spec is an INI file::

    [dataset]
    name = cora            ; or: synthetic
    data_dir = data/cora
    features = 100
    split = random         ; or: per_class
    num_train = 1000
    num_val = 200
    num_test = 300

    [model]
    architecture = GKAN2   ; GCN | GKAN1 | GKAN2
    hidden = 16
    g = 3
    k = 1

    [train]
    epochs = 300
    lr = 0.01

    [run]
    repeats = 3
    seeds = 0, 1, 2
    output_dir = runs/example

Every key is optional; the defaults are listed in ``DEFAULTS``.
"""

from __future__ import annotations

import configparser
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .graph import Graph, SplitSpec, find_cora, generate_synthetic, load_cora, normalize_adjacency
from .models import ModelConfig, build_model, count_parameters
from .training import TrainConfig, TrainRecord, read_csv, train

DEFAULTS = {
    "dataset": {
        "name": "cora",
        "data_dir": "data/cora",
        "features": "100",
        "split": "random",
        "num_train": "1000",
        "num_val": "200",
        "num_test": "300",
        "train_per_class": "20",
        "split_seed": "",
        "row_normalize": "false",
        "num_nodes": "300",
        "num_classes": "3",
        "p_in": "0.1",
        "p_out": "0.01",
        "dim": "8",
        "signal": "1.0",
        "graph_seed": "7",
    },
    "model": {
        "architecture": "GKAN2",
        "hidden": "16",
        "g": "3",
        "k": "1",
        "num_layers": "2",
        "dropout": "0.0",
        "domain_min": "-1.0",
        "domain_max": "1.0",
    },
    "train": {
        "optimizer": "adam",
        "lr": "0.01",
        "weight_decay": "5e-4",
        "epochs": "300",
        "grid_update_epochs": "",
        "record_every": "1",
        "record_time": "true",
    },
    "run": {"repeats": "1", "seed": "0", "seeds": "", "output_dir": "runs/experiment"},
}


class SpecError(ValueError):
    """Invalid or unreadable experiment spec."""


@dataclass(frozen=True)
class DatasetSpec:
    name: str = "cora"
    data_dir: str = "data/cora"
    features: int | None = 100
    split: SplitSpec = SplitSpec()
    split_seed: int | None = None
    row_normalize: bool = False
    num_nodes: int = 300
    num_classes: int = 3
    p_in: float = 0.1
    p_out: float = 0.01
    dim: int = 8
    signal: float = 1.0
    graph_seed: int = 7

    def describe(self) -> dict:
        if self.name == "synthetic":
            keys = ("name", "num_nodes", "num_classes", "p_in", "p_out", "dim", "signal", "graph_seed")
            return {k: getattr(self, k) for k in keys}
        return {
            "name": self.name,
            "features": self.features,
            "split": vars(self.split),
            "split_seed": self.split_seed,
            "row_normalize": self.row_normalize,
        }


@dataclass(frozen=True)
class ModelSpec:
    """Model settings that do not depend on the data (widths come from the graph)."""

    architecture: str = "GKAN2"
    hidden: int = 16
    g: int = 3
    k: int = 1
    num_layers: int = 2
    dropout: float = 0.0
    domain: tuple[float, float] = (-1.0, 1.0)

    def config(self, d_input: int, num_classes: int, seed: int) -> ModelConfig:
        spline = (self.g, self.k) if self.architecture != "GCN" else None
        return ModelConfig(
            self.architecture,
            d_input,
            self.hidden,
            num_classes,
            num_layers=self.num_layers,
            spline=spline,
            seed=seed,
            dropout=self.dropout,
            domain=self.domain,
        )

    def label(self) -> str:
        if self.architecture == "GCN":
            return f"GCN(h={self.hidden})"
        return f"{self.architecture}(k={self.k},g={self.g},h={self.hidden})"


@dataclass(frozen=True)
class ExperimentSpec:
    dataset: DatasetSpec = DatasetSpec()
    model: ModelSpec = ModelSpec()
    train: TrainConfig = TrainConfig()
    repeats: int = 1
    seeds: tuple[int, ...] = (0,)
    output_dir: str = "runs/experiment"

    def __post_init__(self):
        if self.repeats < 1:
            raise SpecError("repeats must be >= 1")
        if len(self.seeds) != self.repeats:
            raise SpecError(f"got {len(self.seeds)} seeds for {self.repeats} repeats")


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _ints(s: str) -> tuple[int, ...]:
    return tuple(int(v) for v in s.replace(",", " ").split())


def parse_spec(text: str) -> ExperimentSpec:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise SpecError(f"cannot parse spec: {exc}") from None
    unknown = set(cp.sections()) - set(DEFAULTS)
    if unknown:
        raise SpecError(f"unknown section(s): {sorted(unknown)}")
    merged = {}
    for section, defaults in DEFAULTS.items():
        values = dict(defaults)
        if cp.has_section(section):
            for key, val in cp.items(section):
                if key not in defaults:
                    raise SpecError(f"unknown key [{section}] {key}")
                values[key] = val
        merged[section] = values
    try:
        return _build_spec(merged)
    except SpecError:
        raise
    except (ValueError, TypeError) as exc:
        raise SpecError(str(exc)) from None


def _build_spec(m: dict) -> ExperimentSpec:
    ds, md, tr, rn = m["dataset"], m["model"], m["train"], m["run"]
    if ds["name"] not in ("cora", "synthetic"):
        raise SpecError(f"dataset name must be 'cora' or 'synthetic', got {ds['name']!r}")
    split = SplitSpec(
        ds["split"],
        int(ds["num_train"]),
        int(ds["num_val"]),
        int(ds["num_test"]),
        int(ds["train_per_class"]),
    )
    dataset = DatasetSpec(
        name=ds["name"],
        data_dir=ds["data_dir"],
        features=int(ds["features"]) if ds["features"].strip() else None,
        split=split,
        split_seed=int(ds["split_seed"]) if ds["split_seed"].strip() else None,
        row_normalize=_bool(ds["row_normalize"]),
        num_nodes=int(ds["num_nodes"]),
        num_classes=int(ds["num_classes"]),
        p_in=float(ds["p_in"]),
        p_out=float(ds["p_out"]),
        dim=int(ds["dim"]),
        signal=float(ds["signal"]),
        graph_seed=int(ds["graph_seed"]),
    )
    model = ModelSpec(
        architecture=md["architecture"].strip().upper(),
        hidden=int(md["hidden"]),
        g=int(md["g"]),
        k=int(md["k"]),
        num_layers=int(md["num_layers"]),
        dropout=float(md["dropout"]),
        domain=(float(md["domain_min"]), float(md["domain_max"])),
    )
    # validate the model settings against a dummy shape now rather than mid-run
    model.config(1, 1, 0)
    train_cfg = TrainConfig(
        optimizer=tr["optimizer"].strip().lower(),
        learning_rate=float(tr["lr"]),
        weight_decay=float(tr["weight_decay"]),
        epochs=int(tr["epochs"]),
        grid_update_epochs=_ints(tr["grid_update_epochs"]),
        record_every=int(tr["record_every"]),
        record_time=_bool(tr["record_time"]),
    )
    repeats = int(rn["repeats"])
    seeds = _ints(rn["seeds"]) or tuple(range(int(rn["seed"]), int(rn["seed"]) + repeats))
    return ExperimentSpec(dataset, model, train_cfg, repeats, seeds, rn["output_dir"])


def load_spec(path) -> ExperimentSpec:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise SpecError(f"cannot read spec {path}: {exc}") from None
    return parse_spec(text)


# --- running -----------------------------------------------------------------------


def load_dataset(ds: DatasetSpec, seed: int) -> Graph:
    if ds.name == "synthetic":
        return generate_synthetic(
            ds.num_nodes, ds.num_classes, ds.p_in, ds.p_out, ds.dim, ds.signal, ds.graph_seed
        )
    content, cites = find_cora(ds.data_dir)
    split_seed = seed if ds.split_seed is None else ds.split_seed
    return load_cora(
        content, cites, ds.features, ds.split, split_seed, row_normalize=ds.row_normalize
    )


def run_single(spec: ExperimentSpec, seed: int) -> TrainRecord:
    graph = load_dataset(spec.dataset, seed)
    adj = normalize_adjacency(graph)
    model = build_model(spec.model.config(graph.num_features, graph.num_classes, seed))
    return train(model, graph, adj, replace(spec.train, seed=seed))


def _run_job(args):
    spec, seed = args
    return run_single(spec, seed)


def run_many(jobs: list[tuple[ExperimentSpec, int]], workers: int = 1) -> list[TrainRecord]:
    """Run ``(spec, seed)`` jobs, in worker processes when ``workers > 1``."""
    if workers <= 1 or len(jobs) <= 1:
        return [_run_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_job, jobs))


def run_csv_name(seed: int) -> str:
    return f"run_seed{seed}.csv"


def summarize(values) -> tuple[float, float]:
    a = np.asarray(values, dtype=np.float64)
    return float(a.mean()), float(a.std())


def write_runs(spec: ExperimentSpec, records: list[TrainRecord], out: Path) -> dict:
    """Per-run CSV + manifest files and a ``summary.json`` for one experiment."""
    out.mkdir(parents=True, exist_ok=True)
    dataset = spec.dataset.describe()
    for rec in records:
        rec.write_csv(out / run_csv_name(rec.seed))
        rec.write_manifest(out / f"run_seed{rec.seed}.manifest.json", extra=dataset)
    summary = summary_from_csvs([out / run_csv_name(r.seed) for r in records])
    summary.update(
        {
            "model": spec.model.label(),
            "num_parameters": records[0].num_parameters,
            "seeds": [r.seed for r in records],
            "test_acc_at_best_val": [r.test_acc_at_best_val for r in records],
            "diverged": [r.diverged for r in records],
        }
    )
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return summary


def summary_from_csvs(paths) -> dict:
    """Final-epoch test/val accuracy statistics, read back from run CSVs."""
    finals, vals = [], []
    for p in paths:
        rows = read_csv(p)
        finals.append(rows["test_acc"][-1])
        vals.append(rows["val_acc"][-1])
    mean, std = summarize(finals)
    return {
        "final_test_acc": finals,
        "final_val_acc": vals,
        "test_acc_mean": mean,
        "test_acc_std": std,
    }


def run_experiment(spec: ExperimentSpec, workers: int = 1) -> dict:
    graph = load_dataset(spec.dataset, spec.seeds[0])  # fail early on missing data
    expected = count_parameters(spec.model.config(graph.num_features, graph.num_classes, 0))
    records = run_many([(spec, s) for s in spec.seeds], workers)
    for r in records:
        if r.num_parameters != expected:
            raise RuntimeError(f"allocated {r.num_parameters} parameters, expected {expected}")
    return write_runs(spec, records, Path(spec.output_dir))


# --- reference tables ----------------------------------------------------------------


@dataclass(frozen=True)
class TableRow:
    model: ModelSpec
    reported_params: int
    reported_test: float


TABLES: dict[int, dict] = {
    1: {
        "features": 100,
        "rows": [
            TableRow(ModelSpec("GCN", 205), 22147, 53.50),
            TableRow(ModelSpec("GKAN1", 16, g=10, k=1), 22279, 59.32),
            TableRow(ModelSpec("GKAN2", 16, g=10, k=1), 22279, 61.48),
            TableRow(ModelSpec("GKAN1", 16, g=9, k=2), 22279, 56.76),
            TableRow(ModelSpec("GKAN2", 16, g=9, k=2), 22279, 61.76),
        ],
    },
    2: {
        "features": 200,
        "rows": [
            TableRow(ModelSpec("GCN", 104), 21639, 61.24),
            TableRow(ModelSpec("GKAN1", 17, g=2, k=2), 21138, 63.58),
            TableRow(ModelSpec("GKAN2", 17, g=2, k=2), 21138, 64.10),
            TableRow(ModelSpec("GKAN1", 20, g=2, k=1), 20727, 67.44),
            TableRow(ModelSpec("GKAN2", 20, g=2, k=1), 20727, 67.66),
        ],
    },
}

CORA_CLASSES = 7


def table_parameter_counts(table_id: int) -> list[int]:
    t = TABLES[table_id]
    return [count_parameters(r.model.config(t["features"], CORA_CLASSES, 0)) for r in t["rows"]]


def run_table(table_id: int, base: ExperimentSpec, out_dir, workers: int = 1) -> tuple[list[dict], str]:
    """Train every row of a reference table and return per-row summaries plus a text report."""
    if table_id not in TABLES:
        raise SpecError(f"unknown table {table_id}; choose 1 or 2")
    t = TABLES[table_id]
    out_dir = Path(out_dir)
    dataset = replace(base.dataset, features=t["features"])
    if dataset.name == "cora":
        find_cora(dataset.data_dir)
    specs = [replace(base, dataset=dataset, model=row.model) for row in t["rows"]]
    jobs = [(s, seed) for s in specs for seed in s.seeds]
    records = run_many(jobs, workers)
    rows = []
    for i, (row, spec) in enumerate(zip(t["rows"], specs)):
        recs = records[i * len(spec.seeds) : (i + 1) * len(spec.seeds)]
        summary = write_runs(spec, recs, out_dir / f"row{i + 1}_{row.model.architecture}")
        summary.update(
            {
                "counted_parameters": count_parameters(
                    row.model.config(t["features"], CORA_CLASSES, 0)
                ),
                "reported_params": row.reported_params,
                "reported_test": row.reported_test,
            }
        )
        rows.append(summary)
    report = format_table_report(table_id, rows)
    (out_dir / "report.txt").write_text(report)
    return rows, report


def format_table_report(table_id: int, rows: list[dict]) -> str:
    t = TABLES[table_id]
    lines = [
        f"Table {table_id}: first {t['features']} features",
        f"{'Architecture':<26s} {'#Parameters':>12s} {'Test (mean+-std)':>18s} "
        f"{'paper-reported #Params':>24s} {'paper-reported Test':>20s}",
    ]
    for r in rows:
        acc = f"{100 * r['test_acc_mean']:.2f} +- {100 * r['test_acc_std']:.2f}"
        lines.append(
            f"{r['model']:<26s} {r['num_parameters']:>12,d} {acc:>18s} "
            f"{r['reported_params']:>24,d} {r['reported_test']:>20.2f}"
        )
    return "\n".join(lines) + "\n"


# --- sweeps ------------------------------------------------------------------------

SWEEP_DEFAULTS = {"g": 3, "k": 1, "h": 16}
SWEEP_VALUES = {"k": (1, 2, 3), "g": (3, 7, 11), "h": (8, 12, 16)}
REPORTED_SWEEP_NOTES = {
    "g": "paper-reported: g=7 best by validation",
    "k": "paper-reported: k=1 best",
    "h": "paper-reported: h=12 and h=16 end close, h=12 faster early",
}


@dataclass
class SweepResult:
    axis: str
    values: list[int]
    summaries: list[dict] = field(default_factory=list)

    @property
    def best_value(self) -> int:
        best = [max(s["best_val_acc"]) for s in self.summaries]
        return self.values[int(np.argmax(best))]


def run_sweep(axis: str, values, base: ExperimentSpec, out_dir, workers: int = 1) -> SweepResult:
    """Vary one of g, k, h while the other two stay at 3, 1, 16."""
    if axis not in SWEEP_DEFAULTS:
        raise SpecError(f"invalid sweep axis {axis!r}; choose g, k or h")
    values = [int(v) for v in values]
    if not values:
        raise SpecError("sweep needs at least one value")
    out_dir = Path(out_dir)
    specs = []
    for v in values:
        setting = dict(SWEEP_DEFAULTS, **{axis: v})
        model = replace(base.model, g=setting["g"], k=setting["k"], hidden=setting["h"])
        try:
            model.config(1, 1, 0)
        except ValueError as exc:
            raise SpecError(f"invalid {axis}={v}: {exc}") from None
        specs.append(replace(base, model=model))
    jobs = [(s, seed) for s in specs for seed in s.seeds]
    records = run_many(jobs, workers)
    result = SweepResult(axis, values)
    overlay = ["axis,value,seed,final_test_acc,final_val_acc,best_val_acc,best_val_epoch,test_acc_at_best_val"]
    for i, (v, spec) in enumerate(zip(values, specs)):
        recs = records[i * len(spec.seeds) : (i + 1) * len(spec.seeds)]
        d = out_dir / f"{axis}={v}"
        summary = write_runs(spec, recs, d)
        summary["best_val_acc"] = [r.best_val_acc for r in recs]
        result.summaries.append(summary)
        for r in recs:
            overlay.append(
                f"{axis},{v},{r.seed},{r.final_test_acc!r},{r.final_val_acc!r},"
                f"{r.best_val_acc!r},{r.best_val_epoch},{r.test_acc_at_best_val!r}"
            )
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / f"sweep_{axis}.csv").write_text("\n".join(overlay) + "\n")
    lines = [f"sweep over {axis}: values {values}"]
    for v, s in zip(values, result.summaries):
        lines.append(
            f"  {axis}={v:<3d} best val {max(s['best_val_acc']):.4f}  "
            f"final test {s['test_acc_mean']:.4f} +- {s['test_acc_std']:.4f}"
        )
    lines.append(f"best {axis} by validation accuracy: {result.best_value}")
    lines.append(REPORTED_SWEEP_NOTES[axis])
    (out_dir / f"sweep_{axis}.txt").write_text("\n".join(lines) + "\n")
    return result
