"""Full-batch training, optimizers, run records and the gradient checker."""

from __future__ import annotations

import csv
import hashlib
import json
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .graph import Graph, NormalizedAdjacency, normalize_adjacency
from .kan import spline_input_grad, update_layer_grid
from .models import (
    Model,
    ModelConfig,
    accuracy,
    backward,
    build_model,
    forward,
    masked_cross_entropy,
)

CSV_COLUMNS = ("epoch", "train_loss", "test_loss", "train_acc", "test_acc", "val_acc", "wall_s")

# Grid-update schedule used when updates are switched on explicitly.
GRID_UPDATE_PRESET = (10, 25, 50)


@dataclass(frozen=True)
class TrainConfig:
    optimizer: str = "adam"
    learning_rate: float = 0.01
    weight_decay: float = 5e-4
    epochs: int = 300
    seed: int = 0
    grid_update_epochs: tuple[int, ...] = ()
    record_every: int = 1
    record_time: bool = True

    def __post_init__(self):
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"optimizer must be 'adam' or 'sgd', got {self.optimizer!r}")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be non-negative")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        object.__setattr__(self, "grid_update_epochs", tuple(int(e) for e in self.grid_update_epochs))


class Adam:
    def __init__(self, lr=0.01, beta1=0.9, beta2=0.999, eps=1e-8, weight_decay=0.0, decay_names=None):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.weight_decay = weight_decay
        self.decay_names = decay_names
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0

    def reset(self, name: str) -> None:
        self.m.pop(name, None)
        self.v.pop(name, None)

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for name, p in params.items():
            g = _decayed_grad(self, name, p, grads[name])
            if name not in self.m or self.m[name].shape != p.shape:
                self.m[name] = np.zeros_like(p)
                self.v[name] = np.zeros_like(p)
            m, v = self.m[name], self.v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p -= self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


class SGD:
    def __init__(self, lr=0.01, weight_decay=0.0, decay_names=None):
        self.lr = lr
        self.weight_decay = weight_decay
        self.decay_names = decay_names

    def reset(self, name: str) -> None:
        pass

    def step(self, params, grads) -> None:
        for name, p in params.items():
            p -= self.lr * _decayed_grad(self, name, p, grads[name])


def _decayed_grad(opt, name, p, g):
    if opt.weight_decay and (opt.decay_names is None or name in opt.decay_names):
        return g + opt.weight_decay * p
    return g


def make_optimizer(cfg: TrainConfig, model: Model):
    decay = model.decayed()
    if cfg.optimizer == "adam":
        return Adam(cfg.learning_rate, weight_decay=cfg.weight_decay, decay_names=decay)
    return SGD(cfg.learning_rate, weight_decay=cfg.weight_decay, decay_names=decay)


@dataclass
class TrainRecord:
    seed: int
    config: dict
    model_config: dict
    num_parameters: int
    epoch: list[int] = field(default_factory=list)
    train_loss: list[float] = field(default_factory=list)
    test_loss: list[float] = field(default_factory=list)
    train_acc: list[float] = field(default_factory=list)
    test_acc: list[float] = field(default_factory=list)
    val_acc: list[float] = field(default_factory=list)
    wall_s: list[float] = field(default_factory=list)
    final_train_acc: float = float("nan")
    final_val_acc: float = float("nan")
    final_test_acc: float = float("nan")
    best_val_acc: float = float("nan")
    best_val_epoch: int = 0
    test_acc_at_best_val: float = float("nan")
    total_wall_s: float = 0.0
    diverged: bool = False
    diverged_epoch: int | None = None

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CSV_COLUMNS)
            for row in zip(*(getattr(self, c) for c in CSV_COLUMNS)):
                w.writerow([row[0]] + [repr(float(v)) for v in row[1:]])

    def summary(self) -> dict:
        keys = (
            "seed",
            "num_parameters",
            "final_train_acc",
            "final_val_acc",
            "final_test_acc",
            "best_val_acc",
            "best_val_epoch",
            "test_acc_at_best_val",
            "diverged",
            "diverged_epoch",
        )
        return {k: getattr(self, k) for k in keys}

    def write_manifest(self, path, extra: dict | None = None) -> None:
        payload = {
            "config_hash": config_hash(self.model_config, self.config, extra),
            **self.summary(),
            "model_config": self.model_config,
            "train_config": self.config,
        }
        if extra:
            payload["dataset"] = extra
        Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_csv(path) -> dict[str, list]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = {c: [float(r[c]) for r in rows] for c in CSV_COLUMNS}
    out["epoch"] = [int(v) for v in out["epoch"]]
    return out


def config_hash(*parts) -> str:
    blob = json.dumps(parts, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _layer_inputs(cache) -> list[np.ndarray]:
    return [s["input"] for s in cache["steps"]]


def train(model: Model, graph: Graph, adj: NormalizedAdjacency, cfg: TrainConfig) -> TrainRecord:
    """Optimise ``model`` in place on the training mask and record metrics.

    Each epoch takes one full-batch step and then evaluates all three masks
    with the updated parameters. A non-finite loss or gradient stops the run
    and marks the record as diverged.
    """
    X, y = graph.features, graph.labels
    for m in (graph.train_mask, graph.val_mask, graph.test_mask):
        if not m.any():
            raise ValueError("train, validation and test masks must be non-empty")
    params = model.parameters()
    opt = make_optimizer(cfg, model)
    drop_rng = np.random.default_rng(cfg.seed)
    updates = set(cfg.grid_update_epochs) if model.config.is_kan else set()
    record = TrainRecord(
        seed=cfg.seed,
        config=_train_config_dict(cfg),
        model_config=model.config.to_dict(),
        num_parameters=model.num_parameters,
    )
    start = time.perf_counter()
    use_dropout = model.config.dropout > 0
    Z, cache = forward(model, adj, X)
    best = -1.0
    for epoch in range(1, cfg.epochs + 1):
        if epoch in updates:
            inputs = _layer_inputs(cache)
            for l, layer in enumerate(model.layers):
                model.layers[l] = update_layer_grid(layer, inputs[l])
            params = model.parameters()
            for name in params:
                if name.endswith(".coeffs"):
                    opt.reset(name)
            Z, cache = forward(model, adj, X)
        if use_dropout:
            Z, cache = forward(model, adj, X, rng=drop_rng)
        loss = masked_cross_entropy(Z, y, graph.train_mask)
        grads = backward(model, cache, y, graph.train_mask)
        if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads.values()):
            record.diverged, record.diverged_epoch = True, epoch
            break
        opt.step(params, grads)

        Z, cache = forward(model, adj, X)
        val_acc = accuracy(Z, y, graph.val_mask)
        test_acc = accuracy(Z, y, graph.test_mask)
        if val_acc > best:
            best = val_acc
            record.best_val_acc, record.best_val_epoch = val_acc, epoch
            record.test_acc_at_best_val = test_acc
        if epoch % cfg.record_every == 0 or epoch == cfg.epochs:
            train_loss = masked_cross_entropy(Z, y, graph.train_mask)
            if not np.isfinite(train_loss):
                record.diverged, record.diverged_epoch = True, epoch
                break
            record.epoch.append(epoch)
            record.train_loss.append(train_loss)
            record.test_loss.append(masked_cross_entropy(Z, y, graph.test_mask))
            record.train_acc.append(accuracy(Z, y, graph.train_mask))
            record.test_acc.append(test_acc)
            record.val_acc.append(val_acc)
            record.wall_s.append(time.perf_counter() - start if cfg.record_time else 0.0)

    record.final_train_acc = accuracy(Z, y, graph.train_mask)
    record.final_val_acc = accuracy(Z, y, graph.val_mask)
    record.final_test_acc = accuracy(Z, y, graph.test_mask)
    record.total_wall_s = time.perf_counter() - start
    return record


def _train_config_dict(cfg: TrainConfig) -> dict:
    d = asdict(cfg)
    d["grid_update_epochs"] = list(cfg.grid_update_epochs)
    return d


# --- gradient checking -----------------------------------------------------------

FD_STEP = 1e-6
# Entries whose analytic and numeric values are both below this are compared
# absolutely: at step 1e-6 central differences of an O(1) loss carry ~1e-10
# of round-off, so smaller gradients cannot be resolved to 1e-5 relative.
REL_FLOOR = 1e-5


def relative_error(analytic, numeric, floor: float = REL_FLOOR) -> np.ndarray:
    a, n = np.asarray(analytic), np.asarray(numeric)
    return np.abs(a - n) / np.maximum(np.maximum(np.abs(a), np.abs(n)), floor)


@dataclass
class GradCheckReport:
    errors: dict[str, float]
    tolerance: float
    spline_input_grad_max: float | None = None

    @property
    def max_error(self) -> float:
        return max(self.errors.values())

    @property
    def passed(self) -> bool:
        return self.max_error < self.tolerance

    def lines(self) -> list[str]:
        out = [f"{name:<20s} max rel err {err:.3e}" for name, err in self.errors.items()]
        if self.spline_input_grad_max is not None:
            out.append(f"{'spline input grad':<20s} max |value| {self.spline_input_grad_max:.3e}")
        out.append(f"{'PASS' if self.passed else 'FAIL'} (max {self.max_error:.3e} < {self.tolerance:g})")
        return out


def _loss(model, adj, graph) -> float:
    Z, _ = forward(model, adj, graph.features)
    return masked_cross_entropy(Z, graph.labels, graph.train_mask)


def numeric_gradients(model: Model, adj, graph, step: float = FD_STEP) -> dict[str, np.ndarray]:
    out = {}
    for name, p in model.parameters().items():
        g = np.zeros_like(p)
        flat, gflat = p.reshape(-1), g.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + step
            up = _loss(model, adj, graph)
            flat[i] = orig - step
            down = _loss(model, adj, graph)
            flat[i] = orig
            gflat[i] = (up - down) / (2 * step)
        out[name] = g
    return out


def spline_input_grad_max(model: Model, cache, grads_out: list[np.ndarray]) -> float:
    """Largest spline-path contribution to any KAN layer's input gradient."""
    worst = 0.0
    for layer, step, g in zip(model.layers, cache["steps"], grads_out):
        worst = max(worst, float(np.max(np.abs(spline_input_grad(layer, step["input"], g)))))
    return worst


def grad_check(config: ModelConfig, graph: Graph, tolerance: float, step: float = FD_STEP) -> GradCheckReport:
    """Compare analytic and central-difference gradients of the training loss."""
    if graph.num_nodes > 16:
        raise ValueError("grad_check is meant for small graphs (N <= 16)")
    model = build_model(config)
    adj = normalize_adjacency(graph)
    Z, cache = forward(model, adj, graph.features)
    analytic = backward(model, cache, graph.labels, graph.train_mask)
    numeric = numeric_gradients(model, adj, graph, step)
    errors = {name: float(np.max(relative_error(analytic[name], numeric[name]))) for name in analytic}
    spline_max = None
    if config.is_kan:
        spline_max = spline_input_grad_max(model, cache, cache["grad_out"])
    return GradCheckReport(errors, tolerance, spline_max)
