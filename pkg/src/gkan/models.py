"""GCN baseline and the two GKAN architectures: forward, backward, loss, metrics.

Architectures (``A`` is the normalised adjacency, ``H0 = X``):

* ``GCN``   ``H' = ReLU(A H W + b)`` between layers, no ReLU on the last one
* ``GKAN1`` ``H' = KAN(A H)``   (aggregate, then transform)
* ``GKAN2`` ``H' = A KAN(H)``   (transform, then aggregate)

and ``Z = softmax(H_L)`` row-wise. The GKAN paths have no nonlinearity besides
the KAN edge functions themselves.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .graph import NormalizedAdjacency, spmm
from .kan import KanLayerParams, init_kan_layer, kan_backward, kan_forward, kan_param_count
from .splines import build_grid

ARCHITECTURES = ("GCN", "GKAN1", "GKAN2")
LOG_EPS = 1e-12


@dataclass(frozen=True)
class ModelConfig:
    architecture: str
    d_input: int
    hidden: int
    num_classes: int
    num_layers: int = 2
    spline: tuple[int, int] | None = None  # (g, k)
    seed: int = 0
    dropout: float = 0.0
    domain: tuple[float, float] = (-1.0, 1.0)

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"architecture must be one of {ARCHITECTURES}, got {self.architecture!r}")
        if self.num_layers < 1:
            raise ValueError("num_layers must be >= 1")
        if min(self.d_input, self.hidden, self.num_classes) < 1:
            raise ValueError("layer widths must be positive")
        is_kan = self.architecture != "GCN"
        if is_kan and self.spline is None:
            raise ValueError(f"{self.architecture} needs spline=(g, k)")
        if not is_kan and self.spline is not None:
            raise ValueError("GCN takes no spline settings")
        if self.spline is not None:
            object.__setattr__(self, "spline", tuple(int(v) for v in self.spline))
            g, k = self.spline
            if g < 1 or k < 0:
                raise ValueError(f"spline needs g >= 1 and k >= 0, got g={g}, k={k}")
        object.__setattr__(self, "domain", tuple(float(v) for v in self.domain))
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")

    @property
    def is_kan(self) -> bool:
        return self.architecture != "GCN"

    @property
    def dims(self) -> list[int]:
        return [self.d_input] + [self.hidden] * (self.num_layers - 1) + [self.num_classes]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["spline"] = list(self.spline) if self.spline else None
        d["domain"] = list(self.domain)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        d = dict(d)
        if d.get("spline") is not None:
            d["spline"] = tuple(d["spline"])
        if d.get("domain") is not None:
            d["domain"] = tuple(d["domain"])
        return cls(**d)


def count_parameters(config: ModelConfig) -> int:
    dims = config.dims
    if config.is_kan:
        g, k = config.spline
        return sum(kan_param_count(a, b, g, k) for a, b in zip(dims, dims[1:]))
    return sum(a * b + b for a, b in zip(dims, dims[1:]))


@dataclass
class Model:
    config: ModelConfig
    layers: list = field(default_factory=list)  # dicts {"W", "b"} or KanLayerParams

    def parameters(self) -> dict[str, np.ndarray]:
        """Trainable arrays by name, in declaration order. Arrays are live views."""
        out = {}
        for l, layer in enumerate(self.layers):
            arrays = layer.arrays() if isinstance(layer, KanLayerParams) else layer
            for name, a in arrays.items():
                out[f"layer{l}.{name}"] = a
        return out

    def decayed(self) -> set[str]:
        """Names that receive weight decay: everything except biases."""
        return {n for n in self.parameters() if not n.endswith(".b") and not n.endswith(".bias")}

    @property
    def num_parameters(self) -> int:
        return sum(a.size for a in self.parameters().values())

    def copy(self) -> "Model":
        layers = [
            layer.copy() if isinstance(layer, KanLayerParams) else {n: a.copy() for n, a in layer.items()}
            for layer in self.layers
        ]
        return Model(self.config, layers)


def build_model(config: ModelConfig) -> Model:
    rng = np.random.default_rng(config.seed)
    dims = config.dims
    layers = []
    if config.is_kan:
        g, k = config.spline
        grid = build_grid(config.domain[0], config.domain[1], g, k)
        for a, b in zip(dims, dims[1:]):
            layers.append(init_kan_layer(a, b, grid, rng))
    else:
        for a, b in zip(dims, dims[1:]):
            bound = np.sqrt(6.0 / (a + b))
            layers.append({"W": rng.uniform(-bound, bound, size=(a, b)), "b": np.zeros(b)})
    return Model(config, layers)


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def forward(model: Model, adj: NormalizedAdjacency, X, *, rng=None):
    """Class probabilities ``Z`` (N x C) and a cache for :func:`backward`.

    Dropout on layer inputs is applied only when the config asks for it and
    an ``rng`` is supplied (training); evaluation passes no ``rng``.
    """
    cfg = model.config
    H = np.asarray(X, dtype=np.float64)
    if H.ndim != 2 or H.shape[1] != cfg.d_input:
        raise ValueError(f"expected features of shape (N, {cfg.d_input}), got {H.shape}")
    if H.shape[0] != adj.num_nodes:
        raise ValueError("feature rows do not match the adjacency")
    last = len(model.layers) - 1
    steps = []
    for l, layer in enumerate(model.layers):
        drop = None
        if cfg.dropout > 0 and rng is not None:
            keep = 1.0 - cfg.dropout
            drop = (rng.random(H.shape) < keep) / keep
            H = H * drop
        if cfg.architecture == "GCN":
            pre = spmm(adj, H @ layer["W"]) + layer["b"]
            steps.append({"input": H, "pre": pre, "drop": drop})
            H = pre if l == last else np.maximum(pre, 0.0)
        elif cfg.architecture == "GKAN1":
            agg = spmm(adj, H)
            steps.append({"input": agg, "drop": drop})
            H = kan_forward(layer, agg)
        else:
            steps.append({"input": H, "drop": drop})
            H = spmm(adj, kan_forward(layer, H))
    Z = softmax(H)
    return Z, {"adj": adj, "steps": steps, "logits": H, "Z": Z}


def _check_mask(mask, n: int) -> np.ndarray:
    mask = np.asarray(mask, dtype=bool)
    if mask.shape != (n,):
        raise ValueError(f"mask must have shape ({n},)")
    if not mask.any():
        raise ValueError("mask selects no nodes")
    return mask


def masked_cross_entropy(Z, labels, mask) -> float:
    """Mean of ``-ln Z[l, y_l]`` over the masked nodes."""
    Z = np.asarray(Z, dtype=np.float64)
    mask = _check_mask(mask, Z.shape[0])
    labels = np.asarray(labels)
    p = Z[mask, labels[mask]]
    return float(-np.mean(np.log(np.maximum(p, LOG_EPS))))


def accuracy(Z, labels, mask) -> float:
    Z = np.asarray(Z)
    mask = _check_mask(mask, Z.shape[0])
    pred = np.argmax(Z[mask], axis=1)  # first maximum wins ties
    return float(np.mean(pred == np.asarray(labels)[mask]))


def backward(model: Model, cache, labels, mask, *, scale: float = 1.0) -> dict[str, np.ndarray]:
    """Gradients of ``scale * masked_cross_entropy`` for every trainable array."""
    Z = cache["Z"]
    adj = cache["adj"]
    steps = cache["steps"]
    if len(steps) != len(model.layers):
        raise ValueError("cache does not match the model")
    mask = _check_mask(mask, Z.shape[0])
    labels = np.asarray(labels)

    # softmax + cross-entropy: dL/dlogits = (Z - onehot) / |mask| on masked rows
    d = np.zeros_like(Z)
    rows = np.flatnonzero(mask)
    d[rows] = Z[rows]
    d[rows, labels[rows]] -= 1.0
    d *= scale / rows.size

    arch = model.config.architecture
    grads: dict[str, np.ndarray] = {}
    upstream: list = [None] * len(model.layers)
    for l in range(len(model.layers) - 1, -1, -1):
        layer, step = model.layers[l], steps[l]
        if arch == "GCN":
            if step["input"].shape[1] != layer["W"].shape[0]:
                raise ValueError("stale cache")
            if l != len(model.layers) - 1:
                d = d * (step["pre"] > 0)
            grads[f"layer{l}.b"] = d.sum(axis=0)
            back = spmm(adj, d)
            grads[f"layer{l}.W"] = step["input"].T @ back
            d = back @ layer["W"].T
        elif arch == "GKAN1":
            upstream[l] = d
            g, d_agg = kan_backward(layer, step["input"], d)
            for name, a in g.arrays().items():
                grads[f"layer{l}.{name}"] = a
            d = spmm(adj, d_agg)
        else:
            upstream[l] = spmm(adj, d)
            g, d = kan_backward(layer, step["input"], upstream[l])
            for name, a in g.arrays().items():
                grads[f"layer{l}.{name}"] = a
        if step["drop"] is not None:
            d = d * step["drop"]
    # kept for diagnostics: per-layer gradient at each layer output, and at X
    cache["grad_out"] = upstream
    cache["grad_input"] = d
    return {name: grads[name] for name in model.parameters()}


# --- checkpoints -----------------------------------------------------------------

MAGIC = b"GKAN-CHECKPOINT\n"
FORMAT_VERSION = 1


def save_checkpoint(model: Model, path) -> None:
    """Single-file checkpoint: magic, header length, JSON header, float64 LE arrays."""
    params = model.parameters()
    header = {
        "version": FORMAT_VERSION,
        "config": model.config.to_dict(),
        "arrays": [{"name": n, "shape": list(a.shape)} for n, a in params.items()],
        "grids": [
            [layer.grid.domain_min, layer.grid.domain_max, layer.grid.intervals]
            for layer in model.layers
            if isinstance(layer, KanLayerParams)
        ],
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for a in params.values():
            fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_checkpoint(path) -> Model:
    data = Path(path).read_bytes()
    if not data.startswith(MAGIC):
        raise ValueError(f"{path}: not a GKAN checkpoint")
    pos = len(MAGIC)
    (n,) = struct.unpack_from("<Q", data, pos)
    pos += 8
    header = json.loads(data[pos : pos + n])
    pos += n
    if header.get("version") != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {header.get('version')}")
    model = build_model(ModelConfig.from_dict(header["config"]))
    if model.config.is_kan:
        k = model.config.spline[1]
        for layer, (lo, hi, g) in zip(model.layers, header["grids"]):
            layer.grid = build_grid(lo, hi, g, k)
            layer.coeffs = np.zeros((layer.n_in, layer.n_out, layer.grid.num_basis))
    params = model.parameters()
    for spec in header["arrays"]:
        name, shape = spec["name"], tuple(spec["shape"])
        size = int(np.prod(shape)) * 8
        arr = np.frombuffer(data, dtype="<f8", count=size // 8, offset=pos).reshape(shape)
        pos += size
        params[name][...] = arr
    if pos != len(data):
        raise ValueError(f"{path}: trailing bytes in checkpoint")
    return model
