"""Graph container, normalised adjacency, Cora ingestion and SBM generation."""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp


class DatasetFormatError(ValueError):
    """A malformed line in a ``.content`` / ``.cites`` file."""

    def __init__(self, path, lineno: int, message: str):
        super().__init__(f"{path}:{lineno}: {message}")
        self.path = str(path)
        self.lineno = lineno


@dataclass
class Graph:
    num_nodes: int
    edges: np.ndarray  # (E, 2) with i < j, unique, no self-loops
    features: np.ndarray
    labels: np.ndarray
    train_mask: np.ndarray
    val_mask: np.ndarray
    test_mask: np.ndarray
    num_classes: int
    node_ids: list[str] | None = None
    label_names: list[str] | None = None
    num_raw_edges: int | None = None

    def __post_init__(self):
        self.edges = canonical_edges(self.edges, self.num_nodes)
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        for name in ("train_mask", "val_mask", "test_mask"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=bool))
        if self.features.shape[0] != self.num_nodes or self.labels.shape != (self.num_nodes,):
            raise ValueError("features/labels do not match num_nodes")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError("labels must lie in [0, num_classes)")
        m = self.train_mask.astype(int) + self.val_mask + self.test_mask
        if m.shape != (self.num_nodes,) or m.max(initial=0) > 1:
            raise ValueError("train/val/test masks must be disjoint vectors of length num_nodes")

    @property
    def num_features(self) -> int:
        return self.features.shape[1]


def canonical_edges(edges, num_nodes: int) -> np.ndarray:
    """Undirected edge list as sorted unique ``(i, j)`` rows with ``i < j``."""
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    if e.size and (e.min() < 0 or e.max() >= num_nodes):
        raise ValueError("edge endpoint out of range")
    e = np.sort(e, axis=1)
    e = e[e[:, 0] != e[:, 1]]
    if e.size == 0:
        return np.zeros((0, 2), dtype=np.int64)
    return np.unique(e, axis=0)


@dataclass(frozen=True)
class NormalizedAdjacency:
    """``D^-1/2 (A + I) D^-1/2`` in CSR form with sorted column indices."""

    matrix: sp.csr_matrix

    @property
    def num_nodes(self) -> int:
        return self.matrix.shape[0]

    def to_dense(self) -> np.ndarray:
        return self.matrix.toarray()


def normalize_adjacency(graph: Graph) -> NormalizedAdjacency:
    return normalize_edges(graph.edges, graph.num_nodes)


def normalize_edges(edges, num_nodes: int) -> NormalizedAdjacency:
    e = canonical_edges(edges, num_nodes)
    loops = np.arange(num_nodes)
    rows = np.concatenate([e[:, 0], e[:, 1], loops])
    cols = np.concatenate([e[:, 1], e[:, 0], loops])
    A = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(num_nodes, num_nodes))
    deg = np.asarray(A.sum(axis=1)).ravel()
    inv_sqrt = 1.0 / np.sqrt(deg)
    A = A.tocoo()
    vals = inv_sqrt[A.row] * inv_sqrt[A.col]
    M = sp.csr_matrix((vals, (A.row, A.col)), shape=(num_nodes, num_nodes))
    M.sort_indices()
    return NormalizedAdjacency(M)


def identity_adjacency(num_nodes: int) -> NormalizedAdjacency:
    return normalize_edges(np.zeros((0, 2), dtype=np.int64), num_nodes)


def spmm(adj: NormalizedAdjacency, H) -> np.ndarray:
    H = np.asarray(H, dtype=np.float64)
    if H.shape[0] != adj.num_nodes:
        raise ValueError(f"row count {H.shape[0]} does not match adjacency size {adj.num_nodes}")
    return np.asarray(adj.matrix @ H)


# --- splits -----------------------------------------------------------------


@dataclass(frozen=True)
class SplitSpec:
    """How to draw train/val/test masks.

    ``kind="random"`` draws ``num_train``/``num_val``/``num_test`` nodes
    uniformly at random. ``kind="per_class"`` takes ``train_per_class`` nodes
    of every class for training, then ``num_val`` and ``num_test`` from the
    remaining nodes.
    """

    kind: str = "random"
    num_train: int = 1000
    num_val: int = 200
    num_test: int = 300
    train_per_class: int = 20

    def __post_init__(self):
        if self.kind not in ("random", "per_class"):
            raise ValueError(f"unknown split kind {self.kind!r}")


def make_masks(labels, num_classes: int, split: SplitSpec, seed) -> tuple[np.ndarray, ...]:
    labels = np.asarray(labels)
    n = labels.size
    rng = np.random.default_rng(seed)
    if split.kind == "random":
        need = split.num_train + split.num_val + split.num_test
        if need > n:
            raise ValueError(f"split needs {need} nodes, graph has {n}")
        perm = rng.permutation(n)
        train = perm[: split.num_train]
        rest = perm[split.num_train :]
    else:
        train = []
        for c in range(num_classes):
            members = np.flatnonzero(labels == c)
            if members.size < split.train_per_class:
                raise ValueError(f"class {c} has only {members.size} nodes")
            train.extend(rng.choice(members, split.train_per_class, replace=False))
        train = np.sort(np.asarray(train, dtype=np.int64))
        rest = rng.permutation(np.setdiff1d(np.arange(n), train))
        if split.num_val + split.num_test > rest.size:
            raise ValueError("not enough nodes left for validation/test")
    val = rest[: split.num_val]
    test = rest[split.num_val : split.num_val + split.num_test]
    masks = []
    for idx in (train, val, test):
        m = np.zeros(n, dtype=bool)
        m[idx] = True
        masks.append(m)
    return tuple(masks)


# --- Cora-style files ---------------------------------------------------------


def read_content(path) -> tuple[list[str], np.ndarray, list[str]]:
    """Parse ``<id> <f_1 ... f_d> <label>`` lines (tab or whitespace separated)."""
    ids, rows, labels = [], [], []
    width = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) < 3:
                raise DatasetFormatError(path, lineno, "expected id, features and label")
            if width is None:
                width = len(parts) - 2
            elif len(parts) - 2 != width:
                raise DatasetFormatError(
                    path, lineno, f"expected {width} features, found {len(parts) - 2}"
                )
            try:
                rows.append([float(v) for v in parts[1:-1]])
            except ValueError as exc:
                raise DatasetFormatError(path, lineno, f"non-numeric feature ({exc})") from None
            ids.append(parts[0])
            labels.append(parts[-1])
    if not ids:
        raise DatasetFormatError(path, 0, "no nodes found")
    return ids, np.asarray(rows, dtype=np.float64), labels


def read_cites(path, index: dict[str, int]) -> tuple[np.ndarray, int]:
    """Edges as node-index pairs plus the number of citation lines read."""
    pairs = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            parts = line.split()
            if not parts:
                continue
            if len(parts) != 2:
                raise DatasetFormatError(path, lineno, "expected '<cited> <citing>'")
            try:
                pairs.append((index[parts[0]], index[parts[1]]))
            except KeyError as exc:
                raise DatasetFormatError(path, lineno, f"unknown node id {exc.args[0]!r}") from None
    return np.asarray(pairs, dtype=np.int64).reshape(-1, 2), len(pairs)


def load_cora(
    content_path,
    cites_path,
    num_features: int | None = None,
    split: SplitSpec = SplitSpec(),
    seed: int = 0,
    *,
    row_normalize: bool = False,
    label_order: list[str] | None = None,
) -> Graph:
    """Load a citation graph in the classic ``.content`` / ``.cites`` layout.

    Features are truncated to the first ``num_features`` columns in file
    order. Class ids follow first appearance in the content file unless
    ``label_order`` is given, in which case any other label is an error.
    """
    for p in (content_path, cites_path):
        if not os.path.exists(p):
            raise FileNotFoundError(p)
    ids, X, label_str = read_content(content_path)
    if len(set(ids)) != len(ids):
        raise ValueError(f"{content_path}: duplicate node ids")
    if label_order is None:
        label_names = list(dict.fromkeys(label_str))
    else:
        label_names = list(label_order)
        unknown = sorted(set(label_str) - set(label_names))
        if unknown:
            raise ValueError(f"{content_path}: unknown label(s) {unknown}")
    lab_index = {name: i for i, name in enumerate(label_names)}
    labels = np.array([lab_index[s] for s in label_str], dtype=np.int64)

    index = {node: i for i, node in enumerate(ids)}
    edges, raw = read_cites(cites_path, index)

    if num_features is not None:
        if not 1 <= num_features <= X.shape[1]:
            raise ValueError(f"num_features must be in [1, {X.shape[1]}], got {num_features}")
        X = X[:, :num_features]
    if row_normalize:
        s = X.sum(axis=1, keepdims=True)
        X = np.divide(X, s, out=np.zeros_like(X), where=s != 0)

    C = len(label_names)
    train, val, test = make_masks(labels, C, split, seed)
    return Graph(
        num_nodes=len(ids),
        edges=edges,
        features=X,
        labels=labels,
        train_mask=train,
        val_mask=val,
        test_mask=test,
        num_classes=C,
        node_ids=ids,
        label_names=label_names,
        num_raw_edges=raw,
    )


def find_cora(data_dir) -> tuple[Path, Path]:
    """Locate ``cora.content`` and ``cora.cites`` under ``data_dir``."""
    d = Path(data_dir)
    for base in (d, d / "cora"):
        content, cites = base / "cora.content", base / "cora.cites"
        if content.exists() and cites.exists():
            return content, cites
    raise FileNotFoundError(f"cora.content / cora.cites not found under {d}")


def export_graph(graph: Graph, directory, name: str) -> tuple[Path, Path]:
    """Write ``<name>.content`` and ``<name>.cites`` in the Cora layout."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    ids = graph.node_ids or [str(i) for i in range(graph.num_nodes)]
    names = graph.label_names or [f"class_{c}" for c in range(graph.num_classes)]
    content, cites = d / f"{name}.content", d / f"{name}.cites"
    with open(content, "w") as fh:
        for i in range(graph.num_nodes):
            feats = "\t".join(_fmt(v) for v in graph.features[i])
            fh.write(f"{ids[i]}\t{feats}\t{names[graph.labels[i]]}\n")
    with open(cites, "w") as fh:
        for i, j in graph.edges:
            fh.write(f"{ids[i]}\t{ids[j]}\n")
    return content, cites


def _fmt(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


# --- synthetic ----------------------------------------------------------------


def generate_synthetic(
    num_nodes: int,
    num_classes: int,
    p_in: float,
    p_out: float,
    d: int,
    signal: float,
    seed: int,
) -> Graph:
    """Stochastic block model with noisy one-hot class features.

    Nodes are split into ``num_classes`` contiguous, near-equal blocks. Node
    features are ``signal * onehot(label)`` in ``d`` dimensions plus unit
    Gaussian noise. Masks are a seeded 60/20/20 split.
    """
    if not (0.0 <= p_out <= 1.0 and 0.0 <= p_in <= 1.0):
        raise ValueError("edge probabilities must lie in [0, 1]")
    if p_in < p_out:
        raise ValueError("p_in must be at least p_out")
    if d < num_classes:
        raise ValueError("feature dimension d must be >= num_classes")
    if num_classes < 1 or num_nodes < num_classes:
        raise ValueError("need at least one node per class")
    rng = np.random.default_rng(seed)
    labels = np.arange(num_nodes) * num_classes // num_nodes
    iu, ju = np.triu_indices(num_nodes, k=1)
    prob = np.where(labels[iu] == labels[ju], p_in, p_out)
    keep = rng.random(iu.size) < prob
    edges = np.stack([iu[keep], ju[keep]], axis=1)

    X = rng.standard_normal((num_nodes, d))
    X[np.arange(num_nodes), labels] += signal

    n_train = int(round(0.6 * num_nodes))
    n_val = int(round(0.2 * num_nodes))
    split = SplitSpec("random", n_train, n_val, num_nodes - n_train - n_val)
    train, val, test = make_masks(labels, num_classes, split, rng)
    return Graph(num_nodes, edges, X, labels, train, val, test, num_classes)


def permute_graph(graph: Graph, perm) -> Graph:
    """Relabel nodes so that old node ``perm[i]`` becomes new node ``i``."""
    perm = np.asarray(perm)
    inv = np.empty_like(perm)
    inv[perm] = np.arange(perm.size)
    return Graph(
        num_nodes=graph.num_nodes,
        edges=inv[graph.edges],
        features=graph.features[perm],
        labels=graph.labels[perm],
        train_mask=graph.train_mask[perm],
        val_mask=graph.val_mask[perm],
        test_mask=graph.test_mask[perm],
        num_classes=graph.num_classes,
    )
