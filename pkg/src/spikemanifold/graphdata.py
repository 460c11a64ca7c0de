"""Graph representation, file ingestion, splits, and synthetic graphs.

Graphs are undirected and simple: edges are stored once as sorted
pairs, duplicates and self-loops are dropped on construction, and
directed input is symmetrized. File formats are plain text: an edge
list of ``u v`` lines (``#`` comments allowed), a CSV feature matrix
with one row per node, and an optional label file with one integer per
line. Parse failures name the file and line.

Synthetic generators cover the structural regimes the geometries are
meant for: complete trees (hierarchy), cycles (closed loops), and
stochastic block models (communities).
"""

import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ConfigError, DataFormatError, ShapeError


@dataclass(eq=False)
class Graph:
    """An immutable undirected graph with features and optional labels."""

    n: int
    edges: np.ndarray                      # (E, 2) int64, u < v, unique
    features: np.ndarray                   # (n, d) float64
    labels: Optional[np.ndarray] = None    # (n,) int64
    train_mask: Optional[np.ndarray] = None
    val_mask: Optional[np.ndarray] = None
    test_mask: Optional[np.ndarray] = None
    _adj: list = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        edges = np.sort(edges, axis=1)
        keep = edges[:, 0] != edges[:, 1]
        edges = np.unique(edges[keep], axis=0)
        if edges.size and (edges.min() < 0 or edges.max() >= self.n):
            raise ShapeError(
                f"edge endpoint outside [0, {self.n})")
        feats = np.ascontiguousarray(self.features, dtype=np.float64)
        if feats.ndim != 2 or feats.shape[0] != self.n:
            raise ShapeError(
                f"features must be ({self.n}, d), got {feats.shape}")
        self.edges = edges
        self.features = feats
        if self.labels is not None:
            lab = np.asarray(self.labels, dtype=np.int64)
            if lab.shape != (self.n,):
                raise ShapeError(
                    f"labels must be ({self.n},), got {lab.shape}")
            self.labels = lab
        adj = [set() for _ in range(self.n)]
        for u, v in self.edges:
            adj[u].add(int(v))
            adj[v].add(int(u))
        self._adj = adj

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    def neighbors(self, i: int) -> np.ndarray:
        return np.fromiter(sorted(self._adj[i]), dtype=np.int64,
                           count=len(self._adj[i]))

    def neighbor_set(self, i: int) -> set:
        return self._adj[i]

    def n_classes(self) -> int:
        if self.labels is None:
            raise ConfigError("graph has no labels")
        return int(self.labels.max()) + 1

    def with_masks(self, train, val, test) -> "Graph":
        return Graph(self.n, self.edges, self.features, self.labels,
                     train_mask=np.asarray(train, bool),
                     val_mask=np.asarray(val, bool),
                     test_mask=np.asarray(test, bool))

    def with_edges(self, edges) -> "Graph":
        return Graph(self.n, edges, self.features, self.labels,
                     self.train_mask, self.val_mask, self.test_mask)


def message_edges(graph: Graph):
    """Directed (src, dst) arrays: both directions of every edge, plus a
    self-loop for each isolated node so attention stays well-defined."""
    if graph.n_edges:
        u, v = graph.edges[:, 0], graph.edges[:, 1]
        src = np.concatenate([u, v])
        dst = np.concatenate([v, u])
    else:
        src = np.empty(0, dtype=np.int64)
        dst = np.empty(0, dtype=np.int64)
    degree = np.bincount(dst, minlength=graph.n)
    isolated = np.flatnonzero(degree == 0)
    if isolated.size:
        src = np.concatenate([src, isolated])
        dst = np.concatenate([dst, isolated])
    order = np.argsort(dst, kind="stable")
    return src[order], dst[order]


# --- file formats ---------------------------------------------------------

def _parse_edge_file(path: Path):
    pairs = []
    with open(path) as fh:
        for ln, line in enumerate(fh, start=1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            parts = body.split()
            if len(parts) != 2:
                raise DataFormatError(
                    f"{path}:{ln}: expected 'u v', got {line.strip()!r}")
            try:
                pairs.append((int(parts[0]), int(parts[1])))
            except ValueError:
                raise DataFormatError(
                    f"{path}:{ln}: non-integer endpoint in "
                    f"{line.strip()!r}") from None
    return pairs


def _parse_feature_csv(path: Path) -> np.ndarray:
    rows = []
    width = None
    with open(path) as fh:
        for ln, line in enumerate(fh, start=1):
            body = line.strip()
            if not body or body.startswith("#"):
                continue
            cells = body.split(",")
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise DataFormatError(
                    f"{path}:{ln}: ragged row ({len(cells)} cells, "
                    f"expected {width})")
            try:
                rows.append([float(c) for c in cells])
            except ValueError:
                raise DataFormatError(
                    f"{path}:{ln}: non-numeric cell") from None
    if not rows:
        raise DataFormatError(f"{path}: no feature rows")
    return np.array(rows, dtype=np.float64)


def _parse_label_file(path: Path) -> np.ndarray:
    out = []
    with open(path) as fh:
        for ln, line in enumerate(fh, start=1):
            body = line.strip()
            if not body or body.startswith("#"):
                continue
            try:
                out.append(int(body))
            except ValueError:
                raise DataFormatError(
                    f"{path}:{ln}: expected one integer label, got "
                    f"{body!r}") from None
    return np.array(out, dtype=np.int64)


def load_dataset(edge_path, feature_path, label_path=None,
                 normalize: bool = False) -> Graph:
    """Build a Graph from an edge list, a feature CSV, and optional
    labels. Node count comes from the feature file."""
    edge_path, feature_path = Path(edge_path), Path(feature_path)
    feats = _parse_feature_csv(feature_path)
    n = feats.shape[0]
    pairs = _parse_edge_file(edge_path)
    for ln_index, (u, v) in enumerate(pairs, start=1):
        if not (0 <= u < n and 0 <= v < n):
            raise DataFormatError(
                f"{edge_path}: edge ({u}, {v}) references a node outside "
                f"[0, {n}) (edge entry {ln_index})")
    labels = None
    if label_path is not None:
        labels = _parse_label_file(Path(label_path))
        if labels.shape[0] != n:
            raise DataFormatError(
                f"{label_path}: {labels.shape[0]} labels for {n} nodes")
    if normalize:
        norms = np.linalg.norm(feats, axis=1, keepdims=True)
        feats = feats / np.maximum(norms, 1e-12)
    edges = np.array(pairs, dtype=np.int64).reshape(-1, 2)
    return Graph(n, edges, feats, labels)


def save_dataset(graph: Graph, directory) -> dict:
    """Write edges.txt, features.csv and labels.txt (when present).
    Round-trips through load_dataset to an identical graph."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {"edges": directory / "edges.txt",
             "features": directory / "features.csv"}
    with open(paths["edges"], "w") as fh:
        for u, v in graph.edges:
            fh.write(f"{u} {v}\n")
    with open(paths["features"], "w") as fh:
        for row in graph.features:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")
    if graph.labels is not None:
        paths["labels"] = directory / "labels.txt"
        with open(paths["labels"], "w") as fh:
            for lab in graph.labels:
                fh.write(f"{lab}\n")
    return paths


# --- splits ----------------------------------------------------------------

def split(graph: Graph, fractions, seed: int) -> Graph:
    """Assign train/val/test node masks, stratified by label when
    labels exist. Deterministic in ``seed``."""
    tr, va, te = (float(f) for f in fractions)
    if min(tr, va, te) <= 0.0 or tr + va + te > 1.0 + 1e-9:
        raise ConfigError(
            f"fractions must be positive with sum <= 1, got {fractions}")
    rng = np.random.default_rng(seed)
    train = np.zeros(graph.n, dtype=bool)
    val = np.zeros(graph.n, dtype=bool)
    test = np.zeros(graph.n, dtype=bool)

    def assign(indices):
        perm = indices[rng.permutation(indices.size)]
        n_tr = int(round(tr * perm.size))
        n_va = int(round(va * perm.size))
        n_te = int(round(te * perm.size))
        n_te = min(n_te, perm.size - n_tr - n_va)
        train[perm[:n_tr]] = True
        val[perm[n_tr:n_tr + n_va]] = True
        test[perm[n_tr + n_va:n_tr + n_va + n_te]] = True

    if graph.labels is None:
        assign(np.arange(graph.n))
    else:
        counts = np.bincount(graph.labels)
        if counts.size == 0 or counts.min() < 3:
            warnings.warn("a class has fewer nodes than splits; "
                          "falling back to a uniform split")
            assign(np.arange(graph.n))
        else:
            for c in range(counts.size):
                assign(np.flatnonzero(graph.labels == c))
    return graph.with_masks(train, val, test)


@dataclass(frozen=True)
class LinkSplit:
    """Edge-level split for link prediction, with sampled non-edges."""

    train_edges: np.ndarray
    val_edges: np.ndarray
    test_edges: np.ndarray
    val_nonedges: np.ndarray
    test_nonedges: np.ndarray


def split_edges(graph: Graph, fractions=(0.85, 0.05, 0.10),
                seed: int = 0) -> LinkSplit:
    """85/5/10 edge split plus equal-count non-edges for evaluation."""
    tr, va, te = fractions
    if min(tr, va, te) <= 0 or abs(tr + va + te - 1.0) > 1e-9:
        raise ConfigError(f"edge fractions must be positive and sum to 1, "
                          f"got {fractions}")
    if graph.n_edges < 3:
        raise ConfigError("too few edges to split")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(graph.n_edges)
    n_va = max(1, int(round(va * graph.n_edges)))
    n_te = max(1, int(round(te * graph.n_edges)))
    test_e = graph.edges[perm[:n_te]]
    val_e = graph.edges[perm[n_te:n_te + n_va]]
    train_e = graph.edges[perm[n_te + n_va:]]

    def draw_nonedges(count):
        out = set()
        guard = 0
        while len(out) < count:
            guard += 1
            if guard > 1000 * count + 1000:
                raise ConfigError("graph too dense to sample non-edges")
            u = int(rng.integers(0, graph.n))
            v = int(rng.integers(0, graph.n))
            if u == v:
                continue
            a, b = (u, v) if u < v else (v, u)
            if b in graph.neighbor_set(a) or (a, b) in out:
                continue
            out.add((a, b))
        return np.array(sorted(out), dtype=np.int64)

    return LinkSplit(train_e, val_e, test_e,
                     draw_nonedges(val_e.shape[0]),
                     draw_nonedges(test_e.shape[0]))


# --- synthetic graphs -------------------------------------------------------

def generate_synthetic(kind: str, params: dict, seed: int) -> Graph:
    """Deterministic structural testbeds.

    tree: complete ``branching``-ary tree of ``depth`` levels below the
    root; label = level; features = noisy one-hot of level.
    cycle: single n-cycle with alternating labels.
    sbm: ``blocks`` blocks of ``size`` nodes, intra/inter edge
    probabilities ``p_in``/``p_out``; label = block; features = noisy
    block indicator.
    """
    params = dict(params)
    noise = float(params.pop("noise", 0.1))
    rng = np.random.default_rng(seed)
    if kind == "tree":
        depth = int(params.pop("depth", 4))
        branching = int(params.pop("branching", 2))
        _reject_extras(kind, params)
        if depth < 1 or branching < 1:
            raise ConfigError(f"tree needs depth >= 1 and branching >= 1, "
                              f"got depth={depth} branching={branching}")
        levels = [0]
        edges = []
        nodes = [0]
        frontier = [0]
        nxt = 1
        for lvl in range(1, depth + 1):
            new_frontier = []
            for parent in frontier:
                for _ in range(branching):
                    edges.append((parent, nxt))
                    levels.append(lvl)
                    nodes.append(nxt)
                    new_frontier.append(nxt)
                    nxt += 1
            frontier = new_frontier
        n = nxt
        labels = np.array(levels, dtype=np.int64)
        feats = _noisy_onehot(labels, depth + 1, noise, rng)
        return Graph(n, np.array(edges), feats, labels)
    if kind == "cycle":
        n = int(params.pop("n", 8))
        _reject_extras(kind, params)
        if n < 3:
            raise ConfigError(f"cycle needs n >= 3, got {n}")
        edges = [(i, (i + 1) % n) for i in range(n)]
        labels = np.arange(n, dtype=np.int64) % 2
        feats = _noisy_onehot(labels, 2, noise, rng)
        return Graph(n, np.array(edges), feats, labels)
    if kind == "sbm":
        blocks = int(params.pop("blocks", 2))
        size = int(params.pop("size", 50))
        p_in = float(params.pop("p_in", 0.1))
        p_out = float(params.pop("p_out", 0.01))
        _reject_extras(kind, params)
        if blocks < 2 or size < 2 or not (0 <= p_out <= p_in <= 1):
            raise ConfigError(
                f"sbm needs blocks >= 2, size >= 2, 0 <= p_out <= p_in "
                f"<= 1; got blocks={blocks} size={size} p_in={p_in} "
                f"p_out={p_out}")
        n = blocks * size
        labels = np.repeat(np.arange(blocks, dtype=np.int64), size)
        iu, iv = np.triu_indices(n, k=1)
        same = labels[iu] == labels[iv]
        p = np.where(same, p_in, p_out)
        keep = rng.random(p.shape) < p
        edges = np.stack([iu[keep], iv[keep]], axis=1)
        feats = _noisy_onehot(labels, blocks, noise, rng)
        return Graph(n, edges, feats, labels)
    raise ConfigError(f"unknown synthetic kind {kind!r}; expected tree, "
                      f"cycle or sbm")


def _noisy_onehot(labels: np.ndarray, width: int, noise: float,
                  rng: np.random.Generator) -> np.ndarray:
    out = np.zeros((labels.shape[0], width))
    out[np.arange(labels.shape[0]), labels] = 1.0
    return out + noise * rng.standard_normal(out.shape)


def _reject_extras(kind: str, params: dict) -> None:
    if params:
        raise ConfigError(
            f"unknown parameters for {kind}: {sorted(params)}")
