"""Training and evaluation driver.

Runs full-batch epochs (forward, loss, backward, geometry-aware SGD
step) for node classification or link prediction, tracks the
best-validation parameters, estimates theoretical energy for the
trained network, and writes a schema-versioned JSON document.

Every random choice is drawn from a generator seeded by (seed, role,
epoch), so a (config, seed) pair fully determines every number in the
output except the wall clock.
"""

import json
import time
import warnings
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__, energy, kernel_backend
from .autodiff import backward
from .errors import ConfigError, NumericError
from .geometry import CONSTRAINT_TOL, parse_geometry_spec
from .graphdata import (Graph, generate_synthetic, load_dataset,
                        message_edges, split, split_edges)
from .layers import MODES
from .model import ModelConfig, SpikingManifoldNet
from .objectives import (classification_probs, cross_entropy_loss,
                         link_margin_loss, sample_triplets)
from .optimizer import RSGD
from .spiking import IFParams

SCHEMA_VERSION = 1

# roles for seeding independent generator streams
_STREAM_INIT = 1
_STREAM_TRIPLETS = 2
_STREAM_SPIKES = 3
_STREAM_DROPOUT = 4
_STREAM_VAL = 5
_STREAM_FINAL = 6
_STREAM_ENERGY = 7


def _rng(seed: int, role: int, epoch: Optional[int] = None):
    entropy = [seed, role] if epoch is None else [seed, role, epoch]
    return np.random.default_rng(np.random.SeedSequence(entropy))


@dataclass(frozen=True)
class RunConfig:
    """Everything a run depends on besides the dataset files."""

    task: str = "nc"
    geometry: str = "h32"
    time_steps: int = 15
    lr: float = 0.003
    geo_step: float = 0.1
    margin: float = 0.1
    epochs: int = 100
    seed: int = 0
    dataset: Optional[str] = None
    synthetic: Optional[str] = None
    dropout: float = 0.1
    n_layers: int = 2
    mode: str = "sample"
    negatives_per_edge: int = 1
    node_fractions: tuple = (0.6, 0.2, 0.2)
    edge_fractions: tuple = (0.85, 0.05, 0.10)
    e_mac_pj: float = energy.E_MAC_PJ
    e_ac_pj: float = energy.E_AC_PJ
    check_every: int = 0

    def __post_init__(self):
        if self.task not in ("nc", "lp"):
            raise ConfigError(f"task must be nc or lp, got {self.task!r}")
        if (self.dataset is None) == (self.synthetic is None):
            raise ConfigError(
                "exactly one of dataset and synthetic must be set")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.time_steps < 1:
            raise ConfigError(
                f"time_steps must be >= 1, got {self.time_steps}")
        if self.mode not in MODES:
            raise ConfigError(
                f"mode must be one of {MODES}, got {self.mode!r}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(
                f"dropout must be in [0, 1), got {self.dropout}")
        if self.margin < 0.0:
            raise ConfigError(f"margin must be >= 0, got {self.margin}")
        if self.lr <= 0.0 or self.geo_step <= 0.0:
            raise ConfigError("lr and geo_step must be positive")
        if self.negatives_per_edge < 1:
            raise ConfigError("negatives_per_edge must be >= 1")
        if self.e_mac_pj <= 0.0 or self.e_ac_pj <= 0.0:
            raise ConfigError("energy constants must be positive")
        if self.check_every < 0:
            raise ConfigError("check_every must be >= 0")
        parse_geometry_spec(self.geometry)

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out


@dataclass(frozen=True)
class EnergyReport:
    """Operation counts of one forward pass, priced per operation."""

    spike_count: int
    mac_count: int
    e_ac: float
    e_mac: float

    @property
    def total_mj(self) -> float:
        return (self.spike_count * self.e_ac
                + self.mac_count * self.e_mac) * 1e-9

    def to_dict(self) -> dict:
        return {"spike_count": self.spike_count,
                "mac_count": self.mac_count,
                "e_ac_pj": self.e_ac,
                "e_mac_pj": self.e_mac,
                "total_mj": self.total_mj}


@dataclass
class RunResult:
    config: RunConfig
    model: SpikingManifoldNet
    graph: Graph
    link: Optional[object]
    trace: list
    best_epoch: Optional[int]
    aborted_epoch: Optional[int]
    src: np.ndarray
    dst: np.ndarray


def parse_synthetic_spec(text: str):
    """'kind' or 'kind:key=val,key=val' -> (kind, params)."""
    kind, _, tail = text.partition(":")
    kind = kind.strip()
    if not kind:
        raise ConfigError(f"empty synthetic kind in {text!r}")
    params = {}
    if tail.strip():
        for item in tail.split(","):
            key, sep, val = item.partition("=")
            key, val = key.strip(), val.strip()
            if not sep or not key or not val:
                raise ConfigError(
                    f"bad synthetic parameter {item!r} in {text!r}; "
                    f"expected key=value")
            try:
                params[key] = int(val)
            except ValueError:
                try:
                    params[key] = float(val)
                except ValueError:
                    raise ConfigError(
                        f"synthetic parameter {key}={val!r} is not "
                        f"a number") from None
    return kind, params


def load_graph(config: RunConfig) -> Graph:
    if config.synthetic is not None:
        kind, params = parse_synthetic_spec(config.synthetic)
        return generate_synthetic(kind, params, config.seed)
    root = Path(config.dataset)
    labels = root / "labels.txt"
    return load_dataset(root / "edges.txt", root / "features.csv",
                        labels if labels.exists() else None)


def _build_model(config: RunConfig, graph: Graph) -> SpikingManifoldNet:
    spec = parse_geometry_spec(config.geometry)
    n_classes = None
    if config.task == "nc":
        if graph.labels is None:
            raise ConfigError("node classification needs labels")
        n_classes = graph.n_classes()
    return SpikingManifoldNet(ModelConfig(
        geometry=spec, feature_dim=graph.feature_dim,
        n_classes=n_classes, n_layers=config.n_layers,
        time_steps=config.time_steps, dropout=config.dropout,
        if_params=IFParams(), lr=config.lr, geo_step=config.geo_step,
        seed=config.seed))


def _check_on_manifold(state, components) -> None:
    for comp, points in zip(components, state.points):
        kappa = comp.curvature.value
        if kappa == 0.0:
            continue
        x = points.value
        inner = np.einsum("ij,ij->i", x, x)
        if kappa < 0.0:
            inner -= 2.0 * x[:, 0] ** 2
        worst = float(np.abs(kappa * inner - 1.0).max(initial=0.0))
        if worst > CONSTRAINT_TOL:
            raise NumericError(
                f"state drifted off the manifold: constraint violation "
                f"{worst:.3e} exceeds {CONSTRAINT_TOL:g}")


def accuracy(pred: np.ndarray, labels: np.ndarray,
             mask: np.ndarray) -> float:
    idx = np.flatnonzero(mask)
    if idx.size == 0:
        raise ConfigError("empty evaluation mask")
    return float(np.mean(pred[idx] == labels[idx]))


def ranking_auc(pos_scores: np.ndarray, neg_scores: np.ndarray) -> float:
    """Probability a positive outranks a negative; ties count half."""
    pos = np.asarray(pos_scores, dtype=np.float64).ravel()
    neg = np.asarray(neg_scores, dtype=np.float64).ravel()
    if pos.size == 0 or neg.size == 0:
        raise ConfigError("AUC needs at least one score on each side")
    both = np.concatenate([pos, neg])
    order = np.argsort(both, kind="mergesort")
    ranks = np.empty(both.size)
    sorted_vals = both[order]
    i = 0
    while i < both.size:
        j = i
        while j + 1 < both.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0   # average 1-based rank
        i = j + 1
    rank_sum = float(ranks[:pos.size].sum())
    n_p, n_n = pos.size, neg.size
    return (rank_sum - n_p * (n_p + 1) / 2.0) / (n_p * n_n)


def _forward(model, graph_src, graph_dst, features, config,
             training: bool, rng_spikes, rng_dropout=None):
    return model.forward(features, graph_src, graph_dst,
                         mode=config.mode, training=training,
                         rng_spikes=rng_spikes, rng_dropout=rng_dropout)


def _pair_scores(model, state, anchors, others):
    from .objectives import pair_score
    return pair_score(state, model.gating_head(), model.components,
                      anchors, others).value


def evaluate(model: SpikingManifoldNet, graph: Graph, task: str,
             config: RunConfig, link=None, which: str = "test",
             rng=None) -> float:
    """Test-time metric: accuracy for nc, ranking AUC for lp.

    ``graph`` must be the message graph the model was trained on (for
    lp that is the graph restricted to training edges).
    """
    if rng is None:
        rng = _rng(config.seed, _STREAM_FINAL)
    src, dst = message_edges(graph)
    state = _forward(model, src, dst, graph.features, config,
                     training=False, rng_spikes=rng)
    if task == "nc":
        mask = getattr(graph, f"{which}_mask")
        if mask is None or not mask.any():
            raise ConfigError(f"graph has no {which} nodes to evaluate")
        probs = classification_probs(state, model.classifier_head(),
                                     model.components)
        pred = np.argmax(probs.value, axis=1)
        return accuracy(pred, graph.labels, mask)
    if task == "lp":
        if link is None:
            raise ConfigError("link prediction evaluation needs the "
                              "edge split")
        if which == "train":
            raise ConfigError("no non-edges are sampled for the "
                              "training split")
        pos = getattr(link, f"{which}_edges")
        neg = getattr(link, f"{which}_nonedges")
        pos_r = _pair_scores(model, state, pos[:, 0], pos[:, 1])
        neg_r = _pair_scores(model, state, neg[:, 0], neg[:, 1])
        return ranking_auc(pos_r, neg_r)
    raise ConfigError(f"unknown task {task!r}")


def run_train(config: RunConfig) -> RunResult:
    """Full-batch training; retains the best-validation parameters."""
    graph = load_graph(config)
    link = None
    if config.task == "nc":
        if graph.train_mask is None:
            graph = split(graph, config.node_fractions, config.seed)
        message_graph = graph
    else:
        link = split_edges(graph, config.edge_fractions, config.seed)
        # transductive protocol: the full adjacency carries messages;
        # held-out edges are excluded from the loss and scored after
        message_graph = graph
    src, dst = message_edges(message_graph)

    model = _build_model(config, graph)
    opt = RSGD(model.parameters())

    trace = []
    best_metric = -np.inf
    best_epoch = None
    best_arrays = model.export_arrays()
    aborted_epoch = None

    for epoch in range(config.epochs):
        snapshot = model.export_arrays()
        rng_spk = _rng(config.seed, _STREAM_SPIKES, epoch)
        rng_drop = _rng(config.seed, _STREAM_DROPOUT, epoch)
        try:
            state = _forward(model, src, dst, graph.features, config,
                             training=True, rng_spikes=rng_spk,
                             rng_dropout=rng_drop)
            if config.check_every and epoch % config.check_every == 0:
                _check_on_manifold(state, model.components)
            if config.task == "nc":
                probs = classification_probs(
                    state, model.classifier_head(), model.components)
                loss = cross_entropy_loss(probs, graph.labels,
                                          graph.train_mask)
            else:
                triplets = sample_triplets(
                    message_graph, config.negatives_per_edge,
                    _rng(config.seed, _STREAM_TRIPLETS, epoch),
                    edges=link.train_edges)
                loss = link_margin_loss(state, model.gating_head(),
                                        model.components, triplets,
                                        config.margin)
            store = backward(loss)
            opt.step(store)
            val = evaluate(model, message_graph, config.task, config,
                           link=link, which="val",
                           rng=_rng(config.seed, _STREAM_VAL, epoch))
        except NumericError as exc:
            warnings.warn(f"epoch {epoch}: {exc}; restoring the last "
                          f"good parameters and stopping")
            model.load_arrays(snapshot)
            aborted_epoch = epoch
            break
        trace.append({"epoch": epoch, "loss": float(loss.value),
                      "val_metric": float(val)})
        if val > best_metric:
            best_metric = val
            best_epoch = epoch
            best_arrays = model.export_arrays()

    if config.epochs > 0 and best_epoch is not None:
        model.load_arrays(best_arrays)
    return RunResult(config, model, message_graph, link, trace,
                     best_epoch, aborted_epoch, src, dst)


def estimate_energy(result: RunResult):
    """Counts one instrumented forward pass per mode and prices it."""
    config = result.config
    reports = {}
    for mode in ("sample", "dense"):
        meter = energy.push_meter(energy.EnergyMeter())
        try:
            result.model.forward(result.graph.features, result.src,
                                 result.dst, mode=mode, training=False,
                                 rng_spikes=_rng(config.seed,
                                                 _STREAM_ENERGY))
        finally:
            energy.pop_meter()
        key = "spiking" if mode == "sample" else "dense"
        reports[key] = EnergyReport(meter.acs, meter.macs,
                                    config.e_ac_pj, config.e_mac_pj)
    return reports


def emit_results(result: RunResult, reports: dict,
                 final_metrics: dict, wall_clock_sec: float,
                 path=None) -> dict:
    """Assemble (and optionally write) the schema-versioned document."""
    doc = {
        "schema_version": SCHEMA_VERSION,
        "package_version": __version__,
        "kernel_backend": kernel_backend,
        "config": result.config.to_dict(),
        "seed": result.config.seed,
        "trace": result.trace,
        "best_epoch": result.best_epoch,
        "aborted_epoch": result.aborted_epoch,
        "final_metrics": final_metrics,
        "energy": {k: r.to_dict() for k, r in reports.items()},
        "wall_clock_sec": wall_clock_sec,
    }
    if path is not None:
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    return doc


def run_and_report(config: RunConfig, out_path=None) -> dict:
    """The whole pipeline: train, evaluate, price energy, emit JSON."""
    t0 = time.time()
    result = run_train(config)
    final = {}
    for which in ("train", "val", "test"):
        try:
            final[which] = evaluate(result.model, result.graph,
                                    config.task, config,
                                    link=result.link, which=which)
        except ConfigError:
            final[which] = None
    final["metric"] = "accuracy" if config.task == "nc" else "auc"
    reports = estimate_energy(result)
    return emit_results(result, reports, final,
                        wall_clock_sec=time.time() - t0, path=out_path)
