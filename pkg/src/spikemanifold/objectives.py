"""Task heads and losses.

Link prediction scores a pair through a gated mixture over the manifold
components: r(u, v) = log(sum_M g_M(u) exp(-d_M^2(u, v))), where the
gates g_M are softplus-normalized per node. The score is computed as a
difference of two log-sum-exps over the unnormalized gates, which is
both underflow-proof for large distances and exactly zero at u = v.
A margin ranking hinge pushes linked pairs above sampled non-links.

Node classification concatenates the origin-log coordinates of every
component, applies a learned linear map and softmax, and trains with
masked cross-entropy.
"""

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import ops
from .autodiff import Traced
from .errors import DomainError, ShapeError

PROB_FLOOR = 1e-12   # cross-entropy clamp on the true-class probability


@dataclass(frozen=True)
class Triplet:
    """A ranking constraint: anchor-positive is an edge, anchor-negative
    is not."""

    anchor: int
    positive: int
    negative: int


@dataclass(frozen=True)
class GatingHead:
    """Per-component linear maps producing unnormalized gate scores."""

    weights: tuple    # Traced (dim_c, 1) per component
    biases: tuple     # Traced (1,) per component


@dataclass(frozen=True)
class ClassifierHead:
    """Linear map from concatenated tangent features to class logits."""

    w: Traced         # (total_dim, n_classes)
    b: Traced         # (n_classes,)


def spatial_features(state, components):
    """Origin-log coordinates per component, spatial part only."""
    feats = []
    for comp, points in zip(components, state.points):
        kappa = comp.curvature.value
        f = ops.log_from_origin(points, kappa, comp.dim)
        if kappa != 0.0:
            f = ops.slice_cols(f, 1)
        feats.append(f)
    return feats


def _raw_gate_scores(feats, head: GatingHead) -> Traced:
    cols = [ops.add(ops.matmul(f, w), b)
            for f, w, b in zip(feats, head.weights, head.biases)]
    return ops.concat_cols(cols)


def gate_weights(state, head: GatingHead, components) -> Traced:
    """Normalized gate distribution per node, shape (n, components)."""
    sp = ops.softplus(_raw_gate_scores(
        spatial_features(state, components), head))
    inv = ops.reciprocal(ops.tsum(sp, axis=1))
    return ops.mul(sp, ops.stack_cols([inv]))


def pair_score(state, head: GatingHead, components, anchors: np.ndarray,
               others: np.ndarray) -> Traced:
    """r(u, v) per pair; always <= 0, exactly 0 when u = v.

    Computed as lse(log softplus(f) - d^2) - lse(log softplus(f)), the
    gates taken at the anchor node.
    """
    anchors = np.asarray(anchors, dtype=np.int64)
    others = np.asarray(others, dtype=np.int64)
    if anchors.shape != others.shape or anchors.ndim != 1:
        raise ShapeError(
            f"pair index shapes {anchors.shape} vs {others.shape}")
    feats = spatial_features(state, components)
    log_sp = ops.tlog(ops.softplus(_raw_gate_scores(feats, head)))
    lsp_u = ops.gather_rows(log_sp, anchors)

    d2_cols = []
    for comp, points in zip(components, state.points):
        kappa = comp.curvature.value
        xu = ops.gather_rows(points, anchors)
        xv = ops.gather_rows(points, others)
        d2_cols.append(ops.manifold_distsq(xu, xv, kappa))
    d2 = ops.stack_cols(d2_cols)

    return ops.sub(ops.logsumexp_rows(ops.sub(lsp_u, d2)),
                   ops.logsumexp_rows(lsp_u))


def link_margin_loss(state, head: GatingHead, components, triplets,
                     margin: float) -> Traced:
    """Mean hinge max(0, margin - r(u,v+) + r(u,v-)) over the triplets."""
    if margin < 0.0:
        raise DomainError(f"margin must be nonnegative, got {margin}")
    triplets = list(triplets)
    if not triplets:
        warnings.warn("no triplets to score; link loss is 0")
        return ops.constant(0.0, op="empty_link_loss")
    u = np.array([t.anchor for t in triplets], dtype=np.int64)
    vp = np.array([t.positive for t in triplets], dtype=np.int64)
    vn = np.array([t.negative for t in triplets], dtype=np.int64)
    r_pos = pair_score(state, head, components, u, vp)
    r_neg = pair_score(state, head, components, u, vn)
    hinge = ops.relu(ops.add(ops.sub(ops.constant(margin), r_pos), r_neg))
    return ops.tmean(hinge)


def sample_triplets(graph, n_per_edge: int, rng: np.random.Generator,
                    edges=None):
    """One ranking triplet per training edge and negative draw.

    Negatives are uniform over the anchor's non-neighbors. Anchors whose
    non-neighbor set is empty are skipped with a warning.
    """
    if n_per_edge < 1:
        raise DomainError(f"need n_per_edge >= 1, got {n_per_edge}")
    edge_arr = graph.edges if edges is None else np.asarray(edges)
    out = []
    skipped = 0
    for u, v in edge_arr:
        u, v = int(u), int(v)
        banned = graph.neighbor_set(u) | {u}
        free = graph.n - len(banned)
        if free <= 0:
            skipped += 1
            continue
        for _ in range(n_per_edge):
            # rejection sampling; the free set is nonempty
            while True:
                z = int(rng.integers(0, graph.n))
                if z not in banned:
                    break
            out.append(Triplet(u, v, z))
    if skipped:
        warnings.warn(f"{skipped} edges had anchors with no valid "
                      f"negatives and were skipped")
    return out


def classification_probs(state, head: ClassifierHead, components) -> Traced:
    """Softmax class probabilities per node."""
    feats = ops.concat_cols(spatial_features(state, components))
    if feats.value.shape[1] != head.w.value.shape[0]:
        raise ShapeError(
            f"feature width {feats.value.shape[1]} does not match "
            f"classifier input {head.w.value.shape[0]}")
    logits = ops.add(ops.matmul(feats, head.w), head.b)
    return ops.softmax_rows(logits)


def cross_entropy_loss(probs: Traced, labels: np.ndarray,
                       mask: Optional[np.ndarray] = None) -> Traced:
    """Masked mean negative log-likelihood of the true classes."""
    labels = np.asarray(labels, dtype=np.int64)
    n, c = probs.value.shape
    if labels.shape != (n,):
        raise ShapeError(f"labels shape {labels.shape} for {n} nodes")
    idx = np.arange(n) if mask is None else np.flatnonzero(mask)
    if idx.size == 0:
        raise DomainError("empty mask: nothing to average the loss over")
    lab = labels[idx]
    if (lab < 0).any() or (lab >= c).any():
        raise DomainError("label id outside the class range")
    onehot = np.zeros((idx.size, c))
    onehot[np.arange(idx.size), lab] = 1.0
    p_true = ops.rowdot(ops.gather_rows(probs, idx), ops.constant(onehot))
    n_floor = int(np.count_nonzero(p_true.value < PROB_FLOOR))
    if n_floor:
        warnings.warn(f"{n_floor} true-class probabilities below "
                      f"{PROB_FLOOR:g} were clamped before the log")
    return ops.neg(ops.tmean(ops.tlog(ops.clamp_min(p_true, PROB_FLOOR))))
