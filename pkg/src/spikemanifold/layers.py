"""Network blocks: Riemannian embedding, curvature-aware attention,
tangent-space aggregation, spiking rate coding, and the manifold
nonlinearity.

One layer, per manifold component:

1. attention-weighted aggregation of neighbor logarithms in the tangent
   space at each node, followed by the exponential at that node;
2. rate coding: log at the origin, logistic firing probabilities,
   Bernoulli trains, integrate-and-fire, giving a rate vector per node;
3. the rates return to the manifold through the origin exponential, and
   the tanh nonlinearity is applied in the origin tangent space.

Every exponential is followed by an explicit projection so constraint
drift cannot accumulate across layers. On spheres the rate vector (norm
up to sqrt(dim)) can reach the injectivity radius pi, so re-embedded
tangents are norm-capped just inside it; the cap has an exact adjoint
and registers as a clamp event.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import energy, ops
from .autodiff import Traced
from .errors import ShapeError
from .spiking import (IFParams, traced_expected_rate, traced_if_rate,
                      traced_sample)

SPHERE_CAP_MARGIN = 1e-3   # capped tangent length: (pi - margin) / sqrt(kappa)

MODES = ("sample", "expected", "dense")


@dataclass(frozen=True)
class AttentionParams:
    """Learned query map for one layer and one component."""

    w_query: Traced
    b_query: Traced
    gamma: float
    w_tangent: Optional[Traced] = None   # optional pre-aggregation map

    def __post_init__(self):
        a = self.w_query.value.shape
        if len(a) != 2 or a[0] != a[1] or \
                self.b_query.value.shape != (a[0],):
            raise ShapeError(
                f"query params inconsistent: W {a}, "
                f"b {self.b_query.value.shape}")
        if self.gamma <= 0.0:
            raise ShapeError(f"gamma must be positive, got {self.gamma}")


@dataclass(frozen=True)
class LayerState:
    """Per-component manifold states plus the latest rate signals."""

    points: tuple      # Traced (n, ambient_c) per component
    rates: Optional[tuple] = None   # Traced (n, dim_c) per component

    @property
    def n_nodes(self) -> int:
        return self.points[0].value.shape[0]


def _sphere_cap(kappa: float) -> float:
    return (math.pi - SPHERE_CAP_MARGIN) / math.sqrt(kappa)


def riemannian_embed(spatial: Traced, kappa: float, dim: int) -> Traced:
    """Lift spatial features into the origin tangent space and exp out.

    A zero row maps to the origin. Flat components pass through.
    """
    if spatial.value.shape[1] != dim:
        raise ShapeError(
            f"expected {dim} feature columns, got {spatial.value.shape}")
    if kappa == 0.0:
        return spatial
    if kappa > 0.0:
        spatial = ops.cap_row_norms(spatial, _sphere_cap(kappa))
    t = ops.lift_cols(spatial, 1)
    return ops.manifold_project(ops.exp_from_origin(t, kappa, dim), kappa)


def attention_query(points: Traced, params: AttentionParams,
                    kappa: float, dim: int) -> Traced:
    """Per-node query vector: W_q log_o(s_i) + b_q in ambient coords."""
    base = ops.log_from_origin(points, kappa, dim)
    return ops.add(ops.matmul(base, params.w_query), params.b_query)


def edge_log_tangents(points: Traced, src: np.ndarray, dst: np.ndarray,
                      kappa: float) -> Traced:
    """log at each receiving node of each sending node, one row per edge."""
    s_dst = ops.gather_rows(points, dst)
    s_src = ops.gather_rows(points, src)
    return ops.manifold_log(s_dst, s_src, kappa)


def attention_scores(tangents: Traced, query: Traced, dst: np.ndarray,
                     params: AttentionParams) -> Traced:
    """Scaled tangent-query dot product per edge."""
    q_dst = ops.gather_rows(query, dst)
    return ops.scale(ops.rowdot(tangents, q_dst), params.gamma)


def attention_weights(scores: Traced, dst: np.ndarray, n: int) -> Traced:
    """Softmax over each node's incoming edges; rows sum to one."""
    return ops.segment_softmax(scores, dst, n)


def tangent_aggregate(points: Traced, tangents: Traced, alpha: Traced,
                      dst: np.ndarray, kappa: float) -> Traced:
    """exp at each node of its attention-weighted tangent mixture."""
    n = points.value.shape[0]
    agg = ops.segment_sum(ops.colmul(alpha, tangents), dst, n)
    out = ops.manifold_exp(points, agg, kappa)
    if kappa == 0.0:
        return out
    return ops.manifold_project(out, kappa)


def manifold_nonlinearity(point: Traced, kappa: float, dim: int) -> Traced:
    """tanh applied in the origin tangent space: exp_o(tanh(log_o(p))).

    Contraction: |tanh(x)| <= |x| per coordinate, so the output is never
    farther from the origin than the input.
    """
    t = ops.tanh(ops.log_from_origin(point, kappa, dim))
    if kappa == 0.0:
        return t
    return ops.manifold_project(ops.exp_from_origin(t, kappa, dim), kappa)


def spiking_layer_forward(state: LayerState, src: np.ndarray,
                          dst: np.ndarray, comp_params, components,
                          steps: int, if_params: IFParams, mode: str,
                          dropout_rate: float, training: bool,
                          rng_spikes, rng_dropout) -> LayerState:
    """One full layer over all components.

    Args:
        state: previous layer state.
        src, dst: directed message edges (both directions of each
            undirected edge, self-loops for isolated nodes).
        comp_params: AttentionParams per component.
        components: ManifoldComponent sequence (curvature and dim).
        steps: spike train length.
        if_params: integrate-and-fire constants.
        mode: "sample" (training default), "expected" (smooth stand-in
            for gradient checks), or "dense" (expected forward plus
            dense-integration energy accounting).
        dropout_rate: dropout on tangent features before aggregation.
        rng_spikes, rng_dropout: generators consumed in component order.
    """
    if mode not in MODES:
        raise ShapeError(f"unknown mode {mode!r}; expected one of {MODES}")
    n = state.n_nodes
    out_points = []
    out_rates = []
    for comp, params, points in zip(components, comp_params, state.points):
        kappa = comp.curvature.value
        dim = comp.dim

        q = attention_query(points, params, kappa, dim)
        tang = edge_log_tangents(points, src, dst, kappa)
        if params.w_tangent is not None:
            tang = ops.matmul(tang, params.w_tangent)
        scores = attention_scores(tang, q, dst, params)
        alpha = attention_weights(scores, dst, n)
        tang = ops.dropout(tang, dropout_rate, rng_dropout, training)
        agg = tangent_aggregate(points, tang, alpha, dst, kappa)

        feats = ops.log_from_origin(agg, kappa, dim)
        if kappa != 0.0:
            feats = ops.slice_cols(feats, 1)
        probs = ops.sigmoid(feats)
        if mode == "sample":
            bits = traced_sample(probs, steps, rng_spikes)
            rates = traced_if_rate(bits, if_params)
        else:
            rates = traced_expected_rate(probs)
            if mode == "dense":
                # dense integration: one MAC per step to update the
                # potential and one to accumulate the readout
                energy.count_macs(2 * n * dim * steps)

        point = riemannian_embed(rates, kappa, dim)
        out_points.append(manifold_nonlinearity(point, kappa, dim))
        out_rates.append(rates)
    return LayerState(points=tuple(out_points), rates=tuple(out_rates))
