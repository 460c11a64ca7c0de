"""The full network: input compressor, Riemannian embedding, stacked
spiking attention layers, and task heads.

All learned parameters are Euclidean matrices and vectors (compressor,
queries, gates, classifier); they are tape leaves that persist across
forward passes so the optimizer can update them in place between
epochs.
"""

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import ops
from .autodiff import Traced
from .errors import ConfigError, ShapeError
from .geometry import ProductManifoldSpec
from .layers import (AttentionParams, LayerState, riemannian_embed,
                     spiking_layer_forward)
from .objectives import ClassifierHead, GatingHead
from .optimizer import Param, ParamTag
from .spiking import IFParams


@dataclass(frozen=True)
class ModelConfig:
    geometry: ProductManifoldSpec
    feature_dim: int
    n_classes: Optional[int] = None
    n_layers: int = 2
    time_steps: int = 15
    dropout: float = 0.0
    if_params: IFParams = field(default_factory=IFParams)
    lr: float = 0.003
    geo_step: float = 0.1
    use_tangent_transform: bool = False
    seed: int = 0

    def __post_init__(self):
        if self.feature_dim < 1:
            raise ConfigError(f"feature_dim must be positive, got "
                              f"{self.feature_dim}")
        if self.n_layers < 1:
            raise ConfigError(f"need at least one layer, got "
                              f"{self.n_layers}")
        if self.time_steps < 1:
            raise ConfigError(f"need at least one time step, got "
                              f"{self.time_steps}")
        if self.n_classes is not None and self.n_classes < 2:
            raise ConfigError(f"need at least two classes, got "
                              f"{self.n_classes}")


def _glorot(rng, fan_in, fan_out, shape):
    return rng.standard_normal(shape) * np.sqrt(2.0 / (fan_in + fan_out))


class SpikingManifoldNet:
    """Parameters plus the forward pass over a fixed product geometry."""

    def __init__(self, config: ModelConfig):
        self.config = config
        self.components = config.geometry.components
        self._params = {}
        tag = ParamTag(lr=config.lr, geo_step=config.geo_step)
        rng = np.random.default_rng(np.random.SeedSequence(
            [config.seed, 1]))

        total = config.geometry.total_dim
        self._add("embed.w", _glorot(rng, config.feature_dim, total,
                                     (config.feature_dim, total)), tag)
        self._add("embed.b", np.zeros(total), tag)
        for layer in range(config.n_layers):
            for ci, comp in enumerate(self.components):
                a = comp.ambient_dim
                stem = f"layer{layer}.comp{ci}"
                self._add(f"{stem}.w_query",
                          _glorot(rng, a, a, (a, a)), tag)
                self._add(f"{stem}.b_query", np.zeros(a), tag)
                if config.use_tangent_transform:
                    self._add(f"{stem}.w_tangent",
                              np.eye(a) + 0.01 * rng.standard_normal((a, a)),
                              tag)
        for ci, comp in enumerate(self.components):
            self._add(f"gate.comp{ci}.w",
                      _glorot(rng, comp.dim, 1, (comp.dim, 1)), tag)
            self._add(f"gate.comp{ci}.b", np.zeros(1), tag)
        if config.n_classes is not None:
            self._add("cls.w", _glorot(rng, total, config.n_classes,
                                       (total, config.n_classes)), tag)
            self._add("cls.b", np.zeros(config.n_classes), tag)

    def _add(self, name: str, value: np.ndarray, tag: ParamTag) -> None:
        self._params[name] = Param(name, Traced(value, op=f"param:{name}"),
                                   tag)

    # --- parameter access --------------------------------------------

    def parameters(self):
        return list(self._params.values())

    def param(self, name: str) -> Traced:
        return self._params[name].node

    def export_arrays(self) -> dict:
        return {name: p.node.value.copy()
                for name, p in self._params.items()}

    def load_arrays(self, arrays: dict) -> None:
        missing = set(self._params) - set(arrays)
        if missing:
            raise ConfigError(f"missing parameters: {sorted(missing)}")
        for name, p in self._params.items():
            arr = np.asarray(arrays[name], dtype=np.float64)
            if arr.shape != p.node.value.shape:
                raise ShapeError(
                    f"parameter {name}: shape {arr.shape} does not match "
                    f"{p.node.value.shape}")
            p.node.value = arr.copy()

    # --- heads ---------------------------------------------------------

    def attention_params(self, layer: int):
        out = []
        for ci, comp in enumerate(self.components):
            stem = f"layer{layer}.comp{ci}"
            w_t = None
            if self.config.use_tangent_transform:
                w_t = self.param(f"{stem}.w_tangent")
            gamma = 1.0 / np.sqrt(comp.ambient_dim)
            out.append(AttentionParams(self.param(f"{stem}.w_query"),
                                       self.param(f"{stem}.b_query"),
                                       gamma, w_t))
        return out

    def gating_head(self) -> GatingHead:
        return GatingHead(
            tuple(self.param(f"gate.comp{ci}.w")
                  for ci in range(len(self.components))),
            tuple(self.param(f"gate.comp{ci}.b")
                  for ci in range(len(self.components))))

    def classifier_head(self) -> ClassifierHead:
        if self.config.n_classes is None:
            raise ConfigError("model was built without a classifier")
        return ClassifierHead(self.param("cls.w"), self.param("cls.b"))

    # --- forward ---------------------------------------------------------

    def initial_state(self, features: np.ndarray) -> LayerState:
        """Compress raw features and embed them on every component."""
        if features.shape[1] != self.config.feature_dim:
            raise ShapeError(
                f"features have {features.shape[1]} columns, model "
                f"expects {self.config.feature_dim}")
        x = ops.constant(np.ascontiguousarray(features), op="features")
        z = ops.add(ops.matmul(x, self.param("embed.w")),
                    self.param("embed.b"))
        points = []
        off = 0
        for comp in self.components:
            spatial = ops.slice_cols(z, off, off + comp.dim)
            points.append(riemannian_embed(spatial, comp.curvature.value,
                                           comp.dim))
            off += comp.dim
        return LayerState(points=tuple(points))

    def forward(self, features: np.ndarray, src: np.ndarray,
                dst: np.ndarray, mode: str = "sample",
                training: bool = False,
                rng_spikes: Optional[np.random.Generator] = None,
                rng_dropout: Optional[np.random.Generator] = None
                ) -> LayerState:
        """Run every layer; generators are consumed in layer order."""
        if mode == "sample" and rng_spikes is None:
            raise ConfigError("sample mode needs a spike generator")
        if training and self.config.dropout > 0.0 and rng_dropout is None:
            raise ConfigError("dropout needs a generator when training")
        state = self.initial_state(features)
        for layer in range(self.config.n_layers):
            state = spiking_layer_forward(
                state, src, dst, self.attention_params(layer),
                self.components, self.config.time_steps,
                self.config.if_params, mode, self.config.dropout,
                training, rng_spikes, rng_dropout)
        return state

    def describe(self) -> str:
        return json.dumps({
            "geometry": self.config.geometry.describe(),
            "feature_dim": self.config.feature_dim,
            "n_classes": self.config.n_classes,
            "n_layers": self.config.n_layers,
            "time_steps": self.config.time_steps,
            "parameters": {k: list(v.node.value.shape)
                           for k, v in sorted(self._params.items())},
        }, indent=2)
