"""Riemannian SGD.

Euclidean parameters take plain gradient steps. Manifold-valued
parameters correct the ambient gradient by the inverse metric (a sign
flip of the time-like coordinate on hyperboloids), project it to the
tangent space, retract along the geodesic with the geometric step size,
and re-project to scrub float drift. No momentum and no transport: the
update is memoryless, so nothing needs to be carried between tangent
spaces.
"""

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._kernels import backend as _K
from .autodiff import GradientStore, Traced
from .errors import ConfigError, ShapeError
from .geometry import Curvature, ManifoldPoint, TangentVector

EUCLIDEAN = "euclidean"
MANIFOLD = "manifold"


@dataclass(frozen=True)
class ParamTag:
    """How one parameter is updated."""

    kind: str = EUCLIDEAN
    curvature: Optional[Curvature] = None
    lr: float = 0.003
    geo_step: float = 0.1

    def __post_init__(self):
        if self.kind not in (EUCLIDEAN, MANIFOLD):
            raise ConfigError(f"unknown parameter kind {self.kind!r}")
        if self.kind == MANIFOLD and self.curvature is None:
            raise ConfigError("manifold parameters need a curvature")
        if self.lr <= 0.0 or self.geo_step <= 0.0:
            raise ConfigError("step sizes must be positive")


@dataclass(frozen=True, eq=False)
class Param:
    """A named leaf of the tape with its update rule."""

    name: str
    node: Traced
    tag: ParamTag


def _as_rows(x: np.ndarray):
    if x.ndim == 1:
        return x[None, :], True
    if x.ndim == 2:
        return x, False
    raise ShapeError(f"manifold parameters must be vectors or row "
                     f"matrices, got shape {x.shape}")


def riemannian_grad(x, euclid_grad, kappa: Optional[float] = None):
    """Tangent-space gradient from an ambient coordinate gradient.

    Negative curvature first flips the sign of the time-like gradient
    component (the inverse metric), then projects; positive curvature
    just projects; flat space is the identity. Accepts a ManifoldPoint
    (returns a TangentVector) or plain arrays with ``kappa`` given.
    """
    if isinstance(x, ManifoldPoint):
        t = riemannian_grad(x.coords, np.asarray(euclid_grad, float),
                            x.curvature.value)
        return TangentVector(t, x)
    if kappa is None:
        raise ConfigError("kappa is required for array input")
    g = np.ascontiguousarray(euclid_grad, dtype=np.float64)
    if kappa == 0.0:
        return g.copy()
    xr, was_vec = _as_rows(np.ascontiguousarray(x, dtype=np.float64))
    gr, _ = _as_rows(g)
    if gr.shape != xr.shape:
        raise ShapeError(f"gradient shape {g.shape} does not match "
                         f"parameter shape {np.shape(x)}")
    h = gr.copy()
    if kappa < 0.0:
        h[:, 0] = -h[:, 0]
    t = _K.project_tangent(xr, h, kappa)
    return t[0] if was_vec else t


def rsgd_step(x, grad, tag: ParamTag):
    """One update; returns the new parameter value (input untouched).

    Non-finite gradients skip the step with a warning rather than
    poisoning the parameter.
    """
    x = np.asarray(x, dtype=np.float64)
    g = np.asarray(grad, dtype=np.float64)
    if g.shape != x.shape:
        raise ShapeError(f"gradient shape {g.shape} does not match "
                         f"parameter shape {x.shape}")
    if not np.isfinite(g).all():
        warnings.warn("non-finite gradient; step skipped")
        return x.copy()
    if tag.kind == EUCLIDEAN:
        return x - tag.lr * g
    kappa = tag.curvature.value
    if kappa == 0.0:
        return x - tag.lr * g
    xr, was_vec = _as_rows(x)
    rg = riemannian_grad(xr, _as_rows(g)[0], kappa)
    y, _u = _K.expmap(xr, -tag.geo_step * rg, kappa)
    y, _aux = _K.project_point(y, kappa)   # scrub retraction drift
    return y[0] if was_vec else y


class RSGD:
    """Applies rsgd_step to a parameter collection from a GradientStore."""

    def __init__(self, params):
        self.params = list(params)
        names = [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate parameter names")

    def step(self, store: GradientStore) -> None:
        for p in self.params:
            g = store.get(p.node)
            if g is None:
                continue   # parameter did not influence this loss
            p.node.value = rsgd_step(p.node.value, g, p.tag)
