"""Traced operations: the vocabulary the network is written in.

Every function takes and returns ``Traced`` nodes (scalars may be plain
floats) and registers the exact adjoint with the tape, except where a
straight-through rule is documented. Geometry ops delegate their math
to the active kernel backend and share domain policy with the scalar
API in ``geometry``.
"""

import numpy as np

from . import energy, geometry
from ._kernels import backend as _K
from .autodiff import Traced
from .errors import ConfigError, ShapeError


def constant(value, op="const") -> Traced:
    return Traced(np.asarray(value, dtype=np.float64), op=op)


def _unbroadcast(g, shape):
    """Sum a broadcast gradient back down to ``shape``."""
    g = np.asarray(g, dtype=np.float64)
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g.reshape(shape)


def add(a: Traced, b: Traced) -> Traced:
    return Traced(a.value + b.value,
                  ((a, lambda g: _unbroadcast(g, a.value.shape)),
                   (b, lambda g: _unbroadcast(g, b.value.shape))),
                  op="add")


def sub(a: Traced, b: Traced) -> Traced:
    return Traced(a.value - b.value,
                  ((a, lambda g: _unbroadcast(g, a.value.shape)),
                   (b, lambda g: _unbroadcast(-g, b.value.shape))),
                  op="sub")


def neg(a: Traced) -> Traced:
    return Traced(-a.value, ((a, lambda g: -g),), op="neg")


def mul(a: Traced, b: Traced) -> Traced:
    av, bv = a.value, b.value
    return Traced(av * bv,
                  ((a, lambda g: _unbroadcast(g * bv, av.shape)),
                   (b, lambda g: _unbroadcast(g * av, bv.shape))),
                  op="mul")


def scale(a: Traced, c: float) -> Traced:
    c = float(c)
    return Traced(c * a.value, ((a, lambda g: c * g),), op="scale")


def matmul(a: Traced, b: Traced) -> Traced:
    """2-D matrix product; counts its multiply-accumulates."""
    av, bv = a.value, b.value
    if av.ndim != 2 or bv.ndim != 2 or av.shape[1] != bv.shape[0]:
        raise ShapeError(f"matmul shapes {av.shape} and {bv.shape}")
    energy.count_macs(av.shape[0] * av.shape[1] * bv.shape[1])
    return Traced(av @ bv,
                  ((a, lambda g: g @ bv.T),
                   (b, lambda g: av.T @ g)),
                  op="matmul")


def rowdot(a: Traced, b: Traced) -> Traced:
    """Per-row Euclidean dot product of two (m, a) arrays."""
    av, bv = a.value, b.value
    if av.shape != bv.shape or av.ndim != 2:
        raise ShapeError(f"rowdot shapes {av.shape} and {bv.shape}")
    energy.count_macs(av.size)
    return Traced(np.einsum("ij,ij->i", av, bv),
                  ((a, lambda g: g[:, None] * bv),
                   (b, lambda g: g[:, None] * av)),
                  op="rowdot")


def colmul(w: Traced, x: Traced) -> Traced:
    """Scale each row of x by the matching entry of w: (m,) times (m, a)."""
    wv, xv = w.value, x.value
    if wv.ndim != 1 or xv.ndim != 2 or wv.shape[0] != xv.shape[0]:
        raise ShapeError(f"colmul shapes {wv.shape} and {xv.shape}")
    energy.count_macs(xv.size)
    return Traced(wv[:, None] * xv,
                  ((w, lambda g: np.einsum("ij,ij->i", g, xv)),
                   (x, lambda g: wv[:, None] * g)),
                  op="colmul")


def tsum(x: Traced, axis=None) -> Traced:
    xv = x.value

    def vjp(g):
        if axis is None:
            return np.broadcast_to(g, xv.shape).copy()
        return np.broadcast_to(np.expand_dims(g, axis), xv.shape).copy()

    return Traced(xv.sum(axis=axis), ((x, vjp),), op="sum")


def tmean(x: Traced, axis=None) -> Traced:
    xv = x.value
    n = xv.size if axis is None else xv.shape[axis]
    return scale(tsum(x, axis=axis), 1.0 / n)


def reciprocal(x: Traced) -> Traced:
    xv = x.value
    out = 1.0 / xv
    return Traced(out, ((x, lambda g: -g * out * out),), op="reciprocal")


def sigmoid(x: Traced) -> Traced:
    xv = x.value
    out = np.empty_like(xv)
    pos = xv >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-xv[pos]))
    ex = np.exp(xv[~pos])
    out[~pos] = ex / (1.0 + ex)
    return Traced(out, ((x, lambda g: g * out * (1.0 - out)),),
                  op="sigmoid")


def tanh(x: Traced) -> Traced:
    out = np.tanh(x.value)
    return Traced(out, ((x, lambda g: g * (1.0 - out * out)),), op="tanh")


def texp(x: Traced) -> Traced:
    out = np.exp(x.value)
    return Traced(out, ((x, lambda g: g * out),), op="exp")


def tlog(x: Traced) -> Traced:
    xv = x.value
    return Traced(np.log(xv), ((x, lambda g: g / xv),), op="log")


def softplus(x: Traced) -> Traced:
    xv = x.value
    out = np.logaddexp(0.0, xv)
    sig = np.empty_like(xv)
    pos = xv >= 0
    sig[pos] = 1.0 / (1.0 + np.exp(-xv[pos]))
    ex = np.exp(xv[~pos])
    sig[~pos] = ex / (1.0 + ex)
    return Traced(out, ((x, lambda g: g * sig),), op="softplus")


def relu(x: Traced) -> Traced:
    xv = x.value
    mask = xv > 0.0
    return Traced(np.where(mask, xv, 0.0),
                  ((x, lambda g: np.where(mask, g, 0.0)),), op="relu")


def clamp_min(x: Traced, floor: float) -> Traced:
    """Lower-bound x, recording material clamps; gradient is blocked on
    clamped entries."""
    xv = x.value
    clamped = xv < floor
    n = int(np.count_nonzero(clamped))
    if n:
        from .autodiff import record_clamp
        record_clamp(n)
    return Traced(np.where(clamped, floor, xv),
                  ((x, lambda g: np.where(clamped, 0.0, g)),),
                  op="clamp_min")


def concat_cols(parts) -> Traced:
    parts = list(parts)
    widths = [p.value.shape[1] for p in parts]
    offs = np.concatenate([[0], np.cumsum(widths)])

    def make_vjp(i):
        return lambda g: g[:, offs[i]:offs[i + 1]]

    return Traced(np.concatenate([p.value for p in parts], axis=1),
                  tuple((p, make_vjp(i)) for i, p in enumerate(parts)),
                  op="concat_cols")


def slice_cols(x: Traced, start: int, stop=None) -> Traced:
    xv = x.value
    stop = xv.shape[1] if stop is None else stop

    def vjp(g):
        out = np.zeros_like(xv)
        out[:, start:stop] = g
        return out

    return Traced(xv[:, start:stop].copy(), ((x, vjp),), op="slice_cols")


def lift_cols(x: Traced, pad: int = 1) -> Traced:
    """Prepend ``pad`` zero columns: spatial tangent coordinates become
    an ambient tangent at the origin."""
    xv = x.value
    out = np.zeros((xv.shape[0], xv.shape[1] + pad))
    out[:, pad:] = xv
    return Traced(out, ((x, lambda g: g[:, pad:].copy()),), op="lift_cols")


def gather_rows(x: Traced, idx: np.ndarray) -> Traced:
    idx = np.asarray(idx, dtype=np.int64)
    xv = x.value

    def vjp(g):
        out = np.zeros_like(xv)
        np.add.at(out, idx, g)
        return out

    return Traced(xv[idx], ((x, vjp),), op="gather_rows")


def segment_sum(x: Traced, seg: np.ndarray, n: int) -> Traced:
    seg = np.asarray(seg, dtype=np.int64)
    xv = x.value
    out = np.zeros((n,) + xv.shape[1:])
    np.add.at(out, seg, xv)
    return Traced(out, ((x, lambda g: g[seg]),), op="segment_sum")


def segment_softmax(scores: Traced, seg: np.ndarray, n: int) -> Traced:
    """Softmax within each segment of a flat score vector."""
    seg = np.asarray(seg, dtype=np.int64)
    sv = scores.value
    if sv.ndim != 1:
        raise ShapeError(f"segment_softmax needs 1-D scores, got {sv.shape}")
    mx = np.full(n, -np.inf)
    np.maximum.at(mx, seg, sv)
    e = np.exp(sv - mx[seg])
    denom = np.bincount(seg, weights=e, minlength=n)
    alpha = e / denom[seg]

    def vjp(g):
        s = np.bincount(seg, weights=alpha * g, minlength=n)
        return alpha * (g - s[seg])

    return Traced(alpha, ((scores, vjp),), op="segment_softmax")


def softmax_rows(x: Traced) -> Traced:
    xv = x.value
    sh = xv - xv.max(axis=1, keepdims=True)
    e = np.exp(sh)
    out = e / e.sum(axis=1, keepdims=True)

    def vjp(g):
        dot = (g * out).sum(axis=1, keepdims=True)
        return out * (g - dot)

    return Traced(out, ((x, vjp),), op="softmax_rows")


def stack_cols(parts) -> Traced:
    """Stack 1-D (m,) vectors into an (m, k) matrix."""
    parts = list(parts)

    def make_vjp(i):
        return lambda g: g[:, i]

    return Traced(np.stack([p.value for p in parts], axis=1),
                  tuple((p, make_vjp(i)) for i, p in enumerate(parts)),
                  op="stack_cols")


def logsumexp_rows(x: Traced) -> Traced:
    """log(sum(exp)) over axis 1, max-shifted for stability."""
    xv = x.value
    mx = xv.max(axis=1, keepdims=True)
    e = np.exp(xv - mx)
    s = e.sum(axis=1)
    out = mx[:, 0] + np.log(s)
    soft = e / s[:, None]
    return Traced(out, ((x, lambda g: g[:, None] * soft),),
                  op="logsumexp_rows")


def cap_row_norms(x: Traced, cap: float) -> Traced:
    """Rescale rows with Euclidean norm above ``cap`` down to it.

    Keeps sphere-bound tangents inside the injectivity radius. Capping
    is recorded as a clamp event so finite-difference checks skip
    coordinates that straddle the boundary.
    """
    xv = x.value
    n = np.sqrt(np.einsum("ij,ij->i", xv, xv))
    active = n > cap
    count = int(np.count_nonzero(active))
    if count == 0:
        return x
    from .autodiff import record_clamp
    record_clamp(count)
    n_act = np.where(active, n, 1.0)
    factor = np.where(active, cap / n_act, 1.0)

    def vjp(g):
        out = factor[:, None] * g
        gx = np.einsum("ij,ij->i", g, xv)
        corr = np.where(active, cap * gx / (n_act ** 3), 0.0)
        return out - corr[:, None] * xv

    return Traced(factor[:, None] * xv, ((x, vjp),), op="cap_row_norms")


def dropout(x: Traced, p: float, rng: np.random.Generator,
            training: bool) -> Traced:
    """Inverted dropout; identity when not training or p = 0."""
    if not 0.0 <= p < 1.0:
        raise ConfigError(f"dropout rate must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return x
    keep = rng.random(x.value.shape) >= p
    factor = keep / (1.0 - p)
    return Traced(x.value * factor, ((x, lambda g: g * factor),),
                  op="dropout")


# --- geometry ops ---------------------------------------------------------

def manifold_exp(x: Traced, t: Traced, kappa: float) -> Traced:
    """Batched geodesic exponential with the exact adjoint."""
    y, u = _K.expmap(x.value, t.value, kappa)
    geometry.check_injectivity(u, kappa, "manifold_exp")

    def vjp_x(g):
        return _K.expmap_vjp(x.value, t.value, kappa, g)[0]

    def vjp_t(g):
        return _K.expmap_vjp(x.value, t.value, kappa, g)[1]

    return Traced(y, ((x, vjp_x), (t, vjp_t)), op="manifold_exp")


def manifold_log(x: Traced, y: Traced, kappa: float) -> Traced:
    """Batched geodesic logarithm with the exact adjoint."""
    t, w = _K.logmap(x.value, y.value, kappa)
    geometry.check_w(w, kappa, "manifold_log")

    def vjp_x(g):
        return _K.logmap_vjp(x.value, y.value, kappa, g)[0]

    def vjp_y(g):
        return _K.logmap_vjp(x.value, y.value, kappa, g)[1]

    return Traced(t, ((x, vjp_x), (y, vjp_y)), op="manifold_log")


def manifold_distsq(x: Traced, y: Traced, kappa: float) -> Traced:
    """Batched squared geodesic distance; smooth at coincident points."""
    d, w = _K.distance(x.value, y.value, kappa)
    geometry.check_w(w, kappa, "manifold_distsq", antipodal_ok=True)

    def vjp_x(g):
        return _K.distsq_vjp(x.value, y.value, kappa, g)[0]

    def vjp_y(g):
        return _K.distsq_vjp(x.value, y.value, kappa, g)[1]

    return Traced(d * d, ((x, vjp_x), (y, vjp_y)), op="manifold_distsq")


def manifold_project_tangent(x: Traced, raw: Traced, kappa: float) -> Traced:
    """Batched tangent projection at x with adjoints for both inputs."""
    t = _K.project_tangent(x.value, raw.value, kappa)

    def vjp_x(g):
        return _K.project_tangent_vjp(x.value, raw.value, kappa, g)[0]

    def vjp_raw(g):
        return _K.project_tangent_vjp(x.value, raw.value, kappa, g)[1]

    return Traced(t, ((x, vjp_x), (raw, vjp_raw)),
                  op="manifold_project_tangent")


def manifold_project(x: Traced, kappa: float) -> Traced:
    """Batched projection onto the manifold (drift cleanup after exp)."""
    y, _aux = _K.project_point(x.value, kappa)
    return Traced(
        y, ((x, lambda g: _K.project_point_vjp(x.value, kappa, g)),),
        op="manifold_project")


def log_from_origin(y: Traced, kappa: float, dim: int) -> Traced:
    """Logarithm at the canonical origin, as ambient coordinates."""
    n = y.value.shape[0]
    if kappa == 0.0:
        return y
    o = constant(geometry.origin_rows(n, dim, kappa), op="origin")
    return manifold_log(o, y, kappa)


def exp_from_origin(t: Traced, kappa: float, dim: int) -> Traced:
    """Exponential at the canonical origin from ambient tangent coords."""
    n = t.value.shape[0]
    if kappa == 0.0:
        return t
    o = constant(geometry.origin_rows(n, dim, kappa), op="origin")
    return manifold_exp(o, t, kappa)
