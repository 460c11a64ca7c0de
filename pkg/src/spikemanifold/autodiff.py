"""Reverse-mode automatic differentiation on a dynamic tape.

A ``Traced`` node wraps a float64 numpy value plus the closures that
push a gradient back to its parents. Graphs are rebuilt every forward
pass; ``backward`` walks the tape iteratively so deep graphs cannot hit
the recursion limit.

The module also owns two cross-cutting facilities used by the checks:
a registry of straight-through gradient rules for the non-differentiable
spiking ops, and a counter of material clamp events that lets the
finite-difference harness skip coordinates whose perturbation crossed a
clamp boundary (where the two-sided quotient is meaningless).
"""

import itertools
from dataclasses import dataclass, field

import numpy as np

from .errors import CheckInvalidError, ConfigError, NumericError, ShapeError


class Traced:
    """One tape node: a value and the vjp edges to its parents."""

    __slots__ = ("value", "parents", "op", "id")
    _ids = itertools.count()

    def __init__(self, value, parents=(), op="leaf"):
        v = np.asarray(value, dtype=np.float64)
        if not np.isfinite(v).all():
            raise NumericError(f"non-finite value produced by op {op!r}")
        self.value = v
        self.parents = tuple(parents)   # pairs (Traced, vjp callable)
        self.op = op
        self.id = next(Traced._ids)

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        return f"Traced(op={self.op!r}, shape={self.value.shape})"


class GradientStore:
    """Gradients keyed by tape node, filled in by ``backward``."""

    def __init__(self, grads):
        self._grads = grads

    def __getitem__(self, node: Traced) -> np.ndarray:
        try:
            return self._grads[node.id]
        except KeyError:
            raise KeyError(
                f"no gradient reached node {node!r}; it does not "
                f"influence the loss") from None

    def get(self, node: Traced, default=None):
        return self._grads.get(node.id, default)

    def __contains__(self, node: Traced) -> bool:
        return node.id in self._grads

    def __len__(self):
        return len(self._grads)


def _topo_order(root: Traced):
    """Iterative post-order over the tape (parents before children)."""
    order = []
    seen = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if node.id in seen:
            continue
        seen.add(node.id)
        stack.append((node, True))
        for parent, _vjp in node.parents:
            if parent.id not in seen:
                stack.append((parent, False))
    return order


def backward(loss: Traced) -> GradientStore:
    """Accumulate d loss / d node for every node reachable from ``loss``.

    The loss must be scalar. Raises NumericError naming the op if any
    propagated gradient contains NaN or infinity.
    """
    if loss.value.size != 1:
        raise ShapeError(
            f"backward needs a scalar loss, got shape {loss.value.shape}")
    grads = {loss.id: np.ones_like(loss.value)}
    for node in reversed(_topo_order(loss)):
        g = grads.get(node.id)
        if g is None:
            continue
        for parent, vjp in node.parents:
            contrib = np.asarray(vjp(g), dtype=np.float64)
            if not np.isfinite(contrib).all():
                raise NumericError(
                    f"non-finite gradient flowing from op {node.op!r} "
                    f"into op {parent.op!r}")
            if contrib.shape != parent.value.shape:
                raise ShapeError(
                    f"vjp of op {node.op!r} returned shape "
                    f"{contrib.shape} for a parent of shape "
                    f"{parent.value.shape}")
            acc = grads.get(parent.id)
            grads[parent.id] = contrib if acc is None else acc + contrib
    return GradientStore(grads)


# --- straight-through rules ----------------------------------------------

def _identity_pass(g):
    return g


_STRAIGHT_THROUGH = {
    "heaviside": _identity_pass,
    "bernoulli_sample": _identity_pass,
}


def straight_through(rule: str):
    """Look up a registered straight-through gradient rule by name."""
    try:
        return _STRAIGHT_THROUGH[rule]
    except KeyError:
        raise ConfigError(
            f"unknown straight-through rule {rule!r}; known rules: "
            f"{sorted(_STRAIGHT_THROUGH)}") from None


# --- clamp event counter -------------------------------------------------
# Single-threaded by design; the counter only matters inside
# finite_diff_check, which drives evaluations sequentially.

_clamp_events = 0


def record_clamp(n: int = 1) -> None:
    """Called by ops when they materially clamp an input."""
    global _clamp_events
    _clamp_events += int(n)


def clamp_event_count() -> int:
    return _clamp_events


def reset_clamp_events() -> None:
    global _clamp_events
    _clamp_events = 0


# --- finite-difference verification --------------------------------------

@dataclass
class FiniteDiffReport:
    """Outcome of comparing tape gradients against central differences."""

    max_rel_error: float
    rel_errors: np.ndarray
    skipped: list = field(default_factory=list)
    eps: float = 1e-5
    tol: float = 1e-4

    @property
    def passed(self) -> bool:
        return self.max_rel_error <= self.tol


def finite_diff_check(f, x0, eps: float = 1e-5,
                      tol: float = 1e-4) -> FiniteDiffReport:
    """Verify the tape gradient of a scalar function numerically.

    Args:
        f: maps one Traced leaf to a scalar Traced loss. It must be
            deterministic; it is called many times on fresh leaves.
        x0: the point to differentiate at (any shape).
        eps: central-difference step.
        tol: pass threshold on the relative error
            |g_ad - g_fd| / max(1, |g_ad|, |g_fd|).

    Coordinates whose perturbed evaluations crossed a clamp boundary
    (detected via the clamp event counter) are skipped rather than
    compared. Raises CheckInvalidError if two evaluations at the same
    point disagree, since finite differences of a nondeterministic
    function prove nothing.
    """
    x0 = np.asarray(x0, dtype=np.float64)

    reset_clamp_events()
    leaf = Traced(x0.copy(), op="fd_leaf")
    out = f(leaf)
    base_events = clamp_event_count()
    if out.value.size != 1:
        raise ShapeError(
            f"finite_diff_check needs a scalar function, got shape "
            f"{out.value.shape}")
    base_value = float(out.value)

    reset_clamp_events()
    repeat = f(Traced(x0.copy(), op="fd_leaf"))
    if float(repeat.value) != base_value or \
            clamp_event_count() != base_events:
        raise CheckInvalidError(
            "function under finite_diff_check is not deterministic")

    g_ad = backward(out).get(leaf)
    if g_ad is None:
        g_ad = np.zeros_like(x0)

    flat_x = x0.ravel()
    flat_g = g_ad.ravel()
    rel = np.full(flat_x.shape[0], np.nan)
    skipped = []

    def probe(i, delta):
        xp = flat_x.copy()
        xp[i] += delta
        reset_clamp_events()
        val = float(f(Traced(xp.reshape(x0.shape), op="fd_leaf")).value)
        return val, clamp_event_count()

    for i in range(flat_x.shape[0]):
        fp, ep = probe(i, eps)
        fm, em = probe(i, -eps)
        if ep != base_events or em != base_events:
            skipped.append(i)
            continue
        g_fd = (fp - fm) / (2.0 * eps)
        denom = max(1.0, abs(flat_g[i]), abs(g_fd))
        rel[i] = abs(flat_g[i] - g_fd) / denom

    finite = rel[np.isfinite(rel)]
    max_rel = float(finite.max()) if finite.size else 0.0
    return FiniteDiffReport(max_rel_error=max_rel, rel_errors=rel,
                            skipped=skipped, eps=eps, tol=tol)
