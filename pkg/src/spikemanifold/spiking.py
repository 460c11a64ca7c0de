"""Integrate-and-fire dynamics and stochastic rate coding.

Real-valued features become firing probabilities through a logistic
squash, probabilities become binary trains by Bernoulli sampling, and
trains drive integrate-and-fire units with reset by subtraction:

    u' = leak * (u - v_th * s_prev) + input + bias,  spike when u' >= v_th.

None of the discrete steps are differentiable, so the traced versions
use straight-through rules: the sampler passes gradients from bits back
to probabilities unchanged, and the integrator spreads the gradient of
the rate evenly over the steps that produced it. With the default unit
threshold, unit leak and zero bias the integrator reproduces binary
inputs exactly, so the composition is gradient-exact in expectation.
"""

from dataclasses import dataclass

import numpy as np

from . import energy
from ._kernels import backend as _K
from .autodiff import Traced, straight_through
from .errors import DomainError, ShapeError


@dataclass(frozen=True)
class IFParams:
    """Integrate-and-fire unit constants."""

    v_th: float = 1.0
    leak: float = 1.0
    bias: float = 0.0

    def __post_init__(self):
        if self.v_th <= 0.0:
            raise DomainError(f"threshold must be positive, got {self.v_th}")
        if not 0.0 <= self.leak <= 1.0:
            raise DomainError(f"leak must be in [0, 1], got {self.leak}")


@dataclass(frozen=True, eq=False)
class SpikeTrain:
    """A binary train; the last axis is time."""

    bits: np.ndarray

    def __post_init__(self):
        b = np.ascontiguousarray(self.bits, dtype=np.float64)
        if b.ndim < 1 or b.shape[-1] < 1:
            raise ShapeError(f"a train needs a time axis, got shape "
                             f"{b.shape}")
        if not np.isin(b, (0.0, 1.0)).all():
            raise DomainError("spike trains must be binary")
        object.__setattr__(self, "bits", b)

    @property
    def steps(self) -> int:
        return self.bits.shape[-1]

    def counts(self) -> np.ndarray:
        return self.bits.sum(axis=-1)

    def rate(self) -> np.ndarray:
        return self.bits.mean(axis=-1)


@dataclass(frozen=True, eq=False)
class IFNeuronState:
    """Membrane potential and the previous step's spike output."""

    potential: np.ndarray
    last_spike: np.ndarray

    @classmethod
    def rest(cls, shape) -> "IFNeuronState":
        return cls(np.zeros(shape), np.zeros(shape))


def spike_probability(current) -> np.ndarray:
    """Map real currents to firing probabilities with the logistic."""
    x = np.asarray(current, dtype=np.float64)
    if not np.isfinite(x).all():
        raise DomainError("currents must be finite")
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _check_probs(p: np.ndarray) -> None:
    if not np.isfinite(p).all() or (p < 0.0).any() or (p > 1.0).any():
        raise DomainError("spike probabilities must lie in [0, 1]")


def sample_spike_train(p, steps: int, rng: np.random.Generator) -> SpikeTrain:
    """Draw ``steps`` independent Bernoulli bits per probability entry."""
    p = np.asarray(p, dtype=np.float64)
    _check_probs(p)
    if steps < 1:
        raise DomainError(f"need at least one time step, got {steps}")
    bits = (rng.random(p.shape + (steps,)) < p[..., None])
    return SpikeTrain(bits.astype(np.float64))


def if_step(state: IFNeuronState, current, params: IFParams):
    """One integrate-and-fire update. Returns (new_state, spikes)."""
    current = np.asarray(current, dtype=np.float64)
    u = params.leak * (state.potential - params.v_th * state.last_spike) \
        + current + params.bias
    s = (u >= params.v_th).astype(np.float64)
    return IFNeuronState(u, s), s


def if_integrate(inputs, params: IFParams):
    """Run a full train through the unit. Returns (counts, rates).

    ``inputs`` is an array whose last axis is time, or a SpikeTrain.
    """
    if isinstance(inputs, SpikeTrain):
        inputs = inputs.bits
    inputs = np.ascontiguousarray(inputs, dtype=np.float64)
    if inputs.ndim < 1 or inputs.shape[-1] < 1:
        raise ShapeError(f"inputs need a time axis, got shape "
                         f"{inputs.shape}")
    lead = inputs.shape[:-1]
    steps = inputs.shape[-1]
    flat = inputs.reshape(-1, steps)
    counts = _K.if_integrate(flat, params.v_th, params.leak,
                             params.bias).reshape(lead)
    return counts, counts / steps


# --- traced (straight-through) versions -----------------------------------

def traced_sample(p: Traced, steps: int, rng: np.random.Generator) -> Traced:
    """Sample bits (..., steps) from traced probabilities.

    Straight-through: the upstream gradient of each bit flows to its
    probability unchanged, so d(sum of bits)/dp = steps and the
    gradient of the mean rate is exactly 1.
    """
    _check_probs(p.value)
    if steps < 1:
        raise DomainError(f"need at least one time step, got {steps}")
    bits = (rng.random(p.value.shape + (steps,)) < p.value[..., None])
    bits = bits.astype(np.float64)
    energy.count_acs(int(bits.sum()))
    rule = straight_through("bernoulli_sample")

    def vjp(g):
        return rule(g).sum(axis=-1)

    return Traced(bits, ((p, vjp),), op="bernoulli_sample")


def traced_heaviside(x: Traced, threshold: float = 0.0) -> Traced:
    """Unit step with the straight-through identity gradient."""
    rule = straight_through("heaviside")
    out = (x.value >= threshold).astype(np.float64)
    return Traced(out, ((x, lambda g: rule(g)),), op="heaviside")


def traced_if_rate(bits: Traced, params: IFParams) -> Traced:
    """Firing rate of the unit driven by traced bits.

    Straight-through: the rate gradient is spread evenly over the steps,
    so together with the sampler the chain rate -> probability is the
    identity.
    """
    v = bits.value
    if v.ndim < 2:
        raise ShapeError(f"expected (..., steps) bits, got {v.shape}")
    lead = v.shape[:-1]
    steps = v.shape[-1]
    counts = _K.if_integrate(
        np.ascontiguousarray(v.reshape(-1, steps)),
        params.v_th, params.leak, params.bias).reshape(lead)
    energy.count_acs(int(counts.sum()))

    def vjp(g):
        return np.repeat((g / steps)[..., None], steps, axis=-1)

    return Traced(counts / steps, ((bits, vjp),), op="if_rate")


def traced_expected_rate(p: Traced) -> Traced:
    """Deterministic stand-in for sample-then-integrate.

    Under the default unit parameters the integrator reproduces its
    binary input, so the expected rate equals the probability exactly.
    Used by gradient checks, where a sampled forward pass is piecewise
    constant and finite differences would see nothing.
    """
    _check_probs(p.value)
    return p
