"""Compiled kernels versus the numpy reference backend.

Times the batched geometry maps and the integrate-and-fire loop on
training-sized batches, on both backends, and reports the speedup.

Dual-mode:
  - python benchmarks/bench_backends.py   -> full table
  - pytest benchmarks/bench_backends.py   -> sanity assertions only
"""

import time

import numpy as np
import pytest

from spikemanifold._kernels import get_backend
from spikemanifold._kernels import reference

try:
    fast = get_backend("fast")
except Exception:          # extension not built
    fast = None

M_GEOM = 20000
DIM = 32
M_SPIKE = 4096
STEPS = 15
REPEATS = 5


def _best_of(fn, repeats=REPEATS):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _geometry_inputs(kappa, m=M_GEOM, d=DIM, seed=0):
    rng = np.random.default_rng(seed)
    x, _ = reference.project_point(rng.standard_normal((m, d)), kappa)
    y, _ = reference.project_point(rng.standard_normal((m, d)), kappa)
    t = reference.project_tangent(x, 0.3 * rng.standard_normal((m, d)),
                                  kappa)
    g = rng.standard_normal(m)
    gt = rng.standard_normal((m, d))
    return x, y, t, g, gt


def _cases():
    out = []
    for kappa in (-1.0, 1.0):
        x, y, t, g, gt = _geometry_inputs(kappa)
        tag = f"kappa={kappa:+g}"
        out.append((f"expmap       {tag}",
                    lambda b, x=x, t=t, k=kappa: b.expmap(x, t, k)))
        out.append((f"logmap       {tag}",
                    lambda b, x=x, y=y, k=kappa: b.logmap(x, y, k)))
        out.append((f"distsq_vjp   {tag}",
                    lambda b, x=x, y=y, g=g, k=kappa:
                    b.distsq_vjp(x, y, k, g)))
        out.append((f"expmap_vjp   {tag}",
                    lambda b, x=x, t=t, gt=gt, k=kappa:
                    b.expmap_vjp(x, t, k, gt)))
    rng = np.random.default_rng(1)
    spikes = (rng.random((M_SPIKE, STEPS)) < 0.4).astype(np.float64)
    out.append(("if_integrate",
                lambda b, s=spikes: b.if_integrate(s, 1.0, 1.0, 0.0)))
    return out


def run_suite():
    if fast is None:
        print("compiled backend not built; nothing to compare")
        return
    print(f"{'kernel':<24} {'reference':>12} {'compiled':>12} "
          f"{'speedup':>8}")
    for name, call in _cases():
        t_ref = _best_of(lambda: call(reference))
        t_fast = _best_of(lambda: call(fast))
        print(f"{name:<24} {t_ref * 1e3:>10.2f}ms {t_fast * 1e3:>10.2f}ms "
              f"{t_ref / t_fast:>7.1f}x")


@pytest.mark.skipif(fast is None, reason="compiled backend not built")
def test_integration_loop_faster_compiled():
    # the per-step python loop is the one kernel where the compiled
    # backend must win outright
    rng = np.random.default_rng(1)
    spikes = (rng.random((M_SPIKE, STEPS)) < 0.4).astype(np.float64)
    t_ref = _best_of(lambda: reference.if_integrate(spikes, 1.0, 1.0, 0.0))
    t_fast = _best_of(lambda: fast.if_integrate(spikes, 1.0, 1.0, 0.0))
    assert t_fast < t_ref


@pytest.mark.skipif(fast is None, reason="compiled backend not built")
def test_backends_agree_on_benchmark_inputs():
    for kappa in (-1.0, 1.0):
        x, y, t, g, gt = _geometry_inputs(kappa, m=512)
        for a, b in ((reference.expmap(x, t, kappa)[0],
                      fast.expmap(x, t, kappa)[0]),
                     (reference.logmap(x, y, kappa)[0],
                      fast.logmap(x, y, kappa)[0])):
            scale = 1.0 + np.abs(a).max(axis=1, keepdims=True)
            assert (np.abs(a - b) / scale).max() < 1e-12


if __name__ == "__main__":
    run_suite()
