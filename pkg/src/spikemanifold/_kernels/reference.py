"""Pure-numpy batched geometry and integrate-and-fire kernels.

This is the fallback backend. The compiled backend (`_fast`) implements
the same functions with the same signatures, the same branch thresholds
and the same clamping rules, so the two are interchangeable.

Conventions shared by both backends:

* Arrays are float64 and 2-D, rows are batch entries.
* ``kappa`` is a plain float. ``kappa == 0.0`` selects the Euclidean
  specialization; otherwise points live on the sheet/sphere with
  ``<x, x> = 1/kappa`` in the ambient bilinear form, which is the
  Euclidean dot for ``kappa > 0`` and the Minkowski form (first
  coordinate negated) for ``kappa < 0``.
* Kernels never raise. They clamp just enough to stay finite and
  return the raw diagnostic quantities (``w``, ``u``) so the calling
  layer can enforce domain policy.
"""

import numpy as np

# Branch thresholds. Keep identical in the compiled backend.
W_SERIES = 1e-6   # use the series for psi when |1 - w| is below this
U_SERIES = 1e-4   # use series for sinc-like factors in exp-map vjp
TINY = 1e-300     # guards divisions; never visible in valid inputs


def row_inner(x, y, kappa):
    """Ambient bilinear form per row: Euclidean, or Minkowski for kappa<0."""
    if kappa < 0.0:
        return np.einsum("ij,ij->i", x[:, 1:], y[:, 1:]) - x[:, 0] * y[:, 0]
    return np.einsum("ij,ij->i", x, y)


def _metric_apply(v, kappa):
    """Multiply rows by the ambient metric matrix (diagonal)."""
    if kappa < 0.0:
        out = v.copy()
        out[:, 0] = -out[:, 0]
        return out
    return v


def _psi(w, kappa):
    """psi(w) = f(w) / sqrt(s (1 - w^2)) with f = arccos or arccosh.

    This is the scalar factor of the logarithmic map. ``w`` must already
    be clamped to the legal domain. Near w = 1 the direct quotient is
    0/0, so a series in h = 1 - w is used: psi = 1 + h/3 + 2 h^2 / 15.
    """
    h = 1.0 - w
    series = 1.0 + h / 3.0 + (2.0 / 15.0) * h * h
    if kappa > 0.0:
        sigma = 1.0 - w * w
        f = np.arccos(np.clip(w, -1.0, 1.0))
    else:
        sigma = w * w - 1.0
        f = np.arccosh(np.maximum(w, 1.0))
    full = f / np.sqrt(np.maximum(sigma, TINY))
    return np.where(np.abs(h) < W_SERIES, series, full)


def _psi_deriv(w, kappa):
    """d psi / d w, with the matching series near w = 1."""
    h = 1.0 - w
    series = -1.0 / 3.0 - (4.0 / 15.0) * h
    s = 1.0 if kappa > 0.0 else -1.0
    sigma = np.maximum(s * (1.0 - w * w), TINY)
    full = s * (w * _psi(w, kappa) - 1.0) / sigma
    return np.where(np.abs(h) < W_SERIES, series, full)


def _clamp_w(w, kappa):
    if kappa > 0.0:
        return np.clip(w, -1.0, 1.0)
    return np.maximum(w, 1.0)


def expmap(x, t, kappa):
    """Geodesic exponential. Returns (y, u) with u = sqrt(|kappa|) ||t||.

    ``u`` lets the caller enforce the injectivity radius on spheres.
    A zero tangent returns x bit-for-bit.
    """
    if kappa == 0.0:
        return x + t, np.zeros(x.shape[0])
    n2 = np.maximum(row_inner(t, t, kappa), 0.0)
    u = np.sqrt(abs(kappa)) * np.sqrt(n2)
    if kappa > 0.0:
        c = np.cos(u)
        sn = np.sin(u)
    else:
        c = np.cosh(u)
        sn = np.sinh(u)
    sinc = np.where(u < 1e-8, 1.0, sn / np.maximum(u, TINY))
    y = c[:, None] * x + sinc[:, None] * t
    return y, u


def logmap(x, y, kappa):
    """Geodesic logarithm. Returns (t, w) with w = kappa <x, y> raw.

    ``w`` is returned unclamped so the caller can detect off-manifold
    drift (sphere: |w| > 1; sheet: w < 1) and antipodal singularities
    (sphere: w near -1). Coincident points give an exactly zero tangent.
    """
    if kappa == 0.0:
        return y - x, np.ones(x.shape[0])
    w = kappa * row_inner(x, y, kappa)
    wc = _clamp_w(w, kappa)
    psi = _psi(wc, kappa)
    t = psi[:, None] * (y - wc[:, None] * x)
    same = (x == y).all(axis=1)
    if same.any():   # identical rows: zero by identity, not float luck
        t[same] = 0.0
    return t, w


def distance(x, y, kappa):
    """Geodesic distance per row. Returns (d, w) with w as in logmap."""
    if kappa == 0.0:
        diff = y - x
        d = np.sqrt(np.einsum("ij,ij->i", diff, diff))
        return d, np.ones(x.shape[0])
    w = kappa * row_inner(x, y, kappa)
    wc = _clamp_w(w, kappa)
    if kappa > 0.0:
        d = np.arccos(wc) / np.sqrt(kappa)
    else:
        d = np.arccosh(wc) / np.sqrt(-kappa)
    same = (x == y).all(axis=1)
    if same.any():   # identical rows: zero by identity, not float luck
        d[same] = 0.0
    return d, w


def distsq_vjp(x, y, kappa, g):
    """Adjoint of squared distance: d(d^2) = -2 psi(w) (G x) . dy etc."""
    if kappa == 0.0:
        diff = y - x
        gy = (2.0 * g)[:, None] * diff
        return -gy, gy
    w = _clamp_w(kappa * row_inner(x, y, kappa), kappa)
    coef = (-2.0 * _psi(w, kappa) * g)[:, None]
    gx = coef * _metric_apply(y, kappa)
    gy = coef * _metric_apply(x, kappa)
    return gx, gy


def logmap_vjp(x, y, kappa, gt):
    """Adjoint of the logarithm with respect to both endpoints."""
    if kappa == 0.0:
        return -gt, gt.copy()
    w = _clamp_w(kappa * row_inner(x, y, kappa), kappa)
    p = y - w[:, None] * x
    psi = _psi(w, kappa)
    dpsi = _psi_deriv(w, kappa)
    gt_p = np.einsum("ij,ij->i", gt, p)
    gt_x = np.einsum("ij,ij->i", gt, x)
    common = (kappa * (dpsi * gt_p - psi * gt_x))[:, None]
    gy = psi[:, None] * gt + common * _metric_apply(x, kappa)
    gx = (-w * psi)[:, None] * gt + common * _metric_apply(y, kappa)
    return gx, gy


def expmap_vjp(x, t, kappa, gy):
    """Adjoint of the exponential with respect to base point and tangent."""
    if kappa == 0.0:
        return gy.copy(), gy.copy()
    n2 = np.maximum(row_inner(t, t, kappa), 0.0)
    u = np.sqrt(abs(kappa)) * np.sqrt(n2)
    s = 1.0 if kappa > 0.0 else -1.0
    u2 = u * u
    small = u < U_SERIES
    if kappa > 0.0:
        c_full = np.cos(u)
        sn = np.sin(u)
    else:
        c_full = np.cosh(u)
        sn = np.sinh(u)
    u_safe = np.where(small, 1.0, u)   # small rows use the series below
    c = np.where(small, 1.0 - s * u2 / 2.0 + u2 * u2 / 24.0, c_full)
    sinc = np.where(small, 1.0 - s * u2 / 6.0 + u2 * u2 / 120.0,
                    sn / u_safe)
    # q(u) = (cos_like(u) u - sin_like(u)) / u^3, series -s/3 + u^2/30
    q = np.where(small, -s / 3.0 + u2 / 30.0,
                 (c_full * u - sn) / (u_safe * u_safe * u_safe))
    gy_x = np.einsum("ij,ij->i", gy, x)
    gy_t = np.einsum("ij,ij->i", gy, t)
    coef = (-kappa * sinc * gy_x + abs(kappa) * q * gy_t)[:, None]
    gx = c[:, None] * gy
    gt = sinc[:, None] * gy + coef * _metric_apply(t, kappa)
    return gx, gt


def project_point(raw, kappa):
    """Project ambient rows onto the manifold. Returns (y, aux).

    Sphere: radial rescale to radius R = 1/sqrt(kappa); aux is the raw
    row norm (zero rows cannot be projected; the caller checks aux).
    Sheet: the first coordinate is recomputed from the spatial part so
    the point lands on the upper sheet; aux is that coordinate.
    Flat: identity, aux is zeros.
    """
    if kappa == 0.0:
        return raw.copy(), np.zeros(raw.shape[0])
    if kappa > 0.0:
        n = np.sqrt(np.einsum("ij,ij->i", raw, raw))
        scale = (1.0 / np.sqrt(kappa)) / np.maximum(n, TINY)
        return scale[:, None] * raw, n
    r2 = -1.0 / kappa
    sp = raw[:, 1:]
    x0 = np.sqrt(r2 + np.einsum("ij,ij->i", sp, sp))
    y = raw.copy()
    y[:, 0] = x0
    return y, x0


def project_point_vjp(raw, kappa, gy):
    """Adjoint of project_point."""
    if kappa == 0.0:
        return gy.copy()
    if kappa > 0.0:
        n = np.maximum(np.sqrt(np.einsum("ij,ij->i", raw, raw)), TINY)
        r = 1.0 / np.sqrt(kappa)
        gy_raw = np.einsum("ij,ij->i", gy, raw)
        return (r / n)[:, None] * gy - ((r * gy_raw) / (n * n * n))[:, None] * raw
    r2 = -1.0 / kappa
    sp = raw[:, 1:]
    x0 = np.sqrt(r2 + np.einsum("ij,ij->i", sp, sp))
    graw = gy.copy()
    graw[:, 0] = 0.0
    graw[:, 1:] += (gy[:, 0] / x0)[:, None] * sp
    return graw


def project_tangent(x, raw, kappa):
    """Remove the normal component: t = raw - kappa <x, raw> x."""
    if kappa == 0.0:
        return raw.copy()
    w = kappa * row_inner(x, raw, kappa)
    return raw - w[:, None] * x


def project_tangent_vjp(x, raw, kappa, gt):
    """Adjoint of project_tangent for both arguments."""
    if kappa == 0.0:
        return np.zeros_like(x), gt.copy()
    w = kappa * row_inner(x, raw, kappa)
    gt_x = np.einsum("ij,ij->i", gt, x)
    graw = gt - (kappa * gt_x)[:, None] * _metric_apply(x, kappa)
    gx = -(kappa * gt_x)[:, None] * _metric_apply(raw, kappa) \
        - (kappa * w)[:, None] * gt
    return gx, graw


def constraint_violation(x, kappa):
    """|<x, x> - 1/kappa| per row; zeros for flat space."""
    if kappa == 0.0:
        return np.zeros(x.shape[0])
    return np.abs(row_inner(x, x, kappa) - 1.0 / kappa)


def if_integrate(inputs, v_th, lam, bias):
    """Integrate-and-fire over the time axis. Returns spike counts.

    Per step: u' = lam (u - v_th s_prev) + input + bias, spike when
    u' >= v_th, reset by subtraction. Starts from rest (u = 0, no spike).
    ``inputs`` is (rows, steps); the count is float64 for downstream math.
    """
    m, steps = inputs.shape
    u = np.zeros(m)
    s = np.zeros(m)
    counts = np.zeros(m)
    for step in range(steps):
        u = lam * (u - v_th * s) + inputs[:, step] + bias
        s = (u >= v_th).astype(np.float64)
        counts += s
    return counts
