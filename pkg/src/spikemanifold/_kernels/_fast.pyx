# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled batched geometry and integrate-and-fire kernels.

Same functions, same branch thresholds and same clamping rules as the
numpy reference backend; the two may be swapped freely. Scalar per-row
work is done in C loops instead of vectorized numpy expressions.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport (acos, acosh, cos, cosh, fabs, fmax, fmin, sin,
                        sinh, sqrt)

cnp.import_array()

W_SERIES = 1e-6
U_SERIES = 1e-4
TINY = 1e-300

cdef double C_W_SERIES = 1e-6
cdef double C_U_SERIES = 1e-4
cdef double C_TINY = 1e-300


cdef inline double _row_dot(double[:, ::1] x, double[:, ::1] y,
                            Py_ssize_t i, Py_ssize_t d) nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t j
    for j in range(d):
        acc += x[i, j] * y[i, j]
    return acc


cdef inline double _row_bilinear(double[:, ::1] x, double[:, ::1] y,
                                 Py_ssize_t i, Py_ssize_t d,
                                 double kappa) nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t j
    if kappa < 0.0:
        for j in range(1, d):
            acc += x[i, j] * y[i, j]
        acc -= x[i, 0] * y[i, 0]
        return acc
    for j in range(d):
        acc += x[i, j] * y[i, j]
    return acc


cdef inline double _clamp_w_scalar(double w, double kappa) nogil:
    if kappa > 0.0:
        return fmax(-1.0, fmin(w, 1.0))
    return fmax(w, 1.0)


cdef inline bint _rows_equal(double[:, ::1] x, double[:, ::1] y,
                             Py_ssize_t i, Py_ssize_t d) nogil:
    cdef Py_ssize_t j
    for j in range(d):
        if x[i, j] != y[i, j]:
            return False
    return True


cdef inline double _psi_scalar(double w, double kappa) nogil:
    cdef double h = 1.0 - w
    cdef double sigma, f
    if fabs(h) < C_W_SERIES:
        return 1.0 + h / 3.0 + (2.0 / 15.0) * h * h
    if kappa > 0.0:
        sigma = 1.0 - w * w
        f = acos(fmax(-1.0, fmin(w, 1.0)))
    else:
        sigma = w * w - 1.0
        f = acosh(fmax(w, 1.0))
    return f / sqrt(fmax(sigma, C_TINY))


cdef inline double _psi_deriv_scalar(double w, double kappa) nogil:
    cdef double h = 1.0 - w
    cdef double s, sigma
    if fabs(h) < C_W_SERIES:
        return -1.0 / 3.0 - (4.0 / 15.0) * h
    s = 1.0 if kappa > 0.0 else -1.0
    sigma = fmax(s * (1.0 - w * w), C_TINY)
    return s * (w * _psi_scalar(w, kappa) - 1.0) / sigma


cdef _as_c(arr):
    return np.ascontiguousarray(arr, dtype=np.float64)


def row_inner(x, y, kappa):
    """Ambient bilinear form per row: Euclidean, or Minkowski for kappa<0."""
    cdef double[:, ::1] xv = _as_c(x)
    cdef double[:, ::1] yv = _as_c(y)
    cdef double kap = kappa
    cdef Py_ssize_t m = xv.shape[0], d = xv.shape[1], i
    out = np.empty(m)
    cdef double[::1] ov = out
    for i in range(m):
        ov[i] = _row_bilinear(xv, yv, i, d, kap)
    return out


def expmap(x, t, kappa):
    """Geodesic exponential. Returns (y, u) with u = sqrt(|kappa|) ||t||."""
    cdef double[:, ::1] xv = _as_c(x)
    cdef double[:, ::1] tv = _as_c(t)
    cdef double kap = kappa
    cdef Py_ssize_t m = xv.shape[0], d = xv.shape[1], i, j
    y = np.empty((m, d))
    u = np.zeros(m)
    cdef double[:, ::1] yv = y
    cdef double[::1] uv = u
    cdef double n2, ui, c, sn, sinc
    if kap == 0.0:
        for i in range(m):
            for j in range(d):
                yv[i, j] = xv[i, j] + tv[i, j]
        return y, u
    for i in range(m):
        n2 = fmax(_row_bilinear(tv, tv, i, d, kap), 0.0)
        ui = sqrt(fabs(kap)) * sqrt(n2)
        uv[i] = ui
        if kap > 0.0:
            c = cos(ui)
            sn = sin(ui)
        else:
            c = cosh(ui)
            sn = sinh(ui)
        sinc = 1.0 if ui < 1e-8 else sn / fmax(ui, C_TINY)
        for j in range(d):
            yv[i, j] = c * xv[i, j] + sinc * tv[i, j]
    return y, u


def logmap(x, y, kappa):
    """Geodesic logarithm. Returns (t, w) with w = kappa <x, y> raw."""
    cdef double[:, ::1] xv = _as_c(x)
    cdef double[:, ::1] yv = _as_c(y)
    cdef double kap = kappa
    cdef Py_ssize_t m = xv.shape[0], d = xv.shape[1], i, j
    t = np.empty((m, d))
    cdef double[:, ::1] tv = t
    cdef double wi, wc, psi
    if kap == 0.0:
        for i in range(m):
            for j in range(d):
                tv[i, j] = yv[i, j] - xv[i, j]
        return t, np.ones(m)
    w = np.empty(m)
    cdef double[::1] wv = w
    for i in range(m):
        wi = kap * _row_bilinear(xv, yv, i, d, kap)
        wv[i] = wi
        if _rows_equal(xv, yv, i, d):
            # identical rows: zero by identity, not float luck
            for j in range(d):
                tv[i, j] = 0.0
            continue
        wc = _clamp_w_scalar(wi, kap)
        psi = _psi_scalar(wc, kap)
        for j in range(d):
            tv[i, j] = psi * (yv[i, j] - wc * xv[i, j])
    return t, w


def distance(x, y, kappa):
    """Geodesic distance per row. Returns (d, w) with w as in logmap."""
    cdef double[:, ::1] xv = _as_c(x)
    cdef double[:, ::1] yv = _as_c(y)
    cdef double kap = kappa
    cdef Py_ssize_t m = xv.shape[0], dd = xv.shape[1], i, j
    dist = np.empty(m)
    cdef double[::1] dv = dist
    cdef double wi, wc, acc
    if kap == 0.0:
        for i in range(m):
            acc = 0.0
            for j in range(dd):
                acc += (yv[i, j] - xv[i, j]) ** 2
            dv[i] = sqrt(acc)
        return dist, np.ones(m)
    w = np.empty(m)
    cdef double[::1] wv = w
    for i in range(m):
        wi = kap * _row_bilinear(xv, yv, i, dd, kap)
        wv[i] = wi
        if _rows_equal(xv, yv, i, dd):
            # identical rows: zero by identity, not float luck
            dv[i] = 0.0
            continue
        wc = _clamp_w_scalar(wi, kap)
        if kap > 0.0:
            dv[i] = acos(wc) / sqrt(kap)
        else:
            dv[i] = acosh(wc) / sqrt(-kap)
    return dist, w


def distsq_vjp(x, y, kappa, g):
    """Adjoint of squared distance."""
    cdef double[:, ::1] xv = _as_c(x)
    cdef double[:, ::1] yv = _as_c(y)
    cdef double[::1] gv = np.ascontiguousarray(g, dtype=np.float64)
    cdef double kap = kappa
    cdef Py_ssize_t m = xv.shape[0], d = xv.shape[1], i, j
    gx = np.empty((m, d))
    gy = np.empty((m, d))
    cdef double[:, ::1] gxv = gx
    cdef double[:, ::1] gyv = gy
    cdef double wc, coef, sx, sy
    if kap == 0.0:
        for i in range(m):
            for j in range(d):
                gyv[i, j] = 2.0 * gv[i] * (yv[i, j] - xv[i, j])
                gxv[i, j] = -gyv[i, j]
        return gx, gy
    for i in range(m):
        wc = _clamp_w_scalar(kap * _row_bilinear(xv, yv, i, d, kap), kap)
        coef = -2.0 * _psi_scalar(wc, kap) * gv[i]
        for j in range(d):
            sy = yv[i, j]
            sx = xv[i, j]
            if kap < 0.0 and j == 0:
                sy = -sy
                sx = -sx
            gxv[i, j] = coef * sy
            gyv[i, j] = coef * sx
    return gx, gy


def logmap_vjp(x, y, kappa, gt):
    """Adjoint of the logarithm with respect to both endpoints."""
    cdef double[:, ::1] xv = _as_c(x)
    cdef double[:, ::1] yv = _as_c(y)
    cdef double[:, ::1] gtv = _as_c(gt)
    cdef double kap = kappa
    cdef Py_ssize_t m = xv.shape[0], d = xv.shape[1], i, j
    gx = np.empty((m, d))
    gy = np.empty((m, d))
    cdef double[:, ::1] gxv = gx
    cdef double[:, ::1] gyv = gy
    cdef double wc, psi, dpsi, gt_p, gt_x, common, mx, my
    if kap == 0.0:
        for i in range(m):
            for j in range(d):
                gyv[i, j] = gtv[i, j]
                gxv[i, j] = -gtv[i, j]
        return gx, gy
    for i in range(m):
        wc = _clamp_w_scalar(kap * _row_bilinear(xv, yv, i, d, kap), kap)
        psi = _psi_scalar(wc, kap)
        dpsi = _psi_deriv_scalar(wc, kap)
        gt_p = 0.0
        gt_x = 0.0
        for j in range(d):
            gt_p += gtv[i, j] * (yv[i, j] - wc * xv[i, j])
            gt_x += gtv[i, j] * xv[i, j]
        common = kap * (dpsi * gt_p - psi * gt_x)
        for j in range(d):
            mx = xv[i, j]
            my = yv[i, j]
            if kap < 0.0 and j == 0:
                mx = -mx
                my = -my
            gyv[i, j] = psi * gtv[i, j] + common * mx
            gxv[i, j] = -wc * psi * gtv[i, j] + common * my
    return gx, gy


def expmap_vjp(x, t, kappa, gy):
    """Adjoint of the exponential with respect to base point and tangent."""
    cdef double[:, ::1] xv = _as_c(x)
    cdef double[:, ::1] tv = _as_c(t)
    cdef double[:, ::1] gyv = _as_c(gy)
    cdef double kap = kappa
    cdef Py_ssize_t m = xv.shape[0], d = xv.shape[1], i, j
    gx = np.empty((m, d))
    gt = np.empty((m, d))
    cdef double[:, ::1] gxv = gx
    cdef double[:, ::1] gtv = gt
    cdef double s, n2, u, u2, c, sn, sinc, q, gy_x, gy_t, coef, mt
    if kap == 0.0:
        for i in range(m):
            for j in range(d):
                gxv[i, j] = gyv[i, j]
                gtv[i, j] = gyv[i, j]
        return gx, gt
    s = 1.0 if kap > 0.0 else -1.0
    for i in range(m):
        n2 = fmax(_row_bilinear(tv, tv, i, d, kap), 0.0)
        u = sqrt(fabs(kap)) * sqrt(n2)
        u2 = u * u
        if u < C_U_SERIES:
            c = 1.0 - s * u2 / 2.0 + u2 * u2 / 24.0
            sinc = 1.0 - s * u2 / 6.0 + u2 * u2 / 120.0
            q = -s / 3.0 + u2 / 30.0
        else:
            if kap > 0.0:
                c = cos(u)
                sn = sin(u)
            else:
                c = cosh(u)
                sn = sinh(u)
            sinc = sn / u
            q = (c * u - sn) / (u * u * u)
        gy_x = 0.0
        gy_t = 0.0
        for j in range(d):
            gy_x += gyv[i, j] * xv[i, j]
            gy_t += gyv[i, j] * tv[i, j]
        coef = -kap * sinc * gy_x + fabs(kap) * q * gy_t
        for j in range(d):
            mt = tv[i, j]
            if kap < 0.0 and j == 0:
                mt = -mt
            gxv[i, j] = c * gyv[i, j]
            gtv[i, j] = sinc * gyv[i, j] + coef * mt
    return gx, gt


def project_point(raw, kappa):
    """Project ambient rows onto the manifold. Returns (y, aux)."""
    cdef double[:, ::1] rv = _as_c(raw)
    cdef double kap = kappa
    cdef Py_ssize_t m = rv.shape[0], d = rv.shape[1], i, j
    y = np.empty((m, d))
    aux = np.zeros(m)
    cdef double[:, ::1] yv = y
    cdef double[::1] av = aux
    cdef double n, scale, acc, x0
    if kap == 0.0:
        for i in range(m):
            for j in range(d):
                yv[i, j] = rv[i, j]
        return y, aux
    if kap > 0.0:
        for i in range(m):
            acc = 0.0
            for j in range(d):
                acc += rv[i, j] * rv[i, j]
            n = sqrt(acc)
            av[i] = n
            scale = (1.0 / sqrt(kap)) / fmax(n, C_TINY)
            for j in range(d):
                yv[i, j] = scale * rv[i, j]
        return y, aux
    for i in range(m):
        acc = 0.0
        for j in range(1, d):
            acc += rv[i, j] * rv[i, j]
        x0 = sqrt(-1.0 / kap + acc)
        av[i] = x0
        yv[i, 0] = x0
        for j in range(1, d):
            yv[i, j] = rv[i, j]
    return y, aux


def project_point_vjp(raw, kappa, gy):
    """Adjoint of project_point."""
    cdef double[:, ::1] rv = _as_c(raw)
    cdef double[:, ::1] gv = _as_c(gy)
    cdef double kap = kappa
    cdef Py_ssize_t m = rv.shape[0], d = rv.shape[1], i, j
    graw = np.empty((m, d))
    cdef double[:, ::1] ov = graw
    cdef double acc, n, r, gy_raw, x0
    if kap == 0.0:
        for i in range(m):
            for j in range(d):
                ov[i, j] = gv[i, j]
        return graw
    if kap > 0.0:
        r = 1.0 / sqrt(kap)
        for i in range(m):
            acc = 0.0
            gy_raw = 0.0
            for j in range(d):
                acc += rv[i, j] * rv[i, j]
                gy_raw += gv[i, j] * rv[i, j]
            n = fmax(sqrt(acc), C_TINY)
            for j in range(d):
                ov[i, j] = (r / n) * gv[i, j] \
                    - (r * gy_raw / (n * n * n)) * rv[i, j]
        return graw
    for i in range(m):
        acc = 0.0
        for j in range(1, d):
            acc += rv[i, j] * rv[i, j]
        x0 = sqrt(-1.0 / kap + acc)
        ov[i, 0] = 0.0
        for j in range(1, d):
            ov[i, j] = gv[i, j] + (gv[i, 0] / x0) * rv[i, j]
    return graw


def project_tangent(x, raw, kappa):
    """Remove the normal component: t = raw - kappa <x, raw> x."""
    cdef double[:, ::1] xv = _as_c(x)
    cdef double[:, ::1] rv = _as_c(raw)
    cdef double kap = kappa
    cdef Py_ssize_t m = xv.shape[0], d = xv.shape[1], i, j
    t = np.empty((m, d))
    cdef double[:, ::1] tv = t
    cdef double w
    if kap == 0.0:
        for i in range(m):
            for j in range(d):
                tv[i, j] = rv[i, j]
        return t
    for i in range(m):
        w = kap * _row_bilinear(xv, rv, i, d, kap)
        for j in range(d):
            tv[i, j] = rv[i, j] - w * xv[i, j]
    return t


def project_tangent_vjp(x, raw, kappa, gt):
    """Adjoint of project_tangent for both arguments."""
    cdef double[:, ::1] xv = _as_c(x)
    cdef double[:, ::1] rv = _as_c(raw)
    cdef double[:, ::1] gv = _as_c(gt)
    cdef double kap = kappa
    cdef Py_ssize_t m = xv.shape[0], d = xv.shape[1], i, j
    gx = np.empty((m, d))
    graw = np.empty((m, d))
    cdef double[:, ::1] gxv = gx
    cdef double[:, ::1] ov = graw
    cdef double w, gt_x, mx, mr
    if kap == 0.0:
        for i in range(m):
            for j in range(d):
                gxv[i, j] = 0.0
                ov[i, j] = gv[i, j]
        return gx, graw
    for i in range(m):
        w = kap * _row_bilinear(xv, rv, i, d, kap)
        gt_x = 0.0
        for j in range(d):
            gt_x += gv[i, j] * xv[i, j]
        for j in range(d):
            mx = xv[i, j]
            mr = rv[i, j]
            if kap < 0.0 and j == 0:
                mx = -mx
                mr = -mr
            ov[i, j] = gv[i, j] - kap * gt_x * mx
            gxv[i, j] = -kap * gt_x * mr - kap * w * gv[i, j]
    return gx, graw


def constraint_violation(x, kappa):
    """|<x, x> - 1/kappa| per row; zeros for flat space."""
    cdef double[:, ::1] xv = _as_c(x)
    cdef double kap = kappa
    cdef Py_ssize_t m = xv.shape[0], d = xv.shape[1], i
    out = np.zeros(m)
    cdef double[::1] ov = out
    if kap == 0.0:
        return out
    for i in range(m):
        ov[i] = fabs(_row_bilinear(xv, xv, i, d, kap) - 1.0 / kap)
    return out


def if_integrate(inputs, v_th, lam, bias):
    """Integrate-and-fire over the time axis. Returns spike counts."""
    # transposed, step-outer layout: the inner loop is contiguous and
    # branchless so the compiler can vectorize across rows
    cdef double[:, ::1] iv = _as_c(np.asarray(inputs).T)
    cdef double c_vth = v_th, c_lam = lam, c_bias = bias
    cdef Py_ssize_t steps = iv.shape[0], m = iv.shape[1], i, step
    counts = np.zeros(m)
    cdef double[::1] cv = counts
    u_arr = np.zeros(m)
    s_arr = np.zeros(m)
    cdef double[::1] uv = u_arr
    cdef double[::1] sv = s_arr
    cdef double u, s
    for step in range(steps):
        for i in range(m):
            u = c_lam * (uv[i] - c_vth * sv[i]) + iv[step, i] + c_bias
            s = 1.0 if u >= c_vth else 0.0
            uv[i] = u
            sv[i] = s
            cv[i] += s
    return counts
