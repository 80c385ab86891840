"""Compiled Frisch-Newton iterations for the check-loss linear program.

Kept apart from :mod:`mfqvar.qreg` so the JIT cache is keyed on a small file.
"""
import numpy as np
from numba import njit

_STEP = 0.99995
_BIG = 1e20


@njit(cache=True)
def _gram(x, q):
    n, p = x.shape
    m = np.zeros((p, p))
    for i in range(n):
        qi = q[i]
        for a in range(p):
            xa = x[i, a] * qi
            for b in range(a + 1):
                m[a, b] += xa * x[i, b]
    for a in range(p):
        for b in range(a):
            m[b, a] = m[a, b]
    return m


@njit(cache=True)
def _xt(x, v):
    n, p = x.shape
    out = np.zeros(p)
    for i in range(n):
        vi = v[i]
        for a in range(p):
            out[a] += x[i, a] * vi
    return out


@njit(cache=True)
def _xv(x, v):
    n, p = x.shape
    out = np.empty(n)
    for i in range(n):
        acc = 0.0
        for a in range(p):
            acc += x[i, a] * v[a]
        out[i] = acc
    return out


@njit(cache=True)
def _step(v, dv):
    f = _BIG
    for i in range(v.shape[0]):
        if dv[i] < 0.0:
            r = -v[i] / dv[i]
            if r < f:
                f = r
    return f


@njit(cache=True)
def frisch_newton(x, y, tau, tol, max_iter):
    """Returns (theta, gap_ok, iterations); theta is NaN-filled on breakdown."""
    n, p = x.shape
    xp = np.full(n, 1.0 - tau)
    s = 1.0 - xp
    b = _xt(x, xp)
    ones = np.ones(n)
    g0 = _gram(x, ones)
    dual = np.linalg.solve(g0, -_xt(x, y))
    fit0 = _xv(x, dual)
    z = np.empty(n)
    w = np.empty(n)
    scale = 1.0
    for i in range(n):
        r = -y[i] - fit0[i]
        if r == 0.0:
            r = 0.001
        z[i] = r if r > 0.0 else 0.0
        w[i] = z[i] - r
        scale += abs(y[i])
    scale = max(1.0, scale - 1.0)
    gap = 0.0
    for i in range(n):
        gap += -y[i] * xp[i] + w[i]
    for a in range(p):
        gap -= dual[a] * b[a]
    q = np.empty(n)
    r = np.empty(n)
    dx = np.empty(n)
    ds = np.empty(n)
    dz = np.empty(n)
    dw = np.empty(n)
    it = 0
    while gap > tol * scale and it < max_iter:
        it += 1
        for i in range(n):
            q[i] = 1.0 / (z[i] / xp[i] + w[i] / s[i])
            r[i] = z[i] - w[i]
        m = _gram(x, q)
        qr = q * r
        rhs = _xt(x, qr)
        dy = np.linalg.solve(m, rhs)
        xdy = _xv(x, dy)
        for i in range(n):
            dx[i] = q[i] * (xdy[i] - r[i])
            ds[i] = -dx[i]
            dz[i] = -z[i] * (dx[i] / xp[i] + 1.0)
            dw[i] = -w[i] * (ds[i] / s[i] + 1.0)
        fp = min(_STEP * min(_step(xp, dx), _step(s, ds)), 1.0)
        fd = min(_STEP * min(_step(w, dw), _step(z, dz)), 1.0)
        if min(fp, fd) < 1.0:
            mu = 0.0
            g = 0.0
            for i in range(n):
                mu += z[i] * xp[i] + w[i] * s[i]
                g += (z[i] + fd * dz[i]) * (xp[i] + fp * dx[i]) + (w[i] + fd * dw[i]) * (s[i] + fp * ds[i])
            mu = mu * (g / mu) ** 3 / (2.0 * n)
            corr = np.empty(n)
            xi = np.empty(n)
            dxdz = dx * dz
            dsdw = ds * dw
            for i in range(n):
                xi[i] = mu * (1.0 / xp[i] - 1.0 / s[i])
                corr[i] = q[i] * (dxdz[i] - dsdw[i] - xi[i])
            rhs2 = rhs + _xt(x, corr)
            dy = np.linalg.solve(m, rhs2)
            xdy = _xv(x, dy)
            for i in range(n):
                dx[i] = q[i] * (xdy[i] + xi[i] - r[i] - dxdz[i] + dsdw[i])
                ds[i] = -dx[i]
                xinv = 1.0 / xp[i]
                sinv = 1.0 / s[i]
                dz[i] = mu * xinv - z[i] - xinv * z[i] * dx[i] - dxdz[i]
                dw[i] = mu * sinv - w[i] - sinv * w[i] * ds[i] - dsdw[i]
            fp = min(_STEP * min(_step(xp, dx), _step(s, ds)), 1.0)
            fd = min(_STEP * min(_step(w, dw), _step(z, dz)), 1.0)
        gap = 0.0
        for i in range(n):
            xp[i] += fp * dx[i]
            s[i] += fp * ds[i]
            w[i] += fd * dw[i]
            z[i] += fd * dz[i]
            gap += -y[i] * xp[i] + w[i]
        for a in range(p):
            dual[a] += fd * dy[a]
        for a in range(p):
            gap -= dual[a] * b[a]
    return -dual, gap <= tol * scale, it
