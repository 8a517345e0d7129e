"""Pure-Python versions of the compiled loops in ``_kernels.pyx``.

Same signatures and outputs; used when the extension is not built or when
``RGCOPULA_PURE_PYTHON=1``.
"""

import math

import numpy as np
from scipy.signal import lfilter

KAPPA_LIMIT = 50.0


def _interp(k, grid, kmin, kmax):
    n = len(grid)
    if k <= kmin:
        return grid[0]
    if k >= kmax:
        return grid[n - 1]
    pos = (k - kmin) / (kmax - kmin) * (n - 1)
    i = min(int(pos), n - 2)
    frac = pos - i
    return grid[i] + frac * (grid[i + 1] - grid[i])


def rg_logh(logrv, logh0, omega, beta, gamma):
    logrv = np.asarray(logrv, dtype=float)
    drive = np.concatenate(([logh0], omega + gamma * logrv))
    # y[0] = logh0, y[t+1] = beta * y[t] + omega + gamma * logrv[t]
    return lfilter([1.0], [1.0, -beta], drive)


def garch_h(e, h0, kappa, arch, garch):
    e = np.asarray(e, dtype=float)
    drive = np.concatenate(([h0], kappa + arch * e * e))
    return lfilter([1.0], [1.0, -garch], drive)


def _normal_logc(x1, x2, rho):
    d = 1.0 - rho * rho
    return -0.5 * math.log(d) - (rho * rho * (x1 * x1 + x2 * x2) - 2.0 * rho * x1 * x2) / (2.0 * d)


def _normal_score(x1, x2, rho):
    d = 1.0 - rho * rho
    q = (x1 * x1 - 2.0 * rho * x1 * x2 + x2 * x2) / d
    return (rho + x1 * x2 - rho * q) / d


def _student_info(rho, nu):
    d = 1.0 - rho * rho
    return ((nu + 2.0) * (1.0 + rho * rho) - 2.0 * rho * rho) / ((nu + 4.0) * d * d)


def _student_terms(x1, x2, rho, nu):
    d = 1.0 - rho * rho
    q = (x1 * x1 - 2.0 * rho * x1 * x2 + x2 * x2) / d
    ll = -0.5 * math.log(d) - 0.5 * (nu + 2.0) * math.log1p(q / nu)
    s = rho / d - (nu + 2.0) * (rho * q - x1 * x2) / (d * (nu + q))
    return ll, s


def _gumbel_logc(x, y, lx, ly, delta):
    p = delta * lx
    q = delta * ly
    m = max(p, q)
    la = m + math.log(math.exp(p - m) + math.exp(q - m))
    L = math.exp(la / delta)
    return -L + x + y + (delta - 1.0) * (lx + ly) + (1.0 / delta - 2.0) * la + math.log(L + delta - 1.0)


def _gumbel_score(x, y, lx, ly, delta):
    h = 1e-6 * delta if delta > 1.0 else 1e-6
    if delta - h <= 1.0:
        return (_gumbel_logc(x, y, lx, ly, delta + h) - _gumbel_logc(x, y, lx, ly, delta)) / h
    return (_gumbel_logc(x, y, lx, ly, delta + h) - _gumbel_logc(x, y, lx, ly, delta - h)) / (2.0 * h)


def _finite(v):
    return math.isfinite(v)


def gas_normal(x1, x2, w, a, b, kappa1, info, kmin, kmax):
    x1 = np.asarray(x1, dtype=float).tolist()
    x2 = np.asarray(x2, dtype=float).tolist()
    info = np.asarray(info, dtype=float).tolist()
    T = len(x1)
    kap = np.empty(T + 1)
    ll = np.empty(T)
    bad = -1
    k = kappa1
    kap[0] = k
    for t in range(T):
        if abs(k) > KAPPA_LIMIT:
            bad = t
            break
        rho = math.tanh(0.5 * k)
        try:
            lt = _normal_logc(x1[t], x2[t], rho)
        except (ValueError, ZeroDivisionError):
            lt = math.nan
        ll[t] = lt
        if not _finite(lt):
            bad = t
            break
        s = _normal_score(x1[t], x2[t], rho)
        k = w + b * k + a * s / math.sqrt(_interp(k, info, kmin, kmax))
        kap[t + 1] = k
    return kap, ll, bad


def gas_student(x1, x2, base, nu, w, a, b, kappa1):
    x1 = np.asarray(x1, dtype=float).tolist()
    x2 = np.asarray(x2, dtype=float).tolist()
    base = np.asarray(base, dtype=float).tolist()
    T = len(x1)
    kap = np.empty(T + 1)
    ll = np.empty(T)
    bad = -1
    k = kappa1
    kap[0] = k
    for t in range(T):
        if abs(k) > KAPPA_LIMIT:
            bad = t
            break
        rho = math.tanh(0.5 * k)
        try:
            lt, s = _student_terms(x1[t], x2[t], rho, nu)
        except (ValueError, ZeroDivisionError):
            lt, s = math.nan, math.nan
        ll[t] = base[t] + lt
        if not _finite(ll[t]):
            bad = t
            break
        k = w + b * k + a * s / math.sqrt(_student_info(rho, nu))
        kap[t + 1] = k
    return kap, ll, bad


def gas_rgumbel(x, y, w, a, b, kappa1, info, kmin, kmax):
    x = np.asarray(x, dtype=float).tolist()
    y = np.asarray(y, dtype=float).tolist()
    info = np.asarray(info, dtype=float).tolist()
    T = len(x)
    kap = np.empty(T + 1)
    ll = np.empty(T)
    bad = -1
    k = kappa1
    kap[0] = k
    for t in range(T):
        if abs(k) > KAPPA_LIMIT:
            bad = t
            break
        delta = 1.0 + math.exp(k)
        lx = math.log(x[t])
        ly = math.log(y[t])
        try:
            lt = _gumbel_logc(x[t], y[t], lx, ly, delta)
        except (ValueError, OverflowError):
            lt = math.nan
        ll[t] = lt
        if not _finite(lt):
            bad = t
            break
        s = _gumbel_score(x[t], y[t], lx, ly, delta)
        k = w + b * k + a * s / math.sqrt(_interp(k, info, kmin, kmax))
        kap[t + 1] = k
    return kap, ll, bad


def gas_sim_normal(z1, z2, w, a, b, kappa1, info, kmin, kmax):
    z1 = np.asarray(z1, dtype=float).tolist()
    z2 = np.asarray(z2, dtype=float).tolist()
    info = np.asarray(info, dtype=float).tolist()
    T = len(z1)
    kap = np.empty(T + 1)
    x1 = np.empty(T)
    x2 = np.empty(T)
    k = kappa1
    kap[0] = k
    for t in range(T):
        rho = math.tanh(0.5 * k)
        a1 = z1[t]
        a2 = rho * z1[t] + math.sqrt(1.0 - rho * rho) * z2[t]
        x1[t] = a1
        x2[t] = a2
        s = _normal_score(a1, a2, rho)
        k = w + b * k + a * s / math.sqrt(_interp(k, info, kmin, kmax))
        kap[t + 1] = k
    return x1, x2, kap


def gas_sim_student(z1, z2, g, nu, w, a, b, kappa1):
    z1 = np.asarray(z1, dtype=float).tolist()
    z2 = np.asarray(z2, dtype=float).tolist()
    g = np.asarray(g, dtype=float).tolist()
    T = len(z1)
    kap = np.empty(T + 1)
    x1 = np.empty(T)
    x2 = np.empty(T)
    k = kappa1
    kap[0] = k
    for t in range(T):
        rho = math.tanh(0.5 * k)
        a1 = g[t] * z1[t]
        a2 = g[t] * (rho * z1[t] + math.sqrt(1.0 - rho * rho) * z2[t])
        x1[t] = a1
        x2[t] = a2
        _, s = _student_terms(a1, a2, rho, nu)
        k = w + b * k + a * s / math.sqrt(_student_info(rho, nu))
        kap[t + 1] = k
    return x1, x2, kap


def gas_sim_rgumbel(theta, wexp, e1, e2, w, a, b, kappa1, info, kmin, kmax):
    theta = np.asarray(theta, dtype=float).tolist()
    wexp = np.asarray(wexp, dtype=float).tolist()
    e1 = np.asarray(e1, dtype=float).tolist()
    e2 = np.asarray(e2, dtype=float).tolist()
    info = np.asarray(info, dtype=float).tolist()
    T = len(theta)
    kap = np.empty(T + 1)
    xs = np.empty(T)
    ys = np.empty(T)
    k = kappa1
    kap[0] = k
    for t in range(T):
        delta = 1.0 + math.exp(k)
        alpha = 1.0 / delta
        th = theta[t]
        lv = (math.log(math.sin(alpha * th)) - math.log(math.sin(th)) / alpha
              + (1.0 - alpha) / alpha * (math.log(math.sin((1.0 - alpha) * th)) - math.log(wexp[t])))
        xv = math.exp(alpha * (math.log(e1[t]) - lv))
        yv = math.exp(alpha * (math.log(e2[t]) - lv))
        xs[t] = xv
        ys[t] = yv
        s = _gumbel_score(xv, yv, math.log(xv), math.log(yv), delta)
        k = w + b * k + a * s / math.sqrt(_interp(k, info, kmin, kmax))
        kap[t + 1] = k
    return xs, ys, kap
