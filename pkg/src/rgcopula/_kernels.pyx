# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Signatures mirror rgcopula._fallback exactly."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, sqrt, tanh, fabs, sin, isfinite, log1p

cnp.import_array()

# beyond this |kappa| the state is treated as diverged
cdef double KAPPA_LIMIT = 50.0


cdef inline double _interp(double k, const double[:] grid, double kmin, double kmax) noexcept nogil:
    cdef Py_ssize_t n = grid.shape[0]
    cdef double pos, frac
    cdef Py_ssize_t i
    if k <= kmin:
        return grid[0]
    if k >= kmax:
        return grid[n - 1]
    pos = (k - kmin) / (kmax - kmin) * (n - 1)
    i = <Py_ssize_t>pos
    if i >= n - 1:
        i = n - 2
    frac = pos - i
    return grid[i] + frac * (grid[i + 1] - grid[i])


def rg_logh(const double[:] logrv, double logh0, double omega, double beta, double gamma):
    cdef Py_ssize_t T = logrv.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(T + 1)
    cdef double[:] lh = out
    cdef Py_ssize_t t
    lh[0] = logh0
    with nogil:
        for t in range(T):
            lh[t + 1] = omega + beta * lh[t] + gamma * logrv[t]
    return out


def garch_h(const double[:] e, double h0, double kappa, double arch, double garch):
    cdef Py_ssize_t T = e.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(T + 1)
    cdef double[:] h = out
    cdef Py_ssize_t t
    h[0] = h0
    with nogil:
        for t in range(T):
            h[t + 1] = kappa + arch * e[t] * e[t] + garch * h[t]
    return out


cdef inline double _normal_logc(double x1, double x2, double rho) noexcept nogil:
    cdef double d = 1.0 - rho * rho
    return -0.5 * log(d) - (rho * rho * (x1 * x1 + x2 * x2) - 2.0 * rho * x1 * x2) / (2.0 * d)


cdef inline double _normal_score(double x1, double x2, double rho) noexcept nogil:
    cdef double d = 1.0 - rho * rho
    cdef double q = (x1 * x1 - 2.0 * rho * x1 * x2 + x2 * x2) / d
    return (rho + x1 * x2 - rho * q) / d


def gas_normal(const double[:] x1, const double[:] x2, double w, double a, double b,
               double kappa1, const double[:] info, double kmin, double kmax):
    cdef Py_ssize_t T = x1.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] kap_arr = np.empty(T + 1)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ll_arr = np.empty(T)
    cdef double[:] kap = kap_arr
    cdef double[:] ll = ll_arr
    cdef Py_ssize_t t, bad = -1
    cdef double rho, s, fi
    kap[0] = kappa1
    with nogil:
        for t in range(T):
            rho = tanh(0.5 * kap[t])
            ll[t] = _normal_logc(x1[t], x2[t], rho)
            if not isfinite(ll[t]) or fabs(kap[t]) > KAPPA_LIMIT:
                bad = t
                break
            s = _normal_score(x1[t], x2[t], rho)
            fi = _interp(kap[t], info, kmin, kmax)
            kap[t + 1] = w + b * kap[t] + a * s / sqrt(fi)
    return kap_arr, ll_arr, bad


cdef inline double _student_quad(double x1, double x2, double rho) noexcept nogil:
    return (x1 * x1 - 2.0 * rho * x1 * x2 + x2 * x2) / (1.0 - rho * rho)


cdef inline double _student_info(double rho, double nu) noexcept nogil:
    cdef double d = 1.0 - rho * rho
    return ((nu + 2.0) * (1.0 + rho * rho) - 2.0 * rho * rho) / ((nu + 4.0) * d * d)


def gas_student(const double[:] x1, const double[:] x2, const double[:] base, double nu,
                double w, double a, double b, double kappa1):
    cdef Py_ssize_t T = x1.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] kap_arr = np.empty(T + 1)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ll_arr = np.empty(T)
    cdef double[:] kap = kap_arr
    cdef double[:] ll = ll_arr
    cdef Py_ssize_t t, bad = -1
    cdef double rho, d, q, s
    kap[0] = kappa1
    with nogil:
        for t in range(T):
            rho = tanh(0.5 * kap[t])
            d = 1.0 - rho * rho
            q = _student_quad(x1[t], x2[t], rho)
            ll[t] = base[t] - 0.5 * log(d) - 0.5 * (nu + 2.0) * log1p(q / nu)
            if not isfinite(ll[t]) or fabs(kap[t]) > KAPPA_LIMIT:
                bad = t
                break
            s = rho / d - (nu + 2.0) * (rho * q - x1[t] * x2[t]) / (d * (nu + q))
            kap[t + 1] = w + b * kap[t] + a * s / sqrt(_student_info(rho, nu))
    return kap_arr, ll_arr, bad


cdef inline double _gumbel_logc(double x, double y, double lx, double ly, double delta) noexcept nogil:
    # x = -log(u), lx = log(x); density of the (unrotated) Gumbel at (u, v)
    cdef double m, la, L
    cdef double p = delta * lx
    cdef double q = delta * ly
    if p > q:
        m = p
    else:
        m = q
    la = m + log(exp(p - m) + exp(q - m))
    L = exp(la / delta)
    return -L + x + y + (delta - 1.0) * (lx + ly) + (1.0 / delta - 2.0) * la + log(L + delta - 1.0)


cdef inline double _gumbel_score(double x, double y, double lx, double ly, double delta) noexcept nogil:
    cdef double hstep = 1e-6
    if delta > 1.0:
        hstep = 1e-6 * delta
    if delta - hstep <= 1.0:
        # one-sided at the independence boundary
        return (_gumbel_logc(x, y, lx, ly, delta + hstep) - _gumbel_logc(x, y, lx, ly, delta)) / hstep
    return (_gumbel_logc(x, y, lx, ly, delta + hstep) - _gumbel_logc(x, y, lx, ly, delta - hstep)) / (2.0 * hstep)


def gas_rgumbel(const double[:] x, const double[:] y, double w, double a, double b,
                double kappa1, const double[:] info, double kmin, double kmax):
    cdef Py_ssize_t T = x.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] kap_arr = np.empty(T + 1)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ll_arr = np.empty(T)
    cdef double[:] kap = kap_arr
    cdef double[:] ll = ll_arr
    cdef Py_ssize_t t, bad = -1
    cdef double delta, s, fi, lx, ly
    kap[0] = kappa1
    with nogil:
        for t in range(T):
            if fabs(kap[t]) > KAPPA_LIMIT:
                bad = t
                break
            delta = 1.0 + exp(kap[t])
            lx = log(x[t])
            ly = log(y[t])
            ll[t] = _gumbel_logc(x[t], y[t], lx, ly, delta)
            if not isfinite(ll[t]):
                bad = t
                break
            s = _gumbel_score(x[t], y[t], lx, ly, delta)
            fi = _interp(kap[t], info, kmin, kmax)
            kap[t + 1] = w + b * kap[t] + a * s / sqrt(fi)
    return kap_arr, ll_arr, bad


def gas_sim_normal(const double[:] z1, const double[:] z2, double w, double a, double b,
                   double kappa1, const double[:] info, double kmin, double kmax):
    cdef Py_ssize_t T = z1.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] kap_arr = np.empty(T + 1)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] x1_arr = np.empty(T)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] x2_arr = np.empty(T)
    cdef double[:] kap = kap_arr
    cdef double[:] x1 = x1_arr
    cdef double[:] x2 = x2_arr
    cdef Py_ssize_t t
    cdef double rho, s
    kap[0] = kappa1
    with nogil:
        for t in range(T):
            rho = tanh(0.5 * kap[t])
            x1[t] = z1[t]
            x2[t] = rho * z1[t] + sqrt(1.0 - rho * rho) * z2[t]
            s = _normal_score(x1[t], x2[t], rho)
            kap[t + 1] = w + b * kap[t] + a * s / sqrt(_interp(kap[t], info, kmin, kmax))
    return x1_arr, x2_arr, kap_arr


def gas_sim_student(const double[:] z1, const double[:] z2, const double[:] g, double nu,
                    double w, double a, double b, double kappa1):
    cdef Py_ssize_t T = z1.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] kap_arr = np.empty(T + 1)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] x1_arr = np.empty(T)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] x2_arr = np.empty(T)
    cdef double[:] kap = kap_arr
    cdef double[:] x1 = x1_arr
    cdef double[:] x2 = x2_arr
    cdef Py_ssize_t t
    cdef double rho, d, q, s
    kap[0] = kappa1
    with nogil:
        for t in range(T):
            rho = tanh(0.5 * kap[t])
            d = 1.0 - rho * rho
            x1[t] = g[t] * z1[t]
            x2[t] = g[t] * (rho * z1[t] + sqrt(d) * z2[t])
            q = _student_quad(x1[t], x2[t], rho)
            s = rho / d - (nu + 2.0) * (rho * q - x1[t] * x2[t]) / (d * (nu + q))
            kap[t + 1] = w + b * kap[t] + a * s / sqrt(_student_info(rho, nu))
    return x1_arr, x2_arr, kap_arr


def gas_sim_rgumbel(const double[:] theta, const double[:] wexp, const double[:] e1,
                    const double[:] e2, double w, double a, double b, double kappa1,
                    const double[:] info, double kmin, double kmax):
    """Marshall-Olkin draws with a positive-stable frailty (Kanter's representation)."""
    cdef Py_ssize_t T = theta.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] kap_arr = np.empty(T + 1)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] x_arr = np.empty(T)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] y_arr = np.empty(T)
    cdef double[:] kap = kap_arr
    cdef double[:] xs = x_arr
    cdef double[:] ys = y_arr
    cdef Py_ssize_t t
    cdef double delta, alpha, lv, s, lx, ly
    kap[0] = kappa1
    with nogil:
        for t in range(T):
            delta = 1.0 + exp(kap[t])
            alpha = 1.0 / delta
            # log of the frailty; the direct form overflows for large delta
            lv = (log(sin(alpha * theta[t])) - log(sin(theta[t])) / alpha
                  + (1.0 - alpha) / alpha * (log(sin((1.0 - alpha) * theta[t])) - log(wexp[t])))
            xs[t] = exp(alpha * (log(e1[t]) - lv))
            ys[t] = exp(alpha * (log(e2[t]) - lv))
            lx = log(xs[t])
            ly = log(ys[t])
            s = _gumbel_score(xs[t], ys[t], lx, ly, delta)
            kap[t + 1] = w + b * kap[t] + a * s / sqrt(_interp(kap[t], info, kmin, kmax))
    return x_arr, y_arr, kap_arr
