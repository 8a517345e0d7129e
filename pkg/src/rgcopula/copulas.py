"""
Bivariate copulas with constant or GAS(1,1) score-driven parameters.

Families: ``normal``, ``student_t``, ``clayton``, ``rotated_gumbel`` (survival
Gumbel, lower-tail dependence) and ``sjc`` (symmetrized Joe-Clayton). GAS
dynamics are available for the normal, Student-t and rotated Gumbel copulas.

Natural parameters ("delta"):

- normal: correlation rho in (-1, 1)
- student_t: rho, with shape given separately as ``nu_inv`` = 1/nu
- clayton: theta > 0
- rotated_gumbel: delta > 1
- sjc: (tau_l, tau_u), lower/upper tail dependence in (0, 1)

The GAS recursion runs on kappa = h(delta) with h the logistic-type map
rho = tanh(kappa / 2) for the elliptical families and delta = 1 + exp(kappa)
for the rotated Gumbel. Updates are scaled by the inverse square root of the
Fisher information, which makes them invariant to the choice of h.
"""

from __future__ import annotations

import functools
import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, special, stats

from rgcopula import _core
from rgcopula.distributions import student_t_ppf
from rgcopula.margins import ConvergenceError

logger = logging.getLogger(__name__)

__all__ = [
    "FAMILIES",
    "GAS_FAMILIES",
    "PIT_CLAMP",
    "GasParams",
    "CopulaPath",
    "CopulaFit",
    "transform",
    "inverse_transform",
    "copula_logpdf",
    "copula_density",
    "copula_cdf",
    "conditional_cdf",
    "copula_sample",
    "copula_score",
    "fisher_info",
    "gas_filter",
    "gas_simulate",
    "constant_fit",
    "gas_fit",
    "kendall_tau",
]

FAMILIES = ("normal", "student_t", "clayton", "rotated_gumbel", "sjc")
GAS_FAMILIES = ("normal", "student_t", "rotated_gumbel")

PIT_CLAMP = 1e-10
NU_INV_BOUNDS = (1e-7, 0.49)

INFO_KAPPA_MIN = -6.0
INFO_KAPPA_MAX = 6.0
INFO_GRID_SIZE = 201
INFO_MC_DRAWS = 50_000
INFO_SEED = 20130531


def _check_family(family):
    if family not in FAMILIES:
        raise ValueError(f"unknown copula family {family!r}; expected one of {FAMILIES}")


def _clamp(u):
    return np.clip(np.asarray(u, dtype=float), PIT_CLAMP, 1.0 - PIT_CLAMP)


def _nu(nu_inv):
    if nu_inv is None:
        raise ValueError("student_t copula needs nu_inv")
    if not NU_INV_BOUNDS[0] / 10 <= nu_inv < 0.5:
        raise ValueError(f"nu_inv must lie in (0, 0.5), got {nu_inv}")
    return 1.0 / nu_inv


def _check_delta(family, delta):
    bad = False
    if family in ("normal", "student_t"):
        bad = not -1.0 < delta < 1.0
    elif family == "clayton":
        bad = not delta > 0.0
    elif family == "rotated_gumbel":
        bad = not delta >= 1.0
    elif family == "sjc":
        tl, tu = delta
        bad = not (0.0 < tl < 1.0 and 0.0 < tu < 1.0)
    if bad:
        raise ValueError(f"inadmissible {family} parameter {delta!r}")


# --- transforms -------------------------------------------------------------


def transform(family, kappa):
    """Map the unrestricted GAS state kappa to the natural parameter."""
    kappa = np.asarray(kappa, dtype=float)
    if family in ("normal", "student_t"):
        out = np.tanh(0.5 * kappa)  # == (1 - e^-k) / (1 + e^-k)
    elif family == "rotated_gumbel":
        out = 1.0 + np.exp(kappa)
    elif family == "clayton":
        out = np.exp(kappa)
    else:
        raise ValueError(f"no scalar transform for {family!r}")
    return float(out) if out.ndim == 0 else out


def inverse_transform(family, delta):
    delta = np.asarray(delta, dtype=float)
    if family in ("normal", "student_t"):
        out = 2.0 * np.arctanh(delta)
    elif family == "rotated_gumbel":
        out = np.log(delta - 1.0)
    elif family == "clayton":
        out = np.log(delta)
    else:
        raise ValueError(f"no scalar transform for {family!r}")
    return float(out) if out.ndim == 0 else out


# --- densities --------------------------------------------------------------


def _normal_logpdf(u1, u2, rho):
    x1, x2 = special.ndtri(u1), special.ndtri(u2)
    d = 1.0 - rho * rho
    return -0.5 * np.log(d) - (rho * rho * (x1 * x1 + x2 * x2) - 2.0 * rho * x1 * x2) / (2.0 * d)


def _log_gamma_ratio(a):
    """log G(a + 1) + log G(a) - 2 log G(a + 1/2).

    The direct form cancels badly once a is large (nu near its upper bound),
    so an asymptotic series in 1/a takes over from a = 25.
    """
    if a < 25.0:
        return special.gammaln(a + 1.0) + special.gammaln(a) - 2.0 * special.gammaln(a + 0.5)
    r = 1.0 / a
    r2 = r * r
    return r * (0.25 + r2 * (-1.0 / 96.0 + r2 * (1.0 / 320.0 - r2 * 17.0 / 7168.0)))


def _student_base(x1, x2, nu):
    return (_log_gamma_ratio(0.5 * nu)
            + 0.5 * (nu + 1.0) * (np.log1p(x1 * x1 / nu) + np.log1p(x2 * x2 / nu)))


def _student_logpdf(u1, u2, rho, nu):
    x1, x2 = student_t_ppf(u1, nu), student_t_ppf(u2, nu)
    d = 1.0 - rho * rho
    q = (x1 * x1 - 2.0 * rho * x1 * x2 + x2 * x2) / d
    return _student_base(x1, x2, nu) - 0.5 * np.log(d) - 0.5 * (nu + 2.0) * np.log1p(q / nu)


def _clayton_logpdf(u1, u2, theta):
    l1, l2 = np.log(u1), np.log(u2)
    s = np.logaddexp(-theta * l1, -theta * l2)
    # log(u^-t + v^-t - 1)
    ls = s + np.log1p(-np.exp(-s))
    return np.log1p(theta) - (1.0 + theta) * (l1 + l2) - (2.0 + 1.0 / theta) * ls


def _gumbel_logpdf_xy(x, y, delta):
    lx, ly = np.log(x), np.log(y)
    la = np.logaddexp(delta * lx, delta * ly)
    L = np.exp(la / delta)
    return -L + x + y + (delta - 1.0) * (lx + ly) + (1.0 / delta - 2.0) * la + np.log(L + delta - 1.0)


def _rgumbel_logpdf(u1, u2, delta):
    return _gumbel_logpdf_xy(-np.log1p(-u1), -np.log1p(-u2), delta)


def _bb7_constants(tau_u, tau_l):
    k = 1.0 / np.log2(2.0 - tau_u)
    g = -1.0 / np.log2(tau_l)
    return k, g


def _bb7_parts(u1, u2, k, g):
    # near the upper corner A, B -> 1 and w -> 1, so x - 1 and 1 - w are
    # carried through expm1/log1p instead of being formed by subtraction
    a, b = 1.0 - u1, 1.0 - u2
    la = np.log1p(-np.exp(k * np.log(a)))  # log(1 - a^k)
    lb = np.log1p(-np.exp(k * np.log(b)))
    xm1 = np.expm1(-g * la) + np.expm1(-g * lb)
    lx = np.log1p(xm1)
    w1m = -np.expm1(-lx / g)  # 1 - w, w = x^(-1/g)
    return a, b, la, lb, lx, w1m


def _bb7_logpdf(u1, u2, tau_u, tau_l):
    k, g = _bb7_constants(tau_u, tau_l)
    a, b, la, lb, lx, w1m = _bb7_parts(u1, u2, k, g)
    w = 1.0 - w1m
    return ((-g - 1.0) * (la + lb) + (k - 1.0) * (np.log(a) + np.log(b))
            + (1.0 / k - 2.0) * np.log(w1m) + (-1.0 / g - 2.0) * lx
            + np.log((k - 1.0) * w + k * (1.0 + g) * w1m))


def _bb7_cdf(u1, u2, tau_u, tau_l):
    k, g = _bb7_constants(tau_u, tau_l)
    *_, w1m = _bb7_parts(u1, u2, k, g)
    return -np.expm1(np.log(w1m) / k)


def _bb7_dcdu(u1, u2, tau_u, tau_l):
    k, g = _bb7_constants(tau_u, tau_l)
    a, _, la, _, lx, w1m = _bb7_parts(u1, u2, k, g)
    return np.exp((1.0 / k - 1.0) * np.log(w1m) + (-1.0 / g - 1.0) * lx + (-g - 1.0) * la
                  + (k - 1.0) * np.log(a))


def _sjc_logpdf(u1, u2, tau_l, tau_u):
    return np.log(0.5) + np.logaddexp(
        _bb7_logpdf(u1, u2, tau_u, tau_l), _bb7_logpdf(1.0 - u1, 1.0 - u2, tau_l, tau_u)
    )


def copula_logpdf(family, u1, u2, delta, nu_inv=None):
    """Log copula density, vectorized over (u1, u2). PITs are clamped."""
    _check_family(family)
    _check_delta(family, delta)
    u1, u2 = _clamp(u1), _clamp(u2)
    if family == "normal":
        return _normal_logpdf(u1, u2, delta)
    if family == "student_t":
        return _student_logpdf(u1, u2, delta, _nu(nu_inv))
    if family == "clayton":
        return _clayton_logpdf(u1, u2, delta)
    if family == "rotated_gumbel":
        return _rgumbel_logpdf(u1, u2, delta)
    return _sjc_logpdf(u1, u2, *delta)


def copula_density(family, u1, u2, delta, nu_inv=None):
    return np.exp(copula_logpdf(family, u1, u2, delta, nu_inv))


def _gumbel_cdf(u1, u2, delta):
    x, y = -np.log(u1), -np.log(u2)
    return np.exp(-np.exp(np.logaddexp(delta * np.log(x), delta * np.log(y)) / delta))


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)


def _bvn_cdf(h, k, rho):
    """Standard bivariate normal CDF.

    Uses Phi2 = Phi(h) Phi(k) + (1/2pi) int_0^asin(rho) exp(-(h^2 - 2hk sin t + k^2)
    / (2 cos^2 t)) dt with 64-point Gauss-Legendre; scipy's integrator takes
    over for |rho| > 0.95 where the integrand gets steep.
    """
    h, k = np.broadcast_arrays(np.asarray(h, dtype=float), np.asarray(k, dtype=float))
    if abs(rho) > 0.95:
        pts = np.column_stack((h.ravel(), k.ravel()))
        out = stats.multivariate_normal(cov=[[1.0, rho], [rho, 1.0]]).cdf(pts)
        return np.reshape(out, h.shape)
    top = np.arcsin(rho)
    t = 0.5 * top * (_GL_NODES + 1.0)
    st, c2 = np.sin(t), np.cos(t) ** 2
    hf, kf = h.reshape(-1, 1), k.reshape(-1, 1)
    with np.errstate(invalid="ignore", over="ignore"):
        f = np.exp(-(hf * hf - 2.0 * hf * kf * st + kf * kf) / (2.0 * c2))
    f = np.nan_to_num(f, nan=0.0)  # infinite h or k
    integral = 0.5 * top * (f @ _GL_WEIGHTS)
    out = special.ndtr(h.ravel()) * special.ndtr(k.ravel()) + integral / (2.0 * np.pi)
    return np.clip(out, 0.0, 1.0).reshape(h.shape)


def copula_cdf(family, u1, u2, delta, nu_inv=None):
    """Copula distribution function C(u1, u2)."""
    _check_family(family)
    _check_delta(family, delta)
    u1, u2 = np.broadcast_arrays(np.asarray(u1, dtype=float), np.asarray(u2, dtype=float))
    if family == "normal":
        return _bvn_cdf(special.ndtri(u1), special.ndtri(u2), float(delta))
    if family == "student_t":
        # C(u1, u2) = int_0^u1 C(u2 | s) ds; scipy's multivariate t CDF is only QMC-accurate
        out = [integrate.quad(lambda s, b=b: float(conditional_cdf(family, b, s, delta, nu_inv)),
                              0.0, a, epsabs=1e-11, epsrel=1e-10)[0]
               for a, b in zip(u1.ravel(), u2.ravel())]
        return np.reshape(out, u1.shape)
    if family == "clayton":
        return np.maximum(u1 ** (-delta) + u2 ** (-delta) - 1.0, 0.0) ** (-1.0 / delta)
    if family == "rotated_gumbel":
        return u1 + u2 - 1.0 + _gumbel_cdf(1.0 - u1, 1.0 - u2, delta)
    tl, tu = delta
    return 0.5 * (_bb7_cdf(u1, u2, tu, tl) + _bb7_cdf(1.0 - u1, 1.0 - u2, tl, tu) + u1 + u2 - 1.0)


def conditional_cdf(family, u2, u1, delta, nu_inv=None):
    """C(u2 | u1) = dC(u1, u2)/du1, used for the Rosenblatt transform.

    ``delta`` may be an array aligned with the observations (time-varying).
    """
    _check_family(family)
    u1, u2 = _clamp(u1), _clamp(u2)
    delta = delta if family == "sjc" else np.asarray(delta, dtype=float)
    if family == "normal":
        x1, x2 = special.ndtri(u1), special.ndtri(u2)
        return special.ndtr((x2 - delta * x1) / np.sqrt(1.0 - delta * delta))
    if family == "student_t":
        nu = _nu(nu_inv)
        x1, x2 = student_t_ppf(u1, nu), student_t_ppf(u2, nu)
        scale = np.sqrt((nu + x1 * x1) * (1.0 - delta * delta) / (nu + 1.0))
        return special.stdtr(nu + 1.0, (x2 - delta * x1) / scale)
    if family == "clayton":
        th = delta
        return u1 ** (-th - 1.0) * (u1 ** (-th) + u2 ** (-th) - 1.0) ** (-1.0 / th - 1.0)
    if family == "rotated_gumbel":
        a, b = 1.0 - u1, 1.0 - u2
        x, y = -np.log(a), -np.log(b)
        la = np.logaddexp(delta * np.log(x), delta * np.log(y))
        cg = np.exp(-np.exp(la / delta))
        dg = cg * np.exp((1.0 / delta - 1.0) * la + (delta - 1.0) * np.log(x)) / a
        return 1.0 - dg
    tl, tu = delta
    return 0.5 * (_bb7_dcdu(u1, u2, tu, tl) - _bb7_dcdu(1.0 - u1, 1.0 - u2, tl, tu) + 1.0)


def kendall_tau(family, delta):
    """Population Kendall's tau where a closed form exists."""
    if family in ("normal", "student_t"):
        return 2.0 / np.pi * np.arcsin(delta)
    if family == "clayton":
        return delta / (delta + 2.0)
    if family == "rotated_gumbel":
        return 1.0 - 1.0 / delta
    raise ValueError(f"no closed-form Kendall's tau for {family!r}")


# --- sampling ---------------------------------------------------------------


def _positive_stable_log(alpha, theta, w):
    """log of a positive alpha-stable draw with Laplace transform exp(-s^alpha)."""
    return (np.log(np.sin(alpha * theta)) - np.log(np.sin(theta)) / alpha
            + (1.0 - alpha) / alpha * (np.log(np.sin((1.0 - alpha) * theta)) - np.log(w)))


def copula_sample(family, delta, n, seed=None, nu_inv=None):
    """Draw ``n`` pairs (u1, u2) from the copula; reproducible given ``seed``."""
    _check_family(family)
    _check_delta(family, delta)
    rng = np.random.default_rng(seed)
    if family == "normal":
        z1, z2 = rng.standard_normal(n), rng.standard_normal(n)
        x2 = delta * z1 + np.sqrt(1.0 - delta * delta) * z2
        return special.ndtr(z1), special.ndtr(x2)
    if family == "student_t":
        nu = _nu(nu_inv)
        z1, z2 = rng.standard_normal(n), rng.standard_normal(n)
        g = np.sqrt(nu / rng.chisquare(nu, n))
        x1 = g * z1
        x2 = g * (delta * z1 + np.sqrt(1.0 - delta * delta) * z2)
        return special.stdtr(nu, x1), special.stdtr(nu, x2)
    if family == "clayton":
        v = rng.gamma(1.0 / delta, 1.0, n)
        e1, e2 = rng.exponential(size=n), rng.exponential(size=n)
        return (1.0 + e1 / v) ** (-1.0 / delta), (1.0 + e2 / v) ** (-1.0 / delta)
    if family == "rotated_gumbel":
        alpha = 1.0 / delta
        theta = rng.uniform(0.0, np.pi, n)
        w = rng.exponential(size=n)
        e1, e2 = rng.exponential(size=n), rng.exponential(size=n)
        if delta == 1.0:
            lv = np.zeros(n)
        else:
            lv = _positive_stable_log(alpha, theta, w)
        x = np.exp(alpha * (np.log(e1) - lv))
        y = np.exp(alpha * (np.log(e2) - lv))
        # survival rotation of u = exp(-x)
        return -np.expm1(-x), -np.expm1(-y)
    tl, tu = delta
    u1 = rng.random(n)
    p = rng.random(n)
    flip = rng.random(n) < 0.5
    # mixture of Joe-Clayton and its survival copula with swapped tails
    v_a = _bb7_invert(u1, p, tu, tl)
    v_b = 1.0 - _bb7_invert(1.0 - u1, 1.0 - p, tl, tu)
    return u1, np.where(flip, v_b, v_a)


def _bb7_invert(u1, p, tau_u, tau_l, iters=60):
    u1 = _clamp(u1)
    p = _clamp(p)
    lo = np.zeros_like(u1)
    hi = np.ones_like(u1)
    for _ in range(iters):
        mid = _clamp(0.5 * (lo + hi))
        below = _bb7_dcdu(u1, mid, tau_u, tau_l) < p
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


# --- score and information --------------------------------------------------


def _normal_score(u1, u2, rho):
    x1, x2 = special.ndtri(u1), special.ndtri(u2)
    d = 1.0 - rho * rho
    q = (x1 * x1 - 2.0 * rho * x1 * x2 + x2 * x2) / d
    return (rho + x1 * x2 - rho * q) / d


def _student_score(u1, u2, rho, nu):
    x1, x2 = student_t_ppf(u1, nu), student_t_ppf(u2, nu)
    d = 1.0 - rho * rho
    q = (x1 * x1 - 2.0 * rho * x1 * x2 + x2 * x2) / d
    return rho / d - (nu + 2.0) * (rho * q - x1 * x2) / (d * (nu + q))


def copula_score(family, u1, u2, delta, nu_inv=None):
    """d log c / d delta: analytic for the elliptical families, central FD otherwise."""
    _check_family(family)
    if family == "sjc":
        raise ValueError("score is defined for scalar-parameter families only")
    _check_delta(family, delta)
    u1, u2 = _clamp(u1), _clamp(u2)
    if family == "normal":
        return _normal_score(u1, u2, delta)
    if family == "student_t":
        return _student_score(u1, u2, delta, _nu(nu_inv))
    h = 1e-6 * max(1.0, abs(delta))
    lo = delta - h
    if family == "rotated_gumbel" and lo <= 1.0:
        return (copula_logpdf(family, u1, u2, delta + h) - copula_logpdf(family, u1, u2, delta)) / h
    return (copula_logpdf(family, u1, u2, delta + h) - copula_logpdf(family, u1, u2, lo)) / (2.0 * h)


def _student_info(rho, nu):
    d = 1.0 - rho * rho
    return ((nu + 2.0) * (1.0 + rho * rho) - 2.0 * rho * rho) / ((nu + 4.0) * d * d)


@functools.lru_cache(maxsize=None)
def info_grid(family) -> np.ndarray:
    """Monte-Carlo E[s^2] on a uniform kappa grid over [-6, 6] (built once, read-only)."""
    if family not in ("normal", "rotated_gumbel", "clayton"):
        raise ValueError(f"no information grid for {family!r}")
    kgrid = np.linspace(INFO_KAPPA_MIN, INFO_KAPPA_MAX, INFO_GRID_SIZE)
    out = np.empty(INFO_GRID_SIZE)
    for i, k in enumerate(kgrid):
        delta = transform(family, k)
        u1, u2 = copula_sample(family, delta, INFO_MC_DRAWS, seed=INFO_SEED)
        s = copula_score(family, u1, u2, delta)
        out[i] = np.mean(s * s)
    out.setflags(write=False)
    return out


def fisher_info(family, delta, nu_inv=None):
    """Fisher information of the natural parameter at ``delta``.

    Interpolated from the Monte-Carlo grid; the Student-t uses the closed form
    for the correlation of an elliptical t with known degrees of freedom.
    """
    if family == "student_t":
        return _student_info(np.asarray(delta, dtype=float), _nu(nu_inv))
    kappa = np.asarray(inverse_transform(family, delta), dtype=float)
    if np.any((kappa < INFO_KAPPA_MIN) | (kappa > INFO_KAPPA_MAX)):
        warnings.warn("delta outside the information grid; clamped to the grid edge", stacklevel=2)
    kgrid = np.linspace(INFO_KAPPA_MIN, INFO_KAPPA_MAX, INFO_GRID_SIZE)
    out = np.interp(kappa, kgrid, info_grid(family))
    return float(out) if out.ndim == 0 else out


# --- GAS filtering ----------------------------------------------------------


@dataclass(frozen=True)
class GasParams:
    w: float
    a: float
    b: float
    nu_inv: float | None = None

    def __post_init__(self):
        if not abs(self.b) < 1.0:
            raise ValueError("GAS persistence must satisfy |b| < 1")
        if self.a < 0:
            raise ValueError("GAS score loading must be nonnegative")

    @property
    def kappa_bar(self) -> float:
        return self.w / (1.0 - self.b)


@dataclass
class CopulaPath:
    """Filtered states; ``*_next`` is the one-step-ahead forecast after the last pair."""

    kappa: np.ndarray
    delta: np.ndarray
    loglik: float
    loglik_terms: np.ndarray
    kappa_next: float
    delta_next: object


def _prep(family, u1, u2, nu):
    u1, u2 = _clamp(u1), _clamp(u2)
    if family == "normal":
        return special.ndtri(u1), special.ndtri(u2)
    if family == "student_t":
        x1, x2 = student_t_ppf(u1, nu), student_t_ppf(u2, nu)
        return x1, x2, _student_base(x1, x2, nu)
    return -np.log1p(-u1), -np.log1p(-u2)


def _run_filter(family, params: GasParams, prepped, kappa1):
    kmin, kmax = INFO_KAPPA_MIN, INFO_KAPPA_MAX
    if family == "normal":
        x1, x2 = prepped
        return _core.gas_normal(x1, x2, params.w, params.a, params.b, kappa1,
                                info_grid("normal"), kmin, kmax)
    if family == "student_t":
        x1, x2, base = prepped
        return _core.gas_student(x1, x2, base, 1.0 / params.nu_inv, params.w, params.a,
                                 params.b, kappa1)
    x, y = prepped
    return _core.gas_rgumbel(x, y, params.w, params.a, params.b, kappa1,
                             info_grid("rotated_gumbel"), kmin, kmax)


def gas_filter(family, params: GasParams, u1, u2, kappa1=None) -> CopulaPath:
    """Run the GAS(1,1) recursion over the PIT pairs.

    ``kappa1`` defaults to h(delta) of the constant-copula MLE on the same data.
    Raises ``OverflowError`` (with the offending index) if the state diverges.
    """
    if family not in GAS_FAMILIES:
        raise ValueError(f"GAS dynamics not available for {family!r}")
    if family == "student_t" and params.nu_inv is None:
        raise ValueError("student_t GAS needs nu_inv")
    if kappa1 is None:
        const = constant_fit(family, u1, u2)
        kappa1 = inverse_transform(family, const.delta)
    nu = 1.0 / params.nu_inv if family == "student_t" else None
    prepped = _prep(family, u1, u2, nu)
    kap, ll, bad = _run_filter(family, params, prepped, float(kappa1))
    if bad >= 0:
        raise OverflowError(f"GAS state diverged at index {bad}")
    if family != "student_t" and np.max(np.abs(kap)) > INFO_KAPPA_MAX:
        logger.warning("GAS state left the information grid; information clamped at the edge")
    return CopulaPath(
        kappa=kap[:-1], delta=transform(family, kap[:-1]), loglik=float(np.sum(ll)),
        loglik_terms=ll, kappa_next=float(kap[-1]), delta_next=transform(family, kap[-1]),
    )


def gas_simulate(family, params: GasParams, T, seed=None, kappa1=None):
    """Simulate PIT pairs from a GAS copula; returns (u1, u2, delta_path)."""
    if family not in GAS_FAMILIES:
        raise ValueError(f"GAS dynamics not available for {family!r}")
    rng = np.random.default_rng(seed)
    k1 = params.kappa_bar if kappa1 is None else float(kappa1)
    kmin, kmax = INFO_KAPPA_MIN, INFO_KAPPA_MAX
    if family == "normal":
        z1, z2 = rng.standard_normal(T), rng.standard_normal(T)
        x1, x2, kap = _core.gas_sim_normal(z1, z2, params.w, params.a, params.b, k1,
                                           info_grid("normal"), kmin, kmax)
        u1, u2 = special.ndtr(x1), special.ndtr(x2)
    elif family == "student_t":
        nu = 1.0 / params.nu_inv
        z1, z2 = rng.standard_normal(T), rng.standard_normal(T)
        g = np.sqrt(nu / rng.chisquare(nu, T))
        x1, x2, kap = _core.gas_sim_student(z1, z2, g, nu, params.w, params.a, params.b, k1)
        u1, u2 = special.stdtr(nu, x1), special.stdtr(nu, x2)
    else:
        theta = rng.uniform(0.0, np.pi, T)
        w = rng.exponential(size=T)
        e1, e2 = rng.exponential(size=T), rng.exponential(size=T)
        x, y, kap = _core.gas_sim_rgumbel(theta, w, e1, e2, params.w, params.a, params.b, k1,
                                          info_grid("rotated_gumbel"), kmin, kmax)
        u1, u2 = -np.expm1(-x), -np.expm1(-y)
    return _clamp(u1), _clamp(u2), transform(family, kap[:-1])


# --- estimation -------------------------------------------------------------


@dataclass
class CopulaFit:
    """A fitted copula: constant parameters or GAS dynamics.

    For constant fits ``delta`` is the natural parameter; for GAS fits it is
    the filtered in-sample path and ``gas`` holds (w, a, b[, nu_inv]).
    """

    family: str
    dynamics: str
    loglik: float
    nobs: int
    delta: object
    nu_inv: float | None = None
    gas: GasParams | None = None
    kappa1: float | None = None
    kappa_next: float | None = None
    converged: bool = True
    message: str = ""

    @property
    def n_params(self) -> int:
        if self.dynamics == "gas":
            return 3 + (self.family == "student_t")
        return {"normal": 1, "student_t": 2, "clayton": 1, "rotated_gumbel": 1, "sjc": 2}[self.family]

    @property
    def aic(self):
        return 2 * self.n_params - 2 * self.loglik

    @property
    def bic(self):
        return self.n_params * np.log(self.nobs) - 2 * self.loglik

    def param_dict(self) -> dict:
        if self.dynamics == "gas":
            d = {"w": self.gas.w, "a": self.gas.a, "b": self.gas.b}
            if self.family == "student_t":
                d["nu_inv"] = self.gas.nu_inv
            return d
        if self.family == "sjc":
            return {"tau_l": self.delta[0], "tau_u": self.delta[1]}
        key = {"normal": "rho", "student_t": "rho", "clayton": "theta",
               "rotated_gumbel": "delta"}[self.family]
        d = {key: float(self.delta)}
        if self.family == "student_t":
            d["nu_inv"] = self.nu_inv
        return d

    def filter(self, u1, u2) -> CopulaPath:
        """Evaluate the fitted model (no re-estimation) on a PIT sample.

        For GAS fits the recursion restarts from the stored ``kappa1``.
        """
        if self.dynamics == "gas":
            return gas_filter(self.family, self.gas, u1, u2, kappa1=self.kappa1)
        n = len(np.atleast_1d(u1))
        ll = copula_logpdf(self.family, u1, u2, self.delta, self.nu_inv)
        if self.family == "sjc":
            dpath = np.tile(np.asarray(self.delta, dtype=float), (n, 1))
            kap = np.full(n, np.nan)
            knext = np.nan
        else:
            dpath = np.full(n, float(self.delta))
            kap = np.full(n, inverse_transform(self.family, self.delta))
            knext = float(kap[0])
        return CopulaPath(kappa=kap, delta=dpath, loglik=float(np.sum(ll)), loglik_terms=ll,
                          kappa_next=knext, delta_next=self.delta)

    def delta_path(self, u1, u2):
        return self.filter(u1, u2).delta

    def rosenblatt(self, u1, u2):
        """(e1, e2) = (u1, C(u2 | u1; delta_t)); i.i.d. uniform under the model."""
        if self.dynamics == "gas":
            path = self.filter(u1, u2).delta
            return _clamp(u1), conditional_cdf(self.family, u2, u1, path, self.gas.nu_inv)
        return _clamp(u1), conditional_cdf(self.family, u2, u1, self.delta, self.nu_inv)

    def simulate(self, T, seed=None):
        """Simulate PIT pairs from the fitted model."""
        if self.dynamics == "gas":
            u1, u2, _ = gas_simulate(self.family, self.gas, T, seed=seed, kappa1=self.kappa1)
            return u1, u2
        return copula_sample(self.family, self.delta, T, seed=seed, nu_inv=self.nu_inv)

    def refit(self, u1, u2) -> "CopulaFit":
        if self.dynamics == "gas":
            return gas_fit(self.family, u1, u2)
        return constant_fit(self.family, u1, u2)

    def to_dict(self, dates=None, include_path=True) -> dict:
        d = {
            "family": self.family,
            "dynamics": self.dynamics,
            "params": self.param_dict(),
            "loglik": self.loglik,
            "aic": self.aic,
            "bic": self.bic,
            "nobs": self.nobs,
            "converged": self.converged,
        }
        if self.dynamics == "gas":
            d["kappa1"] = self.kappa1
            d["kappa_next"] = self.kappa_next
        if include_path and self.dynamics == "gas":
            d["path"] = {"delta": np.asarray(self.delta).tolist()}
            if dates is not None:
                d["path"]["dates"] = [str(x) for x in dates]
        return d

    @classmethod
    def from_dict(cls, d) -> "CopulaFit":
        fam, dyn, p = d["family"], d["dynamics"], d["params"]
        if dyn == "gas":
            gas = GasParams(p["w"], p["a"], p["b"], p.get("nu_inv"))
            delta = np.asarray(d.get("path", {}).get("delta", []), dtype=float)
            return cls(fam, dyn, d["loglik"], d["nobs"], delta, nu_inv=p.get("nu_inv"), gas=gas,
                       kappa1=d["kappa1"], kappa_next=d.get("kappa_next"),
                       converged=d.get("converged", True))
        if fam == "sjc":
            delta = (p["tau_l"], p["tau_u"])
        else:
            delta = next(v for k, v in p.items() if k != "nu_inv")
        return cls(fam, dyn, d["loglik"], d["nobs"], delta, nu_inv=p.get("nu_inv"),
                   converged=d.get("converged", True))


_BOUNDS = {
    "normal": (-0.999, 0.999),
    "clayton": (1e-4, 50.0),
    "rotated_gumbel": (1.0 + 1e-6, 50.0),
}


def _moment_start(family, u1, u2):
    tau = stats.kendalltau(u1, u2).statistic
    tau = float(np.clip(tau, 0.01, 0.9)) if np.isfinite(tau) else 0.1
    if family in ("normal", "student_t"):
        return float(np.sin(0.5 * np.pi * tau))
    if family == "clayton":
        return 2.0 * tau / (1.0 - tau)
    if family == "rotated_gumbel":
        return 1.0 / (1.0 - tau)
    return 0.3


def constant_fit(family, u1, u2) -> CopulaFit:
    """Maximum likelihood fit of a constant copula."""
    _check_family(family)
    u1, u2 = _clamp(u1), _clamp(u2)
    n = u1.size
    with np.errstate(all="ignore"):
        if family in _BOUNDS:
            lo, hi = _BOUNDS[family]

            def nll(d):
                v = -np.sum(copula_logpdf(family, u1, u2, d))
                return v if np.isfinite(v) else 1e300

            res = optimize.minimize_scalar(nll, bounds=(lo, hi), method="bounded",
                                           options={"xatol": 1e-10, "maxiter": 1000})
            x0 = _moment_start(family, u1, u2)
            if nll(x0) < res.fun:  # guard against a bounded-search miss
                res = optimize.minimize_scalar(nll, bounds=(max(lo, x0 - 0.2), min(hi, x0 + 0.2)),
                                               method="bounded", options={"xatol": 1e-10})
            return CopulaFit(family, "constant", float(-res.fun), n, float(res.x),
                             converged=bool(res.success))
        if family == "student_t":

            def nll(th):
                try:
                    v = -np.sum(copula_logpdf(family, u1, u2, th[0], th[1]))
                except ValueError:
                    return 1e300
                return v if np.isfinite(v) else 1e300

            x0s = [[_moment_start(family, u1, u2), nu0] for nu0 in (0.1, 0.02)]
            best = None
            for x0 in x0s:
                res = optimize.minimize(nll, x0, method="L-BFGS-B",
                                        bounds=[(-0.999, 0.999), NU_INV_BOUNDS],
                                        options={"ftol": 1e-14, "gtol": 1e-8})
                if best is None or res.fun < best.fun:
                    best = res
            return CopulaFit(family, "constant", float(-best.fun), n, float(best.x[0]),
                             nu_inv=float(best.x[1]), converged=bool(best.success))

        def nll(th):
            try:
                v = -np.sum(copula_logpdf("sjc", u1, u2, (th[0], th[1])))
            except ValueError:
                return 1e300
            return v if np.isfinite(v) else 1e300

        best = None
        for x0 in ([0.3, 0.3], [0.1, 0.1], [0.5, 0.2]):
            res = optimize.minimize(nll, x0, method="L-BFGS-B",
                                    bounds=[(1e-4, 0.9999), (1e-4, 0.9999)])
            if best is None or res.fun < best.fun:
                best = res
        return CopulaFit("sjc", "constant", float(-best.fun), n,
                         (float(best.x[0]), float(best.x[1])), converged=bool(best.success))


def gas_fit(family, u1, u2, init: GasParams | None = None) -> CopulaFit:
    """Maximum likelihood fit of the GAS(1,1) copula over (w, a, b[, nu_inv]).

    The start set always contains the nested constant model (a = b = 0), so the
    optimum is never below the constant-copula likelihood.
    """
    if family not in GAS_FAMILIES:
        raise ValueError(f"GAS dynamics not available for {family!r}")
    u1, u2 = _clamp(u1), _clamp(u2)
    n = u1.size
    const = constant_fit(family, u1, u2)
    kbar = inverse_transform(family, const.delta)
    kappa1 = kbar
    is_t = family == "student_t"
    prepped_cache = {}

    def prepped_for(nu_inv):
        key = nu_inv if is_t else None
        if key not in prepped_cache:
            if len(prepped_cache) > 64:
                prepped_cache.clear()
            prepped_cache[key] = _prep(family, u1, u2, 1.0 / nu_inv if is_t else None)
        return prepped_cache[key]

    def unpack(th):
        return GasParams(float(th[0]), float(th[1]), float(th[2]), float(th[3]) if is_t else None)

    def nll(th):
        try:
            params = unpack(th)
            _, ll, bad = _run_filter(family, params, prepped_for(params.nu_inv), kappa1)
        except ValueError:
            return 1e10
        if bad >= 0:
            return 1e10
        v = -float(np.sum(ll)) / n
        return v if np.isfinite(v) else 1e10

    bounds = [(-10.0, 10.0), (0.0, 3.0), (-0.9999, 0.9999)]
    nu0 = const.nu_inv if is_t else None
    if is_t:
        bounds.append(NU_INV_BOUNDS)
    starts = [[kbar, 0.0, 0.0], [kbar * 0.05, 0.05, 0.95], [kbar * 0.01, 0.03, 0.99],
              [kbar * 0.2, 0.1, 0.8]]
    if init is not None:
        starts.insert(0, [init.w, init.a, init.b] + ([init.nu_inv] if is_t else []))
    if is_t:
        starts = [s if len(s) == 4 else s + [min(max(nu0, NU_INV_BOUNDS[0]), 0.45)] for s in starts]

    best = None
    with np.errstate(all="ignore"):
        for s in starts:
            res = optimize.minimize(nll, np.asarray(s, dtype=float), method="L-BFGS-B",
                                    bounds=bounds,
                                    options={"maxiter": 1000, "ftol": 1e-14, "gtol": 1e-9})
            if best is None or res.fun < best.fun:
                best = res
    if best.fun >= 1e9:
        raise ConvergenceError(f"GAS {family} fit failed", best_x=best.x, grad_norm=np.nan)
    params = unpack(best.x)
    path = gas_filter(family, params, u1, u2, kappa1=kappa1)
    return CopulaFit(family, "gas", path.loglik, n, path.delta, nu_inv=params.nu_inv, gas=params,
                     kappa1=kappa1, kappa_next=path.kappa_next, converged=bool(best.success),
                     message=str(best.message))
