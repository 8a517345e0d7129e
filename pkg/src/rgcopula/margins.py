"""
AR(p) mean with log-linear Realized-GARCH(1,1) variance and skewed-t
innovations, plus a Gaussian GARCH(1,1) benchmark.

Returns and realized variances are passed as ``(ret, rv)`` arrays or as a
sequence of :class:`~rgcopula.market_data.DailyObservation`.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import optimize
from scipy.signal import lfilter

from rgcopula import _core
from rgcopula.distributions import SkewTParams, skewt_cdf, skewt_logpdf, skewt_quantile
from rgcopula.market_data import RV_FLOOR

logger = logging.getLogger(__name__)

__all__ = [
    "ConvergenceError",
    "RealGarchParams",
    "GarchParams",
    "MarginFit",
    "GarchFit",
    "FilterOutput",
    "PIT_CLIP",
    "asset_arrays",
    "rg_filter",
    "rg_loglik",
    "rg_fit",
    "rg_simulate",
    "rg_forecast_logh",
    "garch_fit",
    "garch_simulate",
    "ar_order_select",
    "DAX_TABLE1",
    "PX_TABLE1",
]

MAX_AR = 5
PIT_CLIP = 1e-10
LOGH_INIT_WINDOW = 50
_LOG2PI = np.log(2.0 * np.pi)


class ConvergenceError(RuntimeError):
    """Optimizer failed; carries the best point found and its gradient norm."""

    def __init__(self, message, best_x=None, grad_norm=None):
        super().__init__(message)
        self.best_x = best_x
        self.grad_norm = grad_norm


@dataclass(frozen=True)
class RealGarchParams:
    mu: float
    ar: tuple
    omega: float
    beta: float
    gamma: float
    psi: float
    phi: float
    tau1: float
    tau2: float
    sigma_u2: float
    innov: SkewTParams = field(default_factory=lambda: SkewTParams(np.inf, 0.0))

    def __post_init__(self):
        object.__setattr__(self, "ar", tuple(float(a) for a in self.ar))
        if len(self.ar) > MAX_AR:
            raise ValueError(f"AR order is capped at {MAX_AR}")
        if not self.sigma_u2 > 0:
            raise ValueError("measurement variance must be positive")

    @property
    def p(self) -> int:
        return len(self.ar)

    @property
    def persistence(self) -> float:
        return self.beta + self.gamma * self.phi

    @property
    def is_stationary(self) -> bool:
        return abs(self.persistence) < 1.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ar"] = list(self.ar)
        d["innov"] = {"nu": _json_float(self.innov.nu), "lam": self.innov.lam,
                      "nu_inv": self.innov.nu_inv}
        return d

    @classmethod
    def from_dict(cls, d) -> "RealGarchParams":
        d = dict(d)
        inn = d.pop("innov")
        innov = SkewTParams.from_nu_inv(inn["nu_inv"], inn["lam"])
        return cls(innov=innov, **d)


def _json_float(v):
    return None if not np.isfinite(v) else float(v)


# reference DAX / PX estimates; sigma_u2 backed out of the gap between the joint
# and partial log-likelihoods over 1349 days
DAX_TABLE1 = RealGarchParams(
    mu=0.0, ar=(), omega=0.2000, beta=0.5746, gamma=0.4072, psi=-0.5376, phi=0.9655,
    tau1=-0.1691, tau2=0.0717, sigma_u2=0.2078, innov=SkewTParams(13.6919, -0.1161),
)
PX_TABLE1 = RealGarchParams(
    mu=-0.0005, ar=(0.0842, -0.1069), omega=0.1794, beta=0.6600, gamma=0.3399,
    psi=-0.5834, phi=0.8996, tau1=-0.1414, tau2=0.0943, sigma_u2=0.2725,
    innov=SkewTParams(7.3569, -0.0830),
)


@dataclass(frozen=True)
class GarchParams:
    mu: float
    ar: tuple
    kappa: float
    phi_arch: float
    psi_garch: float

    def __post_init__(self):
        object.__setattr__(self, "ar", tuple(float(a) for a in self.ar))
        if min(self.kappa, self.phi_arch, self.psi_garch) < 0:
            raise ValueError("GARCH parameters must be nonnegative")
        if self.phi_arch + self.psi_garch >= 1.0:
            raise ValueError("GARCH persistence must be below one")

    def to_dict(self):
        d = asdict(self)
        d["ar"] = list(self.ar)
        return d


@dataclass(frozen=True)
class FilterOutput:
    h: np.ndarray
    z: np.ndarray
    u_resid: np.ndarray
    h_next: float


@dataclass
class MarginFit:
    params: RealGarchParams
    loglik_joint: float
    loglik_partial: float
    h: np.ndarray
    z: np.ndarray
    u: np.ndarray
    nobs: int
    converged: bool = True
    grad_norm: float = float("nan")
    n_iter: int = 0
    h_next: float = float("nan")
    logh0: float = float("nan")

    @property
    def n_params(self) -> int:
        return 1 + self.params.p + 10

    @property
    def aic(self) -> float:
        return 2 * self.n_params - 2 * self.loglik_joint

    @property
    def bic(self) -> float:
        return self.n_params * np.log(self.nobs) - 2 * self.loglik_joint

    @property
    def aic_r(self) -> float:
        # the measurement variance does not enter the return likelihood
        return 2 * (self.n_params - 1) - 2 * self.loglik_partial

    @property
    def bic_r(self) -> float:
        return (self.n_params - 1) * np.log(self.nobs) - 2 * self.loglik_partial

    def to_dict(self, include_series=True) -> dict:
        d = {
            "model": "ar_realized_garch_11_skewt",
            "params": self.params.to_dict(),
            "persistence": self.params.persistence,
            "loglik_joint": self.loglik_joint,
            "loglik_partial": self.loglik_partial,
            "aic": self.aic,
            "bic": self.bic,
            "aic_r": self.aic_r,
            "bic_r": self.bic_r,
            "nobs": self.nobs,
            "converged": self.converged,
            "grad_norm": self.grad_norm,
            "n_iter": self.n_iter,
            "nu_at_bound": self.params.innov.is_normal_limit,
            "logh0": self.logh0,
            "h_next": self.h_next,
        }
        if include_series:
            d["h"] = self.h.tolist()
            d["z"] = self.z.tolist()
            d["u"] = self.u.tolist()
        return d

    @classmethod
    def from_dict(cls, d) -> "MarginFit":
        return cls(
            params=RealGarchParams.from_dict(d["params"]),
            loglik_joint=d["loglik_joint"],
            loglik_partial=d["loglik_partial"],
            h=np.asarray(d["h"]),
            z=np.asarray(d["z"]),
            u=np.asarray(d["u"]),
            nobs=d["nobs"],
            converged=d["converged"],
            grad_norm=d["grad_norm"],
            n_iter=d["n_iter"],
            h_next=d["h_next"],
            logh0=d["logh0"],
        )


@dataclass
class GarchFit:
    params: GarchParams
    loglik: float
    h: np.ndarray
    z: np.ndarray
    nobs: int
    converged: bool = True

    @property
    def n_params(self) -> int:
        return 1 + len(self.params.ar) + 3

    @property
    def aic(self) -> float:
        return 2 * self.n_params - 2 * self.loglik

    @property
    def bic(self) -> float:
        return self.n_params * np.log(self.nobs) - 2 * self.loglik

    def to_dict(self):
        return {"model": "ar_garch_11_normal", "params": self.params.to_dict(),
                "loglik": self.loglik, "aic": self.aic, "bic": self.bic, "nobs": self.nobs}


def asset_arrays(asset):
    """Return ``(ret, rv)`` float arrays from either accepted input form."""
    if isinstance(asset, tuple) and len(asset) == 2 and np.ndim(asset[0]) == 1:
        x, rv = asset
    else:
        x = [o.ret for o in asset]
        rv = [o.rv for o in asset]
    x = np.asarray(x, dtype=float)
    rv = np.maximum(np.asarray(rv, dtype=float), RV_FLOOR)
    if x.shape != rv.shape:
        raise ValueError("returns and realized variances differ in length")
    return x, rv


def _mean_residuals(x, mu, ar):
    """x_t - mu - sum_k ar_k x_{t-k}; pre-sample lags are set to the sample mean."""
    p = len(ar)
    if p == 0:
        return x - mu
    padded = np.concatenate((np.full(p, x.mean()), x))
    fitted = lfilter(np.concatenate(([0.0], ar)), [1.0], padded)[p:]
    return x - mu - fitted


def default_logh0(rv) -> float:
    return float(np.mean(np.log(rv[:LOGH_INIT_WINDOW])))


def rg_filter(asset, params: RealGarchParams, logh0=None) -> FilterOutput:
    """Filter conditional variances, standardized and measurement residuals.

    ``h`` has the same length as the input; ``h_next`` is the one-step-ahead
    variance implied by the last observation.
    """
    x, rv = asset_arrays(asset)
    if x.size < params.p + 1:
        raise ValueError("series shorter than AR order + 1")
    logrv = np.log(rv)
    if logh0 is None:
        logh0 = default_logh0(rv)
    logh = _core.rg_logh(logrv, float(logh0), params.omega, params.beta, params.gamma)
    if not np.all(np.isfinite(logh)) or np.max(logh) > 700.0:
        bad = int(np.argmax(~np.isfinite(logh) | (logh > 700.0)))
        raise OverflowError(f"log-variance recursion overflowed at index {bad}")
    h = np.exp(logh[:-1])
    e = _mean_residuals(x, params.mu, params.ar)
    z = e / np.sqrt(h)
    tau = params.tau1 * z + params.tau2 * (z * z - 1.0)
    u_resid = logrv - params.psi - params.phi * logh[:-1] - tau
    return FilterOutput(h=h, z=z, u_resid=u_resid, h_next=float(np.exp(logh[-1])))


def _loglik_terms(out: FilterOutput, params: RealGarchParams, start: int):
    z = out.z[start:]
    ret_terms = skewt_logpdf(z, params.innov) - 0.5 * np.log(out.h[start:])
    u = out.u_resid[start:]
    meas_terms = -0.5 * (_LOG2PI + np.log(params.sigma_u2) + u * u / params.sigma_u2)
    return ret_terms, meas_terms


def rg_loglik(asset, params: RealGarchParams, start=None, logh0=None) -> tuple[float, float]:
    """Return (joint, partial) log-likelihoods, summed over t >= start (default p)."""
    out = rg_filter(asset, params, logh0)
    start = params.p if start is None else start
    ret_terms, meas_terms = _loglik_terms(out, params, start)
    partial = float(np.sum(ret_terms))
    return partial + float(np.sum(meas_terms)), partial


def rg_forecast_logh(params: RealGarchParams, logh_t: float, rv_t: float) -> float:
    """log h_{t+1} from quantities known at t."""
    return params.omega + params.beta * logh_t + params.gamma * np.log(max(rv_t, RV_FLOOR))


# --- parameter transforms -------------------------------------------------

_LAM_MAX = 0.995


def _logistic(v):
    return 0.5 * (1.0 + np.tanh(0.5 * v))


def _logit(p):
    return np.log(p) - np.log1p(-p)


def _pack(params: RealGarchParams) -> np.ndarray:
    nu_inv = min(max(params.innov.nu_inv, 1e-8), 0.49)
    return np.array([
        params.mu, *params.ar, params.omega, np.arctanh(np.clip(params.beta, -0.999, 0.999)),
        params.gamma, params.psi, params.phi, params.tau1, params.tau2,
        np.log(params.sigma_u2), _logit(2.0 * nu_inv), np.arctanh(params.innov.lam / _LAM_MAX),
    ])


def _unpack(theta, p: int) -> RealGarchParams:
    mu = theta[0]
    ar = tuple(theta[1:1 + p])
    (omega, braw, gamma, psi, phi, tau1, tau2, lsu, nraw, lraw) = theta[1 + p:]
    nu_inv = 0.5 * _logistic(nraw)
    return RealGarchParams(
        mu=float(mu), ar=ar, omega=float(omega), beta=float(np.tanh(braw)), gamma=float(gamma),
        psi=float(psi), phi=float(phi), tau1=float(tau1), tau2=float(tau2),
        sigma_u2=float(np.exp(np.clip(lsu, -30, 30))),
        innov=SkewTParams.from_nu_inv(float(nu_inv), float(_LAM_MAX * np.tanh(lraw))),
    )


def _central_grad(f, x, step=1e-5):
    g = np.empty_like(x)
    for i in range(x.size):
        h = step * max(1.0, abs(x[i]))
        xp = x.copy()
        xm = x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (f(xp) - f(xm)) / (2.0 * h)
    return g


def _initial_params(x, rv, p) -> RealGarchParams:
    logrv = np.log(rv)
    lv = np.log(np.var(x) + 1e-300)
    beta, gamma, phi = 0.6, 0.35, 1.0
    psi = float(np.mean(logrv) - phi * lv)
    omega = float((1.0 - beta) * lv - gamma * np.mean(logrv))
    return RealGarchParams(
        mu=float(np.mean(x)), ar=(0.0,) * p, omega=omega, beta=beta, gamma=gamma,
        psi=psi, phi=phi, tau1=-0.05, tau2=0.05,
        sigma_u2=float(max(0.25 * np.var(logrv), 1e-3)), innov=SkewTParams(10.0, 0.0),
    )


def _fit_objective(x, rv, p, start, logh0):
    n = x.size - start

    def nll(theta):
        try:
            params = _unpack(theta, p)
            joint, _ = rg_loglik((x, rv), params, start=start, logh0=logh0)
        except (OverflowError, ValueError, FloatingPointError):
            return 1e10
        if not np.isfinite(joint):
            return 1e10
        return -joint / n

    return nll


def _minimize(nll, theta0, maxiter):
    with np.errstate(all="ignore"):
        res = optimize.minimize(
            nll, theta0, jac=lambda th: _central_grad(nll, th), method="L-BFGS-B",
            options={"maxiter": maxiter, "gtol": 1e-6, "ftol": 1e-13},
        )
        grad = _central_grad(nll, res.x)
    return res, float(np.max(np.abs(grad)))


def rg_fit(asset, p: int = 0, init: RealGarchParams | None = None, n_starts: int = 5,
           seed: int = 0, maxiter: int = 500, start: int | None = None) -> MarginFit:
    """Maximum likelihood fit of the AR(p) Realized-GARCH(1,1) model.

    Multistart quasi-Newton on transformed parameters; starts whose optimum is
    not stationary are discarded. ``start`` sets the first observation entering
    the likelihood (default ``p``).
    """
    if not 0 <= p <= MAX_AR:
        raise ValueError(f"AR order must be in [0, {MAX_AR}]")
    x, rv = asset_arrays(asset)
    start = p if start is None else start
    logh0 = default_logh0(rv)
    nll = _fit_objective(x, rv, p, start, logh0)
    base = init if init is not None else _initial_params(x, rv, p)
    if base.p != p:
        base = RealGarchParams(**{**asdict(base), "ar": (0.0,) * p, "innov": base.innov})
    theta0 = _pack(base)
    rng = np.random.default_rng(seed)
    starts = [theta0] + [theta0 + rng.normal(0.0, 0.1, theta0.size) for _ in range(n_starts - 1)]

    best = None
    for th in starts:
        res, gnorm = _minimize(nll, th, maxiter)
        if not np.isfinite(res.fun) or res.fun >= 1e9:
            continue
        cand = _unpack(res.x, p)
        if not cand.is_stationary:
            logger.info("discarding non-stationary optimum (persistence %.4f)", cand.persistence)
            continue
        if best is None or res.fun < best[0].fun:
            best = (res, gnorm)
    if best is None:
        raise ConvergenceError("no stationary optimum found", best_x=theta0, grad_norm=np.nan)
    res, gnorm = best
    converged = bool(res.success) or gnorm < 1e-3
    if not converged:
        raise ConvergenceError(
            f"Realized-GARCH fit did not converge: {res.message}", best_x=res.x, grad_norm=gnorm
        )
    params = _unpack(res.x, p)
    return _make_fit(x, rv, params, start, logh0, gnorm, int(res.nit))


def _make_fit(x, rv, params, start, logh0, gnorm=float("nan"), nit=0) -> MarginFit:
    out = rg_filter((x, rv), params, logh0)
    ret_terms, meas_terms = _loglik_terms(out, params, start)
    partial = float(np.sum(ret_terms))
    u = np.clip(skewt_cdf(out.z, params.innov), PIT_CLIP, 1.0 - PIT_CLIP)
    return MarginFit(
        params=params, loglik_joint=partial + float(np.sum(meas_terms)), loglik_partial=partial,
        h=out.h, z=out.z, u=u, nobs=x.size - start, converged=True, grad_norm=gnorm,
        n_iter=nit, h_next=out.h_next, logh0=logh0,
    )


def margin_fit_from_params(asset, params: RealGarchParams, logh0=None) -> MarginFit:
    """Filter with fixed parameters (no estimation), e.g. to roll a fit forward."""
    x, rv = asset_arrays(asset)
    if logh0 is None:
        logh0 = default_logh0(rv)
    return _make_fit(x, rv, params, params.p, logh0)


def rg_simulate(params: RealGarchParams, T: int, seed=None, burn: int = 500,
                return_truth: bool = False, u=None):
    """Simulate returns and realized variances from the model.

    With ``return_truth`` also returns the latent ``h`` and innovations ``z``.
    ``u`` optionally supplies the PITs of the ``T`` kept innovations (e.g.
    copula draws); the burn-in innovations are always drawn internally.
    """
    rng = np.random.default_rng(seed)
    n = T + burn
    draws = rng.random(n)
    if u is not None:
        u = np.asarray(u, dtype=float)
        if u.shape != (T,):
            raise ValueError("u must have length T")
        draws[burn:] = u
    u = np.clip(draws, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))
    z = skewt_quantile(u, params.innov)
    meas = rng.normal(0.0, np.sqrt(params.sigma_u2), n)
    shock = params.tau1 * z + params.tau2 * (z * z - 1.0) + meas
    # log h_{t+1} = omega + gamma psi + (beta + gamma phi) log h_t + gamma shock_t
    rho = params.persistence
    if abs(rho) >= 1.0:
        raise ValueError("simulation needs a stationary parameter set")
    c = params.omega + params.gamma * params.psi
    logh_bar = c / (1.0 - rho)
    drive = np.concatenate(([logh_bar], c + params.gamma * shock[:-1]))
    logh = lfilter([1.0], [1.0, -rho], drive)
    logrv = params.psi + params.phi * logh + shock
    eps = np.sqrt(np.exp(logh)) * z
    ar = np.asarray(params.ar)
    x = lfilter([1.0], np.concatenate(([1.0], -ar)), params.mu + eps) if ar.size else params.mu + eps
    sl = slice(burn, None)
    if return_truth:
        return x[sl], np.exp(logrv[sl]), np.exp(logh[sl]), z[sl]
    return x[sl], np.exp(logrv[sl])


# --- GARCH(1,1) benchmark -------------------------------------------------


def _garch_unpack(theta, p) -> GarchParams:
    mu = float(theta[0])
    ar = tuple(theta[1:1 + p])
    lk, r1, r2 = theta[1 + p:]
    pers = 0.9999 * _logistic(r1)
    arch = pers * _logistic(r2)
    return GarchParams(mu=mu, ar=ar, kappa=float(np.exp(lk)), phi_arch=float(arch),
                       psi_garch=float(pers - arch))


def _garch_terms(x, params: GarchParams, start):
    e = _mean_residuals(x, params.mu, params.ar)
    h0 = float(np.var(e))
    h = _core.garch_h(e, h0, params.kappa, params.phi_arch, params.psi_garch)[:-1]
    z = e / np.sqrt(h)
    terms = -0.5 * (_LOG2PI + np.log(h[start:]) + z[start:] ** 2)
    return terms, h, z


def garch_fit(asset, p: int = 0, n_starts: int = 3, seed: int = 0, start=None) -> GarchFit:
    """AR(p)-GARCH(1,1) with Gaussian innovations."""
    x, _ = asset_arrays(asset) if not isinstance(asset, np.ndarray) else (asset, None)
    start = p if start is None else start
    n = x.size - start

    def nll(theta):
        try:
            terms, _, _ = _garch_terms(x, _garch_unpack(theta, p), start)
        except (ValueError, FloatingPointError):
            return 1e10
        v = -float(np.sum(terms)) / n
        return v if np.isfinite(v) else 1e10

    var = float(np.var(x))
    theta0 = np.array([float(np.mean(x)), *([0.0] * p), np.log(0.05 * var), _logit(0.95), _logit(0.1)])
    rng = np.random.default_rng(seed)
    starts = [theta0] + [theta0 + rng.normal(0.0, 0.3, theta0.size) for _ in range(n_starts - 1)]
    best = None
    for th in starts:
        res, gnorm = _minimize(nll, th, 500)
        if best is None or res.fun < best[0].fun:
            best = (res, gnorm)
    res, gnorm = best
    if res.fun >= 1e9:
        raise ConvergenceError("GARCH fit failed", best_x=res.x, grad_norm=gnorm)
    params = _garch_unpack(res.x, p)
    terms, h, z = _garch_terms(x, params, start)
    return GarchFit(params=params, loglik=float(np.sum(terms)), h=h, z=z, nobs=n,
                    converged=bool(res.success) or gnorm < 1e-3)


def garch_simulate(params: GarchParams, T: int, seed=None, burn: int = 500) -> np.ndarray:
    rng = np.random.default_rng(seed)
    n = T + burn
    z = rng.standard_normal(n)
    h = params.kappa / (1.0 - params.phi_arch - params.psi_garch)
    eps = np.empty(n)
    for t in range(n):
        eps[t] = np.sqrt(h) * z[t]
        h = params.kappa + params.phi_arch * eps[t] ** 2 + params.psi_garch * h
    ar = np.asarray(params.ar)
    x = lfilter([1.0], np.concatenate(([1.0], -ar)), params.mu + eps) if ar.size else params.mu + eps
    return x[burn:]


def ar_order_select(asset, max_p: int = MAX_AR, n_starts: int = 1, seed: int = 0) -> int:
    """Smallest AR order minimizing BIC, all orders scored on a common sample."""
    if not 0 <= max_p <= MAX_AR:
        raise ValueError(f"max_p must be in [0, {MAX_AR}]")
    x, rv = asset_arrays(asset)
    n = x.size - max_p
    best_p, best_bic = 0, np.inf
    init = None
    for p in range(max_p + 1):
        if init is not None:
            init = RealGarchParams(**{**asdict(init), "ar": (*init.ar, 0.0), "innov": init.innov})
        fit = rg_fit((x, rv), p, init=init, n_starts=n_starts, seed=seed, start=max_p)
        bic = fit.n_params * np.log(n) - 2.0 * fit.loglik_joint
        if bic < best_bic - 1e-9:
            best_p, best_bic = p, bic
        init = fit.params
    return best_p
