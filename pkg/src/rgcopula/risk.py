"""One-day-ahead Monte Carlo forecasts of the joint return distribution,
portfolio VaR / expected shortfall and the conditional diversification benefit.

Sign convention: VaR and ES are reported in return units, so they are
negative in the left tail. With that convention the bounds order as
``es_upper <= es_port <= es_lower`` and

    cdb = (es_upper - es_port) / (es_upper - es_lower)

lies in [0, 1]: 0 when the portfolio ES equals the weighted individual ES
(no diversification), 1 when it reaches the portfolio quantile.
"""

from __future__ import annotations

import csv
import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special

from rgcopula._seeding import seed_sequence
from rgcopula.copulas import copula_sample
from rgcopula.distributions import ecdf_quantile, skewt_quantile
from rgcopula.estimation import JointModel, scaled_arrays
from rgcopula.margins import _mean_residuals
from rgcopula.market_data import ReturnPanel

logger = logging.getLogger(__name__)

__all__ = [
    "PortfolioSpec",
    "ForecastState",
    "StatePath",
    "ForecastDraws",
    "CdbPoint",
    "RiskForecasts",
    "state_path",
    "forecast_joint",
    "var_forecast",
    "es_forecast",
    "cdb_point",
    "cdb",
    "cdb_constant_band",
    "risk_forecasts",
    "write_risk_csv",
    "gaussian_portfolio_quantile",
    "VAR_LEVELS",
    "DEFAULT_DRAWS",
]

VAR_LEVELS = (0.01, 0.05, 0.10, 0.90, 0.95, 0.99)
DEFAULT_DRAWS = 5000
MIN_DRAWS = 1000
MIN_TAIL = 20


@dataclass(frozen=True)
class PortfolioSpec:
    w1: float = 0.5
    w2: float = 0.5

    def __post_init__(self):
        if abs(self.w1 + self.w2 - 1.0) > 1e-12:
            raise ValueError("portfolio weights must sum to one")


@dataclass(frozen=True)
class ForecastState:
    """Everything known at t that the t+1 forecast needs."""

    mean1: float
    h1: float
    mean2: float
    h2: float
    delta: object
    date: object = None


@dataclass
class StatePath:
    """Per-day forecast states from a fixed-parameter pass over a panel.

    Entry ``j`` holds the forecast for day ``j`` made at the close of day
    ``j - 1``; ``x1``/``x2`` are the realized returns on day ``j`` (model
    units). The extra final state forecasts the day after the panel ends.
    """

    dates: tuple
    mean1: np.ndarray
    h1: np.ndarray
    mean2: np.ndarray
    h2: np.ndarray
    delta: np.ndarray
    x1: np.ndarray
    x2: np.ndarray
    copula_loglik_terms: np.ndarray
    next_state: ForecastState

    def __len__(self):
        return len(self.dates)

    def at(self, j: int) -> ForecastState:
        return ForecastState(float(self.mean1[j]), float(self.h1[j]), float(self.mean2[j]),
                             float(self.h2[j]), _delta_at(self.delta, j), self.dates[j])


def _delta_at(delta, j):
    d = delta[j]
    return tuple(float(v) for v in d) if np.ndim(d) else float(d)


def state_path(model: JointModel, panel: ReturnPanel) -> StatePath:
    """Filter margins and copula over ``panel`` with all parameters fixed.

    ``panel`` must start at the model's first estimation date; days past
    the estimation sample are out-of-sample.
    """
    f1, f2, u1, u2 = model.filter_margins(panel)
    path = model.copula.filter(u1, u2)
    p1, p2 = model.margin1.params, model.margin2.params
    (x1, _), (x2, _) = scaled_arrays(panel, model.spec.scale)
    e1 = _mean_residuals(x1, p1.mu, p1.ar)
    e2 = _mean_residuals(x2, p2.mu, p2.ar)
    m1, m2 = x1 - e1, x2 - e2
    nxt = ForecastState(_next_mean(x1, p1), f1.h_next, _next_mean(x2, p2), f2.h_next,
                        path.delta_next if np.ndim(path.delta_next) == 0 else tuple(path.delta_next))
    return StatePath(tuple(panel.dates), m1, f1.h, m2, f2.h, np.asarray(path.delta), x1, x2,
                     path.loglik_terms, nxt)


def _next_mean(x, p):
    lags = x[::-1][: p.p]
    return float(p.mu + np.dot(p.ar, lags)) if p.p else float(p.mu)


@dataclass
class ForecastDraws:
    x1: np.ndarray
    x2: np.ndarray
    y: np.ndarray
    h1_next: float
    h2_next: float
    delta_next: object


def _margin_quantile(model: JointModel, which: int, u):
    m = model.margin1 if which == 1 else model.margin2
    if model.margin_mode == "semiparametric":
        return ecdf_quantile(u, model.ecdf1 if which == 1 else model.ecdf2)
    return skewt_quantile(u, m.params.innov)


def forecast_joint(model: JointModel, state: ForecastState, S: int = DEFAULT_DRAWS, seed=0,
                   portfolio: PortfolioSpec = PortfolioSpec()) -> ForecastDraws:
    """Simulate ``S`` draws of next-day returns from the fitted joint model."""
    if S < MIN_DRAWS:
        raise ValueError(f"need at least {MIN_DRAWS} draws")
    cop = model.copula
    nu_inv = cop.gas.nu_inv if cop.dynamics == "gas" else cop.nu_inv
    u1, u2 = copula_sample(cop.family, state.delta, S, seed=seed, nu_inv=nu_inv)
    x1 = state.mean1 + np.sqrt(state.h1) * _margin_quantile(model, 1, u1)
    x2 = state.mean2 + np.sqrt(state.h2) * _margin_quantile(model, 2, u2)
    y = portfolio.w1 * x1 + portfolio.w2 * x2
    return ForecastDraws(x1, x2, y, state.h1, state.h2, state.delta)


def _values(draws):
    return draws.y if isinstance(draws, ForecastDraws) else np.asarray(draws, dtype=float)


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")


def var_forecast(draws, alpha: float) -> float:
    """Empirical alpha-quantile of the portfolio draws (linear interpolation).

    Accepts :class:`ForecastDraws` or a plain array of draws.
    """
    _check_alpha(alpha)
    return float(np.quantile(_values(draws), alpha))


def es_forecast(draws, alpha: float) -> float:
    """Mean of the draws at or below the alpha-quantile."""
    _check_alpha(alpha)
    y = _values(draws)
    q = np.quantile(y, alpha)
    tail = y[y <= q]
    if tail.size < MIN_TAIL:
        warnings.warn(f"only {tail.size} tail draws; expected shortfall is noisy", RuntimeWarning,
                      stacklevel=2)
    return float(tail.mean())


@dataclass(frozen=True)
class CdbPoint:
    date: object
    cdb: float
    es_port: float
    es_upper: float
    es_lower: float
    clipped: bool = False


def _cdb_value(es_port, es_upper, es_lower):
    den = es_upper - es_lower
    if den == 0.0 or not np.isfinite(den):
        return np.nan, False
    raw = (es_upper - es_port) / den
    clipped = bool(raw < 0.0 or raw > 1.0)
    return float(np.clip(raw, 0.0, 1.0)), clipped


def cdb_point(draws: ForecastDraws, alpha: float = 0.05,
              portfolio: PortfolioSpec = PortfolioSpec(), date=None) -> CdbPoint:
    """CDB from one set of joint draws; the three ES terms share the draws."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        es_port = es_forecast(draws.y, alpha)
        es_upper = portfolio.w1 * es_forecast(draws.x1, alpha) + portfolio.w2 * es_forecast(draws.x2, alpha)
    es_lower = var_forecast(draws.y, alpha)
    value, clipped = _cdb_value(es_port, es_upper, es_lower)
    return CdbPoint(date, value, es_port, es_upper, es_lower, clipped)


def _date_seed(seed, stream, j):
    # one child per day index, so a day's draws do not depend on the window
    return np.random.default_rng(np.random.SeedSequence(seed_sequence(seed, stream).entropy,
                                                        spawn_key=(j,)))


def cdb(model: JointModel, states: StatePath, indices=None, alpha: float = 0.05,
        S: int = DEFAULT_DRAWS, seed: int = 0,
        portfolio: PortfolioSpec = PortfolioSpec()) -> list[CdbPoint]:
    """CDB path over the given day indices of a :class:`StatePath`.

    Values are clipped to [0, 1]; the number of clipped days is logged.
    Degenerate days (upper bound equal to lower bound) get ``nan``.
    """
    indices = range(len(states)) if indices is None else indices
    out = []
    for j in indices:
        draws = forecast_joint(model, states.at(j), S, _date_seed(seed, "forecast", j), portfolio)
        out.append(cdb_point(draws, alpha, portfolio, states.dates[j]))
    n_clip = sum(p.clipped for p in out)
    if n_clip:
        logger.info("CDB clipped to [0, 1] on %d of %d days", n_clip, len(out))
    return out


def _batch_es(y, alpha):
    """Row-wise empirical quantile and tail mean for a (n, T) array."""
    q = np.quantile(y, alpha, axis=1, keepdims=True)
    mask = y <= q
    es = np.sum(np.where(mask, y, 0.0), axis=1) / np.sum(mask, axis=1)
    return q[:, 0], es


def cdb_constant_band(rho: float, T: int, alpha: float = 0.05, n_boot: int = 10_000, seed: int = 0,
                      portfolio: PortfolioSpec = PortfolioSpec(), sd_ratio: float = 1.0,
                      chunk: int = 500):
    """Sampling distribution of the CDB under i.i.d. bivariate normal returns.

    Each replication draws ``T`` days with correlation ``rho`` (second asset's
    standard deviation ``sd_ratio`` times the first) and computes the CDB
    from empirical ES and quantiles.

    Returns
    -------
    (mean, lo90, hi90) : tuple of float
        Mean and 5% / 95% quantiles over replications.
    """
    _check_alpha(alpha)
    if not -1.0 <= rho <= 1.0:
        raise ValueError("rho must be in [-1, 1]")
    rng = np.random.default_rng(seed_sequence(seed, "cdb_band"))
    s = np.sqrt(max(0.0, 1.0 - rho * rho))
    vals = []
    left = n_boot
    while left > 0:
        n = min(chunk, left)
        z1 = rng.standard_normal((n, T))
        z2 = rng.standard_normal((n, T))
        x1 = z1
        x2 = sd_ratio * (rho * z1 + s * z2)
        y = portfolio.w1 * x1 + portfolio.w2 * x2
        q, es_p = _batch_es(y, alpha)
        es_u = portfolio.w1 * _batch_es(x1, alpha)[1] + portfolio.w2 * _batch_es(x2, alpha)[1]
        den = es_u - q
        with np.errstate(invalid="ignore", divide="ignore"):
            c = np.where(den != 0.0, (es_u - es_p) / den, 0.0)
        vals.append(np.clip(c, 0.0, 1.0))
        left -= n
    vals = np.concatenate(vals)
    return float(vals.mean()), float(np.quantile(vals, 0.05)), float(np.quantile(vals, 0.95))


@dataclass
class RiskForecasts:
    """Per-day portfolio risk forecasts and realized portfolio returns."""

    dates: tuple
    var: dict
    es05: np.ndarray
    cdb05: np.ndarray
    realized: np.ndarray
    cdb_points: list

    @property
    def n_clipped(self) -> int:
        return sum(p.clipped for p in self.cdb_points)


def risk_forecasts(model: JointModel, states: StatePath, indices, S: int = DEFAULT_DRAWS,
                   seed: int = 0, portfolio: PortfolioSpec = PortfolioSpec(),
                   levels=VAR_LEVELS) -> RiskForecasts:
    """VaR at ``levels``, 5% ES and 5% CDB for each day index, from one draw set per day."""
    indices = list(indices)
    var = {a: np.empty(len(indices)) for a in levels}
    es05 = np.empty(len(indices))
    points = []
    for i, j in enumerate(indices):
        draws = forecast_joint(model, states.at(j), S, _date_seed(seed, "forecast", j), portfolio)
        qs = np.quantile(draws.y, levels)
        for a, q in zip(levels, qs):
            var[a][i] = q
        pt = cdb_point(draws, 0.05, portfolio, states.dates[j])
        es05[i] = pt.es_port
        points.append(pt)
    realized = portfolio.w1 * states.x1[indices] + portfolio.w2 * states.x2[indices]
    return RiskForecasts(tuple(states.dates[j] for j in indices), var, es05,
                         np.array([p.cdb for p in points]), realized, points)


def write_risk_csv(rf: RiskForecasts, path) -> None:
    cols = ["var01", "var05", "var10", "var90", "var95", "var99"]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["date", *cols, "es05", "cdb05"])
        for i, d in enumerate(rf.dates):
            row = [str(d)] + [repr(float(rf.var[a][i])) for a in VAR_LEVELS]
            row += [repr(float(rf.es05[i])), repr(float(rf.cdb05[i]))]
            w.writerow(row)


def gaussian_portfolio_quantile(alpha, rho, sd1=1.0, sd2=1.0,
                                portfolio: PortfolioSpec = PortfolioSpec()):
    """Closed-form alpha-quantile of w1 X1 + w2 X2 for zero-mean bivariate normal returns."""
    sd = np.sqrt((portfolio.w1 * sd1) ** 2 + (portfolio.w2 * sd2) ** 2
                 + 2 * rho * portfolio.w1 * portfolio.w2 * sd1 * sd2)
    return float(sd * special.ndtri(alpha))
