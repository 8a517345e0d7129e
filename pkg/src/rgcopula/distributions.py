"""
Univariate distributions used by the margin models.

Hansen's skewed Student-t (zero mean, unit variance), normal/Student-t
helpers and the rescaled empirical distribution function.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special, stats

__all__ = [
    "NU_MAX",
    "SkewTParams",
    "EmpiricalDist",
    "skewt_pdf",
    "skewt_logpdf",
    "skewt_cdf",
    "skewt_quantile",
    "skewt_sample",
    "ecdf_eval",
    "ecdf_quantile",
]

# beyond this the normal limit is used
NU_MAX = 1e7


@dataclass(frozen=True)
class SkewTParams:
    """Shape of the standardized skewed-t: degrees of freedom and skewness."""

    nu: float
    lam: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.lam) or abs(self.lam) >= 1.0:
            raise ValueError(f"skewness must lie in (-1, 1), got {self.lam}")
        if not self.nu > 2.0:
            raise ValueError(f"degrees of freedom must exceed 2, got {self.nu}")

    @classmethod
    def from_nu_inv(cls, nu_inv: float, lam: float = 0.0) -> "SkewTParams":
        if nu_inv <= 1.0 / NU_MAX:
            return cls(np.inf, lam)
        return cls(1.0 / nu_inv, lam)

    @property
    def nu_inv(self) -> float:
        return 0.0 if self.is_normal_limit else 1.0 / self.nu

    @property
    def is_normal_limit(self) -> bool:
        return self.nu >= NU_MAX


def _constants(p: SkewTParams) -> tuple[float, float, float]:
    """Return (a, b, c) of Hansen's parameterization."""
    lam = p.lam
    if p.is_normal_limit:
        c = 1.0 / np.sqrt(2.0 * np.pi)
        a = 4.0 * lam * c
    else:
        nu = p.nu
        logc = (
            special.gammaln(0.5 * (nu + 1.0))
            - special.gammaln(0.5 * nu)
            - 0.5 * np.log(np.pi * (nu - 2.0))
        )
        c = np.exp(logc)
        a = 4.0 * lam * c * (nu - 2.0) / (nu - 1.0)
    b = np.sqrt(1.0 + 3.0 * lam**2 - a**2)
    return a, b, c


def skewt_logpdf(z, p: SkewTParams):
    z = np.asarray(z, dtype=float)
    a, b, c = _constants(p)
    lam = p.lam
    y = b * z + a
    scale = np.where(y < 0.0, 1.0 - lam, 1.0 + lam)
    w = y / scale
    if p.is_normal_limit:
        return np.log(b * c) - 0.5 * w**2
    nu = p.nu
    return np.log(b * c) - 0.5 * (nu + 1.0) * np.log1p(w**2 / (nu - 2.0))


def skewt_pdf(z, p: SkewTParams):
    """Density of the zero-mean, unit-variance skewed-t at ``z``."""
    return np.exp(skewt_logpdf(z, p))


def _t_cdf(x, nu):
    if np.isinf(nu):
        return special.ndtr(x)
    return special.stdtr(nu, x)


def _t_ppf(q, nu):
    """Student-t quantile through the inverse regularized incomplete beta.

    Several times faster than ``stdtrit``; the center uses the complementary
    form to avoid cancellation in 1/x - 1.
    """
    if np.isinf(nu):
        return special.ndtri(q)
    q = np.asarray(q, dtype=float)
    p2 = 2.0 * np.minimum(q, 1.0 - q)
    t2 = np.empty_like(p2)
    tail = p2 < 0.5
    x = special.betaincinv(0.5 * nu, 0.5, p2[tail])
    t2[tail] = nu * (1.0 - x) / x
    y = special.betaincinv(0.5, 0.5 * nu, 1.0 - p2[~tail])
    t2[~tail] = nu * y / (1.0 - y)
    out = np.sign(q - 0.5) * np.sqrt(t2)
    return out if out.ndim else float(out)


def skewt_cdf(z, p: SkewTParams):
    z = np.asarray(z, dtype=float)
    a, b, _ = _constants(p)
    lam = p.lam
    y = b * z + a
    r = 1.0 if p.is_normal_limit else np.sqrt(p.nu / (p.nu - 2.0))
    left = (1.0 - lam) * _t_cdf(r * y / (1.0 - lam), p.nu)
    right = (1.0 + lam) * _t_cdf(r * y / (1.0 + lam), p.nu) - lam
    out = np.where(y < 0.0, left, right)
    return np.clip(out, 0.0, 1.0)


def skewt_quantile(u, p: SkewTParams):
    """Inverse CDF via the closed-form piecewise inverse of Hansen's CDF.

    Raises ``ValueError`` if any ``u`` is outside the open unit interval.
    """
    u = np.asarray(u, dtype=float)
    if np.any(~((u > 0.0) & (u < 1.0))):
        raise ValueError("quantile levels must lie strictly inside (0, 1)")
    a, b, _ = _constants(p)
    lam = p.lam
    r = 1.0 if p.is_normal_limit else np.sqrt((p.nu - 2.0) / p.nu)
    lower = u < 0.5 * (1.0 - lam)
    side = np.where(lower, 1.0 - lam, 1.0 + lam)
    level = np.where(lower, u, u + lam) / side
    y = side * r * _t_ppf(level, p.nu)
    return (y - a) / b


def skewt_sample(n: int, p: SkewTParams, seed=None) -> np.ndarray:
    """Draw ``n`` i.i.d. values by inverting uniform draws."""
    rng = np.random.default_rng(seed)
    u = rng.random(n)
    # random() is on [0, 1); 0 would map to -inf
    u = np.where(u == 0.0, np.nextafter(0.0, 1.0), u)
    return skewt_quantile(u, p)


@dataclass(frozen=True)
class EmpiricalDist:
    sorted_sample: np.ndarray

    def __post_init__(self):
        s = np.sort(np.asarray(self.sorted_sample, dtype=float))
        if s.size == 0:
            raise ValueError("empirical distribution needs at least one point")
        object.__setattr__(self, "sorted_sample", s)

    @property
    def size(self) -> int:
        return self.sorted_sample.size


def ecdf_eval(z, d: EmpiricalDist):
    """Rescaled empirical CDF, count(sample <= z) / (T + 1)."""
    counts = np.searchsorted(d.sorted_sample, np.asarray(z, dtype=float), side="right")
    return counts / (d.size + 1.0)


def ecdf_quantile(u, d: EmpiricalDist):
    """Inverse of :func:`ecdf_eval`, linear between order statistics.

    The k-th order statistic sits at level k / (T + 1); levels outside
    [1/(T+1), T/(T+1)] map to the sample extremes.
    """
    u = np.asarray(u, dtype=float)
    pos = np.clip(u * (d.size + 1.0) - 1.0, 0.0, d.size - 1.0)
    return np.interp(pos, np.arange(d.size), d.sorted_sample)


def normal_logpdf(x):
    return -0.5 * (np.log(2.0 * np.pi) + np.asarray(x) ** 2)


def student_t_ppf(q, nu):
    return _t_ppf(q, nu)


def student_t_cdf(x, nu):
    return _t_cdf(x, nu)


def student_t_logpdf(x, nu):
    return stats.t.logpdf(x, nu)
