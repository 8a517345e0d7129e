"""Two-stage estimation: margins first, then a copula on the fitted PITs.

Returns are multiplied by ``scale`` (and realized variances by ``scale**2``)
before fitting, so the default ``scale=100`` works in percent units. All
likelihoods, variances and forecasts from a :class:`JointModel` are in those
scaled units.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from rgcopula._seeding import child_seeds
from rgcopula.copulas import (
    PIT_CLAMP,
    CopulaFit,
    GasParams,
    constant_fit,
    copula_sample,
    gas_fit,
    gas_simulate,
)
from rgcopula.distributions import EmpiricalDist, ecdf_eval
from rgcopula.margins import (
    DAX_TABLE1,
    PX_TABLE1,
    ConvergenceError,
    MarginFit,
    RealGarchParams,
    ar_order_select,
    asset_arrays,
    margin_fit_from_params,
    rg_fit,
    rg_simulate,
)
from rgcopula.market_data import ReturnPanel
from rgcopula.stat_tests import floor_cbrt

logger = logging.getLogger(__name__)

__all__ = [
    "ModelSpec",
    "JointModel",
    "BootstrapResult",
    "msml_fit",
    "fit_margins",
    "scaled_arrays",
    "fit_copula",
    "stationary_bootstrap_indices",
    "block_bootstrap_se",
    "parameter_vector",
    "simulate_panel",
    "NGAS_TABLE2",
    "RGUMBEL_GAS_TABLE2",
]

MARGIN_MODES = ("parametric", "semiparametric")
DYNAMICS = ("constant", "gas")
MIN_BOOTSTRAP = 200
MAX_FAIL_FRACTION = 0.10

NGAS_TABLE2 = GasParams(w=0.0121, a=0.0244, b=0.9911)
RGUMBEL_GAS_TABLE2 = GasParams(w=-0.0466, a=0.0466, b=0.9139)


@dataclass(frozen=True)
class ModelSpec:
    """What to fit.

    ``p1``/``p2`` are the AR orders; ``None`` selects each by BIC up to
    ``max_p``.
    """

    family: str = "normal"
    dynamics: str = "constant"
    margin_mode: str = "parametric"
    p1: int | None = 0
    p2: int | None = 0
    max_p: int = 5
    scale: float = 100.0
    n_starts: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.margin_mode not in MARGIN_MODES:
            raise ValueError(f"margin_mode must be one of {MARGIN_MODES}")
        if self.dynamics not in DYNAMICS:
            raise ValueError(f"dynamics must be one of {DYNAMICS}")
        if not self.scale > 0:
            raise ValueError("scale must be positive")

    @property
    def tag(self) -> str:
        prefix = {"normal": "N", "student_t": "t", "clayton": "C", "rotated_gumbel": "RG",
                  "sjc": "SJC"}.get(self.family, self.family)
        tag = f"{prefix}_GAS" if self.dynamics == "gas" else prefix
        return tag + ("_semi" if self.margin_mode == "semiparametric" else "")


def scaled_arrays(panel: ReturnPanel, scale: float):
    """(x1, rv1), (x2, rv2) in model units."""
    a1 = asset_arrays((panel.ret1, panel.rv1))
    a2 = asset_arrays((panel.ret2, panel.rv2))
    s2 = scale * scale
    return (a1[0] * scale, a1[1] * s2), (a2[0] * scale, a2[1] * s2)


@dataclass
class JointModel:
    """Fitted margins plus a copula fitted on their PITs.

    In parametric mode ``loglik_total`` is the sum of both margins' return
    log-likelihoods and the copula log-likelihood. In semiparametric mode the
    margins enter through empirical CDFs and ``loglik_total`` is the copula
    log-likelihood alone.
    """

    spec: ModelSpec
    margin1: MarginFit
    margin2: MarginFit
    copula: CopulaFit
    u1: np.ndarray
    u2: np.ndarray
    loglik_total: float
    ecdf1: EmpiricalDist | None = None
    ecdf2: EmpiricalDist | None = None
    dates: tuple = field(default=())

    def __post_init__(self):
        if len(self.u1) != len(self.u2):
            raise ValueError("PIT series lengths differ")

    @property
    def margin_mode(self) -> str:
        return self.spec.margin_mode

    @property
    def tag(self) -> str:
        return self.spec.tag

    @property
    def nobs(self) -> int:
        return len(self.u1)

    @property
    def n_params(self) -> int:
        k = self.copula.n_params
        if self.margin_mode == "parametric":
            k += self.margin1.n_params - 1 + self.margin2.n_params - 1
        return k

    def filter_margins(self, panel: ReturnPanel):
        """Margin filters and PITs on ``panel`` with the fitted parameters fixed.

        ``panel`` must start on the first estimation date so the variance
        recursion starts from the same point.
        """
        a1, a2 = scaled_arrays(panel, self.spec.scale)
        f1 = margin_fit_from_params(a1, self.margin1.params, logh0=self.margin1.logh0)
        f2 = margin_fit_from_params(a2, self.margin2.params, logh0=self.margin2.logh0)
        if self.margin_mode == "semiparametric":
            u1 = np.clip(ecdf_eval(f1.z, self.ecdf1), PIT_CLAMP, 1 - PIT_CLAMP)
            u2 = np.clip(ecdf_eval(f2.z, self.ecdf2), PIT_CLAMP, 1 - PIT_CLAMP)
        else:
            u1, u2 = f1.u, f2.u
        return f1, f2, u1, u2

    def to_dict(self, include_series=False) -> dict:
        d = {
            "tag": self.tag,
            "spec": {k: getattr(self.spec, k) for k in ModelSpec.__dataclass_fields__},
            "margin_mode": self.margin_mode,
            "loglik_total": self.loglik_total,
            "n_params": self.n_params,
            "nobs": self.nobs,
            "margin1": self.margin1.to_dict(include_series=include_series),
            "margin2": self.margin2.to_dict(include_series=include_series),
            "copula": self.copula.to_dict(dates=self.dates or None, include_path=include_series),
        }
        if self.dates:
            d["sample"] = {"start": str(self.dates[0]), "end": str(self.dates[-1])}
        return d

    @classmethod
    def from_dict(cls, d, panel: ReturnPanel) -> "JointModel":
        """Rebuild a model from ``to_dict`` output and its estimation panel.

        Nothing is re-estimated; states are re-filtered from the stored
        parameters.
        """
        spec = ModelSpec(**d["spec"])
        a1, a2 = scaled_arrays(panel, spec.scale)
        m1 = margin_fit_from_params(a1, RealGarchParams.from_dict(d["margin1"]["params"]),
                                    logh0=d["margin1"]["logh0"])
        m2 = margin_fit_from_params(a2, RealGarchParams.from_dict(d["margin2"]["params"]),
                                    logh0=d["margin2"]["logh0"])
        cop = CopulaFit.from_dict(d["copula"])
        e1 = e2 = None
        if spec.margin_mode == "semiparametric":
            e1, e2 = EmpiricalDist(m1.z), EmpiricalDist(m2.z)
        u1, u2 = _pits(m1, m2, e1, e2)
        if cop.dynamics == "gas":
            cop.delta = cop.filter(u1, u2).delta
        return cls(spec, m1, m2, cop, u1, u2, d["loglik_total"], e1, e2, tuple(panel.dates))


def _pits(m1, m2, e1, e2):
    if e1 is None:
        return m1.u, m2.u
    u1 = np.clip(ecdf_eval(m1.z, e1), PIT_CLAMP, 1 - PIT_CLAMP)
    u2 = np.clip(ecdf_eval(m2.z, e2), PIT_CLAMP, 1 - PIT_CLAMP)
    return u1, u2


def fit_copula(family, dynamics, u1, u2, init=None) -> CopulaFit:
    """Copula stage. Sees only the PIT pairs."""
    if dynamics == "gas":
        return gas_fit(family, u1, u2, init=init)
    return constant_fit(family, u1, u2)


def _fit_margin(asset, p, spec, init=None, n_starts=None):
    n_starts = spec.n_starts if n_starts is None else n_starts
    if p is None:
        p = ar_order_select(asset, max_p=spec.max_p, seed=spec.seed)
    return rg_fit(asset, p=p, init=init, n_starts=n_starts, seed=spec.seed)


def fit_margins(panel: ReturnPanel, spec: ModelSpec) -> tuple[MarginFit, MarginFit]:
    """Stage 1 only: both Realized-GARCH margins in model units."""
    a1, a2 = scaled_arrays(panel, spec.scale)
    return _fit_margin(a1, spec.p1, spec), _fit_margin(a2, spec.p2, spec)


def msml_fit(panel: ReturnPanel, spec: ModelSpec, init: "JointModel | None" = None,
             n_starts: int | None = None, margins=None) -> JointModel:
    """Fit both margins, then the copula on their PITs.

    Parameters
    ----------
    panel : ReturnPanel
        Estimation sample in log-return units.
    spec : ModelSpec
    init : JointModel, optional
        Previous fit used as starting values (bootstrap replicates).
    n_starts : int, optional
        Overrides ``spec.n_starts`` for the margins.
    margins : (MarginFit, MarginFit), optional
        Stage-1 fits already computed on the same panel and scale; lets
        several copulas share one margin estimation.

    Raises
    ------
    ConvergenceError
        If either margin fails; the copula stage is not attempted.
    """
    if margins is not None:
        m1, m2 = margins
    else:
        a1, a2 = scaled_arrays(panel, spec.scale)
        p1 = spec.p1 if init is None else init.margin1.params.p
        p2 = spec.p2 if init is None else init.margin2.params.p
        m1 = _fit_margin(a1, p1, spec, init.margin1.params if init else None, n_starts)
        m2 = _fit_margin(a2, p2, spec, init.margin2.params if init else None, n_starts)

    e1 = e2 = None
    if spec.margin_mode == "semiparametric":
        e1, e2 = EmpiricalDist(m1.z), EmpiricalDist(m2.z)
    u1, u2 = _pits(m1, m2, e1, e2)
    cop = fit_copula(spec.family, spec.dynamics, u1, u2,
                     init=init.copula.gas if init is not None else None)
    if spec.margin_mode == "parametric":
        total = m1.loglik_partial + m2.loglik_partial + cop.loglik
    else:
        total = cop.loglik
    return JointModel(spec, m1, m2, cop, u1, u2, float(total), e1, e2, tuple(panel.dates))


def parameter_vector(model: JointModel) -> tuple[list[str], np.ndarray]:
    """Flat (names, values) of every estimated parameter."""
    names, vals = [], []
    for tag, m in (("m1", model.margin1), ("m2", model.margin2)):
        p = m.params
        items = [("mu", p.mu)] + [(f"ar{k + 1}", v) for k, v in enumerate(p.ar)] + [
            ("omega", p.omega), ("beta", p.beta), ("gamma", p.gamma), ("psi", p.psi),
            ("phi", p.phi), ("tau1", p.tau1), ("tau2", p.tau2), ("sigma_u2", p.sigma_u2),
            ("nu_inv", p.innov.nu_inv), ("lam", p.innov.lam)]
        for k, v in items:
            names.append(f"{tag}.{k}")
            vals.append(float(v))
    for k, v in model.copula.param_dict().items():
        names.append(f"copula.{k}")
        vals.append(float(v))
    return names, np.asarray(vals)


# --- bootstrap --------------------------------------------------------------


def stationary_bootstrap_indices(T: int, mean_block: float, rng: np.random.Generator) -> np.ndarray:
    """Row indices for one stationary-bootstrap resample.

    Blocks start at uniform positions, have geometric lengths with the given
    mean and wrap around the end of the sample.
    """
    if mean_block < 1:
        raise ValueError("mean block length must be >= 1")
    p = 1.0 / mean_block
    idx = np.empty(T, dtype=np.int64)
    new_block = rng.random(T) < p
    starts = rng.integers(0, T, T)
    idx[0] = starts[0]
    for t in range(1, T):
        idx[t] = starts[t] if new_block[t] else (idx[t - 1] + 1) % T
    return idx


@dataclass
class BootstrapResult:
    names: list
    estimate: np.ndarray
    replicates: np.ndarray
    se: np.ndarray
    ci90: np.ndarray
    ci90_percentile: np.ndarray
    n_failed: int
    block_len: float

    @property
    def n_ok(self) -> int:
        return self.replicates.shape[0]

    def to_dict(self) -> dict:
        return {
            "block_len": self.block_len,
            "replicates": self.n_ok,
            "failed": self.n_failed,
            "params": {
                n: {"estimate": float(e), "se": float(s), "ci90": [float(lo), float(hi)],
                    "ci90_percentile": [float(pl), float(ph)]}
                for n, e, s, (lo, hi), (pl, ph) in zip(self.names, self.estimate, self.se,
                                                       self.ci90, self.ci90_percentile)
            },
        }


def _replicate(args):
    panel, spec, point, seed_seq, mean_block = args
    rng = np.random.default_rng(seed_seq)
    idx = stationary_bootstrap_indices(len(panel), mean_block, rng)
    try:
        fit = msml_fit(panel.take(idx), spec, init=point, n_starts=1)
    except (ConvergenceError, OverflowError, ValueError, FloatingPointError) as exc:
        logger.info("bootstrap replicate failed: %s", exc)
        return None
    return parameter_vector(fit)[1]


def block_bootstrap_se(panel: ReturnPanel, spec: ModelSpec, B: int = MIN_BOOTSTRAP,
                       block_len: float | None = None, seed: int = 0,
                       point: JointModel | None = None, threads: int = 1) -> BootstrapResult:
    """Stationary block bootstrap standard errors for every model parameter.

    Day pairs ``(ret1, rv1, ret2, rv2)`` are resampled jointly, the full
    two-stage fit is repeated (AR orders held at the point estimate) and the
    standard deviation across replicates is reported.

    Parameters
    ----------
    block_len : float, optional
        Mean block length; default ``ceil(T ** (1/3))``.
    point : JointModel, optional
        Point estimate; fitted here when omitted.
    threads : int
        Worker processes; results do not depend on it.

    Raises
    ------
    ConvergenceError
        If more than 10% of the replicates fail.
    """
    if B < MIN_BOOTSTRAP:
        raise ValueError(f"need at least {MIN_BOOTSTRAP} bootstrap replicates")
    T = len(panel)
    if block_len is None:
        r = floor_cbrt(T)
        mean_block = float(r if r ** 3 == T else r + 1)
    else:
        mean_block = float(block_len)
    if point is None:
        point = msml_fit(panel, spec)
    # replicates reuse the point estimate's AR orders
    spec_b = replace(spec, p1=point.margin1.params.p, p2=point.margin2.params.p)
    names, est = parameter_vector(point)
    jobs = [(panel, spec_b, point, s, mean_block) for s in child_seeds(seed, "bootstrap", B)]
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as ex:
            out = list(ex.map(_replicate, jobs))
    else:
        out = [_replicate(j) for j in jobs]
    ok = [r for r in out if r is not None]
    n_failed = B - len(ok)
    if n_failed > MAX_FAIL_FRACTION * B:
        raise ConvergenceError(f"{n_failed} of {B} bootstrap replicates failed")
    reps = np.vstack(ok)
    se = reps.std(axis=0, ddof=1)
    ci = np.column_stack((est - 1.6448536269514722 * se, est + 1.6448536269514722 * se))
    pct = np.column_stack((np.quantile(reps, 0.05, axis=0), np.quantile(reps, 0.95, axis=0)))
    return BootstrapResult(names, est, reps, se, ci, pct, n_failed, mean_block)


# --- data generating process -----------------------------------------------


def simulate_panel(T: int, seed: int = 0, family: str = "normal", delta=None,
                   gas: GasParams | None = NGAS_TABLE2, margin1: RealGarchParams = DAX_TABLE1,
                   margin2: RealGarchParams = PX_TABLE1, scale: float = 100.0,
                   start="2000-01-03", nu_inv=None, return_truth: bool = False):
    """Simulate a two-asset panel from Realized-GARCH margins and a copula.

    Margin parameters are in model (scaled) units; the returned panel is in
    log-return units, i.e. divided by ``scale`` (variances by ``scale**2``).
    Pass ``gas=None`` with ``delta`` for a constant copula. Dates are
    consecutive business days from ``start``.

    With ``return_truth`` also returns the copula parameter path.
    """
    ss = np.random.SeedSequence(seed)
    s_cop, s_m1, s_m2 = ss.spawn(3)
    if gas is not None:
        u1, u2, path = gas_simulate(family, gas, T, seed=s_cop)
    else:
        if delta is None:
            raise ValueError("a constant copula needs delta")
        u1, u2 = copula_sample(family, delta, T, seed=s_cop, nu_inv=nu_inv)
        path = np.full(T, delta, dtype=float) if np.ndim(delta) == 0 else np.tile(delta, (T, 1))
    x1, rv1 = rg_simulate(margin1, T, seed=s_m1, u=u1)
    x2, rv2 = rg_simulate(margin2, T, seed=s_m2, u=u2)
    dates = np.busday_offset(np.datetime64(start, "D"), np.arange(T), roll="forward")
    dates = [d.item() for d in dates]
    panel = ReturnPanel.from_arrays(dates, x1 / scale, rv1 / scale ** 2, x2 / scale,
                                    rv2 / scale ** 2)
    if return_truth:
        return panel, path
    return panel
