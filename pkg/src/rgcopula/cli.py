"""Command-line driver: ingest -> fit -> evaluate -> cdb, plus a DGP simulator.

Options can come from a TOML file given with ``--config``. Top-level keys
set global options (``seed``, ``threads``); a table per subcommand sets that
command's options, e.g.::

    seed = 7

    [fit]
    family = ["normal", "rotated_gumbel"]
    dynamics = ["constant", "gas"]
    split_date = "2012-12-31"

Flags given on the command line override the file.

Exit codes: 0 success, 1 input error, 2 convergence failure, 3 internal error.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import sys
from datetime import date
from pathlib import Path

import click
import numpy as np

from rgcopula import market_data as md
from rgcopula.copulas import GasParams
from rgcopula.estimation import (
    NGAS_TABLE2,
    JointModel,
    ModelSpec,
    block_bootstrap_se,
    fit_margins,
    msml_fit,
    simulate_panel,
)
from rgcopula.margins import ConvergenceError
from rgcopula.risk import (
    VAR_LEVELS,
    PortfolioSpec,
    cdb,
    cdb_constant_band,
    risk_forecasts,
    state_path,
    write_risk_csv,
)
from rgcopula.stat_tests import (
    HitSequence,
    SimulationFailure,
    cpa_test,
    dm_test,
    dq_test,
    gk_loss,
    gof_ks_cvm,
    tv_dependence_test,
)

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

logger = logging.getLogger("rgcopula")

EXIT_INPUT, EXIT_CONVERGENCE, EXIT_INTERNAL = 1, 2, 3


# --- helpers ----------------------------------------------------------------


def _clean(obj):
    """Make a structure JSON-safe: numpy scalars to floats, nan/inf to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, date):
        return obj.isoformat()
    return obj


def _write_json(obj, path):
    text = json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False)
    Path(path).write_text(text + "\n")


def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _load_config(ctx, param, value):
    if value is None:
        return None
    try:
        with open(value, "rb") as fh:
            cfg = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise click.BadParameter(f"cannot read config: {exc}") from exc
    ctx.default_map = {**(ctx.default_map or {}), **cfg}
    return value


def _parse_date(ctx, param, value):
    if value is None or isinstance(value, date):
        return value
    try:
        return date.fromisoformat(str(value))
    except ValueError as exc:
        raise click.BadParameter(str(exc)) from exc


def _split(panel, split_date):
    """Row index of the first out-of-sample day."""
    if split_date is None:
        return len(panel)
    dates = panel.dates
    if not dates[0] < split_date < dates[-1]:
        raise click.BadParameter(
            f"split date {split_date} must lie strictly inside {dates[0]}..{dates[-1]}",
            param_hint="--split-date")
    return int(np.searchsorted(np.array(dates), split_date, side="right"))


def _alphas(values):
    out = tuple(float(a) for a in values)
    if any(not 0.0 < a < 1.0 for a in out):
        raise click.BadParameter("alpha values must lie in (0, 1)", param_hint="--alpha")
    return out


# --- command group ----------------------------------------------------------


@click.group()
@click.option("--config", type=click.Path(dir_okay=False), callback=_load_config, is_eager=True,
              expose_value=False, help="TOML file with option defaults.")
@click.option("--seed", type=int, default=0, show_default=True, help="Root random seed.")
@click.option("--threads", type=click.IntRange(min=1), default=1, show_default=True,
              help="Maximum worker processes for simulation loops.")
@click.option("-v", "--verbose", count=True, help="More logging (repeatable).")
@click.pass_context
def cli(ctx, seed, threads, verbose):
    """Realized-GARCH margins with GAS copulas: estimation, tests and risk forecasts."""
    logging.basicConfig(level=logging.WARNING - 10 * min(verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    ctx.obj = {"seed": seed, "threads": threads}


@cli.command()
@click.option("--asset1", type=click.Path(exists=True, dir_okay=False), required=True,
              help="Intraday CSV (timestamp,price) for the first asset.")
@click.option("--asset2", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--holidays", type=click.Path(exists=True, dir_okay=False), default=None,
              help="File with one ISO date per line to exclude.")
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Panel CSV to write.")
@click.option("--summary", type=click.Path(dir_okay=False), default=None,
              help="Summary JSON (default: <out>.summary.json).")
@click.option("--min-length", type=click.IntRange(min=1), default=1, show_default=True,
              help="Minimum number of common days.")
def ingest(asset1, asset2, holidays, out, summary, min_length):
    """Build the daily (return, realized variance) panel from intraday prices."""
    hol = md.read_holidays(holidays) if holidays else set()
    obs1 = md.daily_observations(md.read_bars_csv(asset1), hol)
    obs2 = md.daily_observations(md.read_bars_csv(asset2), hol)
    panel = md.align_panel(obs1, obs2, min_length=min_length)
    md.write_panel_csv(panel, out)
    info = {
        "T": len(panel),
        "start": panel.dates[0],
        "end": panel.dates[-1],
        "mean_annualized_vol": [float(np.mean(md.annualized_vol(panel.rv1))),
                                float(np.mean(md.annualized_vol(panel.rv2)))],
    }
    _write_json(info, summary or f"{out}.summary.json")
    click.echo(f"wrote {len(panel)} days to {out}")


def _margin_table(m, label):
    d = m.to_dict(include_series=False)
    d["asset"] = label
    return d


@cli.command()
@click.option("--panel", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Model JSON to write.")
@click.option("--family", multiple=True, default=("normal",), show_default=True,
              type=click.Choice(["normal", "student_t", "clayton", "rotated_gumbel", "sjc"]))
@click.option("--dynamics", multiple=True, default=("constant", "gas"), show_default=True,
              type=click.Choice(["constant", "gas"]))
@click.option("--margin-mode", type=click.Choice(["parametric", "semiparametric"]),
              default="parametric", show_default=True)
@click.option("--ar1", type=click.IntRange(0, 5), default=None, help="AR order, asset 1 (default: BIC).")
@click.option("--ar2", type=click.IntRange(0, 5), default=None, help="AR order, asset 2 (default: BIC).")
@click.option("--ar-max", type=click.IntRange(0, 5), default=5, show_default=True)
@click.option("--split-date", callback=_parse_date, default=None,
              help="Last in-sample date; later days are held out.")
@click.option("--scale", type=float, default=100.0, show_default=True,
              help="Return multiplier before fitting (100 = percent).")
@click.option("--n-starts", type=click.IntRange(min=1), default=3, show_default=True)
@click.option("--bootstrap", type=click.IntRange(min=0), default=0,
              help="Block-bootstrap replicates for standard errors (0 = off, else >= 200).")
@click.option("--gof-sims", type=click.IntRange(min=0), default=0,
              help="Simulations for KS/CvM p-values (0 = skip).")
@click.option("--tv-boot", type=click.IntRange(min=0), default=0,
              help="Bootstrap draws for the time-varying dependence test (0 = skip).")
@click.pass_obj
def fit(obj, panel, out, family, dynamics, margin_mode, ar1, ar2, ar_max, split_date, scale,
        n_starts, bootstrap, gof_sims, tv_boot):
    """Two-stage fit of margins and copulas on the in-sample window."""
    panel_path, n_boot = panel, bootstrap
    if 0 < n_boot < 200:
        raise click.BadParameter("need at least 200 replicates", param_hint="--bootstrap")
    panel = md.read_panel_csv(panel_path)
    cut = _split(panel, split_date)
    ins = panel.take(range(cut))
    seed = obj["seed"]
    base = ModelSpec(margin_mode=margin_mode, p1=ar1, p2=ar2, max_p=ar_max, scale=scale,
                     n_starts=n_starts, seed=seed)
    m1, m2 = fit_margins(ins, base)
    base = ModelSpec(**{**base.__dict__, "p1": m1.params.p, "p2": m2.params.p})
    models, boots, tests = [], {}, []
    for fam in family:
        for dyn in dynamics:
            spec = ModelSpec(**{**base.__dict__, "family": fam, "dynamics": dyn})
            try:
                model = msml_fit(ins, spec, margins=(m1, m2))
            except (ConvergenceError, OverflowError) as exc:
                raise ConvergenceError(f"{spec.tag}: {exc}") from exc
            models.append(model)
            click.echo(f"{model.tag:>12s}  loglik {model.copula.loglik:12.4f}  "
                       f"total {model.loglik_total:12.4f}  {model.copula.param_dict()}")
            if n_boot:
                res = block_bootstrap_se(ins, spec, B=n_boot, seed=seed, point=model,
                                         threads=obj["threads"])
                boots[model.tag] = res.to_dict()
            if gof_sims:
                ks, cvm = gof_ks_cvm(model.copula, model.u1, model.u2, n_sim=gof_sims, seed=seed,
                                     threads=obj["threads"])
                tests += [{"model": model.tag, **ks.to_dict()}, {"model": model.tag, **cvm.to_dict()}]
    if tv_boot:
        tv = tv_dependence_test(models[0].u1, models[0].u2, n_boot=tv_boot, seed=seed)
        tests.append(tv.to_dict())
    report = {
        "panel_sha256": _sha256(panel_path),
        "split_date": split_date,
        "in_sample": {"start": ins.dates[0], "end": ins.dates[-1], "T": len(ins)},
        "seed": seed,
        "margins": [_margin_table(m1, "asset1"), _margin_table(m2, "asset2")],
        "models": [m.to_dict() for m in models],
        "bootstrap": boots,
        "tests": tests,
    }
    _write_json(report, out)
    click.echo(f"wrote {len(models)} model(s) to {out}")


def _load_models(paths, panel):
    """Rebuild every model from fit outputs; all must share one estimation window."""
    entries, windows = [], set()
    for p in paths:
        rep = json.loads(Path(p).read_text())
        windows.add((rep["in_sample"]["start"], rep["in_sample"]["end"]))
        entries.extend(rep["models"])
    if len(windows) != 1:
        raise ValueError(f"models have different estimation windows: {sorted(windows)}")
    start, end = windows.pop()
    dates = [d.isoformat() for d in panel.dates]
    if start not in dates or end not in dates:
        raise ValueError("panel does not cover the models' estimation window")
    i0, i1 = dates.index(start), dates.index(end) + 1
    if i0 != 0:
        panel = panel.take(range(i0, len(panel)))
        i1 -= i0
    ins = panel.take(range(i1))
    models = [JointModel.from_dict(d, ins) for d in entries]
    tags = [m.tag for m in models]
    if len(set(tags)) != len(tags):
        raise ValueError(f"duplicate model tags: {tags}")
    return models, panel, i1


def _table(levels, rows):
    head = f"{'':>14s}" + "".join(f"{a:>9.0%}" for a in levels)
    lines = [head]
    for tag, block in rows:
        lines.append(tag)
        for name, vals in block:
            lines.append(f"{name:>14s}" + "".join(
                f"{v:9.4f}" if v is not None and math.isfinite(v) else f"{'-':>9s}" for v in vals))
    return "\n".join(lines)


@cli.command()
@click.option("--panel", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--models", type=click.Path(exists=True, dir_okay=False),
              multiple=True, required=True, help="Output(s) of `fit`.")
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Report JSON.")
@click.option("--benchmark", default=None, help="Model tag for DM comparisons (default: first).")
@click.option("--alpha", type=float, multiple=True, default=VAR_LEVELS, show_default=True)
@click.option("--draws", type=click.IntRange(min=1000), default=5000, show_default=True,
              help="Monte Carlo draws per forecast day.")
@click.option("--dq-sims", type=click.IntRange(min=1), default=1000, show_default=True)
@click.option("--forecasts-dir", type=click.Path(file_okay=False), default=None,
              help="Write per-model forecast CSVs here.")
@click.pass_obj
def evaluate(obj, panel, models, out, benchmark, alpha, draws, dq_sims, forecasts_dir):
    """Out-of-sample comparison: log-scores, CPA, VaR backtests, DM."""
    panel_path, model_paths, alphas, S = panel, models, alpha, draws
    alphas = _alphas(alphas)
    panel = md.read_panel_csv(panel_path)
    models, panel, cut = _load_models(model_paths, panel)
    if cut >= len(panel):
        raise ValueError("no out-of-sample days after the estimation window")
    oos = list(range(cut, len(panel)))
    seed = obj["seed"]
    tags = [m.tag for m in models]
    benchmark = benchmark or tags[0]
    if benchmark not in tags:
        raise click.BadParameter(f"unknown model {benchmark!r}; have {tags}", param_hint="--benchmark")

    per_model, scores, losses = {}, {}, {}
    for m in models:
        sp = state_path(m, panel)
        rf = risk_forecasts(m, sp, oos, S=S, seed=seed, levels=tuple(sorted(set(alphas) | {0.05})))
        if forecasts_dir:
            Path(forecasts_dir).mkdir(parents=True, exist_ok=True)
            if set(VAR_LEVELS) <= set(rf.var):
                write_risk_csv(rf, Path(forecasts_dir) / f"{m.tag}.csv")
        scores[m.tag] = sp.copula_loglik_terms[cut:]
        var_rows = {}
        losses[m.tag] = {}
        for a in alphas:
            q = rf.var[a]
            hits = HitSequence.from_returns(rf.realized, q, a)
            dq = dq_test(hits, n_sim=dq_sims, seed=seed)
            loss = gk_loss(rf.realized, q, a)
            losses[m.tag][a] = loss
            var_rows[f"{a:g}"] = {"coverage": hits.coverage, "gk_loss": float(np.mean(loss)),
                                  "dq": dq.statistic, "dq_p": dq.p_value,
                                  "dq_degenerate": dq.extra["degenerate"]}
        per_model[m.tag] = {"oos_copula_loglik": float(np.sum(scores[m.tag])), "var": var_rows,
                            "cdb05_clipped": rf.n_clipped}

    cpa = {t1: {t2: cpa_test(scores[t1], scores[t2]).to_dict() for t2 in tags if t2 != t1}
           for t1 in tags}
    dm = {t: {f"{a:g}": dm_test(losses[benchmark][a], losses[t][a]).to_dict() for a in alphas}
          for t in tags}
    report = {"panel_sha256": _sha256(panel_path), "seed": seed, "draws": S,
              "out_of_sample": {"start": panel.dates[cut], "end": panel.dates[-1], "T": len(oos)},
              "benchmark": benchmark, "models": per_model, "cpa": cpa, "dm": dm}
    _write_json(report, out)

    rows = []
    for t in tags:
        v = per_model[t]["var"]
        rows.append((t, [(name, [v[f"{a:g}"][key] for a in alphas])
                         for name, key in (("coverage", "coverage"), ("L", "gk_loss"),
                                           ("DQ", "dq"), ("p-val", "dq_p"))]))
    click.echo(_table(alphas, rows))


@cli.command("cdb")
@click.option("--panel", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--models", type=click.Path(exists=True, dir_okay=False),
              multiple=True, required=True)
@click.option("--model", default=None, help="Model tag (default: first model).")
@click.option("--alpha", type=float, default=0.05, show_default=True)
@click.option("--draws", type=click.IntRange(min=1000), default=5000, show_default=True)
@click.option("--n-boot", type=click.IntRange(min=100), default=10_000, show_default=True,
              help="Simulations for the constant-dependence band.")
@click.option("--w1", type=float, default=0.5, show_default=True, help="Weight of asset 1.")
@click.option("--full-sample", is_flag=True, help="Cover in-sample days too.")
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="CDB path CSV.")
@click.option("--band-out", type=click.Path(dir_okay=False), default=None,
              help="Band JSON (default: <out>.band.json).")
@click.pass_obj
def cdb_cmd(obj, panel, models, model, alpha, draws, n_boot, w1, full_sample, out, band_out):
    """Conditional diversification benefit path with a constant-dependence band."""
    panel_path, model_paths, tag, S = panel, models, model, draws
    _alphas([alpha])
    panel = md.read_panel_csv(panel_path)
    models, panel, cut = _load_models(model_paths, panel)
    tags = [m.tag for m in models]
    model = models[tags.index(tag)] if tag else models[0]
    if tag and tag not in tags:
        raise click.BadParameter(f"unknown model {tag!r}; have {tags}", param_hint="--model")
    port = PortfolioSpec(w1, 1.0 - w1)
    sp = state_path(model, panel)
    idx = range(len(panel)) if full_sample or cut >= len(panel) else range(cut, len(panel))
    pts = cdb(model, sp, idx, alpha=alpha, S=S, seed=obj["seed"], portfolio=port)

    # unconditional dependence and volatility ratio of the estimation window
    x1, x2 = sp.x1[:cut], sp.x2[:cut]
    rho = float(np.corrcoef(x1, x2)[0, 1])
    ratio = float(np.std(x2) / np.std(x1))
    mean, lo, hi = cdb_constant_band(rho, cut, alpha, n_boot=n_boot, seed=obj["seed"],
                                     portfolio=port, sd_ratio=ratio)
    with open(out, "w") as fh:
        fh.write("date,cdb,es_port,es_upper,es_lower,clipped\n")
        for p in pts:
            fh.write(f"{p.date},{p.cdb!r},{p.es_port!r},{p.es_upper!r},{p.es_lower!r},"
                     f"{int(p.clipped)}\n")
    vals = np.array([p.cdb for p in pts])
    outside = np.nanmean((vals < lo) | (vals > hi))
    band = {"model": model.tag, "alpha": alpha, "rho": rho, "sd_ratio": ratio, "T": cut,
            "n_boot": n_boot, "mean": mean, "lo90": lo, "hi90": hi,
            "fraction_outside": float(outside), "clipped": int(sum(p.clipped for p in pts)),
            "days": len(pts)}
    _write_json(band, band_out or f"{out}.band.json")
    click.echo(f"{model.tag}: CDB mean {np.nanmean(vals):.4f}; band [{lo:.4f}, {hi:.4f}]; "
               f"{outside:.1%} of days outside")


@cli.command()
@click.option("--T", "T", type=click.IntRange(min=60), required=True, help="Number of days.")
@click.option("--out", type=click.Path(dir_okay=False), required=True, help="Panel CSV.")
@click.option("--family", type=click.Choice(["normal", "student_t", "rotated_gumbel", "clayton",
                                             "sjc"]), default="normal", show_default=True)
@click.option("--dynamics", type=click.Choice(["constant", "gas"]), default="gas", show_default=True)
@click.option("--delta", type=float, default=0.6042, show_default=True,
              help="Constant copula parameter.")
@click.option("--w", type=float, default=NGAS_TABLE2.w, show_default=True)
@click.option("--a", type=float, default=NGAS_TABLE2.a, show_default=True)
@click.option("--b", type=float, default=NGAS_TABLE2.b, show_default=True)
@click.option("--nu-inv", type=float, default=None, help="Student-t copula 1/nu.")
@click.option("--truth", type=click.Path(dir_okay=False), default=None,
              help="Also write the true copula parameter path.")
@click.pass_obj
def simulate(obj, T, out, family, dynamics, delta, w, a, b, nu_inv, truth):
    """Simulate a panel from Realized-GARCH margins and a copula."""
    gas = GasParams(w, a, b, nu_inv) if dynamics == "gas" else None
    panel, path = simulate_panel(T, seed=obj["seed"], family=family, delta=delta, gas=gas,
                                 nu_inv=nu_inv, return_truth=True)
    md.write_panel_csv(panel, out)
    if truth:
        with open(truth, "w") as fh:
            fh.write("date,delta\n")
            for d, v in zip(panel.dates, np.asarray(path, dtype=float).reshape(T, -1)[:, 0]):
                fh.write(f"{d.isoformat()},{v!r}\n")
    click.echo(f"wrote {T} simulated days to {out}")


def main(argv=None):
    """Entry point with the documented exit codes."""
    try:
        cli.main(args=argv, standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.Abort:
        click.echo("aborted", err=True)
        return EXIT_INPUT
    except click.ClickException as exc:
        exc.show()
        return EXIT_INPUT
    except (ConvergenceError, SimulationFailure) as exc:
        click.echo(f"convergence failure: {exc}", err=True)
        return EXIT_CONVERGENCE
    except (md.InsufficientDataError, ValueError, KeyError, OSError) as exc:
        click.echo(f"input error: {exc}", err=True)
        return EXIT_INPUT
    except Exception as exc:  # noqa: BLE001
        logger.exception("internal error")
        click.echo(f"internal error: {exc}", err=True)
        return EXIT_INTERNAL
    return 0


if __name__ == "__main__":
    sys.exit(main())
