"""Figure and table reproductions as CSV sweeps."""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from . import analytic, montecarlo, tradeoff
from .model import SystemConfig, db_to_linear, normalize_config_dict

FIG1_DEFAULTS = {"alpha1": 0.7, "alpha2": 0.3, "d1": 7.0, "d2": 3.0, "zeta": 3.0, "rate1": 0.2, "rate2": 0.8}
FIG1_SNR_DB = tuple(float(v) for v in range(0, 55, 5))
FIG1_T = (1, 2, 3)

FIG2_DEFAULTS = {"d1": 7.0, "d2": 3.0, "zeta": 3.0, "rate1": 0.3, "rate2": 0.5}
FIG2_SNR_DB = 35.0
FIG2_SPLITS = ((0.7, 0.3), (0.8, 0.2))
FIG2_T = tuple(range(1, 7))

FIG3_RATE2 = 0.5
FIG3_T = (1, 2, 3, 4)
FIG3_ALPHA2 = tuple(round(0.05 + 0.01 * i, 2) for i in range(46))

DIVERSITY_SNR_DB = tuple(30.0 + 2.5 * i for i in range(9))
DIVERSITY_T = (1, 2, 3)
USER1_FLOOR = 1e-12

ENGINES = ("analytic", "mc")
KINDS = ("snr_sweep", "round_sweep", "tradeoff_curve", "diversity")


@dataclass(frozen=True)
class SweepSpec:
    kind: str
    grid: tuple
    engines: tuple = ENGINES
    output_path: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown sweep kind {self.kind!r}")
        if not self.grid:
            raise ValueError("sweep grid is empty")
        if any(b <= a for a, b in zip(self.grid, self.grid[1:])):
            raise ValueError("sweep grid must be strictly increasing")
        if not self.engines or set(self.engines) - set(ENGINES):
            raise ValueError(f"engines must be a non-empty subset of {ENGINES}")


@dataclass
class RunOptions:
    seed: int = 0
    trials: int | None = None
    workers: int = 1
    quad: analytic.QuadratureSpec = field(default_factory=analytic.QuadratureSpec)
    literal: bool = False
    chunk_size: int | None = None

    def plan(self, t_rounds: int) -> montecarlo.SimPlan:
        trials = self.trials or montecarlo.DEFAULT_TRIALS
        chunk = min(self.chunk_size, trials) if self.chunk_size else None
        return montecarlo.SimPlan(trials, t_rounds, self.seed, chunk)

    def estimate(self, cfg: SystemConfig, t_rounds: int, kind: str) -> montecarlo.OutageEstimate:
        """Fixed trial count if one was given, otherwise the escalation rule."""
        plan = self.plan(t_rounds)
        if self.trials:
            return montecarlo.simulate(cfg, plan, kind)
        return montecarlo.simulate_escalating(cfg, plan, kind)


def merged_config(defaults: dict, overrides: dict | None, **fixed) -> dict:
    data = dict(defaults)
    if overrides:
        data.update(normalize_config_dict(overrides))
    data.update(fixed)
    return data


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".12g")


def write_csv(path, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(row.get(c)) for c in columns])


def _sibling(path, suffix: str) -> Path:
    p = Path(path)
    return p.with_name(p.stem + suffix)


def _map(workers: int, func, items):
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [func(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def _user1_analytic(cfg, t, opts: RunOptions):
    return analytic.outage_user1_analytic(cfg, t, opts.quad, literal=opts.literal)


def _scheme_rows(cfg: SystemConfig, t: int, engines, opts: RunOptions) -> list:
    """Four rows (user x scheme) for one operating point."""
    use_a = "analytic" in engines
    use_mc = "mc" in engines
    rows = []
    specs = (
        (1, "noma", "theorem1_literal" if opts.literal else "theorem1", "user1"),
        (1, "oma", "erlang", "oma1"),
        (2, "noma", "theorem2", "user2"),
        (2, "oma", "erlang", "oma2"),
    )
    for user, scheme, method, mc_kind in specs:
        row = {"user": user, "scheme": scheme, "t_rounds": t, "method": method}
        if use_a:
            if mc_kind == "user1":
                row["p_analytic"] = _user1_analytic(cfg, t, opts)
            elif mc_kind == "user2":
                p, valid = analytic.outage_user2_highsnr(cfg, t)
                row["p_analytic"] = p
                if not valid:
                    row["method"] = "theorem2_invalid"
            else:
                row["p_analytic"] = analytic.outage_oma(cfg, user, t)
        if use_mc:
            est = opts.estimate(cfg, t, mc_kind)
            row.update(p_mc=est.p_hat, mc_stderr=est.std_err, mc_trials=est.trials)
        rows.append(row)
    return rows


FIG1_COLUMNS = ("snr_db", "user", "scheme", "t_rounds", "method", "p_analytic", "p_mc", "mc_stderr", "mc_trials")


def run_fig1(
    overrides: dict | None = None,
    opts: RunOptions | None = None,
    snr_db=FIG1_SNR_DB,
    t_list=FIG1_T,
    engines=ENGINES,
    out=None,
) -> list:
    """Outage against SNR for both users, NOMA and OMA, several round counts."""
    opts = opts or RunOptions()
    spec = SweepSpec("snr_sweep", tuple(snr_db), tuple(engines), out)
    base = merged_config(FIG1_DEFAULTS, overrides)
    base.pop("rho", None)

    def point(task):
        db, t = task
        cfg = SystemConfig(rho=db_to_linear(db), **base)
        rows = _scheme_rows(cfg, t, spec.engines, opts)
        for row in rows:
            row["snr_db"] = db
        return rows

    tasks = [(db, t) for db in spec.grid for t in t_list]
    rows = [r for chunk in _map(opts.workers, point, tasks) for r in chunk]
    rows.sort(key=lambda r: (r["user"], r["scheme"], r["t_rounds"], r["snr_db"]))
    if out is not None:
        write_csv(out, FIG1_COLUMNS, rows)
    return rows


FIG2_COLUMNS = (
    "t_rounds", "alpha1", "alpha2", "user", "scheme", "method",
    "p_analytic", "p_mc", "mc_stderr", "mc_trials", "k_value",
)


def _crossover(rows, key: str):
    """First T where user-2 NOMA beats OMA on column ``key``."""
    by_t = {}
    for r in rows:
        if r["user"] == 2 and r.get(key) is not None:
            by_t.setdefault(r["t_rounds"], {})[r["scheme"]] = r[key]
    for t in sorted(by_t):
        pair = by_t[t]
        if "noma" in pair and "oma" in pair and pair["noma"] < pair["oma"]:
            return t
    return None


def fig2_summary(rows, rate2: float) -> list:
    """Per power split: both minimum-round conventions and what each engine shows."""
    out = []
    for a1, a2 in sorted({(r["alpha1"], r["alpha2"]) for r in rows}, reverse=True):
        sub = [r for r in rows if r["alpha2"] == a2]
        report = tradeoff.tradeoff_report(a2, rate2, t_max=max(r["t_rounds"] for r in sub))
        entry = {
            "alpha1": a1,
            "alpha2": a2,
            "t_min_strict": report.t_min,
            "t_min_tie": report.t_min_tie,
            "k_values": report.to_dict()["k_values"],
            "analytic_crossover": _crossover(sub, "p_analytic"),
            "mc_crossover": _crossover(sub, "p_mc"),
        }
        if report.t_min_tie != report.t_min:
            tie = {r["scheme"]: r for r in sub if r["user"] == 2 and r["t_rounds"] == report.t_min_tie}
            if {"noma", "oma"} <= set(tie) and tie["noma"].get("p_mc") is not None:
                diff = tie["noma"]["p_mc"] - tie["oma"]["p_mc"]
                se = math.hypot(tie["noma"]["mc_stderr"], tie["oma"]["mc_stderr"])
                entry["tie_point"] = {
                    "t_rounds": report.t_min_tie,
                    "p_noma_mc": tie["noma"]["p_mc"],
                    "p_oma_mc": tie["oma"]["p_mc"],
                    "abs_diff": abs(diff),
                    "diff_stderr": se,
                    "within_3se": abs(diff) <= 3 * se,
                }
        out.append(entry)
    return out


def run_fig2(
    overrides: dict | None = None,
    opts: RunOptions | None = None,
    t_list=FIG2_T,
    splits=FIG2_SPLITS,
    engines=ENGINES,
    out=None,
) -> tuple:
    """Outage against round count at a fixed SNR for two power splits.

    Returns ``(rows, summary)``; the summary is also written next to the
    CSV as ``<stem>_summary.json``.
    """
    opts = opts or RunOptions()
    spec = SweepSpec("round_sweep", tuple(t_list), tuple(engines), out)
    base = merged_config(FIG2_DEFAULTS, overrides)
    base.pop("alpha1", None)
    base.pop("alpha2", None)
    if "rho" not in base:
        base["rho"] = db_to_linear(FIG2_SNR_DB)

    def point(task):
        (a1, a2), t = task
        cfg = SystemConfig(alpha1=a1, alpha2=a2, **base)
        k = tradeoff.k_function(t, a2, cfg.rate2)
        rows = _scheme_rows(cfg, t, spec.engines, opts)
        for row in rows:
            row.update(alpha1=a1, alpha2=a2, k_value=k)
        return rows

    tasks = [(s, t) for s in splits for t in spec.grid]
    rows = [r for chunk in _map(opts.workers, point, tasks) for r in chunk]
    rows.sort(key=lambda r: (-r["alpha1"], r["user"], r["scheme"], r["t_rounds"]))
    summary = fig2_summary(rows, base["rate2"])
    if out is not None:
        write_csv(out, FIG2_COLUMNS, rows)
        _sibling(out, "_summary.json").write_text(json.dumps(summary, indent=2) + "\n")
    return rows, summary


def table1_roots(rate2: float = FIG3_RATE2, t_list=FIG3_T) -> list:
    """Power share where NOMA and OMA tie, closed form and by root bracketing."""
    rows = []
    for t in t_list:
        numeric = brentq(lambda a: tradeoff.l_function(a, rate2, t), 1e-9, 1 - 1e-9, xtol=1e-15, rtol=1e-15)
        rows.append({"t_rounds": t, "alpha2_root": tradeoff.alpha2_threshold(t, rate2), "alpha2_root_numeric": numeric})
    return rows


def run_fig3_table1(rate2: float = FIG3_RATE2, t_list=FIG3_T, alpha2_grid=FIG3_ALPHA2, out=None) -> tuple:
    """L(alpha2) curves plus the tie roots per T; roots go to ``<stem>_roots.csv``."""
    spec = SweepSpec("tradeoff_curve", tuple(alpha2_grid), ("analytic",), out)
    curve = [
        {"alpha2": a, "t_rounds": t, "l_value": tradeoff.l_function(a, rate2, t)}
        for t in t_list
        for a in spec.grid
    ]
    roots = table1_roots(rate2, t_list)
    if out is not None:
        write_csv(out, ("alpha2", "t_rounds", "l_value"), curve)
        write_csv(_sibling(out, "_roots.csv"), ("t_rounds", "alpha2_root", "alpha2_root_numeric"), roots)
    return curve, roots


def format_table1(roots) -> str:
    head = "T      | " + " | ".join(f"{r['t_rounds']:>6d}" for r in roots)
    vals = "alpha2 | " + " | ".join(f"{r['alpha2_root']:.4f}" for r in roots)
    return head + "\n" + vals


DIVERSITY_COLUMNS = (
    "user", "t_rounds", "window_lo_db", "window_hi_db", "n_points",
    "slope", "intercept", "r_squared", "diversity_order",
)


def diversity_curves(overrides=None, opts: RunOptions | None = None, snr_db=DIVERSITY_SNR_DB, t_list=DIVERSITY_T) -> list:
    opts = opts or RunOptions()
    base = merged_config(FIG1_DEFAULTS, overrides)
    base.pop("rho", None)
    points = []
    for t in t_list:
        for db in snr_db:
            cfg = SystemConfig(rho=db_to_linear(db), **base)
            points.append({"user": 1, "t_rounds": t, "snr_db": db, "p_analytic": _user1_analytic(cfg, t, opts)})
            points.append({"user": 2, "t_rounds": t, "snr_db": db, "p_analytic": analytic.outage_user2_highsnr(cfg, t).probability})
    points.sort(key=lambda r: (r["user"], r["t_rounds"], r["snr_db"]))
    return points


def fit_diversity(points, window=(30.0, 50.0)) -> list:
    fits = []
    for user, t in sorted({(p["user"], p["t_rounds"]) for p in points}):
        pts = [(db_to_linear(p["snr_db"]), p["p_analytic"]) for p in points if p["user"] == user and p["t_rounds"] == t]
        floor = USER1_FLOOR if user == 1 else 0.0
        try:
            fit = tradeoff.diversity_slope(pts, window, floor=floor)
        except ValueError:
            fits.append({"user": user, "t_rounds": t, "window_lo_db": window[0], "window_hi_db": window[1], "n_points": 0})
            continue
        fits.append({
            "user": user,
            "t_rounds": t,
            "window_lo_db": window[0],
            "window_hi_db": window[1],
            "n_points": fit.n_points,
            "slope": fit.slope,
            "intercept": fit.intercept,
            "r_squared": fit.r_squared,
            "diversity_order": fit.diversity_order,
        })
    return fits


def run_diversity(overrides=None, opts=None, snr_db=DIVERSITY_SNR_DB, t_list=DIVERSITY_T, window=(30.0, 50.0), out=None) -> tuple:
    """Analytic curves on the high-SNR window and their log-log slopes.

    Fits go to ``out``; the underlying points to ``<stem>_points.csv``.
    """
    SweepSpec("diversity", tuple(snr_db), ("analytic",), out)
    points = diversity_curves(overrides, opts, snr_db, t_list)
    fits = fit_diversity(points, window)
    if out is not None:
        write_csv(out, DIVERSITY_COLUMNS, fits)
        write_csv(_sibling(out, "_points.csv"), ("user", "t_rounds", "snr_db", "p_analytic"), points)
    return fits, points


def gnuplot_script(kind: str, csv_path) -> str:
    """Minimal gnuplot script for a figure CSV."""
    name = Path(csv_path).name
    lines = ["set datafile separator ','", "set key outside", "set grid"]
    if kind == "fig1":
        lines += ["set logscale y", "set xlabel 'SNR (dB)'", "set ylabel 'outage probability'",
                  f"plot for [t=1:3] '{name}' using 1:(($2==1 && strcol(3) eq 'noma' && $4==t) ? $6 : 1/0) "
                  "with lines title sprintf('user 1 NOMA T=%d', t), "
                  f"for [t=1:3] '{name}' using 1:(($2==2 && strcol(3) eq 'noma' && $4==t) ? $6 : 1/0) "
                  "with lines dt 2 title sprintf('user 2 NOMA T=%d', t)"]
    elif kind == "fig2":
        lines += ["set logscale y", "set xlabel 'T'", "set ylabel 'outage probability'",
                  f"plot '{name}' using 1:(($4==2 && strcol(5) eq 'noma' && $3==0.3) ? $8 : 1/0) with linespoints title 'user 2 NOMA a2=0.3', "
                  f"'{name}' using 1:(($4==2 && strcol(5) eq 'oma' && $3==0.3) ? $8 : 1/0) with linespoints title 'user 2 OMA a2=0.3'"]
    elif kind == "fig3":
        lines += ["set xlabel 'alpha2'", "set ylabel 'L'",
                  f"plot for [t=1:4] '{name}' using 1:($2==t ? $3 : 1/0) with lines title sprintf('T=%d', t)"]
    else:
        raise ValueError(f"no plot template for {kind!r}")
    return "\n".join(lines) + "\n"
