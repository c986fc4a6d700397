"""Command line entry point: ``nomaharq <subcommand> [options]``.

Exit codes: 0 success, 2 invalid input, 3 file I/O failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import analytic, experiments, montecarlo, tradeoff
from .model import SystemConfig, db_to_linear, load_config_dict

log = logging.getLogger("nomaharq")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_IO = 3


def _engines(text: str) -> tuple:
    names = tuple(e.strip() for e in text.split(",") if e.strip())
    bad = set(names) - set(experiments.ENGINES)
    if bad or not names:
        raise argparse.ArgumentTypeError(f"engines must be drawn from {experiments.ENGINES}, got {text!r}")
    return names


def _int_list(text: str) -> tuple:
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _grid(text: str) -> tuple:
    """``start:stop:step`` (inclusive stop) or a comma list."""
    try:
        if ":" in text:
            start, stop, step = (float(v) for v in text.split(":"))
            if step <= 0:
                raise ValueError("step must be positive")
            n = int(round((stop - start) / step)) + 1
            return tuple(round(start + i * step, 10) for i in range(n))
        return tuple(float(v) for v in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad grid {text!r}: {exc}") from None


def _seed(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with SystemConfig fields (rho or rho_db)")
    common.add_argument("--seed", type=_seed, default=0)
    common.add_argument("--trials", type=int, default=None,
                        help="fixed Monte Carlo trials per point (default: 1e6, escalated to 1e7 when rare)")
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--chunk-size", type=int, default=None)
    common.add_argument("--out", help="output path (CSV for figures, JSON otherwise; default stdout)")
    common.add_argument("--engines", type=_engines, default=experiments.ENGINES)
    common.add_argument("--theorem1-literal", action="store_true",
                        help="evaluate the user-1 closed form with its printed 1/r factor")
    common.add_argument("--nodes", type=int, default=analytic.DEFAULT_NODES, help="Gauss-Chebyshev nodes N")
    common.add_argument("--terms", type=int, default=analytic.DEFAULT_TERMS, help="Stehfest terms L")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="nomaharq", description="Outage analysis of two-user NOMA with HARQ chase combining.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analytic", parents=[common], help="closed-form outages at one operating point")
    p.add_argument("--t-rounds", type=int, default=1)
    p.add_argument("--snr-db", type=float, default=None)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo outages at one operating point")
    p.add_argument("--t-rounds", type=int, default=1)
    p.add_argument("--snr-db", type=float, default=None)
    p.add_argument("--protocol", action="store_true", help="also run the ACK/NACK protocol with t_max = T")
    p.add_argument("--importance", action="store_true", help="importance-sample user 2's joint outage")

    p = sub.add_parser("fig1", parents=[common], help="outage vs SNR sweep")
    p.add_argument("--t-list", type=_int_list, default=experiments.FIG1_T)
    p.add_argument("--snr-grid", type=_grid, default=experiments.FIG1_SNR_DB)
    p.add_argument("--plot-script", action="store_true")

    p = sub.add_parser("fig2", parents=[common], help="outage vs number of rounds")
    p.add_argument("--t-list", type=_int_list, default=experiments.FIG2_T)
    p.add_argument("--plot-script", action="store_true")

    p = sub.add_parser("fig3", parents=[common], help="L(alpha2) curves and the alpha2 tie roots")
    p.add_argument("--rate2", type=float, default=experiments.FIG3_RATE2)
    p.add_argument("--t-list", type=_int_list, default=experiments.FIG3_T)
    p.add_argument("--plot-script", action="store_true")

    p = sub.add_parser("diversity", parents=[common], help="high-SNR slope fits")
    p.add_argument("--t-list", type=_int_list, default=experiments.DIVERSITY_T)
    p.add_argument("--snr-grid", type=_grid, default=experiments.DIVERSITY_SNR_DB)

    p = sub.add_parser("tradeoff", parents=[common], help="minimum rounds and power threshold")
    p.add_argument("--alpha2", type=float, required=True)
    p.add_argument("--rate2", type=float, required=True)
    p.add_argument("--t-rounds", type=int, default=1)
    p.add_argument("--t-max", type=int, default=None)
    return parser


def _overrides(args) -> dict | None:
    return load_config_dict(args.config) if args.config else None


def _point_config(args) -> SystemConfig:
    data = experiments.merged_config(experiments.FIG1_DEFAULTS, _overrides(args))
    if args.snr_db is not None:
        data["rho"] = db_to_linear(args.snr_db)
    data.setdefault("rho", db_to_linear(30.0))
    return SystemConfig(**data)


def _options(args) -> experiments.RunOptions:
    if args.workers < 1:
        raise ValueError("--workers must be >= 1")
    if args.trials is not None and args.trials < 1:
        raise ValueError("--trials must be >= 1")
    return experiments.RunOptions(
        seed=args.seed,
        trials=args.trials,
        workers=args.workers,
        quad=analytic.QuadratureSpec(args.nodes, args.terms),
        literal=args.theorem1_literal,
        chunk_size=args.chunk_size,
    )


def _emit_json(payload, out) -> None:
    text = json.dumps(payload, indent=2) + "\n"
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _require_out(args, default_name: str) -> str:
    return args.out or default_name


def cmd_analytic(args) -> None:
    cfg = _point_config(args)
    opts = _options(args)
    t = args.t_rounds
    p2, valid = analytic.outage_user2_highsnr(cfg, t)
    _emit_json({
        "config": cfg.to_dict(),
        "t_rounds": t,
        "user1_noma": analytic.outage_user1_analytic(cfg, t, opts.quad, literal=opts.literal),
        "user1_noma_method": "theorem1_literal" if opts.literal else "theorem1",
        "user2_noma_highsnr": p2,
        "user2_highsnr_valid": valid,
        "user1_oma": analytic.outage_oma(cfg, 1, t),
        "user2_oma": analytic.outage_oma(cfg, 2, t),
        "user1_noma_single_round": analytic.outage_noma_single(cfg, 1),
    }, args.out)


def _estimate_dict(est: montecarlo.OutageEstimate) -> dict:
    return {"p_hat": est.p_hat, "trials": est.trials, "std_err": est.std_err, "ci95": list(est.ci95)}


def cmd_simulate(args) -> None:
    cfg = _point_config(args)
    opts = _options(args)
    t = args.t_rounds
    plan = opts.plan(t)
    plan = montecarlo.SimPlan(plan.trials, t, plan.seed, plan.chunk_size, args.workers)
    tilt = montecarlo.suggest_tilt(cfg, t) if args.importance else None
    payload = {
        "config": cfg.to_dict(),
        "t_rounds": t,
        "seed": args.seed,
        "user1_noma": _estimate_dict(montecarlo.simulate_outage_user1(cfg, plan)),
        "user2_noma": _estimate_dict(montecarlo.simulate_outage_user2(cfg, plan, tilt=tilt)),
        "user1_oma": _estimate_dict(montecarlo.simulate_oma(cfg, 1, plan)),
        "user2_oma": _estimate_dict(montecarlo.simulate_oma(cfg, 2, plan)),
    }
    if args.protocol:
        stats = montecarlo.simulate_protocol(cfg, t, plan.trials, args.seed, plan.chunk_size, args.workers)
        payload["protocol"] = {
            "t_max": stats.t_max,
            "rounds_used_histogram": stats.rounds_used_histogram.tolist(),
            "mean_rounds": stats.mean_rounds,
            "user1_outage": _estimate_dict(stats.user1_outage),
            "user2_outage": _estimate_dict(stats.user2_outage),
        }
    _emit_json(payload, args.out)


def _maybe_plot(args, kind: str, out: str) -> None:
    if getattr(args, "plot_script", False):
        Path(out).with_suffix(".gp").write_text(experiments.gnuplot_script(kind, out))


def cmd_fig1(args) -> None:
    out = _require_out(args, "fig1.csv")
    experiments.run_fig1(_overrides(args), _options(args), args.snr_grid, args.t_list, args.engines, out)
    _maybe_plot(args, "fig1", out)
    log.info("wrote %s", out)


def cmd_fig2(args) -> None:
    out = _require_out(args, "fig2.csv")
    _, summary = experiments.run_fig2(_overrides(args), _options(args), args.t_list, engines=args.engines, out=out)
    _maybe_plot(args, "fig2", out)
    sys.stdout.write(json.dumps(summary, indent=2) + "\n")


def cmd_fig3(args) -> None:
    out = _require_out(args, "fig3.csv")
    _, roots = experiments.run_fig3_table1(args.rate2, args.t_list, out=out)
    _maybe_plot(args, "fig3", out)
    sys.stdout.write(experiments.format_table1(roots) + "\n")


def cmd_diversity(args) -> None:
    out = _require_out(args, "diversity.csv")
    fits, _ = experiments.run_diversity(_overrides(args), _options(args), args.snr_grid, args.t_list, out=out)
    for f in fits:
        order = f.get("diversity_order")
        shown = f"{order:.3f}" if order is not None else "n/a"
        sys.stdout.write(f"user {f['user']} T={f['t_rounds']}: diversity order {shown}\n")


def cmd_tradeoff(args) -> None:
    report = tradeoff.tradeoff_report(args.alpha2, args.rate2, args.t_rounds, args.t_max)
    _emit_json(report.to_dict(), args.out)


COMMANDS = {
    "analytic": cmd_analytic,
    "simulate": cmd_simulate,
    "fig1": cmd_fig1,
    "fig2": cmd_fig2,
    "fig3": cmd_fig3,
    "diversity": cmd_diversity,
    "tradeoff": cmd_tradeoff,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        COMMANDS[args.command](args)
    except (ValueError, analytic.ResourceBudgetError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INVALID
    except OSError as exc:
        sys.stderr.write(f"I/O error: {exc}\n")
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
