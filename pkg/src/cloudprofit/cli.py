"""Command-line front end.

Subcommands: blocking, decide, sweep, simulate, forecast. Every
command supports --json; simulate writes JSON + CSV reports plus a run
manifest that reproduces the run byte-for-byte when replayed with
--manifest.
"""

import argparse
import hashlib
import json
import os
import sys

from . import __version__
from .billing import BillingModel
from .forecast import fit_ets, forecast_next, advance, relative_error
from .policies import (
    DegenerateEconomicsError,
    ReactiveConfig,
    alpha_star,
    candidate_profit,
    grassmann_decide,
    optimal_decide,
    qed_decide,
    z_from_alpha,
)
from .queueing import QueueParams, ServiceModel, peakedness, blocking_probability
from .simulator import (
    ALL_POLICIES,
    SimConfig,
    emit_report,
    run_simulation,
)
from .workload import (
    ServiceTimeModel,
    parse_counts_csv,
    parse_timestamps,
    synthesize_diurnal,
)

_SERVICE_KINDS = {"exp": "exponential", "exponential": "exponential",
                  "normal": "lognormal", "lognormal": "lognormal",
                  "det": "deterministic", "deterministic": "deterministic"}

_SERVICE_ENUM = {"exponential": ServiceModel.EXPONENTIAL,
                 "lognormal": ServiceModel.NORMAL_APPROX,
                 "deterministic": ServiceModel.DETERMINISTIC}

# flat config keys understood by `simulate`, with defaults
CONFIG_DEFAULTS = {
    "policy": "optimal",
    "seed": 0,
    "mode": "server",
    "m": 1,
    "n_fixed": 20,
    "n_initial": None,
    "n_max": 1000,
    "c": 0.0017,
    "d": 17.0,
    "epoch_hours": 1.0,
    "t_up_minutes": 5.0,
    "t_down_minutes": 2.0,
    "penalty": None,
    "add_cost": None,
    "remove_cost": None,
    "service_kind": "exponential",
    "service_mean_s": 0.035,
    "service_scv": 1.0,
    "arrival_ca2": 1.0,
    "season_len": 24,
    "history_cap_seasons": 14,
    "hayward": True,
    "grassmann_var": "minute_var",
    "reactive_up": 0.70,
    "reactive_down": 0.60,
    "reactive_window_minutes": 15,
    "reactive_n_min": 1,
    "trace_file": None,
    "timestamps_file": None,
    "rate_scale": 1.0,
    "synthetic_days": 1,
    "synthetic_base_rate": 17143.0,
    "synthetic_amplitude": 2800.0,
    "synthetic_noise_scv": 0.0004,
    "synthetic_seed": 20240501,
}

_BOOL_KEYS = {"hayward"}
_INT_KEYS = {"seed", "m", "n_fixed", "n_max", "season_len", "history_cap_seasons",
             "reactive_window_minutes", "reactive_n_min", "synthetic_days",
             "synthetic_seed"}
_OPT_INT_KEYS = {"n_initial"}
_OPT_FLOAT_KEYS = {"penalty", "add_cost", "remove_cost"}
_STR_KEYS = {"policy", "mode", "service_kind", "grassmann_var",
             "trace_file", "timestamps_file"}


def _coerce(key: str, raw):
    if raw is None or (isinstance(raw, str) and raw.lower() in ("none", "")):
        if key in _OPT_INT_KEYS or key in _OPT_FLOAT_KEYS or key in (
                "trace_file", "timestamps_file"):
            return None
        raise ValueError(f"config key {key!r} cannot be empty")
    if key in _BOOL_KEYS:
        if isinstance(raw, bool):
            return raw
        return str(raw).strip().lower() in ("1", "true", "yes", "on")
    if key in _INT_KEYS:
        return int(raw)
    if key in _OPT_INT_KEYS:
        return int(raw)
    if key in _STR_KEYS:
        return str(raw)
    return float(raw)


def parse_config_text(text: str) -> dict:
    """Parse the flat ``key = value`` config format (# comments)."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key = value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in CONFIG_DEFAULTS:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        out[key] = _coerce(key, value)
    return out


def resolve_config(overrides: dict) -> dict:
    cfg = dict(CONFIG_DEFAULTS)
    for key, value in overrides.items():
        if key not in CONFIG_DEFAULTS:
            raise ValueError(f"unknown config key {key!r}")
        cfg[key] = _coerce(key, value) if value is not None else None
    return cfg


def _sha256(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def build_sim_config(flat: dict) -> tuple[SimConfig, dict]:
    """Materialize a SimConfig plus its reproducibility manifest."""
    inputs = {}
    if flat["trace_file"]:
        with open(flat["trace_file"]) as fh:
            trace = parse_counts_csv(fh)
        inputs["trace_file"] = flat["trace_file"]
        inputs["trace_sha256"] = _sha256(flat["trace_file"])
    elif flat["timestamps_file"]:
        with open(flat["timestamps_file"]) as fh:
            trace = parse_timestamps(fh)
        inputs["timestamps_file"] = flat["timestamps_file"]
        inputs["trace_sha256"] = _sha256(flat["timestamps_file"])
    else:
        trace = synthesize_diurnal(flat["synthetic_days"],
                                   flat["synthetic_base_rate"],
                                   flat["synthetic_amplitude"],
                                   flat["synthetic_noise_scv"],
                                   flat["synthetic_seed"])
        inputs["synthetic"] = True
    if flat["rate_scale"] != 1.0:
        trace = trace.scaled(flat["rate_scale"])

    billing = BillingModel(c=flat["c"], d=flat["d"], k=flat["epoch_hours"],
                           t_up=flat["t_up_minutes"] / 60.0,
                           t_down=flat["t_down_minutes"] / 60.0,
                           penalty=flat["penalty"], add_cost=flat["add_cost"],
                           remove_cost=flat["remove_cost"], n_max=flat["n_max"])
    service = ServiceTimeModel(kind=flat["service_kind"],
                               mean_s=flat["service_mean_s"],
                               scv=flat["service_scv"])
    reactive = ReactiveConfig(scale_up_util=flat["reactive_up"],
                              scale_down_util=flat["reactive_down"],
                              window_minutes=flat["reactive_window_minutes"],
                              n_min=flat["reactive_n_min"])
    config = SimConfig(trace=trace, service=service, billing=billing,
                       policy=flat["policy"], n_fixed=flat["n_fixed"],
                       reactive=reactive, mode=flat["mode"], m=flat["m"],
                       seed=flat["seed"], arrival_ca2=flat["arrival_ca2"],
                       season_len=flat["season_len"],
                       history_cap_seasons=flat["history_cap_seasons"],
                       hayward=flat["hayward"], n_initial=flat["n_initial"],
                       grassmann_var=flat["grassmann_var"])
    manifest = {
        "tool": "cloudprofit",
        "version": __version__,
        "config": flat,
        "inputs": inputs,
    }
    return config, manifest


def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _queue_params(args, lam: float) -> QueueParams:
    kind = _SERVICE_KINDS[args.service]
    mu = args.mu
    if kind == "exponential":
        sigma = 1.0 / mu
    elif kind == "deterministic":
        sigma = 0.0
    else:
        if args.sigma_s is None:
            raise ValueError("--sigma-s is required for the normal service model")
        sigma = args.sigma_s
    return QueueParams(lam=lam, mu=mu, ca2=args.ca2, sigma_s=sigma,
                       service_model=_SERVICE_ENUM[kind])


def cmd_blocking(args) -> int:
    if args.n < 0 or args.rho < 0:
        raise ValueError("n and rho must be >= 0")
    params = _queue_params(args, lam=args.rho * args.mu)
    pk = peakedness(args.ca2, params.mu, params.sigma_s, params.service_model)
    p = blocking_probability(params, args.n, hayward=not args.plain_erlang)
    if args.json:
        print(json.dumps({"n": args.n, "rho": args.rho, "ca2": args.ca2,
                          "z": pk.z, "eta": pk.eta, "blocking": p},
                         sort_keys=True))
    else:
        print(f"blocking = {p:.6f}  (z = {pk.z:.6f}, eta = {pk.eta:.6f})")
    return 0


def _billing_from_args(args) -> BillingModel:
    return BillingModel(c=args.c, d=args.d, k=args.epoch_hours,
                        t_up=args.t_up_minutes / 60.0,
                        t_down=args.t_down_minutes / 60.0,
                        n_max=args.n_max)


def cmd_decide(args) -> int:
    params = _queue_params(args, lam=args.lam)
    billing = _billing_from_args(args)
    diagnostics = {}
    policy = args.policy
    if policy == "optimal":
        decision = optimal_decide(params, billing, args.n_current)
    elif policy == "qed":
        decision = qed_decide(params, billing, args.n_current)
    elif policy == "grassmann":
        decision = grassmann_decide(params, billing, args.var_rho, args.n_current)
    else:
        raise ValueError(f"unknown policy {policy!r} (use optimal, qed or grassmann)")
    if policy in ("qed", "grassmann"):
        try:
            alpha = alpha_star(billing.c, billing.d, params.mu)
            diagnostics["alpha"] = alpha
            if 0.0 < alpha < 1.0:
                diagnostics["z_alpha"] = z_from_alpha(alpha)
        except DegenerateEconomicsError:
            diagnostics["alpha"] = "degenerate"

    exhaustive = None
    if args.scan_max is not None:
        best_n, best_p = 0, None
        for n in range(0, args.scan_max + 1):
            p = candidate_profit(params, billing, args.n_current, n)
            if best_p is None or p > best_p:
                best_n, best_p = n, p
        exhaustive = best_n

    out = {
        "policy": policy,
        "n_current": args.n_current,
        "n_next": decision.n_next,
        "n_plus": decision.n_plus,
        "n_minus": decision.n_minus,
        "predicted_profit_cents_per_h": decision.predicted_profit,
        "predicted_blocking": decision.predicted_blocking,
    }
    out.update(diagnostics)
    if exhaustive is not None:
        out["exhaustive_n"] = exhaustive
    if args.json:
        print(json.dumps(out, sort_keys=True))
    else:
        for key, value in out.items():
            print(f"{key} = {value}")
    return 0


def cmd_sweep(args) -> int:
    params = _queue_params(args, lam=args.lam)
    billing = _billing_from_args(args)
    values = []
    v = args.start
    if args.step <= 0:
        raise ValueError("--step must be positive")
    while v <= args.stop + 1e-12:
        values.append(v)
        v += args.step
    if not values:
        raise ValueError("empty sweep range")

    rows = []
    if args.axis == "t_up":
        for minutes in values:
            b = BillingModel(c=billing.c, d=billing.d, k=billing.k,
                             t_up=minutes / 60.0, t_down=billing.t_down,
                             n_max=billing.n_max)
            d = optimal_decide(params, b, args.n_current)
            rows.append((minutes, d))
        header = "t_up_minutes"
    elif args.axis == "n_current":
        for n_cur in values:
            d = optimal_decide(params, billing, int(round(n_cur)))
            rows.append((int(round(n_cur)), d))
        header = "n_current"
    elif args.axis == "charge":
        for c in values:
            b = BillingModel(c=c, d=billing.d, k=billing.k, t_up=billing.t_up,
                             t_down=billing.t_down, n_max=billing.n_max)
            d = optimal_decide(params, b, args.n_current)
            rows.append((c, d))
        header = "charge_c_cents"
    else:
        raise ValueError(f"unknown sweep axis {args.axis!r}")

    lines = [f"{header},n_next,n_plus,n_minus,predicted_profit_cents_per_h,"
             "predicted_blocking"]
    for value, d in rows:
        lines.append(f"{value},{d.n_next},{d.n_plus},{d.n_minus},"
                     f"{d.predicted_profit:.4f},{d.predicted_blocking:.6g}")
    text = "\n".join(lines) + "\n"
    if args.out:
        _atomic_write(args.out, text)
        print(f"wrote {args.out}")
    else:
        sys.stdout.write(text)
    return 0


def _summary(report) -> dict:
    agg = report.aggregate
    return {
        "policy": report.policy,
        "total_profit_cents": round(agg.total_profit_cents, 4),
        "server_hours": agg.server_hours,
        "jobs_arrived": agg.jobs_arrived,
        "jobs_lost": agg.jobs_lost,
        "mean_sojourn_s": agg.mean_sojourn_s,
    }


def cmd_simulate(args) -> int:
    overrides = {}
    if args.manifest:
        with open(args.manifest) as fh:
            manifest_in = json.load(fh)
        overrides.update(manifest_in["config"])
    elif args.config:
        with open(args.config) as fh:
            overrides.update(parse_config_text(fh.read()))
    for key, value in (args.set or []):
        overrides[key] = value
    if args.policy:
        overrides["policy"] = args.policy
    if args.seed is not None:
        overrides["seed"] = args.seed

    out_dir = args.out_dir or "."
    os.makedirs(out_dir, exist_ok=True)

    policies = (list(ALL_POLICIES) if overrides.get("policy") == "all"
                else [overrides.get("policy", CONFIG_DEFAULTS["policy"])])
    summaries = []
    for policy in policies:
        flat = resolve_config({**overrides, "policy": policy})
        config, manifest = build_sim_config(flat)
        report = run_simulation(config)
        report.manifest = manifest
        suffix = f"_{policy}" if len(policies) > 1 else ""
        _atomic_write(os.path.join(out_dir, f"report{suffix}.json"),
                      emit_report(report, "json"))
        _atomic_write(os.path.join(out_dir, f"report{suffix}.csv"),
                      emit_report(report, "csv"))
        _atomic_write(os.path.join(out_dir, f"manifest{suffix}.json"),
                      json.dumps(manifest, indent=2, sort_keys=True) + "\n")
        summaries.append(_summary(report))

    if len(policies) > 1:
        ranked = sorted(summaries, key=lambda s: -s["total_profit_cents"])
        lines = ["policy,total_profit_cents,server_hours,jobs_arrived,"
                 "jobs_lost,mean_sojourn_s"]
        for s in ranked:
            lines.append(f"{s['policy']},{s['total_profit_cents']:.4f},"
                         f"{s['server_hours']},{s['jobs_arrived']},"
                         f"{s['jobs_lost']},{s['mean_sojourn_s']!r}")
        _atomic_write(os.path.join(out_dir, "comparison.csv"),
                      "\n".join(lines) + "\n")

    if args.json:
        print(json.dumps(summaries, sort_keys=True))
    else:
        for s in summaries:
            print(f"policy={s['policy']} profit_cents={s['total_profit_cents']:.4f} "
                  f"server_hours={s['server_hours']} jobs_lost={s['jobs_lost']}")
    return 0


def cmd_forecast(args) -> int:
    with open(args.series) as fh:
        series = [float(line.strip()) for line in fh if line.strip()]
    season = args.season_len
    holdout = args.holdout if args.holdout is not None else season
    if len(series) < 2 * season + holdout:
        raise ValueError(f"series has {len(series)} points; need at least "
                         f"{2 * season + holdout} for fit plus backtest")
    train, test = series[:len(series) - holdout], series[len(series) - holdout:]
    model = fit_ets(train, season)
    predicted = []
    for y in test:
        predicted.append(forecast_next(model, 1))
        model = advance(model, y)
    stats = relative_error(test, predicted, bucket_width=args.bucket_width)
    full_model = fit_ets(series, season)
    next_forecast = forecast_next(full_model, args.horizon)
    out = {
        "forecast": next_forecast,
        "horizon": args.horizon,
        "backtest_points": len(test),
        "relative_error_mean": stats.mean,
        "relative_error_std": stats.std,
        "relative_error_mean_abs": stats.mean_abs(),
        "histogram": {"edges": stats.bin_edges.tolist(),
                      "counts": stats.counts.tolist()},
    }
    if args.json:
        print(json.dumps(out, sort_keys=True))
    else:
        print(f"forecast (+{args.horizon}) = {next_forecast:.4f}")
        print(f"backtest over {len(test)} held-out points: "
              f"mean rel err = {stats.mean:+.4f}, std = {stats.std:.4f}, "
              f"mean |rel err| = {stats.mean_abs():.4f}")
    return 0


def _add_common(parser) -> None:
    parser.add_argument("--json", action="store_true", help="machine-readable output")


def _add_model_flags(parser) -> None:
    parser.add_argument("--mu", type=float, default=28.571,
                        help="per-server service rate, jobs/sec")
    parser.add_argument("--ca2", type=float, default=1.0,
                        help="squared CV of interarrival intervals")
    parser.add_argument("--service", default="exp",
                        choices=sorted(_SERVICE_KINDS),
                        help="service-time model for the peakedness factor")
    parser.add_argument("--sigma-s", type=float, default=None,
                        help="service-time std dev (seconds), normal model only")


def _add_econ_flags(parser) -> None:
    parser.add_argument("--c", type=float, default=0.0017,
                        help="revenue per job, cents")
    parser.add_argument("--d", type=float, default=17.0,
                        help="cost per server-hour, cents")
    parser.add_argument("--epoch-hours", type=float, default=1.0)
    parser.add_argument("--t-up-minutes", type=float, default=5.0)
    parser.add_argument("--t-down-minutes", type=float, default=2.0)
    parser.add_argument("--n-max", type=int, default=1000)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cloudprofit",
        description="Profit-maximizing autoscaling policies and a cloud "
                    "fleet simulator for loss systems with hourly billing.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("blocking", help="blocking probability of a fleet")
    p.add_argument("--n", type=int, required=True, help="server count")
    p.add_argument("--rho", type=float, required=True, help="offered load, Erlangs")
    _add_model_flags(p)
    p.add_argument("--plain-erlang", action="store_true",
                   help="ignore peakedness, use plain Erlang-B")
    _add_common(p)
    p.set_defaults(func=cmd_blocking)

    p = sub.add_parser("decide", help="one policy decision from explicit parameters")
    p.add_argument("--policy", required=True,
                   choices=["optimal", "qed", "grassmann"])
    p.add_argument("--lambda", dest="lam", type=float, required=True,
                   help="arrival rate, jobs/sec")
    p.add_argument("--n-current", type=int, default=0)
    p.add_argument("--var-rho", type=float, default=0.0,
                   help="load variance for the grassmann hedge")
    p.add_argument("--scan-max", type=int, default=None,
                   help="also report the exhaustive-scan optimum up to this n")
    _add_model_flags(p)
    _add_econ_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_decide)

    p = sub.add_parser("sweep", help="sensitivity sweeps of the optimal policy")
    p.add_argument("--axis", required=True, choices=["t_up", "n_current", "charge"])
    p.add_argument("--start", type=float, required=True)
    p.add_argument("--stop", type=float, required=True)
    p.add_argument("--step", type=float, default=1.0)
    p.add_argument("--lambda", dest="lam", type=float, default=300.0)
    p.add_argument("--n-current", type=int, default=15)
    p.add_argument("--out", default=None, help="write CSV here instead of stdout")
    _add_model_flags(p)
    _add_econ_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="replay a trace against the simulated fleet")
    p.add_argument("--config", default=None, help="flat key=value config file")
    p.add_argument("--manifest", default=None,
                   help="rerun a previously written manifest.json")
    p.add_argument("--policy", default=None,
                   help="policy override; 'all' runs every policy")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out-dir", default=None)
    p.add_argument("--set", nargs=2, action="append", metavar=("KEY", "VALUE"),
                   help="override any config key")
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("forecast", help="fit the seasonal smoother to a series")
    p.add_argument("--series", required=True, help="file with one value per line")
    p.add_argument("--season-len", type=int, default=24)
    p.add_argument("--horizon", type=int, default=1)
    p.add_argument("--holdout", type=int, default=None,
                   help="points held out for the backtest (default: one season)")
    p.add_argument("--bucket-width", type=float, default=0.05)
    _add_common(p)
    p.set_defaults(func=cmd_forecast)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, DegenerateEconomicsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
