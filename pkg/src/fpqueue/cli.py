"""Command-line driver.

Exit codes: 0 success, 2 usage error, 3 numerical failure.
Every flag can also be given in a JSON file passed with ``--config``; flags on
the command line win over the file.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Sequence

import numpy as np

from . import checks, queue_sim, stats
from .diffusion_sim import deterministic_hitting_time, hitting_times
from .distributions import parse as parse_dist
from .fpt import FptDensity, QuadratureError
from .rng import default_threads
from .scaling import DiffusionParams, diffusion_params, rescale_path

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 2, 3


class UsageError(Exception):
    pass


class NumericalFailure(Exception):
    pass


def fmt(x: float) -> str:
    return format(float(x), ".17g")


def _grid(text: str) -> np.ndarray:
    try:
        start, stop, num = text.split(":")
        return np.linspace(float(start), float(stop), int(num))
    except ValueError as exc:
        raise UsageError(f"grid must be start:stop:num, got {text!r}") from exc


def _write(text: str, path: str | None):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _csv(header: Sequence[str], columns: Sequence[np.ndarray]) -> str:
    lines = [",".join(header)]
    for row in zip(*columns):
        lines.append(",".join(fmt(v) if isinstance(v, (float, np.floating)) else str(v) for v in row))
    return "\n".join(lines) + "\n"


def _require_seed(args):
    if args.seed is None:
        raise UsageError("--seed is required for stochastic commands")
    if args.seed < 0:
        raise UsageError("--seed must be nonnegative")


def _reps(args):
    if args.reps < 1:
        raise UsageError("--reps must be at least 1")


def _queue_config(args, n: int | None = None) -> queue_sim.QueueConfig:
    n = args.n if n is None else n
    if n is None:
        raise UsageError("--n is required")
    try:
        if args.fixed_lambda is not None:
            return queue_sim.QueueConfig.fixed_rate(n, args.alpha, args.fixed_lambda, dist=args.dist,
                                                   initial_queue=args.initial_queue or 1,
                                                   initial_law=args.initial_law)
        return queue_sim.QueueConfig(n=n, alpha=args.alpha, beta=args.beta, q=args.q, dist=args.dist,
                                     initial_queue=args.initial_queue, initial_law=args.initial_law)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _diffusion(args) -> DiffusionParams:
    try:
        if args.gamma is not None:
            if args.sigma2 is None and args.sigma is None:
                raise UsageError("--gamma needs --sigma2 or --sigma")
            sigma = math.sqrt(args.sigma2) if args.sigma2 is not None else args.sigma
            return DiffusionParams(args.q, args.beta, args.gamma, sigma)
        if args.dist is None:
            raise UsageError("give either --gamma/--sigma2 or --dist/--alpha")
        return diffusion_params(parse_dist(args.dist), args.alpha, args.fixed_lambda, args.beta, args.q)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


# ---------------------------------------------------------------- commands

def cmd_sample_path(args) -> int:
    _require_seed(args)
    cfg = _queue_config(args)
    from .rng import substream

    scale = max(cfg.n, 1)
    horizon = args.horizon if args.horizon is not None else max(1, int(math.ceil(3 * scale ** (2 / 3))))
    path = queue_sim.simulate_path(cfg, horizon, substream(args.seed, 0, "sample-path"), method=args.method)
    params = diffusion_params(cfg.dist, cfg.alpha, cfg.lam, cfg.beta, cfg.q)
    fn = rescale_path(path, scale)
    if args.grid_step is not None:
        if not args.grid_step > 0:
            raise UsageError("--grid-step must be positive")
        t = np.arange(int(math.ceil(fn.horizon / args.grid_step))) * args.grid_step
    else:
        t = np.arange(path.queue.size) / scale ** (2.0 / 3.0)
    _write(_csv(["t", "Q_scaled", "drift"], [t, fn(t), params.drift(t)]), args.out)
    if args.path_out:
        _write(path.to_csv(), args.path_out)
    return EXIT_OK


def cmd_busy_period_mc(args) -> int:
    _require_seed(args)
    _reps(args)
    cfg = _queue_config(args)
    bp = queue_sim.busy_period_mc(cfg, args.reps, args.seed, method=args.method, threads=args.threads)
    fixed = cfg.time_scale == "unscaled"
    scaled = bp / max(cfg.n, 1) ** (2.0 / 3.0)
    summary = stats.summarize(bp if fixed else scaled)
    if args.samples_out:
        reps = np.arange(args.reps)
        _write(_csv(["replication", "bp", "scaled_bp"], [reps, bp, scaled]), args.samples_out)
    report = json.loads(summary.to_json())
    report.update({"mode": "fixed-lambda" if fixed else "heavy-traffic", "n": cfg.n, "alpha": cfg.alpha,
                   "lambda": cfg.lam, "initial_queue": cfg.initial_count(),
                   "statistic": "bp" if fixed else "bp / n^(2/3)"})
    print(json.dumps(report))
    if summary.degenerate:
        print("warning: confidence interval is degenerate", file=sys.stderr)
    return EXIT_OK


def cmd_airy(args) -> int:
    params = _diffusion(args)
    try:
        f = FptDensity.from_params(params)
        if args.mean:
            m, err = f.mean_with_error()
            print(f"{m:.4f}")
            if args.verbose:
                print(f"error estimate {err:.2e}", file=sys.stderr)
        if args.grid:
            t = _grid(args.grid)
            _write(_csv(["t", "density"], [t, f.curve(t)]), args.out)
        if not args.mean and not args.grid:
            raise UsageError("airy needs --mean and/or --grid")
    except QuadratureError as exc:
        raise NumericalFailure(str(exc)) from exc
    return EXIT_OK


def cmd_figure2(args) -> int:
    _require_seed(args)
    _reps(args)
    try:
        ns = [int(x) for x in str(args.ns).split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError("--ns must be a comma separated list of integers") from exc
    if not ns:
        raise UsageError("--ns is empty")
    t = _grid(args.grid)
    cols, header, report, samples = [t], ["t"], {}, {}
    params = None
    for n in ns:
        cfg = _queue_config(args, n)
        if params is None:
            params = diffusion_params(cfg.dist, cfg.alpha, cfg.lam, cfg.beta, cfg.q)
        bp = queue_sim.busy_period_mc(cfg, args.reps, args.seed, threads=args.threads, tag=f"figure2-{n}")
        scaled = bp / max(n, 1) ** (2.0 / 3.0)
        samples[n] = scaled
        try:
            kde = stats.kde_gaussian(scaled, t, args.bandwidth)
        except ValueError:
            kde = np.full(t.shape, np.nan)
        cols.append(kde)
        header.append(f"kde_n{n}")
        report[str(n)] = {"mean": float(np.mean(scaled))}
        if args.samples_out:
            _write(_csv(["replication", "bp", "scaled_bp"], [np.arange(args.reps), bp, scaled]),
                   f"{args.samples_out}_n{n}.csv")
    try:
        f = FptDensity.from_params(params)
        cols.append(f.curve(t))
        header.append("exact")
        for n in ns:
            report[str(n)]["ks_to_limit"] = stats.ks_distance(samples[n], f.cdf)
    except QuadratureError as exc:
        raise NumericalFailure(str(exc)) from exc
    _write(_csv(header, cols), args.out)
    print(json.dumps(report), file=sys.stderr)
    return EXIT_OK


def cmd_diffusion_mc(args) -> int:
    _require_seed(args)
    _reps(args)
    params = _diffusion(args)
    if not args.dt > 0 or not args.horizon > args.dt:
        raise UsageError("need 0 < dt < horizon")
    ht = hitting_times(params, args.reps, args.seed, dt=args.dt, horizon=args.horizon, bridge=args.bridge,
                       threads=args.threads)
    s = ht.fine
    finite = s[np.isfinite(s)]
    report = {"unhit_fraction": ht.unhit_fraction}
    if finite.size:
        report.update(json.loads(stats.summarize(finite).to_json()))
    if params.sigma == 0:
        report["deterministic_root"] = deterministic_hitting_time(params)
    if args.samples_out:
        _write("hitting_time\n" + "".join(fmt(v) + "\n" for v in s), args.samples_out)
    print(json.dumps(report))
    if ht.unhit_fraction > 0.01:
        raise NumericalFailure(f"{ht.unhit_fraction:.2%} of paths did not hit zero before the horizon")
    return EXIT_OK


def cmd_check(args) -> int:
    results = checks.run_all(args.seed if args.seed is not None else 0)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_NUMERIC


# ---------------------------------------------------------------- parser

def _add_common(p: argparse.ArgumentParser, stochastic: bool = True):
    p.add_argument("--config", help="JSON file with flag values")
    p.add_argument("--out", default=None, help="output file (default stdout)")
    if stochastic:
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--threads", type=int, default=default_threads())


def _add_queue(p: argparse.ArgumentParser):
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--q", type=float, default=1.0)
    p.add_argument("--dist", default="exp:1", help="det:V, exp:RATE or hyp:P1,P2:R1,R2")
    p.add_argument("--lambda", dest="fixed_lambda", type=float, default=None,
                   help="fixed arrival rate; switches to the unscaled queue with Q(0)=1")
    p.add_argument("--initial-queue", type=int, default=None)
    p.add_argument("--initial-law", choices=["size_biased", "iid"], default="size_biased")


def _add_diffusion(p: argparse.ArgumentParser):
    p.add_argument("--q", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--sigma2", type=float, default=None)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--dist", default=None)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--lambda", dest="fixed_lambda", type=float, default=None)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="fpqueue", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample-path", help="one rescaled queue-length path with its drift curve")
    _add_common(p)
    _add_queue(p)
    p.add_argument("--horizon", type=int, default=None, help="services to simulate (default 3 n^(2/3))")
    p.add_argument("--grid-step", type=float, default=None, help="sample on a regular t-grid")
    p.add_argument("--method", choices=["timeline", "step"], default="timeline")
    p.add_argument("--path-out", default=None, help="also write the raw embedded path")
    p.set_defaults(func=cmd_sample_path)

    p = sub.add_parser("busy-period-mc", help="Monte Carlo of the first busy period")
    _add_common(p)
    _add_queue(p)
    p.add_argument("--reps", type=int, default=10_000)
    p.add_argument("--method", choices=["fast", "step"], default="fast")
    p.add_argument("--samples-out", default=None)
    p.set_defaults(func=cmd_busy_period_mc)

    p = sub.add_parser("airy", help="exact hitting-time density and mean")
    _add_common(p, stochastic=False)
    _add_diffusion(p)
    p.add_argument("--mean", action="store_true")
    p.add_argument("--grid", default=None, help="density grid start:stop:num")
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_airy)

    p = sub.add_parser("figure2", help="kernel density estimates of scaled busy periods against the limit")
    _add_common(p)
    _add_queue(p)
    p.add_argument("--ns", default="100,1000,10000")
    p.add_argument("--reps", type=int, default=100_000)
    p.add_argument("--grid", default="0.01:6:300")
    p.add_argument("--bandwidth", default="silverman")
    p.add_argument("--samples-out", default=None, help="file prefix for per-n samples")
    p.set_defaults(func=cmd_figure2)

    p = sub.add_parser("diffusion-mc", help="hitting times of the limit diffusion")
    _add_common(p)
    _add_diffusion(p)
    p.add_argument("--dt", type=float, default=1e-4)
    p.add_argument("--horizon", type=float, default=50.0)
    p.add_argument("--reps", type=int, default=100_000)
    p.add_argument("--bridge", action="store_true")
    p.add_argument("--samples-out", default=None)
    p.set_defaults(func=cmd_diffusion_mc)

    p = sub.add_parser("check", help="run the invariant suite")
    _add_common(p)
    p.set_defaults(func=cmd_check)
    return ap


def _apply_config(ap: argparse.ArgumentParser, argv: Sequence[str]) -> argparse.Namespace:
    args = ap.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    try:
        with open(args.config) as fh:
            cfg = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read config {args.config}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise UsageError("config must be a JSON object")
    sub = ap._subparsers._group_actions[0].choices[args.command]  # noqa: SLF001
    known = {a.dest: a for a in sub._actions}  # noqa: SLF001
    aliases = {opt.lstrip("-").replace("-", "_"): a.dest for a in sub._actions for opt in a.option_strings}  # noqa: SLF001
    defaults = {}
    for key, val in cfg.items():
        dest = aliases.get(key.replace("-", "_"), key.replace("-", "_"))
        if dest not in known or dest in ("config", "help", "func"):
            raise UsageError(f"unknown config key {key!r}")
        if isinstance(val, (dict, list)):
            val = json.dumps(val) if isinstance(val, dict) else ",".join(str(v) for v in val)
        defaults[dest] = val
    sub.set_defaults(**defaults)
    return ap.parse_args(argv)


def main(argv: Sequence[str] | None = None) -> int:
    ap = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _apply_config(ap, argv)
        if getattr(args, "dist", None) and isinstance(args.dist, str) and args.dist.startswith("{"):
            args.dist = json.loads(args.dist)
        if getattr(args, "threads", 1) is not None and getattr(args, "threads", 1) < 1:
            raise UsageError("--threads must be at least 1")
        return args.func(args)
    except SystemExit as exc:  # argparse usage errors
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    except UsageError as exc:
        print(f"fpqueue: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalFailure as exc:
        print(f"fpqueue: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
