"""Command-line harness: ``wiretap-ot {bounds,sweep,simulate,attack}``.

Every report carries a ``schema`` tag and the seed that produced it, so a
report can be regenerated byte for byte.  ``OT_SEED`` in the environment
overrides ``--seed``.  Exit codes: 0 ok, 2 usage error, 3 failed ``--check``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import secrets
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict

import numpy as np

from . import __version__
from .analysis import (
    AdvantageEstimate,
    AttackerId,
    chernoff_abort_bound,
    estimate_advantages,
    score_run,
)
from .bounds import compute_bounds
from .channel import ChannelParams
from .protocol import (
    InfeasibleConfigError,
    ProtocolConfig,
    ProtocolViolation,
    ResendLimitExceeded,
    as_seed_sequence,
    derive_dimensions,
    generate_runs,
    run_trial,
)

EXIT_OK, EXIT_USAGE, EXIT_CHECK = 0, 2, 3
GAP_TOL = 1e-9


class UsageError(Exception):
    pass


def _probability(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"{v} is not a probability in [0, 1]")
    return v


def _positive_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be non-negative")
    return v


def _seed(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def resolve_seed(cli_seed: int | None) -> int:
    env = os.environ.get("OT_SEED")
    if env is not None:
        try:
            return _seed(env)
        except (ValueError, argparse.ArgumentTypeError):
            raise UsageError(f"OT_SEED is not a valid 64-bit seed: {env!r}") from None
    if cli_seed is not None:
        return cli_seed
    return secrets.randbits(64)


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------


def _flatten(obj, prefix=""):
    out = {}
    for key, val in obj.items():
        name = f"{prefix}{key}"
        if isinstance(val, dict):
            out.update(_flatten(val, name + "."))
        elif isinstance(val, (list, tuple)):
            out[name] = json.dumps(val)
        else:
            out[name] = val
    return out


def render(report: dict, rows: list[dict] | None, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(report, sort_keys=True, indent=2) + "\n"
    buf = io.StringIO()
    if rows is None:
        rows = [_flatten(report)]
    else:
        rows = [{"schema": report["schema"], "seed": report["seed"], **r} for r in rows]
    fields = list(rows[0].keys()) if rows else ["schema", "seed"]
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: ("n/a" if v is None else v) for k, v in r.items()})
    return buf.getvalue()


def _schema(cmd: str) -> str:
    return f"wiretap-ot/{cmd}/1"


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def _params(args) -> ChannelParams:
    return ChannelParams(args.eps1, args.eps2, args.eps3)


def _bounds_row(params: ChannelParams, grid: int | None) -> dict:
    rb = compute_bounds(params, grid_resolution=grid)
    return {
        "eps1": params.eps1,
        "eps2": params.eps2,
        "eps3": params.eps3,
        "upper": rb.upper,
        "lower_t2": rb.lower_t2,
        "corollary": rb.corollary,
        "general_lower": rb.lower_t3,
        "gap": rb.gap,
        "argmax": list(rb.argmax),
    }


def cmd_bounds(args, seed: int) -> tuple[dict, list | None, bool]:
    row = _bounds_row(_params(args), args.grid)
    report = {"schema": _schema("bounds"), "seed": seed, "version": __version__, **row}
    ok = row["gap"] >= -GAP_TOL and (row["lower_t2"] is None or abs(row["lower_t2"] - row["upper"]) <= 1e-12)
    return report, None, ok


def _axis(lo: float, hi: float, step: float) -> list[float]:
    if step <= 0:
        raise UsageError("--step must be positive")
    if lo > hi:
        raise UsageError(f"empty range [{lo}, {hi}]")
    count = int(round((hi - lo) / step)) + 1
    vals = [round(lo + i * step, 12) for i in range(count)]
    return [v for v in vals if v <= hi + 1e-12]


def cmd_sweep(args, seed: int) -> tuple[dict, list | None, bool]:
    axes = [_axis(*getattr(args, f"eps{i}_range"), args.step) for i in (1, 2, 3)]
    rows = []
    for e1 in axes[0]:
        for e2 in axes[1]:
            for e3 in axes[2]:
                row = _bounds_row(ChannelParams(e1, e2, e3), args.grid)
                del row["argmax"]
                rows.append(row)
    ok = all(r["gap"] >= -GAP_TOL for r in rows)
    report = {"schema": _schema("sweep"), "seed": seed, "version": __version__, "rows": rows}
    return report, rows, ok


def _config(args, seed: int) -> ProtocolConfig:
    try:
        config = ProtocolConfig.from_rate_fraction(
            args.n,
            args.rate_fraction,
            _params(args),
            alpha=args.alpha,
            delta=args.delta,
            delta_bar=args.delta_bar,
            delta_tilde=args.delta_tilde,
            max_resends=args.max_resends,
            seed=seed,
            mask_order=not args.ablate_order_mask,
        )
        derive_dimensions(config)
        return config
    except InfeasibleConfigError as exc:
        raise UsageError(f"infeasible configuration: {exc}") from None


def _chunks(trials: int, workers: int) -> list[tuple[int, int]]:
    size = max(1, -(-trials // (workers * 4)))
    return [(s, min(size, trials - s)) for s in range(0, trials, size)]


def _map_ordered(fn, jobs, workers: int):
    """Apply ``fn`` to each job; results come back in job order whatever the completion order."""
    if workers <= 1 or len(jobs) <= 1:
        return [fn(*j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*jobs)))


def _simulate_chunk(config: ProtocolConfig, start: int, count: int) -> list[dict]:
    root = as_seed_sequence(config.seed)
    out = []
    for i in range(start, start + count):
        try:
            run = run_trial(config, root, i)
        except ResendLimitExceeded:
            out.append({"status": "resend_limit"})
            continue
        except ProtocolViolation as exc:
            out.append({"status": "violation", "detail": str(exc)})
            continue
        out.append(
            {
                "status": "ok",
                "error": not run.decoded_correctly,
                "resends": run.resend_count,
                "transcript_bytes": run.transcript.encoded_size(),
            }
        )
    return out


def cmd_simulate(args, seed: int) -> tuple[dict, list | None, bool]:
    config = _config(args, seed)
    dims = derive_dimensions(config)
    results = [r for chunk in _map_ordered(_simulate_chunk, [(config, s, c) for s, c in _chunks(args.trials, args.workers)], args.workers) for r in chunk]
    done = [r for r in results if r["status"] == "ok"]
    errors = sum(r["error"] for r in done)
    violations = sum(r["status"] == "violation" for r in results)
    resend_limit = sum(r["status"] == "resend_limit" for r in results)
    aborts = sum(r["resends"] for r in done)
    attempts = aborts + len(done)
    bound = chernoff_abort_bound(config.n, config.eps.eps1, config.delta)
    abort_rate = aborts / attempts if attempts else None
    sizes = [r["transcript_bytes"] for r in done]
    report = {
        "schema": _schema("simulate"),
        "seed": seed,
        "version": __version__,
        "config": {
            "n": config.n,
            "r": config.r,
            "eps": list(config.eps.astuple()),
            "alpha": config.alpha,
            "delta": config.delta,
            "delta_bar": config.delta_bar,
            "delta_tilde": config.delta_tilde,
            "max_resends": config.max_resends,
            "mask_order": config.mask_order,
        },
        "dimensions": asdict(dims),
        "trials": args.trials,
        "completed": len(done),
        "errors": errors,
        "protocol_violations": violations,
        "resend_limit_hits": resend_limit,
        "abort_rate": abort_rate,
        "chernoff_bound": bound,
        "k_over_n": dims.k / config.n,
        "transcript_bytes_mean": float(np.mean(sizes)) if sizes else None,
        "transcript_bytes_max": max(sizes) if sizes else None,
    }
    ok = errors == 0 and violations == 0 and resend_limit == 0
    if abort_rate is not None and len(done) >= 100:
        ok = ok and abort_rate <= bound
    return report, None, ok


def _attack_chunk(config: ProtocolConfig, ids: list[AttackerId], start: int, count: int) -> list[dict]:
    root = as_seed_sequence(config.seed)
    out = []
    for i in range(start, start + count):
        run = run_trial(config, root, i)
        out.append({a.value: ok for a, ok in score_run(run, ids, config.seed, i).items()})
    return out


def cmd_attack(args, seed: int) -> tuple[dict, list | None, bool]:
    config = _config(args, seed)
    ids = list(AttackerId) if args.attacker == "all" else [AttackerId(args.attacker)]
    if args.trials == 0:
        raise UsageError("attack needs at least one trial")
    if args.workers <= 1:
        est = estimate_advantages(generate_runs(config, args.trials), ids, seed)
    else:
        jobs = [(config, ids, s, c) for s, c in _chunks(args.trials, args.workers)]
        scored = [r for chunk in _map_ordered(_attack_chunk, jobs, args.workers) for r in chunk]
        est = {a: AdvantageEstimate.from_counts(sum(r[a.value] for r in scored), len(scored)) for a in ids}
    report = {
        "schema": _schema("attack"),
        "seed": seed,
        "version": __version__,
        "n": config.n,
        "r": config.r,
        "eps": list(config.eps.astuple()),
        "mask_order": config.mask_order,
        "attackers": {a.value: est[a].as_dict() for a in ids},
    }
    ok = all(e.consistent_with_half for e in est.values())
    return report, None, ok


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=_seed, default=None, help="64-bit seed (default: fresh entropy, echoed)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--output", "-o", default=None, help="write the report here instead of stdout")
    p.add_argument("--check", action="store_true", help="exit 3 if the report fails its acceptance check")


def _add_channel(p: argparse.ArgumentParser, eps=(0.5, 0.9, 0.4)) -> None:
    for i, default in zip((1, 2, 3), eps):
        p.add_argument(f"--eps{i}", type=_probability, default=default)


def _add_protocol(p: argparse.ArgumentParser, n: int) -> None:
    _add_channel(p)
    p.add_argument("--n", type=_positive_int, default=n)
    p.add_argument("--rate-fraction", type=float, default=0.8, help="r = fraction * upper bound")
    p.add_argument("--alpha", type=float, default=0.02)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--delta-bar", type=float, default=0.001)
    p.add_argument("--delta-tilde", type=float, default=0.01)
    p.add_argument("--max-resends", type=_nonneg_int, default=16)
    p.add_argument("--ablate-order-mask", action="store_true", help="fix S = 0 (baseline without the order mask)")
    p.add_argument("--workers", type=_positive_int, default=1)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wiretap-ot", description="Wiretapped OT over erasure broadcast channels.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bounds", help="rate bounds at one channel point")
    _add_channel(p)
    p.add_argument("--grid", type=int, default=1000, help="grid cross-check resolution (0 disables)")
    _add_common(p)

    p = sub.add_parser("sweep", help="rate bounds over a channel grid (CSV-ready)")
    for i in (1, 2, 3):
        p.add_argument(f"--eps{i}-range", nargs=2, type=_probability, metavar=("LO", "HI"), default=(0.1, 0.9))
    p.add_argument("--step", type=float, default=0.1)
    p.add_argument("--grid", type=int, default=0, help="grid cross-check resolution (0 disables)")
    _add_common(p)

    p = sub.add_parser("simulate", help="run the protocol end to end")
    _add_protocol(p, 20000)
    p.add_argument("--trials", type=_nonneg_int, default=100)
    _add_common(p)

    p = sub.add_parser("attack", help="estimate an attacker's guessing accuracy")
    _add_protocol(p, 10000)
    p.add_argument("--attacker", choices=[a.value for a in AttackerId] + ["all"], required=True)
    p.add_argument("--trials", type=_nonneg_int, default=1000)
    _add_common(p)
    return parser


COMMANDS = {"bounds": cmd_bounds, "sweep": cmd_sweep, "simulate": cmd_simulate, "attack": cmd_attack}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits 2 on bad flags
    if getattr(args, "grid", None) is not None:
        if args.grid == 0:
            args.grid = None
        elif args.grid < 100:
            parser.error("--grid must be 0 or at least 100")
    try:
        seed = resolve_seed(args.seed)
        report, rows, ok = COMMANDS[args.command](args, seed)
    except UsageError as exc:
        parser.error(str(exc))
    text = render(report, rows, args.format)
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.check and not ok:
        print(f"check failed for {args.command}", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
