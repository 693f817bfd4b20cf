"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 invalid data, 3 I/O failure.
Commands that write to an output location also write a JSON run manifest
holding the argv, resolved parameters, input digests and result totals.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from dataclasses import asdict
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

from faasenergy.constants import LAMBDA_RPS
from faasenergy.energy import excess_energy, integrate_power, parse_power_samples, read_profiles
from faasenergy.report import compare, emit_energy_csv, emit_summary_json, extrapolate_power
from faasenergy.simcore import (
    SimConfig,
    emit_series_csv,
    min_capacity,
    parse_keepalive,
    parse_series_csv,
    simulate,
)
from faasenergy.synth import FixedDuration, LognormalDuration, SyntheticSpec, generate_synthetic
from faasenergy.trace import TraceError, read_trace, trace_stats, write_trace

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_IO = 0, 1, 2, 3

METRICS_FILE = "metrics.csv"
ENERGY_FILE = "energy.csv"
SUMMARY_FILE = "summary.json"
MANIFEST_FILE = "manifest.json"


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def tool_version() -> str:
    try:
        return version("faasenergy")
    except PackageNotFoundError:
        return "unknown"


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def write_manifest(path: Path, command: str, argv, parameters: dict, inputs, results: dict, started: float) -> None:
    manifest = {
        "command": command,
        "argv": list(argv),
        "parameters": parameters,
        "inputs": {str(p): sha256_file(p) for p in inputs},
        "results": results,
        "tool_version": tool_version(),
        "runtime_s": round(time.perf_counter() - started, 3),
    }
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")


def _load_trace(args):
    options = {}
    if args.format == "huawei":
        if args.runtimes:
            options["runtimes"] = Path(args.runtimes).read_bytes()
        if args.day is not None:
            options["day"] = args.day
    elif args.runtimes or args.day is not None:
        raise DataError("--runtimes/--day only apply to --format huawei")
    return read_trace(args.trace, args.format, **options)


def _add_trace_args(p):
    p.add_argument("trace", help="trace file")
    p.add_argument("--format", choices=("canonical", "huawei"), default="canonical",
                   help="canonical t,function,count,duration_ms CSV, or a wide Huawei-style request table")
    p.add_argument("--runtimes", help="huawei format: wide table of mean execution times (ms)")
    p.add_argument("--day", type=int, help="huawei format: keep only rows of this day")


def cmd_simulate(args, argv) -> int:
    started = time.perf_counter()
    trace = _load_trace(args)
    config = SimConfig(keepalive=parse_keepalive(args.keepalive))
    result = simulate(trace, config, workers=args.workers)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / METRICS_FILE, "wb") as fh:
        emit_series_csv(result, fh)
    stats = trace_stats(trace)
    write_manifest(
        out / MANIFEST_FILE, "simulate", argv,
        {"trace": args.trace, "format": args.format, "runtimes": args.runtimes, "day": args.day,
         "keepalive": str(config.keepalive), "scheduler": config.scheduler, "timestep_s": config.timestep_s,
         "workers": args.workers},
        [args.trace] + ([args.runtimes] if args.runtimes else []),
        {"totals": asdict(result.totals), "trace_stats": asdict(stats), "horizon_s": trace.horizon_s,
         "outputs": [METRICS_FILE]},
        started,
    )
    t = result.totals
    print(f"{len(result)} timesteps, {t.requests} requests, {t.cold_starts} cold starts, "
          f"peak {t.peak_total_workers} workers -> {out / METRICS_FILE}")
    return EXIT_OK


def cmd_energy(args, argv) -> int:
    started = time.perf_counter()
    result = parse_series_csv(Path(args.metrics).read_bytes())
    profiles = read_profiles(args.profiles)
    if args.select:
        wanted = [s.strip() for s in args.select.split(",") if s.strip()]
        known = {p.name: p for p in profiles}
        missing = [w for w in wanted if w not in known]
        if missing:
            raise DataError(f"unknown profile(s) {missing}; available: {list(known)}")
        profiles = [known[w] for w in wanted]
    peak = min_capacity(result)
    capacity = args.capacity if args.capacity is not None else peak
    if capacity < peak:
        raise DataError(f"--capacity {capacity} is below the observed peak of {peak} workers")
    series = [excess_energy(result, p, capacity if p.reserve_accounting else None) for p in profiles]
    baseline = args.baseline if args.baseline else series[0].profile
    wall = float(len(result))
    summary = compare(series, baseline, wall)
    requests = result.totals.requests
    base_rps = requests / wall
    extrapolations = []
    if base_rps > 0:
        for row in summary.rows:
            if row.profile != baseline:
                for target in args.target_rps:
                    extrapolations.append(
                        extrapolate_power(row.power_delta_w, base_rps, target, label=f"{baseline}->{row.profile}")
                    )
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / ENERGY_FILE, "wb") as fh:
        emit_energy_csv(series, fh)
    with open(out / SUMMARY_FILE, "wb") as fh:
        emit_summary_json(summary, extrapolations, fh)
    write_manifest(
        out / MANIFEST_FILE, "energy", argv,
        {"metrics": args.metrics, "profiles_file": args.profiles, "profiles": [asdict(p) for p in profiles],
         "capacity": capacity, "capacity_source": "flag" if args.capacity is not None else "min_capacity",
         "baseline": baseline, "target_rps": args.target_rps},
        [args.metrics] + ([args.profiles] if args.profiles else []),
        {"totals_j": {s.profile: s.total_j for s in series}, "requests": requests,
         "outputs": [ENERGY_FILE, SUMMARY_FILE]},
        started,
    )
    print(f"{'profile':<16}{'excess kWh':>14}{'avg W':>14}{'vs ' + baseline:>14}")
    for row in summary.rows:
        print(f"{row.profile:<16}{row.total_kwh:>14.3f}{row.avg_excess_power_w:>14.2f}"
              f"{row.reduction_vs_baseline * 100:>13.2f}%")
    for e in extrapolations:
        print(f"{e.label}: {e.base_power_delta_w / 1e3:.2f} kW at {e.base_rps:.2f} rps -> "
              f"{e.scaled_power_delta_w / 1e6:.2f} MW at {e.target_rps:g} rps")
    return EXIT_OK


def parse_duration(text: str):
    kind, _, arg = text.partition(":")
    try:
        if kind == "fixed":
            return FixedDuration(int(arg))
        if kind == "lognormal":
            mu, sigma = (float(v) for v in arg.split(","))
            return LognormalDuration(mu, sigma)
    except ValueError as exc:
        raise DataError(f"invalid --duration {text!r}: {exc}") from None
    raise DataError(f"invalid --duration {text!r}; expected fixed:<ms> or lognormal:<mu>,<sigma>")


def cmd_synth(args, argv) -> int:
    started = time.perf_counter()
    try:
        spec = SyntheticSpec(
            functions=args.functions, horizon_s=args.horizon_s, base_rps=args.base_rps,
            diurnal_amplitude=args.amplitude, spike_rate=args.spike_rate,
            spike_magnitude=args.spike_magnitude, spike_duration_s=args.spike_duration_s,
            duration=parse_duration(args.duration), popularity_skew=args.skew,
        )
    except ValueError as exc:
        raise DataError(str(exc)) from None
    trace = generate_synthetic(spec, args.seed)
    out = Path(args.out)
    if out.parent != Path(""):
        out.parent.mkdir(parents=True, exist_ok=True)
    write_trace(trace, out)
    stats = trace_stats(trace)
    write_manifest(
        out.with_name(out.name + ".manifest.json"), "synth", argv,
        {"spec": asdict(spec),
         "duration": args.duration, "seed": args.seed, "out": str(out)},
        [], {"trace_stats": asdict(stats), "records": len(trace), "sha256": sha256_file(out)}, started,
    )
    print(f"{len(trace)} records, {stats.total_requests} requests ({stats.avg_rps:.2f} rps) -> {out}")
    return EXIT_OK


def cmd_integrate(args, argv) -> int:
    samples = parse_power_samples(Path(args.samples).read_bytes())
    joules = integrate_power(samples, args.t0, args.t1)
    print(f"{joules:#.6g} J")
    return EXIT_OK


def cmd_stats(args, argv) -> int:
    stats = trace_stats(_load_trace(args))
    print(f"total_requests: {stats.total_requests}")
    print(f"avg_rps: {stats.avg_rps:.2f}")
    print(f"function_count: {stats.function_count}")
    print(f"max_per_second_arrivals: {stats.max_per_second_arrivals}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="faasenergy", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="replay a trace through worker pools and write metrics.csv")
    _add_trace_args(p)
    p.add_argument("--keepalive", default="fixed:900",
                   help="fixed:<seconds>, halving:<seconds> or none (default fixed:900)")
    p.add_argument("--workers", type=int, default=1, help="threads across functions (output is identical)")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("energy", help="excess energy per isolation profile from metrics.csv")
    p.add_argument("metrics", help="metrics.csv written by 'simulate'")
    p.add_argument("--profiles", help="JSON profiles file overriding/adding to the built-ins")
    p.add_argument("--select", help="comma-separated profile names (default: all, in file order)")
    p.add_argument("--capacity", type=int, help="reserve capacity in workers (default: observed peak)")
    p.add_argument("--baseline", default="uvm", help="profile that reductions are relative to (default uvm)")
    p.add_argument("--target-rps", type=float, action="append",
                   help=f"request rate for linear extrapolation (repeatable; default {LAMBDA_RPS})")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_energy)

    p = sub.add_parser("synth", help="write a seeded synthetic diurnal trace")
    d = SyntheticSpec()
    p.add_argument("--functions", type=int, default=d.functions)
    p.add_argument("--horizon-s", type=int, default=d.horizon_s)
    p.add_argument("--base-rps", type=float, default=d.base_rps)
    p.add_argument("--amplitude", type=float, default=d.diurnal_amplitude, help="diurnal amplitude, 0..1")
    p.add_argument("--spike-rate", type=float, default=d.spike_rate, help="spikes per hour")
    p.add_argument("--spike-magnitude", type=float, default=d.spike_magnitude, help="rate multiplier during a spike")
    p.add_argument("--spike-duration-s", type=int, default=d.spike_duration_s)
    p.add_argument("--duration", default=f"lognormal:{d.duration.mu},{d.duration.sigma}",
                   help="fixed:<ms> or lognormal:<mu>,<sigma> (of ln ms)")
    p.add_argument("--skew", type=float, default=d.popularity_skew, help="Zipf exponent of function popularity")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output trace CSV")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("integrate", help="trapezoidal energy of power samples over [t0, t1]")
    p.add_argument("samples", help="CSV with header t_s,power_w")
    p.add_argument("--t0", type=float, required=True, help="window start (s)")
    p.add_argument("--t1", type=float, required=True, help="window end (s)")
    p.set_defaults(func=cmd_integrate)

    p = sub.add_parser("stats", help="print trace statistics")
    _add_trace_args(p)
    p.set_defaults(func=cmd_stats)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if getattr(args, "command", None) == "energy" and not args.target_rps:
        args.target_rps = [float(LAMBDA_RPS)]
    try:
        return args.func(args, argv)
    except (FileNotFoundError, PermissionError, IsADirectoryError, NotADirectoryError) as exc:
        name = exc.filename or ""
        print(f"error: cannot access {name}: {exc.strerror}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: I/O failure: {exc}", file=sys.stderr)
        return EXIT_IO
    except (DataError, TraceError, ValueError, KeyError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
