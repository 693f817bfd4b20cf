"""Desk-scale stand-in for the production-day experiment.

Generates a seeded 200-function diurnal day, simulates it under a keep-alive
policy, and prints excess energy per isolation profile.

    python scripts/desk_scale.py --seed 1 --keepalive fixed:900 --out-dir runs/desk
"""
import argparse
import time
from pathlib import Path

from faasenergy.energy import break_even_idle, builtin_profiles, excess_energy
from faasenergy.report import compare, emit_energy_csv, emit_summary_json, extrapolate_power
from faasenergy.simcore import SimConfig, emit_series_csv, min_capacity, parse_keepalive, simulate
from faasenergy.synth import SyntheticSpec, generate_synthetic
from faasenergy.trace import trace_stats


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--keepalive", default="fixed:900")
    parser.add_argument("--base-rps", type=float, default=500.0)
    parser.add_argument("--out-dir", type=Path)
    args = parser.parse_args()

    t0 = time.perf_counter()
    trace = generate_synthetic(SyntheticSpec(base_rps=args.base_rps), args.seed)
    stats = trace_stats(trace)
    t1 = time.perf_counter()
    result = simulate(trace, SimConfig(keepalive=parse_keepalive(args.keepalive)))
    t2 = time.perf_counter()
    cap = min_capacity(result)
    series = [excess_energy(result, p, cap if p.reserve_accounting else None) for p in builtin_profiles()]
    summary = compare(series, "uvm", float(len(result)))
    t3 = time.perf_counter()

    print(f"trace: {len(trace)} records, {stats.total_requests} requests, {stats.avg_rps:.2f} rps ({t1 - t0:.1f} s)")
    print(f"simulate: peak {cap} workers, {result.totals.cold_starts} cold starts ({t2 - t1:.1f} s)")
    print(f"energy: {t3 - t2:.2f} s")
    for row in summary.rows:
        print(f"  {row.profile:<12} {row.total_kwh:10.2f} kWh  {row.reduction_vs_baseline * 100:8.2f} % vs uvm")
    soc = summary.row("soc")
    e = extrapolate_power(soc.power_delta_w, stats.avg_rps, 4e6)
    print(f"uvm -> soc: {soc.power_delta_w / 1e3:.2f} kW saved, {e.scaled_power_delta_w / 1e6:.2f} MW at 4M rps")
    for p in builtin_profiles():
        if p.idle_power_w > 0 and not p.reserve_accounting:
            print(f"break-even idle for {p.name}: {break_even_idle(p):.3f} s")

    if args.out_dir:
        args.out_dir.mkdir(parents=True, exist_ok=True)
        with open(args.out_dir / "metrics.csv", "wb") as fh:
            emit_series_csv(result, fh)
        with open(args.out_dir / "energy.csv", "wb") as fh:
            emit_energy_csv(series, fh)
        with open(args.out_dir / "summary.json", "wb") as fh:
            emit_summary_json(summary, [e], fh)


if __name__ == "__main__":
    main()
