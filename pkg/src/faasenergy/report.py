"""Cross-profile comparison, rate extrapolation and plot-ready CSV/JSON output."""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import BinaryIO, Sequence

import numpy as np

from faasenergy.constants import J_PER_KWH
from faasenergy.energy import EnergySeries

FRACTION_DECIMALS = 4


def joules_to_kwh(joules: float) -> float:
    return joules / J_PER_KWH


@dataclass(frozen=True)
class ComparisonRow:
    profile: str
    total_j: float
    total_kwh: float
    reduction_vs_baseline: float
    avg_excess_power_w: float
    power_delta_w: float  # baseline average power minus this profile's


@dataclass(frozen=True)
class ComparisonSummary:
    baseline: str
    wall_time_s: float
    rows: tuple[ComparisonRow, ...]

    def row(self, profile: str) -> ComparisonRow:
        for r in self.rows:
            if r.profile == profile:
                return r
        raise KeyError(profile)


@dataclass(frozen=True)
class Extrapolation:
    base_rps: float
    target_rps: float
    base_power_delta_w: float
    scaled_power_delta_w: float
    label: str = ""


def compare(series: Sequence[EnergySeries], baseline: str, wall_time_s: float) -> ComparisonSummary:
    """Reduction of each profile's excess energy relative to ``baseline``.

    Reductions are ``1 - total / baseline_total``. A profile that uses more
    energy than the baseline gets a negative reduction.
    """
    if not series:
        raise ValueError("no energy series to compare")
    if wall_time_s <= 0:
        raise ValueError(f"wall_time_s must be positive, got {wall_time_s}")
    by_name = {s.profile: s for s in series}
    if baseline not in by_name:
        raise ValueError(f"baseline profile {baseline!r} not among {list(by_name)}")
    base_total = by_name[baseline].total_j
    if base_total <= 0:
        raise ValueError(f"baseline {baseline!r} has no excess energy; reductions are undefined")
    base_power = base_total / wall_time_s
    rows = []
    for s in series:
        total = s.total_j
        power = total / wall_time_s
        rows.append(
            ComparisonRow(
                profile=s.profile,
                total_j=total,
                total_kwh=joules_to_kwh(total),
                reduction_vs_baseline=0.0 if s.profile == baseline else 1.0 - total / base_total,
                avg_excess_power_w=power,
                power_delta_w=0.0 if s.profile == baseline else base_power - power,
            )
        )
    return ComparisonSummary(baseline, float(wall_time_s), tuple(rows))


def extrapolate_power(base_power_delta_w: float, base_rps: float, target_rps: float, label: str = "") -> Extrapolation:
    """Scale a power difference linearly with request rate."""
    if base_rps <= 0:
        raise ValueError(f"base_rps must be positive, got {base_rps}")
    if target_rps < 0:
        raise ValueError(f"target_rps must be >= 0, got {target_rps}")
    return Extrapolation(base_rps, target_rps, base_power_delta_w, base_power_delta_w * target_rps / base_rps, label)


# -- energy CSV --------------------------------------------------------------------


def emit_energy_csv(series: Sequence[EnergySeries], sink: BinaryIO) -> None:
    """Write ``t,<profile>_cum_j,...`` with one row per timestep, columns in input order."""
    if not series:
        raise ValueError("no energy series to write")
    n = len(series[0])
    if any(len(s) != n for s in series):
        raise ValueError("energy series differ in length: " + ", ".join(f"{s.profile}={len(s)}" for s in series))
    header = ["t"] + [f"{s.profile}_cum_j" for s in series]
    cols = [s.cumulative_j.tolist() for s in series]
    lines = [",".join(header)]
    lines.extend(f"{t}," + ",".join(repr(c[t]) for c in cols) for t in range(n))
    sink.write(("\n".join(lines) + "\n").encode("utf-8"))


def parse_energy_csv(source: BinaryIO | bytes) -> list[EnergySeries]:
    data = source if isinstance(source, (bytes, bytearray)) else source.read()
    lines = [ln for ln in bytes(data).decode("utf-8").splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty energy CSV")
    header = lines[0].split(",")
    if header[0] != "t" or not all(h.endswith("_cum_j") for h in header[1:]) or len(header) < 2:
        raise ValueError(f"unexpected energy CSV header {lines[0]!r}")
    rows = [ln.split(",") for ln in lines[1:]]
    if any(len(r) != len(header) for r in rows):
        raise ValueError("energy CSV rows have inconsistent field counts")
    values = np.array([[float(v) for v in r[1:]] for r in rows], dtype=np.float64).reshape(len(rows), len(header) - 1)
    return [EnergySeries(h[: -len("_cum_j")], values[:, i]) for i, h in enumerate(header[1:])]


# -- summary JSON ------------------------------------------------------------------


def summary_document(summary: ComparisonSummary, extrapolations: Sequence[Extrapolation] = ()) -> dict:
    return {
        "baseline": summary.baseline,
        "wall_time_s": summary.wall_time_s,
        "profiles": [
            {
                "profile": r.profile,
                "total_j": r.total_j,
                "total_kwh": r.total_kwh,
                "reduction_vs_baseline": round(r.reduction_vs_baseline, FRACTION_DECIMALS),
                "avg_excess_power_w": r.avg_excess_power_w,
                "power_delta_w": r.power_delta_w,
            }
            for r in summary.rows
        ],
        "extrapolations": [
            {
                "label": e.label,
                "base_rps": e.base_rps,
                "target_rps": e.target_rps,
                "base_power_delta_w": e.base_power_delta_w,
                "scaled_power_delta_w": e.scaled_power_delta_w,
            }
            for e in extrapolations
        ],
    }


def emit_summary_json(summary: ComparisonSummary, extrapolations: Sequence[Extrapolation], sink: BinaryIO) -> None:
    text = json.dumps(summary_document(summary, extrapolations), indent=2, allow_nan=False)
    sink.write((text + "\n").encode("utf-8"))


def parse_summary_json(source: BinaryIO | bytes) -> tuple[ComparisonSummary, list[Extrapolation]]:
    data = source if isinstance(source, (bytes, bytearray)) else source.read()
    doc = json.loads(bytes(data).decode("utf-8"))
    rows = tuple(
        ComparisonRow(
            profile=r["profile"],
            total_j=r["total_j"],
            total_kwh=r["total_kwh"],
            reduction_vs_baseline=r["reduction_vs_baseline"],
            avg_excess_power_w=r["avg_excess_power_w"],
            power_delta_w=r["power_delta_w"],
        )
        for r in doc["profiles"]
    )
    extrapolations = [
        Extrapolation(e["base_rps"], e["target_rps"], e["base_power_delta_w"], e["scaled_power_delta_w"], e.get("label", ""))
        for e in doc.get("extrapolations", [])
    ]
    return ComparisonSummary(doc["baseline"], doc["wall_time_s"], rows), extrapolations
