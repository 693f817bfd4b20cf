"""Adapter for wide per-second request tables such as the Huawei 2023 release.

Assumed layout (one CSV per day)::

    day,time,<fid_0>,<fid_1>,...
    0,0,12,0,...
    0,1,9,3,...

``time`` is seconds (either within the day or since the start of the data
set; both are reduced modulo 86400). Each function column holds the number
of requests that arrived in that second. Column names become function ids
after replacing characters outside ``[A-Za-z0-9_-]`` with ``_``.

Execution times come from an optional second table with the same layout
whose cells hold the mean per-invocation execution time of that function in
that second. Every invocation in the second is replayed with that mean
(rounded up to whole milliseconds, minimum 1 ms). Cells that are empty or
missing fall back to ``default_duration_ms``.
"""
from __future__ import annotations

import io
import re

import polars as pl

from faasenergy.trace import SECONDS_PER_DAY, Trace, TraceError, _from_frame

INDEX_COLUMNS = ("day", "time")


def _read_wide(data: bytes, what: str) -> pl.DataFrame:
    if not data.strip():
        raise TraceError(f"empty {what} table")
    try:
        df = pl.read_csv(io.BytesIO(data), infer_schema_length=10000)
    except Exception as exc:
        raise TraceError(f"cannot parse {what} table: {exc}") from None
    missing = [c for c in ("time",) if c not in df.columns]
    if missing:
        raise TraceError(f"{what} table lacks column(s) {missing}")
    return df


def _select_day(df: pl.DataFrame, day: int | None) -> pl.DataFrame:
    if day is not None and "day" in df.columns:
        df = df.filter(pl.col("day") == day)
    return df.with_columns((pl.col("time").cast(pl.Int64) % SECONDS_PER_DAY).alias("time"))


def _long(df: pl.DataFrame, value_name: str) -> pl.DataFrame:
    value_cols = [c for c in df.columns if c not in INDEX_COLUMNS]
    if not value_cols:
        raise TraceError("table has no function columns")
    return df.select(["time", *value_cols]).unpivot(
        index="time", on=value_cols, variable_name="function", value_name=value_name
    ).with_columns(pl.col(value_name).cast(pl.Float64))


def _clean_id(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_-]", "_", name.strip()) or "_"


def parse_huawei(
    requests: bytes,
    runtimes: bytes | None = None,
    day: int | None = None,
    default_duration_ms: int = 1000,
    runtime_unit_ms: float = 1.0,
) -> Trace:
    """Convert a wide per-second request table (plus optional runtimes) to a Trace.

    The horizon is one full day (86400 s) regardless of how many seconds the
    file actually contains.
    """
    if default_duration_ms < 1:
        raise ValueError("default_duration_ms must be >= 1")
    req = _long(_select_day(_read_wide(requests, "requests"), day), "count")
    req = req.filter(pl.col("count").is_not_null() & (pl.col("count") > 0))
    if req.height == 0:
        raise TraceError("request table contains no invocations")
    if (req["count"] != req["count"].round()).any():
        raise TraceError("request counts must be whole numbers")

    if runtimes is not None:
        rt = _long(_select_day(_read_wide(runtimes, "runtimes"), day), "runtime")
        rt = rt.group_by(["time", "function"]).agg(pl.col("runtime").mean())
        req = req.join(rt, on=["time", "function"], how="left")
        known = pl.col("runtime").is_not_null() & pl.col("runtime").is_not_nan()
        dur = pl.max_horizontal((pl.col("runtime") * runtime_unit_ms).ceil(), pl.lit(1.0))
        req = req.with_columns(
            pl.when(known).then(dur).otherwise(default_duration_ms).cast(pl.Int64).alias("duration_ms")
        )
    else:
        req = req.with_columns(pl.lit(default_duration_ms, dtype=pl.Int64).alias("duration_ms"))

    names = {c: _clean_id(c) for c in req["function"].unique().to_list()}
    df = req.select(
        pl.col("time").alias("t"),
        pl.col("function").replace_strict(names, return_dtype=pl.Utf8),
        pl.col("count").cast(pl.Int64),
        pl.col("duration_ms"),
    )
    return _from_frame(df, SECONDS_PER_DAY)


def read_huawei(requests_path, runtimes_path=None, **options) -> Trace:
    with open(requests_path, "rb") as fh:
        requests = fh.read()
    runtimes = None
    if runtimes_path is not None:
        with open(runtimes_path, "rb") as fh:
            runtimes = fh.read()
    return parse_huawei(requests, runtimes, **options)

