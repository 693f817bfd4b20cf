"""Per-second invocation traces: the canonical CSV format, validation and stats.

A trace is stored column-wise (numpy arrays) because desk- and production-scale
days hold millions of (second, function) records.
"""
from __future__ import annotations

import csv
import io
import re
from dataclasses import dataclass
from typing import BinaryIO, Iterable, Iterator

import numpy as np
import polars as pl

CANONICAL_HEADER = ("t", "function", "count", "duration_ms")
FUNCTION_ID_RE = re.compile(r"^[A-Za-z0-9_-]+$")
SECONDS_PER_DAY = 86400


class TraceError(ValueError):
    """Raised when trace input cannot be turned into a valid Trace."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class ArrivalRecord:
    t: int
    function: str
    count: int
    duration_ms: int


@dataclass(frozen=True)
class Violation:
    invariant: str
    index: int | None
    message: str


@dataclass(frozen=True)
class TraceStats:
    total_requests: int
    avg_rps: float
    function_count: int
    max_per_second_arrivals: int


def _frozen(values, dtype=np.int64) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


class Trace:
    """Immutable column-wise trace.

    ``functions`` is the table of function ids; each record refers to it via
    ``function_index``. Use :meth:`from_records` or :meth:`from_columns` to get a
    normalized trace; the plain constructor stores what it is given so that
    :func:`validate_trace` has something to report on.
    """

    __slots__ = ("functions", "t", "function_index", "count", "duration_ms", "horizon_s")

    def __init__(self, functions, t, function_index, count, duration_ms, horizon_s: int):
        object.__setattr__(self, "functions", tuple(functions))
        object.__setattr__(self, "t", _frozen(t))
        object.__setattr__(self, "function_index", _frozen(function_index))
        object.__setattr__(self, "count", _frozen(count))
        object.__setattr__(self, "duration_ms", _frozen(duration_ms))
        object.__setattr__(self, "horizon_s", int(horizon_s))
        n = len(self.t)
        if not (len(self.function_index) == len(self.count) == len(self.duration_ms) == n):
            raise ValueError("trace columns differ in length")

    def __setattr__(self, name, value):
        raise AttributeError("Trace is immutable")

    def __len__(self) -> int:
        return len(self.t)

    def __iter__(self) -> Iterator[ArrivalRecord]:
        funcs = self.functions
        for t, f, c, d in zip(
            self.t.tolist(), self.function_index.tolist(), self.count.tolist(), self.duration_ms.tolist()
        ):
            yield ArrivalRecord(t, funcs[f], c, d)

    @property
    def records(self) -> list[ArrivalRecord]:
        return list(self)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Trace):
            return NotImplemented
        return (
            self.horizon_s == other.horizon_s
            and self.functions == other.functions
            and np.array_equal(self.t, other.t)
            and np.array_equal(self.function_index, other.function_index)
            and np.array_equal(self.count, other.count)
            and np.array_equal(self.duration_ms, other.duration_ms)
        )

    def __repr__(self) -> str:
        return f"Trace({len(self)} records, {len(self.functions)} functions, horizon_s={self.horizon_s})"

    @classmethod
    def from_records(cls, records: Iterable[ArrivalRecord], horizon_s: int | None = None) -> "Trace":
        records = list(records)
        return cls.from_columns(
            [r.t for r in records],
            [r.function for r in records],
            [r.count for r in records],
            [r.duration_ms for r in records],
            horizon_s=horizon_s,
        )

    @classmethod
    def from_columns(cls, t, function, count, duration_ms, horizon_s: int | None = None) -> "Trace":
        """Normalize raw columns: merge duplicate (t, function, duration) rows, sort, index ids."""
        df = pl.DataFrame(
            {
                "t": np.asarray(t, dtype=np.int64),
                "function": pl.Series(list(function) if not isinstance(function, pl.Series) else function, dtype=pl.Utf8),
                "count": np.asarray(count, dtype=np.int64),
                "duration_ms": np.asarray(duration_ms, dtype=np.int64),
            }
        )
        return _from_frame(df, horizon_s)

    def with_horizon(self, horizon_s: int) -> "Trace":
        return Trace(self.functions, self.t, self.function_index, self.count, self.duration_ms, horizon_s)

    def subset(self, functions: Iterable[str]) -> "Trace":
        """Trace restricted to the given function ids (same horizon)."""
        wanted = set(functions)
        kept = [f for f in self.functions if f in wanted]
        old_to_new = np.full(len(self.functions), -1, dtype=np.int64)
        for new, f in enumerate(kept):
            old_to_new[self.functions.index(f)] = new
        mapped = old_to_new[self.function_index] if len(self) else np.zeros(0, np.int64)
        mask = mapped >= 0
        return Trace(
            kept, self.t[mask], mapped[mask], self.count[mask], self.duration_ms[mask], self.horizon_s
        )


def _from_frame(df: pl.DataFrame, horizon_s: int | None) -> Trace:
    if df.height == 0:
        return Trace((), [], [], [], [], horizon_s or 0)
    functions = sorted(df["function"].unique().to_list())
    codes = df["function"].cast(pl.Enum(functions)).to_physical().to_numpy().astype(np.int64)
    t = df["t"].to_numpy().astype(np.int64)
    count = df["count"].to_numpy().astype(np.int64)
    dur = df["duration_ms"].to_numpy().astype(np.int64)
    if len(t) > 1:
        dt, dc, dd = np.diff(t), np.diff(codes), np.diff(dur)
        ordered = (dt > 0) | ((dt == 0) & ((dc > 0) | ((dc == 0) & (dd >= 0))))
        if not ordered.all():
            order = np.lexsort((dur, codes, t))
            t, codes, count, dur = t[order], codes[order], count[order], dur[order]
            dt, dc, dd = np.diff(t), np.diff(codes), np.diff(dur)
        starts = np.flatnonzero(np.concatenate([[True], (dt != 0) | (dc != 0) | (dd != 0)]))
        if len(starts) < len(t):
            count = np.add.reduceat(count, starts)
            t, codes, dur = t[starts], codes[starts], dur[starts]
    if horizon_s is None:
        horizon_s = int(t.max()) + 1
    return Trace(functions, t, codes, count, dur, horizon_s)


def validate_trace(trace: Trace) -> list[Violation]:
    """Check every Trace invariant; an empty list means the trace is valid."""
    out: list[Violation] = []
    funcs = trace.functions
    for i, f in enumerate(funcs):
        if not f.strip():
            out.append(Violation("function-id", None, f"function id #{i} is empty"))
    if len(set(funcs)) != len(funcs):
        out.append(Violation("function-id", None, "function ids are not unique"))
    if trace.horizon_s <= 0:
        out.append(Violation("horizon", None, f"horizon_s must be positive, got {trace.horizon_s}"))
    n = len(trace)
    if n == 0:
        return out

    t, fi = trace.t, trace.function_index

    def flag(invariant, mask, describe):
        for i in np.flatnonzero(mask).tolist():
            out.append(Violation(invariant, i, describe(i)))

    flag("horizon", (t < 0) | (t >= trace.horizon_s), lambda i: f"t={t[i]} outside [0, {trace.horizon_s})")
    flag("function-index", (fi < 0) | (fi >= len(funcs)), lambda i: f"function index {fi[i]} out of range")
    flag("count", trace.count < 1, lambda i: f"count={trace.count[i]} < 1")
    flag("duration", trace.duration_ms < 1, lambda i: f"duration_ms={trace.duration_ms[i]} < 1")

    if n > 1 and len(funcs):
        rank = np.empty(len(funcs), dtype=np.int64)
        rank[np.argsort(np.array(funcs, dtype=object), kind="stable")] = np.arange(len(funcs))
        r = rank[np.clip(fi, 0, len(funcs) - 1)]
        key_t, key_f, key_d = t[1:], r[1:], trace.duration_ms[1:]
        prev_t, prev_f, prev_d = t[:-1], r[:-1], trace.duration_ms[:-1]
        backwards = (key_t < prev_t) | ((key_t == prev_t) & (key_f < prev_f))
        flag("ordering", np.concatenate([[False], backwards]), lambda i: f"record {i} sorts before record {i - 1}")
        dup = (key_t == prev_t) & (key_f == prev_f) & (key_d == prev_d)
        flag("uniqueness", np.concatenate([[False], dup]), lambda i: f"record {i} duplicates (t, function, duration) of record {i - 1}")
    return out


def trace_stats(trace: Trace) -> TraceStats:
    total = int(trace.count.sum())
    if len(trace):
        per_second = np.bincount(trace.t, weights=trace.count)
        peak = int(per_second.max())
        nfunc = len(np.unique(trace.function_index))
    else:
        peak = nfunc = 0
    avg = total / trace.horizon_s if trace.horizon_s > 0 else 0.0
    return TraceStats(total, avg, nfunc, peak)


def per_second_arrivals(trace: Trace) -> np.ndarray:
    """Total arrivals in each second of the horizon."""
    return np.bincount(trace.t, weights=trace.count, minlength=trace.horizon_s).astype(np.int64)


# -- canonical CSV ---------------------------------------------------------


def emit_trace(trace: Trace, sink: BinaryIO) -> None:
    """Write the canonical CSV form, including the ``# horizon_s=`` header line."""
    sink.write(f"# horizon_s={trace.horizon_s}\n".encode())
    funcs = pl.Series("function", list(trace.functions), dtype=pl.Utf8)
    df = pl.DataFrame(
        {
            "t": trace.t,
            "function": funcs.gather(trace.function_index) if len(trace) else pl.Series([], dtype=pl.Utf8),
            "count": trace.count,
            "duration_ms": trace.duration_ms,
        }
    )
    buf = io.BytesIO()
    df.write_csv(buf, line_terminator="\n")
    sink.write(buf.getvalue())


def _split_horizon_comment(data: bytes) -> tuple[int | None, bytes, int]:
    """Strip a leading ``# horizon_s=<n>`` line; return (horizon, rest, lines consumed)."""
    if not data.startswith(b"#"):
        return None, data, 0
    first, _, rest = data.partition(b"\n")
    m = re.fullmatch(rb"#\s*horizon_s\s*=\s*(\d+)\s*", first.rstrip(b"\r"))
    if not m:
        raise TraceError(f"unrecognized header comment {first.decode(errors='replace')!r}", line=1)
    return int(m.group(1)), rest, 1


def _locate_canonical_error(text: str, first_line: int, horizon: int | None) -> None:
    """Slow row-by-row scan that raises TraceError naming the first bad line."""
    reader = csv.reader(io.StringIO(text))
    for offset, row in enumerate(reader):
        line = first_line + offset
        if offset == 0:
            if tuple(c.strip() for c in row) != CANONICAL_HEADER:
                raise TraceError(f"expected header {','.join(CANONICAL_HEADER)!r}, got {','.join(row)!r}", line)
            continue
        if not row:
            continue
        if len(row) != 4:
            raise TraceError(f"expected 4 fields, got {len(row)}", line)
        try:
            t, count, dur = int(row[0]), int(row[2]), int(row[3])
        except ValueError:
            raise TraceError(f"non-integer field in {','.join(row)!r}", line) from None
        func = row[1].strip()
        if not FUNCTION_ID_RE.match(func):
            raise TraceError(f"invalid function id {row[1]!r}", line)
        if t < 0:
            raise TraceError(f"negative t={t}", line)
        if count < 1:
            raise TraceError(f"count must be >= 1, got {count}", line)
        if dur < 1:
            raise TraceError(f"duration_ms must be >= 1, got {dur}", line)
        if horizon is not None and t >= horizon:
            raise TraceError(f"t={t} exceeds declared horizon_s={horizon}", line)


def _parse_canonical(data: bytes) -> Trace:
    horizon, body, skipped = _split_horizon_comment(data)
    if not body.strip():
        raise TraceError("empty trace input")
    header_line = skipped + 1
    text = body.decode("utf-8")
    schema = {"t": pl.Int64, "function": pl.Utf8, "count": pl.Int64, "duration_ms": pl.Int64}
    try:
        df = pl.read_csv(io.BytesIO(body), schema_overrides=schema, has_header=True)
    except Exception:
        _locate_canonical_error(text, header_line, horizon)
        raise TraceError("malformed trace CSV") from None
    if tuple(df.columns) != CANONICAL_HEADER:
        _locate_canonical_error(text, header_line, horizon)
        raise TraceError(f"unexpected columns {df.columns}")
    if df.height == 0:
        raise TraceError("trace has a header but no records")
    df = df.with_columns(pl.col("function").str.strip_chars())
    bad = (
        pl.any_horizontal(pl.all().is_null())
        | ~pl.col("function").str.contains(r"^[A-Za-z0-9_-]+$")
        | (pl.col("t") < 0)
        | (pl.col("count") < 1)
        | (pl.col("duration_ms") < 1)
    )
    if horizon is not None:
        bad = bad | (pl.col("t") >= horizon)
    if df.select(bad.any()).item():
        _locate_canonical_error(text, header_line, horizon)
        raise TraceError("malformed trace CSV")
    return _from_frame(df, horizon)


def parse_trace(source: BinaryIO | bytes, format: str = "canonical", **adapter_options) -> Trace:
    """Read a trace from bytes or a binary stream.

    ``format`` is ``"canonical"`` (``t,function,count,duration_ms``) or
    ``"huawei"``; adapter options are passed to :func:`faasenergy.huawei.parse_huawei`.
    """
    data = source if isinstance(source, (bytes, bytearray)) else source.read()
    data = bytes(data)
    if data.startswith(b"\xef\xbb\xbf"):
        data = data[3:]
    if format in ("canonical", "canonical-csv"):
        if adapter_options:
            raise TypeError(f"canonical format takes no options, got {sorted(adapter_options)}")
        return _parse_canonical(data)
    if format in ("huawei", "huawei-adapter"):
        from faasenergy.huawei import parse_huawei

        return parse_huawei(data, **adapter_options)
    raise ValueError(f"unknown trace format {format!r}")


def read_trace(path, format: str = "canonical", **adapter_options) -> Trace:
    with open(path, "rb") as fh:
        return parse_trace(fh, format, **adapter_options)


def write_trace(trace: Trace, path) -> None:
    with open(path, "wb") as fh:
        emit_trace(trace, fh)
