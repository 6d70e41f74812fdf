"""Finite arrival/service curves and the curve algebra used by the analysis.

Curves live in the time domain: ``lower[k-1]`` and ``upper[k-1]`` bound the
time spanned by any ``k`` consecutive events (``k = 1..N``).  Times are
integers; ``INF`` marks an unbounded upper value.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Sequence

INF = math.inf


class CurveFormatError(ValueError):
    """Raised when a curve file cannot be parsed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyStreamSet(ValueError):
    """The curve pair admits no stream at all."""


def _as_value(v, *, allow_inf: bool):
    if v is None or (isinstance(v, float) and math.isinf(v)):
        if not allow_inf:
            raise ValueError("unbounded value not allowed here")
        return INF
    if isinstance(v, float) and not v.is_integer():
        raise ValueError(f"time values must be integers, got {v!r}")
    return int(v)


@dataclass(frozen=True)
class XiCurvePair:
    """Lower/upper curve pair in the time-per-event-count domain."""

    lower: tuple
    upper: tuple
    granularity: int = 1

    def __post_init__(self):
        lower = tuple(_as_value(v, allow_inf=True) for v in self.lower)
        upper = tuple(_as_value(v, allow_inf=True) for v in self.upper)
        if len(lower) != len(upper):
            raise ValueError("lower and upper must have the same length")
        if not lower:
            raise ValueError("a curve needs at least one point")
        if self.granularity < 1:
            raise ValueError("granularity must be a positive integer")
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @property
    def N(self) -> int:
        return len(self.lower)

    def lower_at(self, k: int):
        """Lower bound for ``k`` events; 0 for k = 0 or k beyond N."""
        if 1 <= k <= self.N:
            return self.lower[k - 1]
        return 0

    def upper_at(self, k: int):
        if k == 0:
            return 0
        if 1 <= k <= self.N:
            return self.upper[k - 1]
        return INF

    def is_valid(self) -> bool:
        return not validate(self)

    def with_granularity(self, g: int) -> "XiCurvePair":
        return XiCurvePair(self.lower, self.upper, g)


@dataclass(frozen=True)
class AlphaCurvePair:
    """Event-count bounds per interval length ``0..delta_max``."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        object.__setattr__(self, "lower", tuple(int(v) for v in self.lower))
        object.__setattr__(self, "upper", tuple(int(v) for v in self.upper))
        if len(self.lower) != len(self.upper) or not self.lower:
            raise ValueError("alpha curves need matching, non-empty arrays")

    @property
    def delta_max(self) -> int:
        return len(self.lower) - 1


@dataclass(frozen=True)
class CoarseCurveSet:
    entries: tuple = field(default=())

    def __post_init__(self):
        entries = tuple((int(g), pair) for g, pair in self.entries)
        gs = [g for g, _ in entries]
        if len(set(gs)) != len(gs):
            raise ValueError("granularities must be distinct")
        if any(g < 1 for g in gs):
            raise ValueError("granularities must be positive")
        object.__setattr__(self, "entries", entries)

    def add(self, g: int, pair: XiCurvePair) -> "CoarseCurveSet":
        return CoarseCurveSet(self.entries + ((g, pair),))


def validate(pair: XiCurvePair) -> list[str]:
    """Return one diagnostic per violated invariant (empty when valid)."""
    diags = []
    for k, (lo, up) in enumerate(zip(pair.lower, pair.upper), start=1):
        if lo == INF:
            diags.append(f"lower[{k}] is unbounded")
        elif lo < 0:
            diags.append(f"lower[{k}] < 0")
        if up != INF and up < 0:
            diags.append(f"upper[{k}] < 0")
        if lo > up:
            diags.append(f"lower[{k}] > upper[{k}]")
        if k > 1:
            if lo < pair.lower[k - 2]:
                diags.append(f"lower not nondecreasing at k={k}")
            if up < pair.upper[k - 2]:
                diags.append(f"upper not nondecreasing at k={k}")
    return diags


def _check(pair: XiCurvePair) -> None:
    diags = validate(pair)
    if diags:
        raise ValueError("invalid curve pair: " + "; ".join(diags))


def xi_from_alpha(a: AlphaCurvePair, N: int) -> XiCurvePair:
    """Pseudo-inverse from event counts per interval to time per event count.

    ``upper[k] = min{D | alpha_lower(D) >= k}`` (unbounded when no such D),
    ``lower[k] = min{D | alpha_upper(D) >= k}`` (``delta_max + 1`` when the
    largest modelled interval still holds fewer than ``k`` events).
    """
    if N < 1:
        raise ValueError("N must be positive")
    problems = []
    if a.lower[0] != 0:
        problems.append("alpha lower[0] must be 0")
    for d in range(len(a.lower)):
        if a.lower[d] > a.upper[d]:
            problems.append(f"alpha lower[{d}] > upper[{d}]")
        if d and (a.lower[d] < a.lower[d - 1] or a.upper[d] < a.upper[d - 1]):
            problems.append(f"alpha not nondecreasing at D={d}")
    if problems:
        raise ValueError("invalid alpha pair: " + "; ".join(problems))

    def first_reaching(arr, k, missing):
        for d, v in enumerate(arr):
            if v >= k:
                return d
        return missing

    upper = [first_reaching(a.lower, k, INF) for k in range(1, N + 1)]
    lower = [first_reaching(a.upper, k, a.delta_max + 1) for k in range(1, N + 1)]
    return XiCurvePair(lower, upper)


def alpha_from_xi(x: XiCurvePair, delta_max: int) -> AlphaCurvePair:
    """Inverse direction: ``upper[D] = max{k | xi_lower(k) <= D}`` with
    ``xi_lower(0) = 0``, and ``lower[D] = max{k | xi_upper(k) <= D}``.

    Counts are capped at N since the curve says nothing beyond it.
    """
    _check(x)
    if delta_max < 0:
        raise ValueError("delta_max must be nonnegative")

    def count_within(arr, d):
        k = 0
        while k < len(arr) and arr[k] <= d:
            k += 1
        return k

    lower = [count_within(x.upper, d) for d in range(delta_max + 1)]
    # an empty interval guarantees nothing, even for zero-length upper bounds
    lower[0] = 0
    upper = [count_within(x.lower, d) for d in range(delta_max + 1)]
    return AlphaCurvePair(lower, upper)


def sample(x: XiCurvePair, g: int) -> XiCurvePair:
    """Keep every g-th point: ``result(k) = x(g*k)``."""
    if g < 1:
        raise ValueError("granularity must be >= 1")
    n = x.N // g
    if n < 1:
        raise ValueError(f"curve of length {x.N} too short for granularity {g}")
    return XiCurvePair(
        [x.lower[g * k - 1] for k in range(1, n + 1)],
        [x.upper[g * k - 1] for k in range(1, n + 1)],
        x.granularity * g,
    )


def combine(curve_set: CoarseCurveSet, N: int) -> XiCurvePair:
    """Merge coarse results into fine-granularity bounds on ``1..N``.

    Lower values are taken from every coarse point whose fine index does not
    exceed ``n``, upper values from every point at or beyond ``n``.
    """
    if not curve_set.entries:
        raise ValueError("cannot combine an empty curve set")
    lower = [0] * N
    upper = [INF] * N
    for g, pair in curve_set.entries:
        _check(pair)
        for k in range(1, pair.N + 1):
            fine = k * g
            lo, up = pair.lower[k - 1], pair.upper[k - 1]
            for n in range(1, N + 1):
                if fine <= n and lo > lower[n - 1]:
                    lower[n - 1] = lo
                if fine >= n and up < upper[n - 1]:
                    upper[n - 1] = up
    return XiCurvePair(lower, upper)


def causality_closure(x: XiCurvePair) -> XiCurvePair:
    """Tighten a pair to a fixpoint without changing the streams it admits.

    Each pass applies, for every ``n``, sub/super-additivity over splits
    ``a + b = n`` and the deconvolution bounds obtained by removing a
    ``a - n`` event prefix from an ``a``-event window.
    """
    diags = validate(x)
    if diags:
        raise ValueError("invalid curve pair: " + "; ".join(diags))
    N = x.N
    lo = [0] + list(x.lower)
    up = [0] + list(x.upper)
    changed = True
    while changed:
        changed = False
        for n in range(1, N + 1):
            best_up, best_lo = up[n], lo[n]
            for a in range(1, n):
                best_up = min(best_up, up[a] + up[n - a])
                best_lo = max(best_lo, lo[a] + lo[n - a])
            for a in range(n + 1, N + 1):
                if up[a] != INF:
                    best_up = min(best_up, up[a] - lo[a - n])
                if up[a - n] != INF:
                    best_lo = max(best_lo, lo[a] - up[a - n])
            if best_up < up[n]:
                up[n] = best_up
                changed = True
            if best_lo > lo[n]:
                lo[n] = best_lo
                changed = True
            if lo[n] > up[n]:
                raise EmptyStreamSet(f"empty stream set: lower[{n}] > upper[{n}] after closure")
    return XiCurvePair(lo[1:], up[1:], x.granularity)


def distance(fine: XiCurvePair, coarse: XiCurvePair, g: int, kmax: int):
    """Mean gap between coarse points and fine points at multiples of ``g``.

    Averages the lower gaps ``fine.lower(g*k) - coarse.lower(k)`` and the
    upper gaps ``coarse.upper(k) - fine.upper(g*k)`` over ``1 <= k <= kmax``,
    then averages the two means.  Exact: returns a ``Fraction``, or ``INF``
    when an upper gap is unbounded.
    """
    if kmax < 1 or kmax > coarse.N or g * kmax > fine.N:
        raise IndexError(f"kmax={kmax} out of range for g={g}")
    lower_gaps = [fine.lower[g * k - 1] - coarse.lower[k - 1] for k in range(1, kmax + 1)]
    upper_gaps = [coarse.upper[k - 1] - fine.upper[g * k - 1] for k in range(1, kmax + 1)]
    if any(v == INF or v == -INF or v != v for v in upper_gaps):
        return INF
    return (Fraction(sum(lower_gaps), kmax) + Fraction(sum(upper_gaps), kmax)) / 2


def normalize_windows(mins: Sequence, maxs: Sequence, granularity: int = 1) -> XiCurvePair:
    """Turn raw per-K window extremes into a valid pair.

    ``None`` entries (no window observed) become 0 / ``INF``; both bounds are
    then made nondecreasing by a running maximum, which only loosens them.
    """
    lower, upper = [], []
    lo_run, up_run = 0, 0
    for lo, up in zip(mins, maxs):
        lo_run = max(lo_run, 0 if lo is None else lo)
        up_run = max(up_run, INF if up is None else up)
        lower.append(lo_run)
        upper.append(up_run)
    return XiCurvePair(lower, upper, granularity)


# --- file formats -----------------------------------------------------------

def _fmt(v) -> str:
    return "inf" if v == INF else str(int(v))


def format_curve(pair: XiCurvePair) -> str:
    lines = [f"xi g={pair.granularity} N={pair.N}"]
    for k in range(1, pair.N + 1):
        lines.append(f"{k} {_fmt(pair.lower[k - 1])} {_fmt(pair.upper[k - 1])}")
    return "\n".join(lines) + "\n"


def parse_curve(text: str) -> XiCurvePair:
    rows = [(i, ln.strip()) for i, ln in enumerate(text.splitlines(), start=1)]
    rows = [(i, ln) for i, ln in rows if ln and not ln.startswith("#")]
    if not rows:
        raise CurveFormatError("empty curve file")
    lineno, header = rows[0]
    parts = header.split()
    if not parts or parts[0] != "xi":
        raise CurveFormatError("header must start with 'xi'", lineno)
    opts = {}
    for p in parts[1:]:
        key, sep, val = p.partition("=")
        if not sep or key not in ("g", "N"):
            raise CurveFormatError(f"bad header field {p!r}", lineno)
        try:
            opts[key] = int(val)
        except ValueError:
            raise CurveFormatError(f"bad integer in {p!r}", lineno) from None
    if "g" not in opts or "N" not in opts:
        raise CurveFormatError("header needs g=<int> and N=<int>", lineno)
    lower, upper = [], []
    for lineno, ln in rows[1:]:
        cols = ln.split()
        if len(cols) != 3:
            raise CurveFormatError("expected '<k> <lower> <upper>'", lineno)
        try:
            k = int(cols[0])
            lo = int(cols[1])
            up = INF if cols[2] == "inf" else int(cols[2])
        except ValueError:
            raise CurveFormatError(f"bad number in {ln!r}", lineno) from None
        if k != len(lower) + 1:
            raise CurveFormatError(f"expected k={len(lower) + 1}, got {k}", lineno)
        lower.append(lo)
        upper.append(up)
    if len(lower) != opts["N"]:
        raise CurveFormatError(f"header says N={opts['N']} but {len(lower)} points given")
    try:
        return XiCurvePair(lower, upper, opts["g"])
    except ValueError as exc:
        raise CurveFormatError(str(exc)) from None


def read_curve(path) -> XiCurvePair:
    return parse_curve(Path(path).read_text())


def write_curve(pair: XiCurvePair, path) -> None:
    Path(path).write_text(format_curve(pair))


def write_csv(pair: XiCurvePair, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "lower", "upper"])
        for k in range(1, pair.N + 1):
            w.writerow([k, _fmt(pair.lower[k - 1]), _fmt(pair.upper[k - 1])])


def write_gnuplot(points: Iterable[tuple[int, object]], path) -> None:
    """Two-column ``x y`` data; unbounded values are written as ``inf``."""
    with open(path, "w") as fh:
        for x, y in points:
            fh.write(f"{x} {_fmt(y)}\n")
