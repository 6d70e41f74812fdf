"""Brute-force ground truth for tiny instances.

Everything here works on explicit timestamp histories: no clock capping, no
state merging.  It exists to certify the engine and the translations.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path

import networkx as nx

from .curves import INF, XiCurvePair, normalize_windows, validate
from .mta import Kind, MtaSpec, check_spec


class BudgetExceeded(RuntimeError):
    """The instance is too large for exhaustive enumeration."""


class InconsistentService(ValueError):
    pass


class MissingService(LookupError):
    """Replay reached a mode visit for which no service stream was given."""

    def __init__(self, visit: int, mode: str, entry: int):
        self.visit, self.mode, self.entry = visit, mode, entry
        super().__init__(f"no service stream for visit {visit} of mode {mode!r} entered at {entry}")


@dataclass(frozen=True)
class EventStream:
    """Nondecreasing integer timestamps; ``timestamps[0]`` is the origin 0."""

    timestamps: tuple
    granularity: int = 1

    def __post_init__(self):
        ts = tuple(int(t) for t in self.timestamps)
        if not ts or ts[0] != 0:
            raise ValueError("a stream starts at the origin 0")
        if any(b < a for a, b in zip(ts, ts[1:])):
            raise ValueError("timestamps must be nondecreasing")
        object.__setattr__(self, "timestamps", ts)

    @property
    def events(self) -> tuple:
        return self.timestamps[1:]

    def __len__(self):
        return len(self.timestamps) - 1


def stream_satisfies(s: EventStream, x: XiCurvePair) -> bool:
    ts = s.timestamps
    for i in range(len(ts)):
        for k in range(1, min(x.N, len(ts) - 1 - i) + 1):
            d = ts[i + k] - ts[i]
            if d < x.lower[k - 1] or d > x.upper[k - 1]:
                return False
    return True


def _may_emit(hist, t, x: XiCurvePair) -> bool:
    for j in range(1, min(x.N, len(hist)) + 1):
        if t - hist[-j] < x.lower[j - 1]:
            return False
    return True


def _may_wait(hist, t, x: XiCurvePair) -> bool:
    """Can time reach ``t`` with no further emission?"""
    for j in range(1, min(x.N, len(hist)) + 1):
        if t - hist[-j] > x.upper[j - 1]:
            return False
    return True


def enumerate_streams(x: XiCurvePair, max_events: int, max_time: int, *,
                      complete: bool = False, budget: int = 200_000) -> set:
    """Satisfying streams inside the ``max_events x max_time`` box.

    By default returns the streams of exactly ``max_events`` timestamps
    (origin included) with all timestamps ``<= max_time``.  With
    ``complete=True`` returns every stream whose timestamps are all
    ``<= max_time`` and whose upper bounds still hold at ``max_time``;
    ``max_events`` then caps the event count and exceeding it is an error.
    """
    if validate(x):
        raise ValueError("invalid curve pair")
    out = set()

    def grow(hist):
        if len(out) > budget:
            raise BudgetExceeded(f"more than {budget} streams")
        if not complete and len(hist) == max_events:
            out.add(EventStream(tuple(hist)))
            return
        if complete and _may_wait(hist, max_time, x):
            out.add(EventStream(tuple(hist)))
        for t in range(hist[-1], max_time + 1):
            if not _may_wait(hist, t, x):
                break
            if _may_emit(hist, t, x):
                if complete and len(hist) == max_events:
                    raise BudgetExceeded(f"a stream needs more than {max_events} timestamps")
                grow(hist + [t])

    grow([0])
    return out


def count_streams(x: XiCurvePair, max_events: int, max_time: int) -> int:
    """Number of streams :func:`enumerate_streams` returns (default mode),
    by a memoized recursion over the last ``N`` timestamps."""
    from functools import lru_cache

    @lru_cache(maxsize=None)
    def count(tail, remaining):
        if remaining == 0:
            return 1
        total = 0
        for t in range(tail[-1], max_time + 1):
            if not _may_wait(tail, t, x):
                break
            if _may_emit(tail, t, x):
                total += count((tail + (t,))[-x.N:], remaining - 1)
        return total

    return count((0,), max_events - 1)


def abstract_stream(s: EventStream, g: int) -> EventStream:
    if g < 1:
        raise ValueError("granularity must be >= 1")
    ts = s.timestamps
    return EventStream(tuple(ts[g * i] for i in range((len(ts) - 1) // g + 1)), s.granularity * g)


def is_refinement(fine: EventStream, coarse: EventStream, g: int) -> bool:
    """True iff sampling ``fine`` every ``g`` events gives ``coarse`` on the
    prefix where both are defined."""
    a = abstract_stream(fine, g).timestamps
    b = coarse.timestamps
    n = min(len(a), len(b))
    return a[:n] == b[:n]


def live_prefixes(x: XiCurvePair, length: int, max_time: int) -> set:
    """Streams of ``length`` timestamps that extend to an infinite stream
    satisfying ``x`` (with time diverging).

    Extension is decided on the finite graph of "time since each of the last
    N events" states: a prefix is live iff its end state can reach a cycle
    that lets time pass.
    """
    cap = max([v for v in x.upper if v != INF] + list(x.lower)) + 1
    graph = nx.DiGraph()
    tick_edges = set()
    frontier = [(0,)]
    seen = {(0,)}

    def tick(ages):
        out = []
        for j, a in enumerate(ages):
            a += 1
            if a > x.upper[j]:
                return None
            out.append(min(a, cap))
        return tuple(out)

    def emit(ages):
        for j, a in enumerate(ages):
            if a < x.lower[j]:
                return None
        return ((0,) + ages)[: x.N]

    while frontier:
        st = frontier.pop()
        graph.add_node(st)
        for nxt, is_tick in ((tick(st), True), (emit(st), False)):
            if nxt is None:
                continue
            graph.add_edge(st, nxt)
            if is_tick:
                tick_edges.add((st, nxt))
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    good = set()
    for comp in nx.strongly_connected_components(graph):
        sub = graph.subgraph(comp)
        if any((a, b) in tick_edges for a, b in sub.edges):
            good |= comp
    rev = graph.reverse(copy=False)
    live = set(good)
    for node in good:
        live |= nx.descendants(rev, node)

    out = set()
    for s in enumerate_streams(x, length, max_time):
        ts = s.timestamps
        ages = tuple(min(ts[-1] - t, cap) for t in reversed(ts[-x.N:]))
        if ages in live:
            out.add(s)
    return out


# --- component simulation ---------------------------------------------------

@dataclass
class _Run:
    mode: int
    active: bool
    x: int
    q: int
    entry: int


def _evaluate(spec: MtaSpec, run: _Run, offer: str | None):
    """Deterministic mode-switch decision; returns (kind, target index) or None."""
    mode = spec.modes[run.mode]
    if offer is not None:
        for tr in mode.transitions:
            if tr.kind is Kind.SYNC and tr.signal == offer:
                return ("sync", spec.index(tr.target))
    if not run.active:
        if run.x < mode.dwell_min:
            return None
        run.active = True
    above, below, timeout = (mode.transition(k) for k in (Kind.ABOVE, Kind.BELOW, Kind.TIMEOUT))
    if above is not None and run.q > mode.backlog_high:
        return ("above", spec.index(above.target))
    if below is not None and run.q < mode.backlog_low:
        return ("below", spec.index(below.target))
    if timeout is not None and run.x >= mode.dwell_max:
        return ("timeout", spec.index(timeout.target))
    return None


@dataclass
class SimulationResult:
    output: EventStream
    switches: list = field(default_factory=list)  # (time, from id, to id, kind)


def simulate_mta(spec: MtaSpec, input: EventStream, service, syncs=(), horizon: int | None = None) -> SimulationResult:
    """Replay the fine component on concrete streams.

    ``service`` lists one stream per mode visit (origin = entry time; events
    are offsets from it).  Modes without service take an empty stream.
    ``syncs`` holds ``(time, signal)`` offers.  Within an instant: serv
    events, then req events, then one mode-switch evaluation.
    """
    check_spec(spec)
    if horizon is None:
        horizon = max([input.timestamps[-1]] + [t for t, _ in syncs])
    reqs = _counts(input.events)
    offers = dict(syncs)
    run = _Run(spec.index(spec.initial_mode), False, 0, spec.initial_backlog, 0)
    visit = 0
    serv_now = _visit_servs(spec, service, visit, run.mode, 0)
    produced = [0]
    switches = []
    for t in range(horizon + 1):
        for _ in range(serv_now.get(t, 0)):
            if run.q > 0:
                run.q -= 1
                produced.append(t)
        run.q += reqs.get(t, 0)
        decision = _evaluate(spec, run, offers.get(t))
        if decision is not None:
            kind, target = decision
            switches.append((t, spec.modes[run.mode].id, spec.modes[target].id, kind))
            run = _Run(target, False, 0, run.q, t)
            visit += 1
            serv_now = _visit_servs(spec, service, visit, target, t)
        run.x += 1
    return SimulationResult(EventStream(tuple(produced)), switches)


def _counts(times):
    out = {}
    for t in times:
        out[t] = out.get(t, 0) + 1
    return out


def _visit_servs(spec, service, visit, mode_idx, entry):
    mode = spec.modes[mode_idx]
    stream = service[visit] if visit < len(service) else None
    if mode.service is None:
        if stream is not None and len(stream):
            raise InconsistentService(f"mode {mode.id!r} has no service but visit {visit} has events")
        return {}
    if stream is None:
        raise MissingService(visit, mode.id, entry)
    if not stream_satisfies(stream, mode.service):
        raise InconsistentService(f"service stream for visit {visit} violates mode {mode.id!r}")
    return _counts(entry + e for e in stream.events)


class _Windows:
    def __init__(self, points):
        self.points = points
        self.min = [None] * points
        self.max = [None] * points

    def record(self, produced):
        t = produced[-1]
        for K in range(1, min(self.points, len(produced) - 1) + 1):
            w = t - produced[-1 - K]
            if self.min[K - 1] is None or w < self.min[K - 1]:
                self.min[K - 1] = w
            if self.max[K - 1] is None or w > self.max[K - 1]:
                self.max[K - 1] = w


def fine_runs(spec: MtaSpec, arrival: XiCurvePair, horizon: int, *, max_events: int = 12,
              budget: int = 2_000_000, on_produce=None, on_leaf=None,
              wasted_service: bool = True) -> int:
    """Depth-first enumeration of every fine run up to ``horizon``.

    Branches, instant by instant, on how many serv and req events occur, and
    on which sync signal (if any) the environment offers.  ``on_produce`` is
    called with the produce history after each produce; ``on_leaf`` with
    ``(input_history, produce_history)`` for every run reaching the horizon.
    With ``wasted_service=False``, runs in which a serv meets an empty buffer
    are pruned.  Returns the number of explored tree nodes.
    """
    check_spec(spec)
    nodes = 0
    signals = sorted({tr.signal for m in spec.modes for tr in m.transitions if tr.kind is Kind.SYNC})

    def instant(t, run, arr_hist, srv_hist, produced):
        nonlocal nodes
        nodes += 1
        if nodes > budget:
            raise BudgetExceeded(f"more than {budget} run-tree nodes")
        mode = spec.modes[run.mode]
        for n_serv in _burst_sizes(srv_hist, t, mode.service):
            q = run.q
            prod = produced
            if not wasted_service and n_serv > q:
                continue
            for _ in range(n_serv):
                if q > 0:
                    q -= 1
                    prod = prod + [t]
                    if on_produce is not None:
                        on_produce(prod)
            s_hist = srv_hist + [t] * n_serv if srv_hist is not None else None
            for n_req in _burst_sizes(arr_hist, t, arrival):
                if len(arr_hist) - 1 + n_req > max_events:
                    raise BudgetExceeded(f"more than {max_events} input events")
                a_hist = arr_hist + [t] * n_req
                for offer in [None] + [s for s in signals
                                       if any(tr.signal == s for tr in mode.transitions)]:
                    r = _Run(run.mode, run.active, run.x, q + n_req, run.entry)
                    decision = _evaluate(spec, r, offer)
                    nh = s_hist
                    if decision is not None:
                        r = _Run(decision[1], False, 0, r.q, t)
                        nh = [t] if spec.modes[r.mode].service is not None else None
                    if t == horizon:
                        if on_leaf is not None:
                            on_leaf(a_hist, prod)
                        continue
                    if not _may_wait(a_hist, t + 1, arrival):
                        continue
                    if nh is not None and not _may_wait(nh, t + 1, spec.modes[r.mode].service):
                        continue
                    r.x += 1
                    instant(t + 1, r, a_hist, nh, prod)

    start = _Run(spec.index(spec.initial_mode), False, 0, spec.initial_backlog, 0)
    srv0 = [0] if spec.modes[start.mode].service is not None else None
    instant(0, start, [0], srv0, [0])
    return nodes


def _burst_sizes(hist, t, curve):
    """Feasible numbers of emissions at instant ``t``."""
    if hist is None:
        return [0]
    sizes = [0]
    h = list(hist)
    while _may_emit(h, t, curve):
        h.append(t)
        sizes.append(len(sizes))
    return sizes


def oracle_output_curves(spec: MtaSpec | None, in_arr: XiCurvePair, max_events: int, max_time: int,
                         points: int | None = None, *, budget: int = 2_000_000) -> XiCurvePair:
    """Exact output curves over every run up to ``max_time``.

    Produce windows are recorded as they occur, so runs that cannot be
    continued still contribute the windows they completed.
    """
    mins, maxs = oracle_output_windows(spec, in_arr, max_events, max_time, points, budget=budget)
    return normalize_windows(mins, maxs)


def oracle_output_windows(spec: MtaSpec | None, in_arr: XiCurvePair, max_events: int, max_time: int,
                          points: int | None = None, *, budget: int = 2_000_000):
    """Raw per-K window extremes (``None`` where no window completes).

    ``spec=None`` stands for the pass-through wire: every input event is
    produced at once.
    """
    points = in_arr.N if points is None else points
    win = _Windows(points)
    if spec is None:
        for s in enumerate_streams(in_arr, max_events + 1, max_time, complete=True, budget=budget):
            ts = s.timestamps
            for i in range(2, len(ts) + 1):
                win.record(ts[:i])
    else:
        fine_runs(spec, in_arr, max_time, max_events=max_events, budget=budget, on_produce=win.record)
    return win.min, win.max


def replay_output_windows(spec: MtaSpec, in_arr: XiCurvePair, max_events: int, max_time: int,
                          points: int | None = None):
    """Same windows as :func:`oracle_output_windows`, computed by replaying
    :func:`simulate_mta` over every input stream and every per-visit service
    stream.  Much slower; only for the smallest instances without syncs."""
    if any(tr.kind is Kind.SYNC for m in spec.modes for tr in m.transitions):
        raise ValueError("replay enumeration does not cover sync offers")
    points = in_arr.N if points is None else points
    win = _Windows(points)
    inputs = enumerate_streams(in_arr, max_events + 1, max_time, complete=True)
    memo = {}

    def services_for(mode_id, entry):
        key = (mode_id, entry)
        if key not in memo:
            curve = spec.mode(mode_id).service
            memo[key] = sorted(enumerate_streams(curve, max_events + 1, max_time - entry, complete=True),
                               key=lambda s: s.timestamps)
        return memo[key]

    def search(inp, chosen):
        try:
            res = simulate_mta(spec, inp, chosen, horizon=max_time)
        except MissingService as need:
            # silent visits in between take an empty stream
            pad = [EventStream((0,))] * (need.visit - len(chosen))
            for s in services_for(need.mode, need.entry):
                search(inp, chosen + pad + [s])
            return
        ts = res.output.timestamps
        for i in range(2, len(ts) + 1):
            win.record(list(ts[:i]))

    for inp in inputs:
        search(inp, [])
    return win.min, win.max


def fine_behaviours(spec: MtaSpec, arrival: XiCurvePair, horizon: int, **kw) -> set:
    """Distinct ``(input events, output events)`` pairs of all fine runs."""
    pairs = set()
    fine_runs(spec, arrival, horizon,
              on_leaf=lambda a, p: pairs.add((tuple(a[1:]), tuple(p[1:]))), **kw)
    return pairs


def read_stream(path) -> EventStream:
    lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    try:
        ts = tuple(int(v) for v in lines)
    except ValueError as exc:
        raise ValueError(f"bad timestamp in {path}: {exc}") from None
    if not ts or ts[0] != 0:
        raise ValueError("stream file must start with 0")
    return EventStream(ts)


def write_stream(s: EventStream, path) -> None:
    Path(path).write_text("".join(f"{t}\n" for t in s.timestamps))


def box_streams(max_events: int, max_time: int):
    """Every nondecreasing timestamp sequence in the box (for cross-checks)."""
    for rest in itertools.combinations_with_replacement(range(max_time + 1), max_events - 1):
        yield EventStream((0,) + rest)
