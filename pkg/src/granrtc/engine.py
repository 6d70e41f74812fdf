"""Exact exploration of generator / component / observer networks.

Time is discrete (unit steps) and every guard and invariant in the generated
networks is a closed integer comparison, so integer valuations suffice.
Clocks are capped once they exceed every constant they are compared with,
which keeps the time-free part of the state finite.

Within one instant the component processes, in order: serv events, req
events, then at most one mode-switch evaluation.  :func:`enabled_steps`
exposes these micro-steps; exploration groups them into one macro-step per
instant and measures produce windows with a forward dynamic program that
plays the observer's role for every window start at once.
"""

from __future__ import annotations

import logging
import time
from collections import defaultdict
from dataclasses import dataclass
from typing import NamedTuple

from .curves import INF, XiCurvePair, normalize_windows, sample, validate
from .mta import MtaSpec, Network, translate_coarse, translate_fine

log = logging.getLogger(__name__)

SERV, REQ, EVAL, IDLE = range(4)

UNBOUNDED = INF
_NONE_EARLY = 1 << 60


class Generator:
    """Curve generator over ages of the most recent events.

    ``ages[i]`` is the time since the (i+1)-th most recent emission, with the
    origin counting as an emission.  Ages that reach ``cap`` can no longer
    influence any check and are dropped.
    """

    __slots__ = ("lower", "upper", "n", "cap")

    def __init__(self, curve: XiCurvePair):
        diags = validate(curve)
        if diags:
            raise ValueError("invalid generator curve: " + "; ".join(diags))
        if curve.lower[-1] < 1:
            raise ValueError("generator curve allows infinitely many events at one instant")
        self.lower = curve.lower
        self.upper = curve.upper
        self.n = curve.N
        finite = [v for v in curve.upper if v != INF]
        self.cap = max(list(curve.lower) + finite) + 1

    start = (0,)

    def can_emit(self, ages: tuple) -> bool:
        lower = self.lower
        for i, a in enumerate(ages):
            if a < lower[i]:
                return False
        return True

    def emit(self, ages: tuple) -> tuple:
        return ((0,) + ages)[: self.n]

    def tick(self, ages: tuple):
        """Ages one time unit later, or ``None`` if an emission was due."""
        out = []
        upper, cap = self.upper, self.cap
        for i, a in enumerate(ages):
            a += 1
            if a > upper[i]:
                return None
            if a >= cap:
                break
            out.append(a)
        return tuple(out)


class NetworkState(NamedTuple):
    phase: int
    mode: int
    active: bool
    x: int
    q: int
    arr: tuple
    srv: tuple | None
    trans: int


class Step(NamedTuple):
    label: str
    target: NetworkState
    produces: int



class Compiled:
    """Lookup tables for one network, shared by all steps of an exploration."""

    def __init__(self, net: Network, need_arrival: bool = True):
        self.net = net
        self.wire = net.kind == "wire"
        self.arr = None
        if need_arrival:
            if net.arrival is None:
                raise ValueError("network has no arrival curve attached")
            self.arr = Generator(net.arrival)
        self.srv = [Generator(m.service) if m.service is not None else None for m in net.modes]
        self.xcap = [max(m.dwell_min, m.dwell_max if m.dwell_max != INF else 0) for m in net.modes]
        self.tcap = []
        for m in net.modes:
            if m.trans_window is None:
                self.tcap.append(0)
            else:
                lo, hi = m.trans_window
                self.tcap.append(hi if hi != INF else lo)
        # backlog above every threshold behaves the same on produce-free paths
        consts = [1]
        for m in net.modes:
            th = m.thresholds
            consts += [v for v in (th.YL, th.YU, th.HL, th.HU, m.above_forced, m.below_forced)
                       if v != INF]
        self.qcap = max(consts) + 1

    def stall_key(self, s: NetworkState) -> NetworkState:
        return s._replace(q=min(s.q, self.qcap))

    def initial(self) -> NetworkState:
        arr = Generator.start if self.arr is not None else ()
        if self.wire:
            return NetworkState(REQ, 0, True, 0, 0, arr, None, -1)
        m = self.net.initial
        srv = Generator.start if self.srv[m] is not None else None
        return NetworkState(SERV, m, False, 0, self.net.initial_backlog, arr, srv, -1)

    def enter(self, s: NetworkState, target: int) -> NetworkState:
        srv, trans = None, -1
        if self.srv[target] is not None:
            if self.net.modes[target].trans_window is not None:
                trans = 0
            else:
                srv = Generator.start
        return s._replace(phase=IDLE, mode=target, active=False, x=0, srv=srv, trans=trans)

    def tick(self, s: NetworkState) -> NetworkState | None:
        arr = s.arr
        if self.arr is not None:
            arr = self.arr.tick(arr)
            if arr is None:
                return None
        if self.wire:
            return s._replace(phase=REQ, arr=arr)
        srv, trans = s.srv, s.trans
        if srv is not None:
            srv = self.srv[s.mode].tick(srv)
            if srv is None:
                return None
        elif trans >= 0:
            hi = self.net.modes[s.mode].trans_window[1]
            trans += 1
            if trans > hi:
                return None
            trans = min(trans, self.tcap[s.mode])
        x = min(s.x + 1, self.xcap[s.mode])
        return s._replace(phase=SERV, x=x, arr=arr, srv=srv, trans=trans)


def compile_network(net: Network, need_arrival: bool = True) -> Compiled:
    return Compiled(net, need_arrival)


def enabled_steps(comp: Compiled, s: NetworkState, pinned_reqs: int | None = None) -> list[Step]:
    """All micro-steps enabled in ``s``.

    In the idle phase the only step is a unit time elapse, offered iff every
    generator and clock invariant tolerates it.  ``pinned_reqs`` replaces the
    arrival generator by a fixed number of req events for this instant.
    """
    if s.phase == IDLE:
        nxt = comp.tick(s)
        return [Step("tick", nxt, 0)] if nxt is not None else []
    steps = []
    if comp.wire:
        if pinned_reqs is not None:
            return [Step("req", s._replace(phase=IDLE), pinned_reqs)]
        if comp.arr.can_emit(s.arr):
            steps.append(Step("req", s._replace(arr=comp.arr.emit(s.arr)), 1))
        steps.append(Step("end-req", s._replace(phase=IDLE), 0))
        return steps
    mode = comp.net.modes[s.mode]
    if s.phase == SERV:
        fired = None
        if s.srv is not None:
            gen = comp.srv[s.mode]
            if gen.can_emit(s.srv):
                fired = s._replace(srv=gen.emit(s.srv))
        elif s.trans >= 0 and s.trans >= mode.trans_window[0]:
            fired = s._replace(trans=-1, srv=Generator.start)
        if fired is not None:
            if s.q > 0:
                steps.append(Step("serv", fired._replace(q=s.q - 1), 1))
            else:
                steps.append(Step("serv", fired, 0))
        steps.append(Step("end-serv", s._replace(phase=REQ), 0))
        return steps
    if s.phase == REQ:
        if pinned_reqs is not None:
            return [Step("req", s._replace(phase=EVAL, q=s.q + pinned_reqs), 0)]
        if comp.arr.can_emit(s.arr):
            steps.append(Step("req", s._replace(arr=comp.arr.emit(s.arr), q=s.q + 1), 0))
        steps.append(Step("end-req", s._replace(phase=EVAL), 0))
        return steps
    for signal, target in mode.syncs:
        steps.append(Step(f"sync:{signal}", comp.enter(s, target), 0))
    if not s.active and s.x < mode.dwell_min:
        steps.append(Step("stay", s._replace(phase=IDLE), 0))
        return steps
    s = s._replace(active=True)
    q, th = s.q, mode.thresholds
    above_sure = mode.above is not None and q >= mode.above_forced
    below_sure = mode.below is not None and q <= mode.below_forced
    if mode.above is not None and q >= th.YL and not below_sure:
        steps.append(Step("above", comp.enter(s, mode.above), 0))
    if mode.below is not None and q <= th.HU and not above_sure:
        steps.append(Step("below", comp.enter(s, mode.below), 0))
    timeout_now = mode.timeout is not None and s.x >= mode.dwell_max
    if timeout_now and not (above_sure or below_sure):
        steps.append(Step("timeout", comp.enter(s, mode.timeout), 0))
    if not (above_sure or below_sure or timeout_now):
        steps.append(Step("stay", s._replace(phase=IDLE), 0))
    return steps


def instant_successors(comp: Compiled, s: NetworkState, pinned_reqs: int | None = None):
    """Idle states reachable by processing one instant from ``s``.

    ``s`` is either an idle state (a tick is taken first) or the initial
    state.  Returns a set of ``(idle_state, produces_at_this_instant)``.
    """
    if s.phase == IDLE:
        s = comp.tick(s)
        if s is None:
            return set()
    out = set()
    stack = [(s, 0)]
    seen = set()
    while stack:
        cur, c = stack.pop()
        if (cur, c) in seen:
            continue
        seen.add((cur, c))
        for step in enabled_steps(comp, cur, pinned_reqs):
            nc = c + step.produces
            if step.target.phase == IDLE:
                out.add((step.target, nc))
            else:
                stack.append((step.target, nc))
    return out


@dataclass
class Exploration:
    """Raw result of one exploration up to ``horizon``.

    ``min_windows[K-1]`` / ``max_windows[K-1]`` are the extreme durations of
    K consecutive produce events (counting the origin as an event), or None
    when no such window completes within the horizon.  ``stall`` is True when
    a reachable cycle lets time pass forever without any produce.
    """

    points: int
    horizon: int
    min_windows: list
    max_windows: list
    stall: bool
    states: int
    edges: int
    seconds: float

    def lower(self, K: int):
        return self.min_windows[K - 1]

    def upper(self, K: int):
        if self.stall:
            return UNBOUNDED
        return self.max_windows[K - 1]


def _has_cycle(graph: dict) -> bool:
    """Kahn elimination on the zero-produce successor graph."""
    indeg = defaultdict(int)
    for src, dsts in graph.items():
        for d in dsts:
            indeg[d] += 1
    nodes = set(graph) | set(indeg)
    queue = [n for n in nodes if indeg[n] == 0]
    removed = 0
    while queue:
        n = queue.pop()
        removed += 1
        for d in graph.get(n, ()):
            indeg[d] -= 1
            if indeg[d] == 0:
                queue.append(d)
    return removed < len(nodes)


def explore(net: Network, points: int, horizon: int) -> Exploration:
    """Explore all runs up to ``horizon`` and measure produce windows for
    ``K = 1..points``."""
    if points < 1 or horizon < 0:
        raise ValueError("points must be >= 1 and horizon >= 0")
    started = time.perf_counter()
    comp = Compiled(net)
    N = points
    minw = [None] * N
    maxw = [None] * N
    cache: dict = {}
    zero_graph: dict = {}
    edges = 0

    def successors(s):
        nonlocal edges
        r = cache.get(s)
        if r is None:
            r = tuple(instant_successors(comp, s))
            cache[s] = r
            edges += len(r)
            if s.phase == IDLE:
                # a produce-free path never lowers the backlog, so capping it is exact
                key = comp.stall_key(s)
                zero_graph.setdefault(key, set()).update(
                    comp.stall_key(d) for d, c in r if c == 0)
        return r

    layer = {comp.initial(): ((0,) + (-1,) * (N - 1), (0,) + (_NONE_EARLY,) * (N - 1))}
    for t in range(horizon + 1):
        nxt: dict = {}
        for s, (late, early) in layer.items():
            for d, c in successors(s):
                if c == 0:
                    nl, ne = late, early
                else:
                    for n in range(N):
                        st = late[n]
                        if st < 0:
                            continue
                        st_e = early[n]
                        for K in range(n + 1, min(n + c, N) + 1):
                            w = t - st
                            if minw[K - 1] is None or w < minw[K - 1]:
                                minw[K - 1] = w
                            w = t - st_e
                            if maxw[K - 1] is None or w > maxw[K - 1]:
                                maxw[K - 1] = w
                    for K in range(1, min(c - 1, N) + 1):
                        if minw[K - 1] is None or minw[K - 1] > 0:
                            minw[K - 1] = 0
                        if maxw[K - 1] is None:
                            maxw[K - 1] = 0
                    k = min(c, N)
                    nl = (t,) * k + late[: N - k]
                    ne = (t,) * k + early[: N - k]
                prev = nxt.get(d)
                if prev is None:
                    nxt[d] = (nl, ne)
                elif prev != (nl, ne):
                    pl, pe = prev
                    nxt[d] = (tuple(map(max, pl, nl)), tuple(map(min, pe, ne)))
        layer = nxt
        if not layer:
            break
    stall = _has_cycle(zero_graph)
    elapsed = time.perf_counter() - started
    log.info("explored g=%d horizon=%d: %d states, %d edges in %.3fs",
             net.g, horizon, len(cache), edges, elapsed)
    return Exploration(N, horizon, minw, maxw, stall, len(cache), edges, elapsed)


def analyze_lower(net: Network, K: int, horizon: int):
    """Shortest time spanned by K consecutive produce events, or None when
    no such window completes within the horizon."""
    if K < 1:
        raise ValueError("K must be >= 1")
    return explore(net, K, horizon).lower(K)


def analyze_upper(net: Network, K: int, horizon: int):
    """Longest time spanned by K consecutive produce events; ``UNBOUNDED``
    when production can stall forever, None when no window completes."""
    if K < 1:
        raise ValueError("K must be >= 1")
    return explore(net, K, horizon).upper(K)


def default_horizon(spec: MtaSpec | None, arrival: XiCurvePair, points: int) -> int:
    """``points * max(arrival upper, service uppers at N) + max finite dwell``."""
    finite = []
    if arrival.upper[-1] != INF:
        finite.append(arrival.upper[-1])
    dwell = 0
    if spec is not None:
        for m in spec.modes:
            if m.service is not None and m.service.upper[-1] != INF:
                finite.append(m.service.upper[-1])
            if m.dwell_max != INF:
                dwell = max(dwell, m.dwell_max)
    if not finite:
        raise ValueError("all curves are unbounded; give an explicit horizon")
    return points * max(finite) + dwell


@dataclass
class ComponentAnalysis:
    curve: XiCurvePair
    exploration: Exploration


def network_for(spec: MtaSpec, g: int) -> Network:
    return translate_fine(spec) if g == 1 else translate_coarse(spec, g)


def run_component(spec: MtaSpec | Network, in_arr: XiCurvePair, g: int, points: int,
                  horizon: int | None = None) -> ComponentAnalysis:
    """Analyze at granularity ``g`` and keep the exploration statistics.

    ``spec`` may also be a ready-made :class:`Network` (e.g. a wire).
    """
    if g < 1:
        raise ValueError("granularity must be >= 1")
    if isinstance(spec, Network):
        net = spec
        if horizon is None:
            horizon = default_horizon(None, in_arr, points * g)
    else:
        net = network_for(spec, g)
        if horizon is None:
            horizon = default_horizon(spec, in_arr, points * g)
    arr = sample(in_arr, g) if g > 1 else in_arr
    ex = explore(net.with_arrival(arr), points, horizon)
    maxs = [UNBOUNDED] * points if ex.stall else ex.max_windows
    return ComponentAnalysis(normalize_windows(ex.min_windows, maxs, g), ex)


def analyze_component(spec: MtaSpec | Network, in_arr: XiCurvePair, g: int, points: int,
                      horizon: int | None = None) -> XiCurvePair:
    """Output curve pair at granularity ``g`` for ``k = 1..points``."""
    return run_component(spec, in_arr, g, points, horizon).curve


def stable_component(spec: MtaSpec | Network, in_arr: XiCurvePair, g: int, points: int,
                     horizon: int, max_horizon: int = 1 << 12) -> ComponentAnalysis:
    """Like :func:`run_component`, doubling the horizon until the curve is
    the same at ``H`` and ``2H``.

    Short horizons cut off long windows; this is the way to compare curves
    computed at different granularities.
    """
    prev = run_component(spec, in_arr, g, points, horizon)
    while horizon * 2 <= max_horizon:
        horizon *= 2
        cur = run_component(spec, in_arr, g, points, horizon)
        if cur.curve == prev.curve:
            return cur
        prev = cur
    raise RuntimeError(f"curves still changing at horizon {horizon}")


def match_run(net: Network, input_times, output_times, horizon: int) -> bool:
    """Is there a run of ``net`` fed exactly ``input_times`` whose produce
    events up to ``horizon`` are exactly ``output_times``?

    Both are event timestamps without the origin.
    """
    comp = Compiled(net, need_arrival=False)
    reqs = defaultdict(int)
    for t in input_times:
        reqs[t] += 1
    prods = defaultdict(int)
    for t in output_times:
        prods[t] += 1
    cache = {}
    layer = {comp.initial()}
    for t in range(horizon + 1):
        nxt = set()
        for s in layer:
            key = (s, reqs[t])
            r = cache.get(key)
            if r is None:
                r = cache[key] = instant_successors(comp, s, reqs[t])
            nxt.update(d for d, c in r if c == prods[t])
        layer = nxt
        if not layer:
            return False
    return True


def generator_language(curve: XiCurvePair, horizon: int) -> set:
    """Every emission sequence a lone generator can produce up to ``horizon``.

    Sequences start with the origin 0; only runs that reach the horizon
    without violating the upper curve are kept.
    """
    gen = Generator(curve)
    out = set()

    def at_instant(t, ages, seq):
        while True:
            if t == horizon:
                out.add(seq)
            else:
                nxt = gen.tick(ages)
                if nxt is not None:
                    at_instant(t + 1, nxt, seq)
            if not gen.can_emit(ages):
                return
            ages = gen.emit(ages)
            seq = seq + (t,)

    at_instant(0, Generator.start, (0,))
    return out
