"""Mode-based timed automata (M-TA) and their fine/coarse translations.

An :class:`MtaSpec` describes a power-managed component as a set of modes,
each with a service curve, backlog thresholds, dwell bounds and up to four
kinds of outgoing transitions.  :func:`translate_fine` and
:func:`translate_coarse` turn it into a :class:`Network` that the engine
explores.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from .curves import INF, CurveFormatError, XiCurvePair, read_curve, sample, validate


class MtaFormatError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InvalidSpec(ValueError):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        super().__init__("invalid M-TA: " + "; ".join(self.diagnostics))


class Kind(str, enum.Enum):
    SYNC = "sync"
    TIMEOUT = "timeout"
    ABOVE = "above"
    BELOW = "below"


@dataclass(frozen=True)
class MtaTransition:
    kind: Kind
    target: str
    signal: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if (self.kind is Kind.SYNC) != (self.signal is not None):
            raise ValueError("exactly the sync transitions carry a signal")


@dataclass(frozen=True)
class Mode:
    id: str
    service: XiCurvePair | None = None
    backlog_low: int = 0
    backlog_high: float = INF
    dwell_min: int = 0
    dwell_max: float = INF
    transitions: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "transitions", tuple(self.transitions))

    def transition(self, kind: Kind) -> MtaTransition | None:
        for t in self.transitions:
            if t.kind is kind:
                return t
        return None


@dataclass(frozen=True)
class MtaSpec:
    modes: tuple
    initial_mode: str
    initial_backlog: int = 0

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))

    def mode(self, mode_id: str) -> Mode:
        for m in self.modes:
            if m.id == mode_id:
                return m
        raise KeyError(mode_id)

    def index(self, mode_id: str) -> int:
        for i, m in enumerate(self.modes):
            if m.id == mode_id:
                return i
        raise KeyError(mode_id)


def validate_spec(spec: MtaSpec) -> list[str]:
    diags = []
    ids = [m.id for m in spec.modes]
    if not ids:
        diags.append("no modes")
    for mid in sorted({i for i in ids if ids.count(i) > 1}):
        diags.append(f"duplicate mode id {mid!r}")
    if spec.initial_mode not in ids:
        diags.append(f"initial mode {spec.initial_mode!r} does not exist")
    if spec.initial_backlog < 0:
        diags.append("initial backlog must be nonnegative")
    for m in spec.modes:
        where = f"mode {m.id!r}"
        for t in m.transitions:
            if t.target not in ids:
                diags.append(f"{where}: transition target {t.target!r} does not exist")
        for kind in (Kind.TIMEOUT, Kind.ABOVE, Kind.BELOW):
            if sum(t.kind is kind for t in m.transitions) > 1:
                diags.append(f"{where}: more than one {kind.value} transition")
        signals = [t.signal for t in m.transitions if t.kind is Kind.SYNC]
        if len(set(signals)) != len(signals):
            diags.append(f"{where}: duplicate sync signal")
        if m.backlog_low < 0:
            diags.append(f"{where}: blow must be nonnegative")
        if m.backlog_low > m.backlog_high:
            diags.append(f"{where}: blow > bhigh")
        if m.dwell_min < 0 or m.dwell_min > m.dwell_max:
            diags.append(f"{where}: dwell bounds must satisfy 0 <= L <= U")
        if m.transition(Kind.TIMEOUT) is not None:
            if m.dwell_max == INF:
                diags.append(f"{where}: timeout transition needs a finite dwell maximum")
            elif m.dwell_max < 1:
                diags.append(f"{where}: timeout dwell maximum must be >= 1")
        elif m.dwell_max != INF:
            diags.append(f"{where}: finite dwell maximum without a timeout transition")
        if m.transition(Kind.ABOVE) is not None and m.backlog_high == INF:
            diags.append(f"{where}: above transition needs a finite bhigh")
        if m.transition(Kind.BELOW) is not None and m.backlog_low < 1:
            diags.append(f"{where}: below transition needs blow >= 1")
        if m.service is not None:
            for d in validate(m.service):
                diags.append(f"{where}: service {d}")
            if m.service.lower[0] < 1:
                diags.append(f"{where}: service lower[1] must be >= 1")
    return diags


def check_spec(spec: MtaSpec) -> None:
    diags = validate_spec(spec)
    if diags:
        raise InvalidSpec(diags)


@dataclass(frozen=True)
class Thresholds:
    YL: float
    YU: float
    HL: float
    HU: float


def coarse_thresholds(b_low: int, b_high, g: int) -> Thresholds:
    """Coarse backlog window in which a fine threshold can be crossed.

    A fine backlog of ``b_high + 1`` corresponds to a coarse backlog in
    ``[YL, YU]``; a fine backlog of ``b_low - 1`` to one in ``[HL, HU]``.
    """
    if g < 1:
        raise ValueError("granularity must be >= 1")
    if b_high == INF:
        yl = yu = INF
    else:
        yl, yu = (b_high + 1) // g, -(-(b_high + 1) // g)
    hl, hu = (b_low - 1) // g, -(-(b_low - 1) // g)
    return Thresholds(yl, yu, hl, hu)


@dataclass(frozen=True)
class NetMode:
    id: str
    service: XiCurvePair | None
    trans_window: tuple | None
    dwell_min: int
    dwell_max: float
    thresholds: Thresholds
    above_forced: float
    below_forced: float
    above: int | None
    below: int | None
    timeout: int | None
    syncs: tuple = ()
    sync_map: dict = field(default=None, compare=False, hash=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "sync_map", dict(self.syncs))


@dataclass(frozen=True)
class Network:
    """Synchronized PE/SM pair plus the driving input generator.

    ``kind`` is ``"mta"`` for translated components and ``"wire"`` for the
    pass-through component (every req is produced immediately).
    """

    kind: str
    g: int
    modes: tuple = ()
    initial: int = 0
    initial_backlog: int = 0
    pe_states: tuple = ()
    pe_edges: tuple = ()
    sm_generators: tuple = ()
    sm_states: tuple = ()
    arrival: XiCurvePair | None = None

    def with_arrival(self, arrival: XiCurvePair) -> "Network":
        return replace(self, arrival=arrival)


def wire_network(arrival: XiCurvePair | None = None) -> Network:
    return Network(kind="wire", g=1, pe_states=("S_wire",), arrival=arrival)


def _fmt_bound(v) -> str:
    return "inf" if v == INF else str(v)


def _translate(spec: MtaSpec, g: int, coarse: bool) -> Network:
    check_spec(spec)
    if spec.initial_backlog % g:
        raise ValueError(f"initial backlog {spec.initial_backlog} is not a multiple of g={g}")
    modes, states, edges, gens, sm_states = [], [], [], [], []
    for m in spec.modes:
        above, below, timeout = (m.transition(k) for k in (Kind.ABOVE, Kind.BELOW, Kind.TIMEOUT))
        th = coarse_thresholds(m.backlog_low, m.backlog_high, g)
        service = trans = None
        if m.service is not None:
            service = sample(m.service, g) if g > 1 else m.service
            # at g=1 the generator started on entry is already exact
            if coarse and g > 1:
                trans = (m.service.lower[0], m.service.upper[g - 1])
        syncs = tuple((t.signal, spec.index(t.target)) for t in m.transitions if t.kind is Kind.SYNC)
        modes.append(NetMode(
            id=m.id, service=service, trans_window=trans,
            dwell_min=m.dwell_min, dwell_max=m.dwell_max, thresholds=th,
            above_forced=INF if m.backlog_high == INF else -(-m.backlog_high // g) + 1,
            below_forced=m.backlog_low // g - 1,
            above=None if above is None else spec.index(above.target),
            below=None if below is None else spec.index(below.target),
            timeout=None if timeout is None else spec.index(timeout.target),
            syncs=syncs,
        ))

        s, s1 = f"S_{m.id}", f"S_{m.id}1"
        names = [s, s1]
        if coarse:
            names += [f"S_{m.id}_inc", f"S_{m.id}_dec"]
        states.extend(names)
        edges.append((s, s1, f"x>={m.dwell_min}"))
        level = "Q" if coarse else "q"
        if above is not None:
            if coarse:
                edges.append((s1, f"S_{m.id}_inc", f"{level}>={th.YL}"))
                edges.append((f"S_{m.id}_inc", f"S_{above.target}", f"{level}<={th.YU}, Syn!"))
            else:
                edges.append((s1, f"S_{above.target}", f"{level}>{m.backlog_high}, Syn!"))
        if below is not None:
            if coarse:
                edges.append((s1, f"S_{m.id}_dec", f"{level}<={th.HU}"))
                edges.append((f"S_{m.id}_dec", f"S_{below.target}", f"{level}>={th.HL}, Syn!"))
            else:
                edges.append((s1, f"S_{below.target}", f"{level}<{m.backlog_low}, Syn!"))
        if timeout is not None:
            for src in names[1:]:
                edges.append((src, f"S_{timeout.target}", f"x=={_fmt_bound(m.dwell_max)}, Syn!"))
        for t in m.transitions:
            if t.kind is Kind.SYNC:
                for src in names:
                    edges.append((src, f"S_{t.target}", f"{t.signal}?, Syn!"))

        gens.append(f"Generator(psi_{m.id}, g={g}, serv)" if m.service is not None
                    else f"Silent(psi_{m.id})")
        sm_states.append(f"SM_{m.id}")
        if trans is not None:
            sm_states.append(f"SM_{m.id}_trans")
    return Network(
        kind="mta", g=g, modes=tuple(modes), initial=spec.index(spec.initial_mode),
        initial_backlog=spec.initial_backlog // g, pe_states=tuple(states),
        pe_edges=tuple(edges), sm_generators=tuple(gens), sm_states=tuple(sm_states),
    )


def translate_fine(spec: MtaSpec) -> Network:
    """Fine network: each mode becomes a dwell state and an active state."""
    return _translate(spec, 1, coarse=False)


def translate_coarse(spec: MtaSpec, g: int) -> Network:
    """Coarse network at granularity ``g``.

    Backlog counts coarse events; threshold exits become nondeterministic
    within the :func:`coarse_thresholds` windows, and the service model waits
    ``[psi.lower(1), psi.upper(g)]`` after each mode switch before the first
    coarse serv.
    """
    if g < 1:
        raise ValueError("granularity must be >= 1")
    return _translate(spec, g, coarse=True)


# --- text format ------------------------------------------------------------

_DWELL = re.compile(r"^\[\s*(\d+)\s*,\s*(\d+|inf)\s*\]$")
_ON = re.compile(r"^on\s+(sync\s+(\S+)|timeout|above|below)\s*->\s*(\S+)$")
_INITIAL = re.compile(r"^initial\s+(\S+)\s+q=(\d+)$")


def parse_mta(text: str, base_dir=".") -> MtaSpec:
    base = Path(base_dir)
    modes: list[dict] = []
    initial = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("mode "):
            parts = line.split()
            if len(parts) != 2:
                raise MtaFormatError("expected 'mode <id>'", lineno)
            modes.append({"id": parts[1], "transitions": []})
            continue
        m = _INITIAL.match(line)
        if m:
            initial = (m.group(1), int(m.group(2)))
            continue
        if not modes:
            raise MtaFormatError("statement outside of a mode section", lineno)
        cur = modes[-1]
        m = _ON.match(line)
        if m:
            if m.group(2):
                tr = MtaTransition(Kind.SYNC, m.group(3), m.group(2))
            else:
                tr = MtaTransition(Kind(m.group(1)), m.group(3))
            cur["transitions"].append(tr)
            continue
        key, sep, val = line.partition("=")
        key, val = key.strip(), val.strip()
        if not sep:
            raise MtaFormatError(f"unrecognized line {line!r}", lineno)
        if key == "service":
            if val == "none":
                cur["service"] = None
            else:
                try:
                    cur["service"] = read_curve(base / val)
                except (OSError, CurveFormatError) as exc:
                    raise MtaFormatError(f"service curve {val!r}: {exc}", lineno) from None
        elif key in ("blow", "bhigh"):
            try:
                v = INF if val == "inf" else int(val)
            except ValueError:
                raise MtaFormatError(f"bad integer for {key}: {val!r}", lineno) from None
            cur["backlog_low" if key == "blow" else "backlog_high"] = v
        elif key == "dwell":
            d = _DWELL.match(val)
            if not d:
                raise MtaFormatError(f"dwell must look like [L,U], got {val!r}", lineno)
            cur["dwell_min"] = int(d.group(1))
            cur["dwell_max"] = INF if d.group(2) == "inf" else int(d.group(2))
        else:
            raise MtaFormatError(f"unknown key {key!r}", lineno)
    if initial is None:
        raise MtaFormatError("missing 'initial <id> q=<int>' line")
    built = tuple(Mode(**{k: v for k, v in d.items()}) for d in modes)
    return MtaSpec(built, initial[0], initial[1])


def read_mta(path) -> MtaSpec:
    path = Path(path)
    return parse_mta(path.read_text(), path.parent)


def format_mta(spec: MtaSpec, service_files: dict) -> str:
    """Render ``spec``; ``service_files`` maps mode id to a curve file name."""
    out = []
    for m in spec.modes:
        out.append(f"mode {m.id}")
        out.append(f"  service={service_files.get(m.id, 'none') if m.service is not None else 'none'}")
        out.append(f"  blow={m.backlog_low}")
        out.append(f"  bhigh={_fmt_bound(m.backlog_high)}")
        out.append(f"  dwell=[{m.dwell_min},{_fmt_bound(m.dwell_max)}]")
        for t in m.transitions:
            head = f"sync {t.signal}" if t.kind is Kind.SYNC else t.kind.value
            out.append(f"  on {head} -> {t.target}")
    out.append(f"initial {spec.initial_mode} q={spec.initial_backlog}")
    return "\n".join(out) + "\n"


def sleep_run_spec(run_service: XiCurvePair, threshold: int = 5, *,
                   sleep_service: XiCurvePair | None = None) -> MtaSpec:
    """Two-mode sleep/run component: wakes once ``threshold`` events wait,
    goes back to sleep when the buffer is empty."""
    sleep = Mode("sleep", sleep_service, backlog_high=threshold - 1,
                 transitions=(MtaTransition(Kind.ABOVE, "run"),))
    run = Mode("run", run_service, backlog_low=1,
               transitions=(MtaTransition(Kind.BELOW, "sleep"),))
    return MtaSpec((sleep, run), "sleep", 0)
