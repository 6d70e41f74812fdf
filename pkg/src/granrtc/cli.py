"""Command-line front end: validate inputs, analyze at several granularities,
combine and tighten the results, and cross-check against the oracle."""

from __future__ import annotations

import argparse
import hashlib
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .curves import (
    INF,
    CoarseCurveSet,
    CurveFormatError,
    EmptyStreamSet,
    XiCurvePair,
    causality_closure,
    combine,
    distance,
    read_curve,
    validate,
    write_csv,
    write_gnuplot,
)
from .engine import ComponentAnalysis, default_horizon, run_component
from .mta import MtaFormatError, MtaSpec, read_mta, validate_spec, wire_network
from .oracle import BudgetExceeded, oracle_output_windows

log = logging.getLogger("granrtc")

EXIT_OK, EXIT_INVALID, EXIT_MISMATCH, EXIT_BUDGET = 0, 1, 2, 3


@dataclass
class RunConfig:
    model: str
    arrival: str
    granularities: list = field(default_factory=lambda: [1])
    points: int = 8
    horizon: int | None = None
    out: str = "granrtc-out"
    oracle_check: bool = False
    closure: bool = True
    oracle_events: int = 12
    oracle_budget: int = 2_000_000
    jobs: int = 1


@dataclass
class AnalysisReport:
    horizon: int
    per_g: dict
    combined: XiCurvePair
    tightened: XiCurvePair | None
    distances: dict
    closure_error: str | None = None
    oracle_verdict: str | None = None


class InputError(Exception):
    pass


def _granularities(text: str) -> list:
    try:
        gs = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None
    if not gs or any(g < 1 for g in gs) or len(set(gs)) != len(gs):
        raise argparse.ArgumentTypeError("granularities must be distinct positive integers")
    return gs


def load_inputs(cfg: RunConfig):
    """Return ``(spec or None for the wire, arrival)`` or raise InputError
    listing every problem found."""
    problems = []
    arrival = spec = None
    try:
        arrival = read_curve(cfg.arrival)
        problems += [f"{cfg.arrival}: {d}" for d in validate(arrival)]
        if not problems and arrival.lower[-1] < 1:
            problems.append(f"{cfg.arrival}: lower[{arrival.N}] must be >= 1")
    except OSError as exc:
        problems.append(f"{cfg.arrival}: {exc.strerror or exc}")
    except CurveFormatError as exc:
        problems.append(f"{cfg.arrival}: {exc}")
    if cfg.model != "wire":
        try:
            spec = read_mta(cfg.model)
            problems += [f"{cfg.model}: {d}" for d in validate_spec(spec)]
        except OSError as exc:
            problems.append(f"{cfg.model}: {exc.strerror or exc}")
        except MtaFormatError as exc:
            problems.append(f"{cfg.model}: {exc}")
    if cfg.points < 1:
        problems.append("--points must be >= 1")
    for g in cfg.granularities:
        if g > cfg.points:
            problems.append(f"granularity {g} exceeds --points {cfg.points}")
        elif arrival is not None and arrival.N < g:
            problems.append(f"arrival curve too short for granularity {g}")
        if spec is not None and g > 1:
            for m in spec.modes:
                if m.service is not None and m.service.N < g:
                    problems.append(f"service of mode {m.id!r} too short for granularity {g}")
            if spec.initial_backlog % g:
                problems.append(f"initial backlog is not a multiple of granularity {g}")
    if problems:
        raise InputError(problems)
    return spec, arrival


def config_hash(cfg: RunConfig) -> str:
    h = hashlib.sha256()
    paths = [cfg.arrival] + ([] if cfg.model == "wire" else [cfg.model])
    for p in paths:
        h.update(Path(p).read_bytes())
    if cfg.model != "wire":
        for m in read_mta(cfg.model).modes:
            if m.service is not None:
                h.update(repr((m.id, m.service)).encode())
    h.update(repr((cfg.model == "wire", cfg.granularities, cfg.points, cfg.horizon,
                   cfg.closure)).encode())
    return h.hexdigest()[:16]


def _analyze_one(args) -> tuple[int, ComponentAnalysis]:
    spec, arrival, g, points, horizon = args
    model = wire_network() if spec is None else spec
    return g, run_component(model, arrival, g, points, horizon)


def analyze(cfg: RunConfig, spec: MtaSpec | None, arrival: XiCurvePair) -> AnalysisReport:
    horizon = cfg.horizon if cfg.horizon is not None else default_horizon(spec, arrival, cfg.points)
    jobs = [(spec, arrival, g, cfg.points // g, horizon) for g in cfg.granularities]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(cfg.jobs) as pool:
            per_g = dict(pool.map(_analyze_one, jobs))
    else:
        per_g = dict(map(_analyze_one, jobs))
    for g, ana in sorted(per_g.items()):
        ex = ana.exploration
        log.info("g=%d: %d states, %.3fs", g, ex.states, ex.seconds)
    combined = combine(CoarseCurveSet([(g, a.curve) for g, a in per_g.items()]), cfg.points)
    tightened = closure_error = None
    if cfg.closure:
        try:
            tightened = causality_closure(combined)
        except EmptyStreamSet as exc:
            closure_error = str(exc)
    distances = {}
    if 1 in per_g:
        fine = per_g[1].curve
        for g, ana in per_g.items():
            distances[g] = distance(fine, ana.curve, g, cfg.points // g)
    return AnalysisReport(horizon, per_g, combined, tightened, distances, closure_error)


def oracle_check(cfg: RunConfig, spec, arrival, report: AnalysisReport) -> bool:
    """Compare the g=1 windows with the oracle; raises BudgetExceeded."""
    if 1 not in report.per_g:
        raise ValueError("the oracle check needs granularity 1")
    ex = report.per_g[1].exploration
    mins, maxs = oracle_output_windows(spec, arrival, cfg.oracle_events, report.horizon, cfg.points,
                                       budget=cfg.oracle_budget)
    return (ex.min_windows, ex.max_windows) == (list(mins), list(maxs))


def _fmt(v) -> str:
    if v == INF:
        return "inf"
    return str(v)


def _curve_points(pair: XiCurvePair, g: int, which: str):
    values = pair.lower if which == "lower" else pair.upper
    return [(g * k, v) for k, v in enumerate(values, start=1)]


def write_report(cfg: RunConfig, report: AnalysisReport) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    curves = {f"curve_g{g}": (a.curve, g) for g, a in report.per_g.items()}
    curves["combined"] = (report.combined, 1)
    if report.tightened is not None:
        curves["combined_closed"] = (report.tightened, 1)
    for name, (pair, g) in sorted(curves.items()):
        write_csv(pair, out / f"{name}.csv")
        for which in ("lower", "upper"):
            write_gnuplot(_curve_points(pair, g, which), out / f"{name}_{which}.dat")

    lines = ["[run]", f"version={__version__}", f"config_hash={config_hash(cfg)}",
             f"model={cfg.model}", f"arrival={cfg.arrival}",
             f"granularities={','.join(map(str, cfg.granularities))}",
             f"points={cfg.points}", f"horizon={report.horizon}",
             f"closure={'on' if cfg.closure else 'off'}"]
    for g, ana in sorted(report.per_g.items()):
        ex = ana.exploration
        lines += ["", f"[g={g}]", f"points={ana.curve.N}",
                  f"lower={' '.join(map(_fmt, ana.curve.lower))}",
                  f"upper={' '.join(map(_fmt, ana.curve.upper))}",
                  f"stall={'yes' if ex.stall else 'no'}",
                  f"states={ex.states}", f"edges={ex.edges}", f"seconds={ex.seconds:.3f}"]
        if g in report.distances:
            lines.append(f"distance={_fmt(report.distances[g])}")
    lines += ["", "[combined]", f"lower={' '.join(map(_fmt, report.combined.lower))}",
              f"upper={' '.join(map(_fmt, report.combined.upper))}"]
    if report.tightened is not None:
        lines += ["", "[closed]", f"lower={' '.join(map(_fmt, report.tightened.lower))}",
                  f"upper={' '.join(map(_fmt, report.tightened.upper))}"]
    if report.closure_error:
        lines += ["", "[closed]", f"error={report.closure_error}"]
    if report.oracle_verdict:
        lines += ["", "[oracle]", f"verdict={report.oracle_verdict}"]
    (out / "summary.txt").write_text("\n".join(lines) + "\n")
    return out


def _config(ns) -> RunConfig:
    return RunConfig(model=ns.model, arrival=ns.arrival, granularities=ns.granularities,
                     points=ns.points, horizon=ns.horizon, out=ns.out,
                     oracle_check=getattr(ns, "oracle_check", False),
                     closure=not getattr(ns, "no_closure", False),
                     oracle_events=ns.oracle_events, oracle_budget=ns.oracle_budget,
                     jobs=getattr(ns, "jobs", 1))


def cmd_validate(cfg: RunConfig) -> int:
    try:
        load_inputs(cfg)
    except InputError as exc:
        for p in exc.args[0]:
            print(p, file=sys.stderr)
        return EXIT_INVALID
    print("ok")
    return EXIT_OK


def cmd_analyze(cfg: RunConfig) -> int:
    try:
        spec, arrival = load_inputs(cfg)
        report = analyze(cfg, spec, arrival)
    except InputError as exc:
        for p in exc.args[0]:
            print(p, file=sys.stderr)
        return EXIT_INVALID
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    status = EXIT_OK
    if cfg.oracle_check:
        try:
            ok = oracle_check(cfg, spec, arrival, report)
            report.oracle_verdict = "pass" if ok else "FAIL"
            if not ok:
                print("oracle mismatch at g=1", file=sys.stderr)
                status = EXIT_MISMATCH
        except BudgetExceeded as exc:
            report.oracle_verdict = f"skipped ({exc})"
            print(f"oracle check refused: {exc}", file=sys.stderr)
            status = EXIT_BUDGET
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INVALID
    out = write_report(cfg, report)
    for g, ana in sorted(report.per_g.items()):
        print(f"g={g}: lower={list(map(_fmt, ana.curve.lower))} upper={list(map(_fmt, ana.curve.upper))}"
              f" ({ana.exploration.seconds:.2f}s)")
    print(f"report written to {out}")
    return status


def cmd_oracle(cfg: RunConfig) -> int:
    try:
        spec, arrival = load_inputs(cfg)
    except InputError as exc:
        for p in exc.args[0]:
            print(p, file=sys.stderr)
        return EXIT_INVALID
    cfg.granularities = [1]
    cfg.closure = False
    try:
        report = analyze(cfg, spec, arrival)
        mins, maxs = oracle_output_windows(spec, arrival, cfg.oracle_events, report.horizon, cfg.points,
                                           budget=cfg.oracle_budget)
    except BudgetExceeded as exc:
        print(f"refused: instance exceeds the oracle budget ({exc})", file=sys.stderr)
        return EXIT_BUDGET
    ex = report.per_g[1].exploration
    print(f"{'K':>3} {'engine min':>10} {'oracle min':>10} {'engine max':>10} {'oracle max':>10}")
    for K in range(1, cfg.points + 1):
        row = (ex.min_windows[K - 1], mins[K - 1], ex.max_windows[K - 1], maxs[K - 1])
        print(f"{K:>3} " + " ".join(f"{'-' if v is None else v:>10}" for v in row))
    ok = (ex.min_windows, ex.max_windows) == (list(mins), list(maxs))
    print("pass" if ok else "FAIL")
    return EXIT_OK if ok else EXIT_MISMATCH


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="granrtc", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--model", required=True, help="M-TA model file, or 'wire' for a pass-through")
        p.add_argument("--arrival", required=True, help="input arrival curve file")
        p.add_argument("--granularities", type=_granularities, default=[1], help="e.g. 1,2,3,4")
        p.add_argument("--points", type=int, default=8, help="output curve length")
        p.add_argument("--horizon", type=int, default=None, help="explored time horizon")
        p.add_argument("--out", default="granrtc-out", help="output directory")
        p.add_argument("--oracle-events", type=int, default=12, help="oracle cap on input events")
        p.add_argument("--oracle-budget", type=int, default=2_000_000, help="oracle cap on run-tree nodes")

    common(sub.add_parser("validate", help="check that all inputs load and are well formed"))
    p = sub.add_parser("analyze", help="analyze at each granularity and combine")
    common(p)
    p.add_argument("--no-closure", action="store_true", help="skip the causality closure")
    p.add_argument("--oracle-check", action="store_true", help="cross-check g=1 with the oracle")
    p.add_argument("--jobs", type=int, default=1, help="analyses to run in parallel")
    common(sub.add_parser("oracle", help="compare the engine with the oracle at g=1"))
    return parser


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(name)s: %(message)s")
    cfg = _config(ns)
    return {"validate": cmd_validate, "analyze": cmd_analyze, "oracle": cmd_oracle}[ns.command](cfg)


if __name__ == "__main__":
    sys.exit(main())
