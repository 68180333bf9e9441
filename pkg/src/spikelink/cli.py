"""Command line entry point: ``spikelink run | bench | demo``.

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""
from __future__ import annotations

import argparse
import configparser
import re
import sys
from importlib import resources

from . import bench
from .config import load_config
from .errors import ConfigError, SpikelinkError, StageFailure, UnknownKey, UnknownStageKind, WidthMismatch
from .errors import CycleError, DanglingConnection, PortMismatch
from .robosim import RobotWorld
from .runtime import build_graph, run

__all__ = ["main", "parse_durations", "parse_numbers"]

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3
_CONFIG_ERRORS = (ConfigError, UnknownKey, UnknownStageKind, DanglingConnection, PortMismatch, CycleError,
                  WidthMismatch)
_UNITS = {"s": 1.0, "ms": 1e-3, "us": 1e-6}


def parse_durations(text: str) -> list[float]:
    """``"10,20,50ms"`` -> ``[0.01, 0.02, 0.05]``; a unit on the last item applies to unitless items."""
    items = [t.strip() for t in str(text).split(",") if t.strip()]
    if not items:
        raise argparse.ArgumentTypeError("empty duration list")
    pat = re.compile(r"^([0-9.eE+-]+)\s*(s|ms|us)?$")
    parsed = []
    for it in items:
        m = pat.match(it)
        if not m:
            raise argparse.ArgumentTypeError(f"bad duration {it!r}")
        parsed.append((float(m.group(1)), m.group(2)))
    default_unit = parsed[-1][1] or "s"
    return [v * _UNITS[u or default_unit] for v, u in parsed]


def parse_numbers(text: str, typ=float) -> list:
    try:
        return [typ(float(t)) if typ is int else typ(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad number list {text!r}") from None


def _bench_defaults() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    cp.read_string((resources.files("spikelink") / "data" / "bench.cfg").read_text())
    return cp


def _build_parser() -> argparse.ArgumentParser:
    d = _bench_defaults()
    dflt = d["defaults"]
    p = argparse.ArgumentParser(prog="spikelink", description="Spike/continuous co-simulation pipelines.")
    sub = p.add_subparsers(dest="command", required=True)

    def add_overrides(sp, config=True):
        if config:
            sp.add_argument("--config", required=True, help="pipeline INI file")
        sp.add_argument("--t-sim", type=float, help="simulated seconds")
        sp.add_argument("--dt", type=lambda s: parse_durations(s)[0], help="tick length, e.g. 50ms")
        sp.add_argument("--mode", choices=("deterministic", "realtime"))
        sp.add_argument("--seed", type=int)
        sp.add_argument("--workers", type=int)
        sp.add_argument("--trace", help="write the robot pose trace CSV here")
        sp.add_argument("--transcript", help="write the spike transcript CSV here")

    add_overrides(sub.add_parser("run", help="build and run a pipeline"))

    demo = sub.add_parser("demo", help="shipped demos")
    demo.add_argument("name", choices=("braitenberg",))
    add_overrides(demo, config=False)

    b = sub.add_parser("bench", help="performance measurements (CSV)")
    bsub = b.add_subparsers(dest="bench", required=True)

    def common(sp, encoder=True):
        sp.add_argument("--t-sim", type=float, default=dflt.getfloat("t_sim"))
        sp.add_argument("--trials", type=int, default=dflt.getint("trials"))
        sp.add_argument("--out", help="CSV output path")
        if encoder:
            sp.add_argument("--encoder", default="regular", choices=("regular", "rate", "poisson", "nef"))
            sp.add_argument("--dt", type=lambda s: parse_durations(s)[0], default=dflt.getfloat("delta_t"))

    sp = bsub.add_parser("rtf")
    common(sp)
    sp.add_argument("--n", type=int, default=d["bandwidth"].getint("n_neurons"))
    sp = bsub.add_parser("limit")
    common(sp)
    sp.add_argument("--lo", type=int, default=d["limit"].getint("lo"))
    sp.add_argument("--hi", type=int, default=d["limit"].getint("hi"))
    sp = bsub.add_parser("bandwidth")
    common(sp)
    sp.add_argument("--n", type=int, default=d["bandwidth"].getint("n_neurons"))
    sp.add_argument("--rates", type=parse_numbers, default=parse_numbers(d["bandwidth"]["rates"]))
    sp = bsub.add_parser("latency")
    common(sp, encoder=False)
    sp.add_argument("--hops", type=int, default=d["latency"].getint("hops"))
    sp.add_argument("--dt", type=parse_durations, default=parse_numbers(d["latency"]["delta_ts"]))
    sp.add_argument("--mode", choices=("deterministic", "realtime"), default="deterministic")
    sp = bsub.add_parser("overhead")
    common(sp)
    sp.add_argument("--dts", type=parse_durations, default=parse_numbers(d["overhead"]["delta_ts"]))
    sp.add_argument("--counts", type=lambda s: parse_numbers(s, int),
                    default=parse_numbers(d["overhead"]["counts"], int))
    return p


def _print_table(records, out=sys.stdout):
    cols = ("scenario", "encoder", "n_neurons", "rate_hz", "delta_t_s", "trial", "rtf", "latency_s", "spikes")
    print("  ".join(f"{c:>10}" for c in cols), file=out)
    for r in records:
        vals = []
        for c in cols:
            v = getattr(r, c)
            vals.append(f"{v:>10.4g}" if isinstance(v, float) else f"{str(v):>10}")
        print("  ".join(vals), file=out)


def _cmd_run(args, doc) -> int:
    doc = doc.with_globals(t_sim=args.t_sim, delta_t=args.dt, mode=args.mode, seed=args.seed,
                           workers=args.workers)
    try:
        graph = build_graph(doc)
    except (SpikelinkError, ValueError, OSError) as exc:
        if isinstance(exc, _CONFIG_ERRORS):
            raise
        raise ConfigError(f"cannot build pipeline: {exc}") from exc
    g = doc.globals
    try:
        rep = run(graph, g["t_sim"], g["mode"], workers=g["workers"], transcript=bool(args.transcript))
    finally:
        robots = [s.world for s in graph.stages.values() if isinstance(getattr(s, "world", None), RobotWorld)]
        if args.trace and robots:
            robots[0].write_trace(args.trace)
    if args.transcript:
        rep.write_transcript(args.transcript)
    sys.stdout.write(rep.csv_row())
    for w in robots:
        print(f"collisions={w.collisions} path_length_m={w.path_length:.3f}")
    return EXIT_OK


def _cmd_bench(args) -> int:
    d = _bench_defaults()
    rate_range = (d["defaults"].getfloat("v_min"), d["defaults"].getfloat("v_max"))
    kind = args.bench
    if kind == "rtf":
        doc = bench.scalability_config(args.encoder, args.n, delta_t=args.dt, rate_range=rate_range)
        recs = bench.measure_rtf(doc, args.t_sim, args.trials, encoder=args.encoder)
        table = recs[-1:]
    elif kind == "limit":
        def runner(n):
            doc = bench.scalability_config(args.encoder, n, delta_t=args.dt, rate_range=rate_range)
            return bench.measure_rtf(doc, args.t_sim, args.trials, warmup=False)[-1].rtf

        res = bench.find_realtime_limit(args.encoder, (args.lo, args.hi), args.t_sim,
                                        rel_window=d["limit"].getfloat("rel_window"), runner=runner)
        rtf_at = dict(res.probes)[res.n_limit]
        recs = [bench.BenchRecord("limit", args.encoder, res.n_limit, float("nan"), args.dt, "mean", 0.0,
                                  args.t_sim / rtf_at, args.t_sim)]
        table = recs
        print(f"n_limit={res.n_limit} probes={res.n_probes} bracket=[{res.lo}, {res.hi}]")
    elif kind == "bandwidth":
        recs = bench.measure_bandwidth(args.n, args.rates, args.t_sim, trials=args.trials, delta_t=args.dt,
                                       encoder=bench.ENCODER_ALIASES.get(args.encoder, args.encoder))
        table = recs
    elif kind == "latency":
        res = bench.measure_latency(args.dt, args.hops, mode=args.mode, trials=args.trials)
        recs = table = res.records
        print(f"slope={res.slope:.6g} intercept={res.intercept:.6g} r2={res.r_squared:.6g}")
    else:
        res = bench.sweep_overhead(args.dts, args.counts, args.encoder, args.t_sim, args.trials)
        recs = table = res.records
        print("borders: " + ", ".join(f"{dt * 1e3:g}ms={n}" for dt, n in res.borders.items())
              + f" monotone={res.monotone}")
    _print_table(table)
    if args.out:
        bench.write_records_csv(args.out, recs)
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "bench":
            return _cmd_bench(args)
        if args.command == "demo":
            path = resources.files("spikelink") / "data" / f"{args.name}.cfg"
        else:
            path = args.config
        try:
            doc = load_config(path)
        except OSError as exc:
            print(f"error: cannot read config: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        return _cmd_run(args, doc)
    except _CONFIG_ERRORS as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageFailure as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except SpikelinkError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
