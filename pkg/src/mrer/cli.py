"""Command-line entry point: ``mrer run | sweep | genmap | render``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import sim
from .config import ConfigError, load_config
from .grid import MapFormatError, dump_map
from .harness import report, sweep
from .harness.floorplan import GenerationError, generate_map
from .harness.render import LogFormatError, render_log
from .prediction import PredictionConfigError

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT = 0, 1, 2

log = logging.getLogger("mrer")


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mrer", description="Multi-robot exploration and relay simulator")
    p.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a single mission")
    r.add_argument("--config", help="flat key = value config file; flags override it")
    src = r.add_mutually_exclusive_group()
    src.add_argument("--map", help="map file")
    src.add_argument("--gen-seed", type=int, help="generate a floorplan with this seed")
    r.add_argument("--width", type=int)
    r.add_argument("--height", type=int)
    r.add_argument("--strategy", choices=["proid", "proid_safe", "periodic", "final_only"])
    r.add_argument("--n", type=int, dest="n_robots", help="number of robots")
    r.add_argument("--alpha", type=float)
    r.add_argument("--period", type=int)
    r.add_argument("--lambda", type=float, dest="weibull_lambda",
                   help="Weibull scale in ticks; enables failures")
    r.add_argument("--k", type=float, dest="weibull_k", help="Weibull shape; enables failures")
    r.add_argument("--no-failures", action="store_true", help="keep failures off even with --lambda/--k")
    r.add_argument("--predictor", choices=["null", "oracle", "heuristic"])
    r.add_argument("--seed", type=int)
    r.add_argument("--ticks", type=int)
    r.add_argument("--out", help="write the result summary (JSON) here")
    r.add_argument("--log", help="write the event log (JSON lines) here")
    r.add_argument("--coverage", help="write the per-tick coverage series (CSV) here")

    s = sub.add_parser("sweep", help="run a cross-product sweep")
    s.add_argument("--spec", required=True, help="sweep spec file")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out-dir", default="sweep_out")

    g = sub.add_parser("genmap", help="write a generated floorplan map file")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--width", type=int, default=60)
    g.add_argument("--height", type=int, default=40)
    g.add_argument("--out", help="output path (stdout if omitted)")

    v = sub.add_parser("render", help="emit text/SVG frames from an event log")
    v.add_argument("--log", required=True)
    v.add_argument("--every", type=int, default=10, help="keep every K-th tick")
    v.add_argument("--out-dir", default="frames")
    return p


def _cmd_run(args) -> int:
    overrides = {k: getattr(args, k) for k in
                 ("map", "gen_seed", "width", "height", "strategy", "n_robots", "alpha", "period",
                  "weibull_lambda", "weibull_k", "predictor", "seed", "ticks")}
    if (args.weibull_lambda is not None or args.weibull_k is not None) and not args.no_failures:
        overrides["failures_enabled"] = True
    if args.no_failures:
        overrides["failures_enabled"] = False
    cfg = load_config(args.config, **overrides)
    result = sim.run(cfg)
    summary = {
        "coverage_ratio": result.coverage_ratio,
        "relay_count": result.relay_count,
        "voluntary_relays": result.voluntary_relays,
        "handoff_count": result.handoff_count,
        "failure_count": result.failure_count,
        "ticks": result.ticks,
        "log_sha256": result.log_hash(),
        "config": cfg.to_dict(),
    }
    text = json.dumps(summary, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    if args.log:
        Path(args.log).write_text(result.event_log(), encoding="utf-8")
    if args.coverage:
        lines = ["tick,coverage"] + [f"{t},{c!r}" for t, c in enumerate(result.coverage_series)]
        Path(args.coverage).write_text("\n".join(lines) + "\n", encoding="utf-8")
    return EXIT_OK


def _cmd_sweep(args) -> int:
    spec = sweep.load_spec(args.spec)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    log.info("running %d missions", spec.size())
    rows = sweep.run_sweep(spec, workers=args.workers)
    sweep.write_csv(rows, out / "results.csv")
    ok = [r for r in rows if r.ok]
    if ok:
        table = report.format_table(rows)
        (out / "table.txt").write_text(table, encoding="utf-8")
        (out / "summary.csv").write_text(report.summary_csv(rows), encoding="utf-8")
        sys.stdout.write(table)
    failed = len(rows) - len(ok)
    if failed:
        log.warning("%d of %d runs failed", failed, len(rows))
    return EXIT_OK


def _cmd_genmap(args) -> int:
    text = dump_map(generate_map(args.seed, args.width, args.height))
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_render(args) -> int:
    if args.every < 1:
        raise ConfigError("--every must be >= 1")
    written = render_log(args.log, args.out_dir, args.every)
    log.info("wrote %d files to %s", len(written), args.out_dir)
    return EXIT_OK


COMMANDS = {"run": _cmd_run, "sweep": _cmd_sweep, "genmap": _cmd_genmap, "render": _cmd_render}


def main(argv: list[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, MapFormatError, GenerationError, PredictionConfigError,
            LogFormatError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except sim.InvariantError as exc:
        log.error("invariant breach: %s", exc)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
