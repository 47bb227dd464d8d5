"""Command line front end: run benchmarks, rebuild reports, serve the API."""

import argparse
import os
import sys

from . import bench
from .config import EngineConfig, load_config


def _engine_from(path: str | None) -> EngineConfig:
    if path is None:
        return EngineConfig()
    return load_config(path)


def cmd_run(args) -> int:
    cfg = bench.RunConfig(method=args.method, n_episodes=args.episodes,
                          seed_base=args.seed_base, max_steps=args.max_steps,
                          crumple_folds=args.folds,
                          crumple_intensity=args.intensity,
                          engine=_engine_from(args.config),
                          workers=args.workers)
    os.makedirs(args.out, exist_ok=True)
    records = bench.run_suite(cfg)
    for rec in records:
        name = f"episode_{rec.method}_{rec.seed}.json"
        bench.save_record(os.path.join(args.out, name), rec)
        flag = "ok" if rec.valid else "invalid"
        print(f"{name}: terminated={rec.terminated} "
              f"steps={rec.steps_used} [{flag}]")
    table = bench.summarize(bench.load_records_dir(args.out))
    bench.write_summary_csv(table, os.path.join(args.out, "summary.csv"))
    bench.write_histogram_csv(table, os.path.join(args.out, "histogram.csv"))
    print(f"wrote {len(records)} records, summary.csv and histogram.csv "
          f"to {args.out}")
    return 0


def cmd_report(args) -> int:
    records = bench.load_records_dir(args.records)
    if not records:
        print(f"no episode records under {args.records}", file=sys.stderr)
        return 1
    table = bench.summarize(records)
    bench.write_summary_csv(table, os.path.join(args.records, "summary.csv"))
    bench.write_histogram_csv(table, os.path.join(args.records,
                                                  "histogram.csv"))
    for row in table.rows:
        print(f"{row['method']}: episodes={row['n']} "
              f"mean_steps={row['mean_steps']:.2f} "
              f"success_rate={row['success_rate']:.2f}")
    print(f"rebuilt summary.csv and histogram.csv in {args.records}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(engine=_engine_from(args.config),
                     records_dir=args.records_dir)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flatbench",
                                description="fabric flattening benchmark")
    sub = p.add_subparsers(dest="command", required=True)

    defaults = bench.RunConfig()
    run = sub.add_parser("run", help="run a benchmark suite")
    run.add_argument("--method", required=True,
                     choices=list(bench.METHODS))
    run.add_argument("--episodes", type=int, default=defaults.n_episodes)
    run.add_argument("--seed-base", type=int, default=defaults.seed_base)
    run.add_argument("--max-steps", type=int, default=defaults.max_steps)
    run.add_argument("--folds", type=int, default=defaults.crumple_folds)
    run.add_argument("--intensity", type=float,
                     default=defaults.crumple_intensity)
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--config", default=None,
                     help="engine config JSON file")
    run.add_argument("--out", required=True, help="records directory")
    run.set_defaults(func=cmd_run)

    rep = sub.add_parser("report", help="rebuild tables from records")
    rep.add_argument("records", help="directory of episode JSON files")
    rep.set_defaults(func=cmd_report)

    srv = sub.add_parser("serve", help="serve the HTTP session API")
    srv.add_argument("--host", default="127.0.0.1")
    srv.add_argument("--port", type=int, default=8000)
    srv.add_argument("--config", default=None,
                     help="engine config JSON file")
    srv.add_argument("--records-dir", default="records")
    srv.set_defaults(func=cmd_serve)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
