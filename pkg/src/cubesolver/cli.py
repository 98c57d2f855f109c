"""Command-line entry point: ``cubesolver <subcommand> ...``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from . import adi, bench, config, cube, mcts, oracle
from . import network as nn

log = logging.getLogger("cubesolver")


def _load_params(path):
    params, _, meta = nn.load_checkpoint(Path(path).read_bytes())
    return params, meta


def cmd_train(args, cfg: config.Config) -> int:
    if args.iterations is not None:
        cfg.adi.iterations = args.iterations
    if args.seed is not None:
        cfg.adi.seed = args.seed
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.ini").write_text(config.dump_config(cfg))

    def progress(stats: adi.IterationStats):
        if stats.iteration % args.log_every == 0:
            log.info("iter %d loss %.4f (value %.4f, policy %.4f) %.2fs",
                     stats.iteration, stats.loss, stats.value_loss, stats.policy_loss, stats.wall_time)

    result = adi.run_training(cfg.adi, cfg.network, out, resume=args.resume, progress=progress)
    print(result.checkpoint)
    return 0


def _search_config(args, cfg: config.Config) -> mcts.SearchConfig:
    search = dataclasses.replace(cfg.search)
    if args.time_limit is not None:
        search.time_limit = config.parse_duration(args.time_limit)
    if args.workers is not None:
        search.worker_count = args.workers
    if args.c is not None:
        search.exploration_c = args.c
    if args.nu is not None:
        search.virtual_loss_nu = args.nu
    if args.max_simulations is not None:
        search.max_simulations = args.max_simulations
    search.validate()
    return search


def cmd_solve(args, cfg: config.Config) -> int:
    spec = bench.BenchmarkSpec(
        variant=args.variant,
        scrambles=args.scrambles,
        checkpoint=args.checkpoint,
        search=_search_config(args, cfg),
        greedy_depth=args.greedy_depth,
        greedy_move_limit=args.move_limit,
        seed=args.seed or 0,
    )
    run = bench.run_benchmark(spec)
    bench.write_results(run.records, args.out, meta={k: v for k, v in run.to_json().items() if k != "records"})
    agg = run.aggregate
    print(f"{run.variant}: solved {agg['solved']}/{agg['cubes']}  median length {agg['median_length']}")
    return 0


def cmd_oracle(args, cfg: config.Config) -> int:
    if args.action == "build":
        table = oracle.build_distance_table(args.depth)
        oracle.save_table(table, args.out)
        print(json.dumps({"max_depth": table.max_depth, "counts": table.counts}))
        return 0
    table = oracle.load_table(args.table) if args.table else oracle.build_distance_table(5)
    records = []
    for i, moves in enumerate(cube.read_scramble_file(args.scrambles)):
        start = cube.apply_moves(cube.SOLVED, moves)
        sol = oracle.optimal_solve(start, args.cap, table)
        records.append({
            "index": i,
            "scramble": cube.format_moves(moves),
            "solved": sol is not None,
            "solution": cube.format_moves(sol or []),
            "solution_length": None if sol is None else len(sol),
        })
    bench.write_results(records, args.out)
    return 0


def cmd_scramble(args, cfg: config.Config) -> int:
    seqs = cube.random_scrambles(args.count, args.depth, args.seed or 0)
    cube.write_scramble_file(args.out, seqs, header=f"{args.count} scrambles, depth {args.depth}, seed {args.seed or 0}")
    return 0


def cmd_bench(args, cfg: config.Config) -> int:
    out = Path(args.out_dir or "bench_out")
    out.mkdir(parents=True, exist_ok=True)
    b = cfg.bench
    seed = b.seed if args.seed is None else args.seed
    params = None
    if any(v != "oracle" for v in b.variants):
        if not args.checkpoint or not Path(args.checkpoint).is_file():
            raise bench.MissingArtifactsError([f"checkpoint {args.checkpoint}"])
        params, _ = _load_params(args.checkpoint)
    table = oracle.build_distance_table(b.oracle_table_depth) if "oracle" in b.variants else None

    run_files = []
    for variant in b.variants:
        depths = b.greedy_scramble_depths if variant == "greedy" else b.depths
        for depth in depths:
            sfile = out / f"scrambles_d{depth}.txt"
            if not sfile.exists():
                cube.write_scramble_file(sfile, cube.random_scrambles(b.cubes, depth, seed + depth),
                                         header=f"depth {depth}, seed {seed + depth}")
            spec = bench.BenchmarkSpec(
                variant=variant, scrambles=str(sfile), checkpoint=args.checkpoint,
                search=cfg.search, greedy_move_limit=b.greedy_move_limit,
                oracle_table_depth=b.oracle_table_depth, oracle_cap=b.oracle_cap, seed=seed,
            )
            run = bench.run_benchmark(spec, params=params, table=table)
            path = out / f"run_{variant}_d{depth}.json"
            path.write_text(json.dumps(run.to_json(), indent=2))
            bench.write_records_csv(run.records, path.with_suffix(".csv"))
            run_files.append(path)
            agg = run.aggregate
            print(f"{variant:>10} depth {depth:>4}: solved {agg['solved']}/{agg['cubes']}"
                  f"  median length {agg['median_length']}  median time {agg['median_time']:.3f}s")
    for depth in sorted({int(p.stem.rsplit("_d", 1)[1]) for p in run_files}):
        runs = bench.load_runs(p for p in run_files if p.stem.endswith(f"_d{depth}"))
        bench.report(runs, out / f"report_d{depth}")
    return 0


def cmd_analyze(args, cfg: config.Config) -> int:
    sols = []
    for path in args.results:
        sols += bench.read_solutions(path)
    stats = bench.triplet_analysis(sols)
    payload = stats.to_json()
    Path(args.out).write_text(json.dumps(payload, indent=2))
    means = payload["class_means"]["global"]
    print(f"{stats.solutions} solutions, {stats.total_triplets} triplets; "
          f"mean frequency conjugation={means['conjugation']} other={means['other']}")
    if args.figure:
        from . import plotting
        plotting.triplet_distribution(stats, args.figure)
    return 0


def cmd_report(args, cfg: config.Config) -> int:
    runs = bench.load_runs(args.runs)
    files = bench.report(runs, args.out_dir or "report", figures=not args.no_figures)
    for name in sorted(files):
        print(files[name])
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cubesolver", description=__doc__)
    p.add_argument("--seed", type=int, default=None, help="global RNG seed override")
    p.add_argument("--config", default=None, help="config file or preset name (desk, paper)")
    p.add_argument("--out-dir", default=None, help="output directory for bench/report")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="run autodidactic iteration")
    t.add_argument("--config", dest="sub_config", default=None)
    t.add_argument("--out", required=True, help="checkpoint directory")
    t.add_argument("--resume", default=None, help="checkpoint to continue from")
    t.add_argument("--iterations", type=int, default=None)
    t.add_argument("--log-every", type=int, default=50)
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("solve", help="solve every scramble in a file")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--scrambles", required=True)
    s.add_argument("--time-limit", default=None, help="per cube, e.g. 60s or 5m")
    s.add_argument("--workers", type=int, default=None)
    s.add_argument("--c", type=float, default=None, help="exploration constant")
    s.add_argument("--nu", type=float, default=None, help="virtual loss")
    s.add_argument("--max-simulations", type=int, default=None)
    s.add_argument("--variant", choices=["mcts", "naive-mcts", "greedy"], default="mcts")
    s.add_argument("--greedy-depth", type=int, default=1)
    s.add_argument("--move-limit", type=int, default=10)
    s.add_argument("--out", required=True, help="results .json or .csv")
    s.set_defaults(func=cmd_solve)

    o = sub.add_parser("oracle", help="exact distances for shallow states")
    osub = o.add_subparsers(dest="action", required=True)
    ob = osub.add_parser("build")
    ob.add_argument("--depth", type=int, required=True)
    ob.add_argument("--out", required=True)
    os_ = osub.add_parser("solve")
    os_.add_argument("--table", default=None)
    os_.add_argument("--scrambles", required=True)
    os_.add_argument("--cap", type=int, default=8)
    os_.add_argument("--out", required=True)
    o.set_defaults(func=cmd_oracle)

    sc = sub.add_parser("scramble", help="write a seeded scramble file")
    sc.add_argument("--count", type=int, required=True)
    sc.add_argument("--depth", type=int, required=True)
    sc.add_argument("--out", required=True)
    sc.set_defaults(func=cmd_scramble)

    b = sub.add_parser("bench", help="run the configured benchmark campaign")
    b.add_argument("--checkpoint", default=None)
    b.set_defaults(func=cmd_bench)

    a = sub.add_parser("analyze", help="move-triplet analysis of solutions")
    a.add_argument("--results", nargs="+", required=True)
    a.add_argument("--out", required=True)
    a.add_argument("--figure", default=None, help="optional PNG of the two frequency distributions")
    a.set_defaults(func=cmd_analyze)

    r = sub.add_parser("report", help="aggregate run files into tables and figures")
    r.add_argument("--runs", nargs="+", required=True)
    r.add_argument("--no-figures", action="store_true")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config.load_config(getattr(args, "sub_config", None) or args.config)
        return args.func(args, cfg)
    except (bench.MissingArtifactsError, nn.CheckpointError, oracle.TableFormatError,
            cube.ParseError, ValueError, OSError) as exc:
        log.error("%s", exc)
        return 2


if __name__ == "__main__":
    sys.exit(main())
