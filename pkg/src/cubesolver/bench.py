"""Benchmark campaigns, move-triplet analysis and report files."""

from __future__ import annotations

import csv
import hashlib
import itertools
import json
import statistics
import time
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import cube
from . import mcts
from . import network as nn
from . import oracle
from .cube import Move

VARIANTS = ("mcts", "naive-mcts", "greedy", "oracle")


class MissingArtifactsError(FileNotFoundError):
    def __init__(self, missing: Sequence[str]):
        super().__init__("missing required artifacts: " + ", ".join(missing))
        self.missing = list(missing)


class ReportConflictError(ValueError):
    pass


@dataclass
class BenchmarkSpec:
    variant: str
    scrambles: str
    checkpoint: str | None = None
    search: mcts.SearchConfig = field(default_factory=mcts.SearchConfig)
    greedy_depth: int = 1
    greedy_move_limit: int = 10
    oracle_table_depth: int = 5
    oracle_cap: int = 8
    seed: int = 0

    def snapshot(self) -> dict:
        """Settings that influence this variant's results (paths excluded)."""
        drop = {"scrambles", "checkpoint"}
        if self.variant in ("mcts", "naive-mcts"):
            drop |= {"greedy_depth", "greedy_move_limit"}
        else:
            drop.add("search")
        if self.variant != "oracle":
            drop |= {"oracle_table_depth", "oracle_cap"}
        return {k: v for k, v in asdict(self).items() if k not in drop}


@dataclass
class BenchmarkRun:
    variant: str
    scramble_file: str
    scramble_digest: str
    config: dict
    seed: int
    records: list[dict]

    @property
    def aggregate(self) -> dict:
        return aggregate(self.records)

    def to_json(self) -> dict:
        return {
            "variant": self.variant,
            "scramble_file": self.scramble_file,
            "scramble_digest": self.scramble_digest,
            "config": self.config,
            "seed": self.seed,
            "aggregate": self.aggregate,
            "records": self.records,
        }

    @classmethod
    def from_json(cls, d: dict) -> "BenchmarkRun":
        return cls(d["variant"], d["scramble_file"], d["scramble_digest"], d["config"],
                   d["seed"], d["records"])


def _digest(scrambles: list[list[Move]]) -> str:
    text = "\n".join(cube.format_moves(s) for s in scrambles)
    return hashlib.sha256(text.encode()).hexdigest()[:16]


def solve_one(variant: str, start: cube.CubeState, spec: BenchmarkSpec, params=None, table=None):
    if variant in ("mcts", "naive-mcts"):
        res = mcts.solve(start, params, spec.search)
        if variant == "naive-mcts" and res.solved:
            res.solution = list(res.naive_path)
        return res
    if variant == "greedy":
        return mcts.greedy_solve(start, params, spec.greedy_depth, spec.greedy_move_limit)
    if variant == "oracle":
        t0 = time.perf_counter()
        sol = oracle.optimal_solve(start, spec.oracle_cap, table)
        return mcts.SolveResult(
            solved=sol is not None, solution=sol or [], naive_path=sol or [],
            nodes_expanded=0, simulations=0, wall_time=time.perf_counter() - t0,
        )
    raise ValueError(f"unknown solver variant {variant!r}")


def run_benchmark(spec: BenchmarkSpec, params: nn.NetworkParams | None = None,
                  table: oracle.DistanceTable | None = None) -> BenchmarkRun:
    """Solve every scramble in ``spec.scrambles`` with the chosen variant."""
    if spec.variant not in VARIANTS:
        raise ValueError(f"unknown solver variant {spec.variant!r}; choose from {VARIANTS}")
    missing = []
    if not Path(spec.scrambles).is_file():
        missing.append(f"scramble file {spec.scrambles}")
    needs_net = spec.variant != "oracle"
    if needs_net and params is None and (spec.checkpoint is None or not Path(spec.checkpoint).is_file()):
        missing.append(f"checkpoint {spec.checkpoint}")
    if missing:
        raise MissingArtifactsError(missing)
    if needs_net and params is None:
        params, _, _ = nn.load_checkpoint(Path(spec.checkpoint).read_bytes())
    if spec.variant == "oracle" and table is None:
        table = oracle.build_distance_table(spec.oracle_table_depth)

    scrambles = cube.read_scramble_file(spec.scrambles)
    snapshot = spec.snapshot()
    records = []
    for i, moves in enumerate(scrambles):
        start = cube.apply_moves(cube.SOLVED, moves)
        res = solve_one(spec.variant, start, spec, params, table)
        rec = res.to_record()
        rec["index"] = i
        rec["scramble"] = cube.format_moves(moves)
        rec["scramble_length"] = len(moves)
        if res.solved:
            rec["solution_length"] = len(res.solution)
        rec["replay_ok"] = bool(res.solved and cube.is_solved(cube.apply_moves(start, res.solution)))
        records.append(rec)
    return BenchmarkRun(spec.variant, str(spec.scrambles), _digest(scrambles), snapshot, spec.seed, records)


def aggregate(records: Sequence[dict]) -> dict:
    n = len(records)
    solved = [r for r in records if r["solved"]]
    lengths = [r["solution_length"] for r in solved]
    out = {
        "cubes": n,
        "solved": len(solved),
        "solve_rate": len(solved) / n if n else 0.0,
        "median_length": None,
        "iqr_length": None,
        "median_time": statistics.median(r["wall_time"] for r in records) if n else None,
        "mean_nodes_expanded": float(np.mean([r["nodes_expanded"] for r in records])) if n else None,
        "max_nodes_expanded": max((r["nodes_expanded"] for r in records), default=None),
        "all_replays_ok": all(r.get("replay_ok", True) for r in solved),
    }
    if lengths:
        q1, med, q3 = np.percentile(lengths, [25, 50, 75])
        out["median_length"] = float(med)
        out["iqr_length"] = float(q3 - q1)
    return out


# ---------------------------------------------------------------------------
# triplets
# ---------------------------------------------------------------------------

Triplet = tuple[Move, Move, Move]


def is_conjugation(t: Sequence[Move | int]) -> bool:
    """a b a^-1 with no condition on b."""
    return int(t[2]) == int(t[0]) ^ 1


@dataclass
class TripletStats:
    counts: dict[Triplet, int]
    # Mean over solutions of each triplet's share of that solution's windows.
    per_solution_frequency: dict[Triplet, float]
    total_triplets: int
    solutions: int

    def conjugation(self, t: Triplet) -> bool:
        return is_conjugation(t)

    def classes(self) -> dict[str, list[Triplet]]:
        conj = [t for t in self.counts if is_conjugation(t)]
        other = [t for t in self.counts if not is_conjugation(t)]
        return {"conjugation": conj, "other": other}

    def global_frequency(self, t: Triplet) -> float:
        return self.counts[t] / self.total_triplets if self.total_triplets else 0.0

    def class_means(self, normalization: str = "global") -> dict[str, float | None]:
        """Mean frequency of the observed triplets in each class."""
        out = {}
        for name, members in self.classes().items():
            if not members:
                out[name] = None
                continue
            if normalization == "global":
                vals = [self.global_frequency(t) for t in members]
            elif normalization == "count":
                vals = [self.counts[t] for t in members]
            else:
                vals = [self.per_solution_frequency[t] for t in members]
            out[name] = float(np.mean(vals))
        return out

    def top(self, n: int = 14) -> list[tuple[str, int, bool]]:
        ranked = sorted(self.counts.items(), key=lambda kv: (-kv[1], [int(m) for m in kv[0]]))
        return [(cube.format_moves(t), c, is_conjugation(t)) for t, c in ranked[:n]]

    def to_json(self) -> dict:
        rows = [
            {
                "triplet": cube.format_moves(t),
                "conjugation": is_conjugation(t),
                "count": c,
                "global_frequency": self.global_frequency(t),
                "per_solution_frequency": self.per_solution_frequency[t],
            }
            for t, c in sorted(self.counts.items(), key=lambda kv: (-kv[1], [int(m) for m in kv[0]]))
        ]
        return {
            "solutions": self.solutions,
            "total_triplets": self.total_triplets,
            "class_means": {
                "count": self.class_means("count"),
                "global": self.class_means("global"),
                "per_solution": self.class_means("per_solution"),
            },
            "top": [{"triplet": t, "count": c, "conjugation": k} for t, c, k in self.top()],
            "triplets": rows,
        }


def triplet_analysis(solutions: Iterable[Sequence[Move | int]]) -> TripletStats:
    counts: Counter = Counter()
    share: Counter = Counter()
    n_solutions = 0
    for sol in solutions:
        sol = [Move(m) for m in sol]
        n_solutions += 1
        windows = [tuple(sol[i:i + 3]) for i in range(len(sol) - 2)]
        if not windows:
            continue
        local = Counter(windows)
        counts.update(local)
        for t, c in local.items():
            share[t] += c / len(windows)
    total = sum(counts.values())
    per_solution = {t: share[t] / n_solutions for t in counts} if n_solutions else {}
    return TripletStats(dict(counts), per_solution, total, n_solutions)


def all_triplets() -> list[Triplet]:
    return list(itertools.product(cube.MOVES, repeat=3))


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------

RECORD_FIELDS = [
    "index", "scramble", "scramble_length", "solved", "solution", "solution_length",
    "naive_path", "naive_length", "nodes_expanded", "simulations", "wall_time", "replay_ok",
]


def write_records_csv(records: Sequence[dict], path) -> None:
    extra = sorted({k for r in records for k in r} - set(RECORD_FIELDS))
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RECORD_FIELDS + extra)
        writer.writeheader()
        for r in records:
            writer.writerow(r)


def write_results(records: Sequence[dict], path, meta: dict | None = None) -> None:
    """JSON if the suffix is .json, CSV otherwise; fields match SolveResult."""
    path = Path(path)
    if path.suffix == ".json":
        path.write_text(json.dumps({**(meta or {}), "records": list(records)}, indent=2))
    else:
        write_records_csv(records, path)


def read_solutions(path) -> list[list[Move]]:
    """Solved solution strings from a results/run JSON or CSV file."""
    path = Path(path)
    if path.suffix == ".json":
        records = json.loads(path.read_text())["records"]
    else:
        with open(path, newline="") as fh:
            records = list(csv.DictReader(fh))
    out = []
    for r in records:
        if str(r["solved"]).lower() in ("true", "1"):
            out.append(cube.parse_moves(r["solution"]))
    return out


def length_histogram(records: Sequence[dict]) -> dict[int, int]:
    return dict(sorted(Counter(r["solution_length"] for r in records if r["solved"]).items()))


def solve_rate_curve(records: Sequence[dict]) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative fraction of all cubes solved within each elapsed time."""
    n = len(records)
    times = np.sort([r["wall_time"] for r in records if r["solved"]])
    if n == 0:
        return np.zeros(0), np.zeros(0)
    return times, np.arange(1, len(times) + 1) / n


def paired_table(a: BenchmarkRun, b: BenchmarkRun) -> list[dict]:
    rows = []
    for ra, rb in zip(a.records, b.records):
        la = ra["solution_length"] if ra["solved"] else None
        lb = rb["solution_length"] if rb["solved"] else None
        rows.append({
            "index": ra["index"],
            "scramble": ra["scramble"],
            f"{a.variant}_length": la,
            f"{b.variant}_length": lb,
            "delta": (lb - la) if la is not None and lb is not None else None,
        })
    return rows


def _check_runs(runs: Sequence[BenchmarkRun]) -> None:
    if not runs:
        raise ValueError("report needs at least one run")
    by_variant: dict[str, dict] = {}
    for run in runs:
        prev = by_variant.setdefault(run.variant, run.config)
        if prev != run.config:
            raise ReportConflictError(f"runs of variant {run.variant!r} have different config snapshots")


def report(runs: Sequence[BenchmarkRun], out_dir, figures: bool = True) -> dict[str, Path]:
    """Write aggregates, plot series, paired tables and figures into ``out_dir``."""
    _check_runs(runs)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files: dict[str, Path] = {}

    summary = [{"variant": r.variant, "scramble_file": r.scramble_file, **r.aggregate} for r in runs]
    files["summary.json"] = out / "summary.json"
    files["summary.json"].write_text(json.dumps(summary, indent=2))
    files["summary.csv"] = out / "summary.csv"
    with open(files["summary.csv"], "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(summary[0]))
        writer.writeheader()
        writer.writerows(summary)

    hist_rows, curve_rows = [], []
    for run in runs:
        for length, count in length_histogram(run.records).items():
            hist_rows.append({"variant": run.variant, "length": length, "count": count})
        t, rate = solve_rate_curve(run.records)
        curve_rows += [{"variant": run.variant, "time": float(a), "solve_rate": float(b)} for a, b in zip(t, rate)]
    files["length_histogram.csv"] = out / "length_histogram.csv"
    _write_rows(files["length_histogram.csv"], hist_rows, ["variant", "length", "count"])
    files["solve_rate_vs_time.csv"] = out / "solve_rate_vs_time.csv"
    _write_rows(files["solve_rate_vs_time.csv"], curve_rows, ["variant", "time", "solve_rate"])

    for a, b in itertools.combinations(runs, 2):
        if a.scramble_digest != b.scramble_digest:
            continue
        name = f"paired_{a.variant}_vs_{b.variant}.csv"
        rows = paired_table(a, b)
        _write_rows(out / name, rows, list(rows[0]) if rows else ["index"])
        files[name] = out / name

    triplets = {}
    for run in runs:
        sols = [cube.parse_moves(r["solution"]) for r in run.records if r["solved"]]
        stats = triplet_analysis(sols)
        triplets[run.variant] = stats
        name = f"triplets_{run.variant}.json"
        (out / name).write_text(json.dumps(stats.to_json(), indent=2))
        files[name] = out / name

    if figures:
        from . import plotting
        files.update(plotting.render_report_figures(runs, triplets, out))
    return files


def _write_rows(path, rows, fields) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields)
        writer.writeheader()
        writer.writerows(rows)


def load_runs(paths: Iterable) -> list[BenchmarkRun]:
    return [BenchmarkRun.from_json(json.loads(Path(p).read_text())) for p in paths]
